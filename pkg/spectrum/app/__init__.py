"""자기 슈뢰딩거 연산자 스펙트럼 패키지(Magnetic Schrodinger spectra)."""
