"""수렴 연구와 검증 하네스 패키지(Convergence studies and verification harness)."""
