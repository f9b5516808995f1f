"""열역학 극한 패키지(Thermodynamic-limit pressure and susceptibilities)."""
