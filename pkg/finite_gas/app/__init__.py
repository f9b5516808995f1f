"""유한 부피 자기 기체(Finite-volume magnetic gas: pressure, contour and susceptibilities)."""
