"""보스/페르미 특수함수 패키지(Bose/Fermi special functions)."""
from .models import PolyArg, PolyValue, Statistics
from .service import (
    f_derivative,
    f_integral,
    f_series,
    gamma_value,
    ladder_value,
    polylog,
    series_majorant,
)

__all__ = [
    "PolyArg",
    "PolyValue",
    "Statistics",
    "f_derivative",
    "f_integral",
    "f_series",
    "gamma_value",
    "ladder_value",
    "polylog",
    "series_majorant",
]
