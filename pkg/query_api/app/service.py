"""QueryAPI 서비스 레이어(QueryAPI service layer)."""
from __future__ import annotations

import asyncio
from typing import Optional

from bulk.app.models import ThermoParams
from bulk.app.service import pressure_bulk, susceptibility_bulk
from common_lib.cache import EigenCache, get_eigen_cache
from common_lib.logger import get_logger
from finite_gas.app.models import FugacityCompact, SusceptibilityRecord
from finite_gas.app.service import build_contour, pressure_contour, pressure_eigsum, susceptibility_finite
from harness.app.checks import verify_suite
from harness.app.models import VerifyReport
from spectrum.app.models import BoxGrid
from spectrum.app.service import SpectrumProvider

from .models import ChiRequest, ChiResponse, PointRequest, PressureRequest, PressureResponse, PressureRow, VerifyRequest

logger = get_logger(__name__)


def _params(request: PointRequest) -> list[ThermoParams]:
    return [ThermoParams(beta=request.beta, omega=request.omega, eps=request.eps, z=z) for z in request.z]


def _provider(request: PointRequest, cache: Optional[EigenCache]) -> SpectrumProvider:
    return SpectrumProvider(BoxGrid(L=request.L, n=request.n, dim=3), request.n3max, cache)


def pressure_table(request: PressureRequest, cache: Optional[EigenCache] = None) -> PressureResponse:
    """압력 표 계산(Pressure at every requested fugacity)."""

    rows: list[PressureRow] = []
    if request.source == "bulk":
        for p in _params(request):
            result = pressure_bulk(p)
            rows.append(PressureRow(z=p.z, P=result.value, method="landau_sum", error_estimate=result.tail_bound))
        return PressureResponse(source="bulk", rows=rows)

    spec = _provider(request, cache).spectrum(request.omega, beta=request.beta)
    contour = None
    if request.method == "contour":
        K = FugacityCompact.from_values(request.z, beta=request.beta, omega=request.omega, eps=request.eps)
        contour = build_contour(K, request.beta, request.omega, spec)
    for p in _params(request):
        value = pressure_eigsum(spec, p) if contour is None else pressure_contour(spec, p, contour)
        rows.append(PressureRow(z=p.z, P=value, method=request.method, error_estimate=spec.tail_estimate * abs(value)))
    logger.info("유한 부피 압력(Finite-volume pressure): L=%s, %d rows, method=%s", request.L, len(rows), request.method)
    return PressureResponse(source="finite", L=request.L, rows=rows)


def chi_table(request: ChiRequest, cache: Optional[EigenCache] = None) -> ChiResponse:
    """감수율 표 계산(Susceptibilities for every fugacity and order)."""

    provider = _provider(request, cache) if request.source == "finite" else None
    records: list[SusceptibilityRecord] = []
    for p in _params(request):
        for N in request.orders:
            if provider is None:
                result = susceptibility_bulk(p, N, request.method or "analytic")
                L = float("inf")
            else:
                result = susceptibility_finite(provider, p, N, request.method or "eig_fd")
                L = request.L
            records.append(SusceptibilityRecord.from_result(L, p, result))
    return ChiResponse(source=request.source, records=records)


class QueryService:
    """쿼리 처리 서비스(Runs the blocking numerics off the event loop)."""

    def __init__(self, cache: Optional[EigenCache] = None) -> None:
        self._cache = cache or get_eigen_cache()

    async def pressure(self, request: PressureRequest) -> PressureResponse:
        return await asyncio.to_thread(pressure_table, request, self._cache)

    async def chi(self, request: ChiRequest) -> ChiResponse:
        return await asyncio.to_thread(chi_table, request, self._cache)

    async def verify(self, request: VerifyRequest) -> VerifyReport:
        report = await asyncio.to_thread(verify_suite, request.checks, None, None, request.seed)
        logger.info("검증 요청 완료(Verify request done): %s", report.summary())
        return report
