"""QueryAPI FastAPI 애플리케이션(QueryAPI FastAPI application)."""
from __future__ import annotations

import uuid
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.middleware.base import BaseHTTPMiddleware

from common_lib.config import get_settings
from common_lib.errors import AppException
from common_lib.logger import get_logger
from common_lib.observability import run_id_ctx
from harness.app.models import VerifyReport

from .models import ChiRequest, ChiResponse, PressureRequest, PressureResponse, VerifyRequest
from .service import QueryService

logger = get_logger(__name__)

app = FastAPI(title="QueryAPI", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)

service = QueryService()


class RequestIDMiddleware(BaseHTTPMiddleware):
    """요청 ID 추적 미들웨어(Request ID becomes the logging run_id)."""

    async def dispatch(self, request: Request, call_next: Any) -> Any:
        request_id = request.headers.get("X-Request-ID", uuid.uuid4().hex[:12])
        token = run_id_ctx.set(request_id)
        try:
            response = await call_next(request)
            response.headers["X-Request-ID"] = request_id
            return response
        finally:
            run_id_ctx.reset(token)


app.add_middleware(RequestIDMiddleware)


@app.exception_handler(AppException)
async def app_exception_handler(request: Request, exc: AppException) -> JSONResponse:
    """Handle application exceptions with standardized error format."""
    logger.warning(
        "AppException: %s (code=%s)",
        exc.message,
        exc.error_code,
        extra={"details": exc.details},
    )
    return JSONResponse(status_code=exc.status_code, content=exc.to_dict())


@app.exception_handler(Exception)
async def generic_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """Catch-all handler for unexpected errors."""
    logger.error(
        "Unexpected error: %s",
        str(exc),
        exc_info=exc,
        extra={"path": request.url.path, "method": request.method},
    )
    return JSONResponse(
        status_code=500,
        content={"error": {"code": "INTERNAL_ERROR", "message": "Unexpected server error"}},
    )


@app.post("/api/v1/pressure", response_model=PressureResponse, tags=["pressure"])
async def pressure(body: PressureRequest) -> PressureResponse:
    """압력 계산(Bulk or finite-volume pressure at the requested fugacities)."""

    return await service.pressure(body)


@app.post("/api/v1/chi", response_model=ChiResponse, tags=["chi"])
async def chi(body: ChiRequest) -> ChiResponse:
    """일반화 감수율(Generalized susceptibilities for the requested orders)."""

    return await service.chi(body)


@app.post("/api/v1/verify", response_model=VerifyReport, tags=["verify"])
async def verify(body: VerifyRequest) -> VerifyReport:
    """검증 스위트 실행(Run named verification checks; failures are reported, not raised)."""

    return await service.verify(body)


@app.get("/health", tags=["health"])
async def health_check() -> dict[str, str]:
    """헬스체크 엔드포인트(Health check endpoint)."""

    return {"status": "ok", "app": get_settings().app_name}
