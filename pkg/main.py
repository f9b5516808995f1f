"""자기 양자 기체 실험실 CLI(Magnetic quantum gas lab command line).

Exit codes: 0 success, 1 check failure, 2 config/input/domain error,
3 numerical error.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
import uuid
from pathlib import Path
from typing import Any, Iterable, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from common_lib.config import get_settings, load_environment
from common_lib.errors import AppException, CheckFailure, InvalidInputError
from common_lib.logger import get_logger, setup_logging
from common_lib.observability import run_id_ctx
from finite_gas.app.repository import SusceptibilityRepository
from harness.app.config import load_config, render_reference
from harness.app.models import StudyResult, parse_complex
from harness.app.repository import ResultRepository
from kernel_lab.app.expansion import g_expansion_trace, semigroup_expansion
from kernel_lab.app.repository import ReportRepository
from query_api.app.models import ChiRequest, PressureRequest
from query_api.app.service import chi_table, pressure_table
from spectrum.app.models import BoxGrid
from study_orchestrator import StudyOrchestrator

# Load .env file at startup
load_dotenv()

logger = get_logger(__name__)


def _add_point_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--source", choices=["bulk", "finite"], default="bulk", help="벌크/유한 부피(Bulk or finite box)")
    parser.add_argument("--L", type=float, default=8.0, help="상자 크기(Box size)")
    parser.add_argument("--n", type=int, default=16, help="축당 격자점(Interior points per side)")
    parser.add_argument("--n3max", type=int, default=None, help="종방향 준위 수(Longitudinal levels)")
    parser.add_argument("--beta", type=float, default=1.0, help="역온도(Inverse temperature)")
    parser.add_argument("--omega", type=float, default=1.0, help="자기장(Field)")
    parser.add_argument("--eps", default="bose", help="통계 bose|fermi(Statistics)")
    parser.add_argument("--z", nargs="+", default=["0.5"], help="퓨가시티(Fugacities, e.g. 0.5 0.3j)")


def parse_args(argv: Optional[Iterable[str]] = None) -> argparse.Namespace:
    """커맨드라인 인자 파싱(Parse CLI arguments)."""

    parser = argparse.ArgumentParser(description="자기 양자 기체 실험실(Magnetic quantum gas lab)")
    parser.add_argument("--config", default=None, help="연구 설정 TOML/JSON(Study config)")
    parser.add_argument("--out", default=None, help="출력 디렉터리(Output directory)")
    parser.add_argument("--format", choices=["csv", "json"], default=None, help="출력 형식(Output format)")
    parser.add_argument("--threads", type=int, default=None, help="작업 스레드 수(Worker threads)")
    parser.add_argument("--seed", type=int, default=None, help="난수 시드(Random seed)")
    parser.add_argument("--log-format", choices=["text", "json"], default=None, help="로그 형식(Log format)")
    parser.add_argument("--log-level", default=None, help="로그 레벨(Log level)")
    sub = parser.add_subparsers(dest="command", required=True)

    pressure = sub.add_parser("pressure", help="압력 표(Pressure table)")
    _add_point_args(pressure)
    pressure.add_argument("--method", choices=["eigsum", "contour"], default="eigsum", help="유한 부피 경로(Finite route)")

    chi = sub.add_parser("chi", help="일반화 감수율(Generalized susceptibilities)")
    _add_point_args(chi)
    chi.add_argument("--N", type=int, nargs="+", default=[1], help="차수(Orders)")
    chi.add_argument("--method", default=None, help="eig_fd|contour_fd|hellmann 또는 analytic|finite_diff")

    sub.add_parser("converge", help="수렴 연구(Convergence study)")
    sub.add_parser("bounds", help="유계성 스캔(Uniform-bound scan)")

    verify = sub.add_parser("verify", help="검증 스위트(Verification suite)")
    verify.add_argument("checks", nargs="*", default=[], help="검사 이름 또는 all(Check names or 'all')")

    kernels = sub.add_parser("kernels", help="커널 전개 보고서(Kernel expansion reports)")
    kernels.add_argument("--L", type=float, default=6.0)
    kernels.add_argument("--n", type=int, default=24)
    kernels.add_argument("--beta", type=float, default=1.0)
    kernels.add_argument("--omega0", type=float, default=1.0)
    kernels.add_argument("--N", type=int, nargs="+", default=[1, 2])
    kernels.add_argument("--dw", type=float, nargs="+", default=[0.01, 0.02, 0.04, 0.1])
    kernels.add_argument("--xi", default="0.65", help="레졸벤트 변수(Resolvent variable xi)")
    kernels.add_argument("--zk", default="0.5", help="g 커널 퓨가시티(Fugacity of the g kernel)")
    kernels.add_argument("--kind", choices=["semigroup", "g_trace", "both"], default="both")

    sub.add_parser("config-doc", help="설정 참조 문서 생성(Render the configuration reference)")
    return parser.parse_args(argv)


def _emit(payload: Any) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False, default=str))


def _point_fields(args: argparse.Namespace) -> dict[str, Any]:
    return dict(
        source=args.source, beta=args.beta, omega=args.omega, eps=args.eps, z=list(args.z), L=args.L, n=args.n, n3max=args.n3max
    )


def cmd_pressure(args: argparse.Namespace) -> int:
    response = pressure_table(PressureRequest(method=args.method, **_point_fields(args)))
    for row in response.rows:
        logger.info("P(z=%s) = %s [%s]", row.z, row.P, row.method)
    _emit(response.model_dump(mode="json"))
    return 0


def cmd_chi(args: argparse.Namespace) -> int:
    response = chi_table(ChiRequest(orders=args.N, method=args.method, **_point_fields(args)))
    if args.out:
        if (args.format or "csv") == "csv":
            SusceptibilityRepository(args.out).save(response.records, f"chi_{args.source}")
        else:
            path = Path(args.out) / f"chi_{args.source}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(response.model_dump_json(indent=2), encoding="utf-8")
    _emit(response.model_dump(mode="json"))
    return 0


def _study_config(args: argparse.Namespace):
    overrides = {"threads": args.threads, "seed": args.seed, "out_dir": args.out, "format": args.format}
    return load_config(args.config, overrides)


def _finish_study(result: StudyResult, cfg, name: str) -> int:
    if cfg.out_dir:
        ResultRepository(cfg.out_dir).save_result(result, name, cfg.format)
    _emit(result.model_dump(mode="json"))
    if not result.passed:
        raise CheckFailure(name, {"failed_criteria": [key for key, ok in result.criteria.items() if not ok]})
    return 0


async def cmd_converge(args: argparse.Namespace) -> int:
    cfg = _study_config(args)
    result = await StudyOrchestrator(cfg.threads).converge(cfg)
    return _finish_study(result, cfg, "converge")


async def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = _study_config(args)
    result = await StudyOrchestrator(cfg.threads).bounds(cfg)
    return _finish_study(result, cfg, "bounds")


async def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _study_config(args)
    report = await StudyOrchestrator(cfg.threads).verify(args.checks, cfg, cfg.seed)
    if cfg.out_dir:
        ResultRepository(cfg.out_dir).save_verify(report, "verify", cfg.format)
    print(report.summary(), file=sys.stderr)
    _emit(report.model_dump(mode="json"))
    if not report.passed:
        raise CheckFailure("verify", {c.name: c.metrics for c in report.checks if not c.passed})
    return 0


def cmd_kernels(args: argparse.Namespace) -> int:
    grid = BoxGrid(L=args.L, n=args.n)
    xi, z = parse_complex(args.xi), parse_complex(args.zk)
    reports = {}
    for N in args.N:
        if args.kind in ("semigroup", "both"):
            reports[f"semigroup_N{N}"] = semigroup_expansion(grid, args.beta, args.omega0, N, args.dw)
        if args.kind in ("g_trace", "both"):
            reports[f"g_trace_N{N}"] = g_expansion_trace(grid, args.beta, args.omega0, xi, z, N, args.dw)
    if args.out:
        repository = ReportRepository(args.out)
        for name, report in reports.items():
            repository.save(report, name)
    _emit({name: report.model_dump(mode="json") for name, report in reports.items()})
    return 0


def cmd_config_doc(args: argparse.Namespace) -> int:
    text = render_reference()
    if args.out:
        path = Path(args.out) / "CONFIG_REFERENCE.md"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("설정 참조 저장(Configuration reference written): %s", path)
    else:
        print(text)
    return 0


COMMANDS = {
    "pressure": cmd_pressure,
    "chi": cmd_chi,
    "converge": cmd_converge,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
    "kernels": cmd_kernels,
    "config-doc": cmd_config_doc,
}


def run(args: argparse.Namespace) -> int:
    """명령 실행(Dispatch one command and map errors to exit codes)."""

    settings = get_settings()
    setup_logging(args.log_level or settings.log_level, args.log_format or settings.log_format, force=True, stream=sys.stderr)
    token = run_id_ctx.set(uuid.uuid4().hex[:12])
    try:
        handler = COMMANDS[args.command]
        try:
            outcome = handler(args)
            if asyncio.iscoroutine(outcome):
                outcome = asyncio.run(outcome)
        except ValidationError as exc:
            raise InvalidInputError(args.command, exc.errors()[0]["msg"], {"errors": exc.errors()}) from exc
        return int(outcome)
    except AppException as exc:
        logger.error("%s: %s", exc.error_code, exc.message)
        print(json.dumps(exc.to_dict(), ensure_ascii=False, default=str), file=sys.stderr)
        return exc.exit_code
    finally:
        run_id_ctx.reset(token)


def main(argv: Optional[Iterable[str]] = None) -> int:
    """동기 진입점(Synchronous entrypoint)."""

    load_environment()
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
