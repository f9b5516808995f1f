"""연구 작업 오케스트레이터(Study task orchestrator).

Fans independent study tasks out on asyncio: each blocking numeric task runs
in a ThreadPoolExecutor, concurrency is capped by a semaphore, and the
outcomes come back in task order to a single aggregation point.
"""
from __future__ import annotations

import asyncio
import contextvars
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

from common_lib.cache import EigenCache, get_eigen_cache
from common_lib.config import get_settings
from common_lib.logger import get_logger
from harness.app.checks import verify_suite
from harness.app.models import StudyConfig, StudyResult, VerifyReport
from harness.app.service import (
    StudyTask,
    TaskOutcome,
    converge_study,
    execute_task,
    uniform_bound_scan,
)

ProgressCallback = Callable[[str, str], None]

logger = get_logger(__name__)


def _default_progress(step: str, message: str) -> None:
    logger.info("[%s] %s", step, message)


class StudyOrchestrator:
    """연구 작업 분배기(Bounded fan-out of study tasks).

    ``run_tasks`` is a TaskRunner for the harness services; ``converge``,
    ``bounds`` and ``verify`` run the services themselves in a worker thread.
    """

    def __init__(
        self,
        threads: Optional[int] = None,
        cache: Optional[EigenCache] = None,
        progress_cb: ProgressCallback = _default_progress,
    ) -> None:
        self.threads = max(1, threads or get_settings().threads)
        self.cache = cache or get_eigen_cache()
        self.progress_cb = progress_cb

    async def _run_one(
        self,
        task: StudyTask,
        executor: ThreadPoolExecutor,
        semaphore: asyncio.Semaphore,
        index: int,
        total: int,
    ) -> TaskOutcome:
        async with semaphore:
            loop = asyncio.get_running_loop()
            context = contextvars.copy_context()
            outcome = await loop.run_in_executor(executor, context.run, execute_task, task)
        status = "실패(failed)" if outcome.error else "완료(done)"
        self.progress_cb("TASK", f"[{index + 1}/{total}] {task.label} {status}")
        return outcome

    async def gather(self, tasks: Sequence[StudyTask]) -> list[TaskOutcome]:
        """모든 작업 실행(Run every task; order of the result follows ``tasks``)."""
        if not tasks:
            return []
        semaphore = asyncio.Semaphore(self.threads)
        self.progress_cb("INIT", f"{len(tasks)}개 작업, {self.threads} 스레드({len(tasks)} tasks, {self.threads} threads)")
        with ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="study") as executor:
            return list(
                await asyncio.gather(
                    *(self._run_one(task, executor, semaphore, i, len(tasks)) for i, task in enumerate(tasks))
                )
            )

    def run_tasks(self, tasks: Sequence[StudyTask]) -> list[TaskOutcome]:
        """Synchronous TaskRunner; called from a worker thread with no running loop."""
        return asyncio.run(self.gather(tasks))

    async def converge(self, cfg: StudyConfig) -> StudyResult:
        self.progress_cb("CONVERGE", f"L={list(cfg.lengths)}, N={list(cfg.orders)}")
        result = await asyncio.to_thread(converge_study, cfg, self.run_tasks, self.cache)
        self.progress_cb("CONVERGE", f"기준(criteria): {result.criteria}")
        return result

    async def bounds(self, cfg: StudyConfig) -> StudyResult:
        self.progress_cb("BOUNDS", f"L={list(cfg.lengths)}, N={[N for N in cfg.orders if N >= 1]}")
        result = await asyncio.to_thread(uniform_bound_scan, cfg, self.run_tasks, self.cache)
        self.progress_cb("BOUNDS", f"지표(metrics): {result.metrics}")
        return result

    async def verify(self, selection: Sequence[str], cfg: Optional[StudyConfig] = None, seed: Optional[int] = None) -> VerifyReport:
        report = await asyncio.to_thread(verify_suite, selection, cfg, self.run_tasks, seed)
        self.progress_cb("VERIFY", f"{sum(c.passed for c in report.checks)}/{len(report.checks)} 통과(passed)")
        return report
