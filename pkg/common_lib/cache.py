"""고유분해 캐시 유틸리티(Eigendecomposition cache utilities)."""
from __future__ import annotations

import threading
from typing import Any, Callable, Dict, Hashable, Optional, Tuple

from .logger import get_logger

logger = get_logger(__name__)

_cache_instance: Optional["EigenCache"] = None
_instance_lock = threading.Lock()


def cache_key(kind: str, L: float, n: int, dim: int, omega: float, gauge: Hashable = None) -> Tuple[Any, ...]:
    """캐시 키 생성(Build a cache key).

    Floats are rounded to 12 significant digits so that the same physical
    point produced by different arithmetic paths shares an entry.
    """

    return (kind, float(f"{L:.12g}"), int(n), int(dim), float(f"{omega:.12g}"), gauge)


class EigenCache:
    """프로세스 내 고유분해 캐시(In-process eigendecomposition cache).

    Thread-safe; values are treated as immutable once stored. After
    ``freeze()`` the cache is read-only and a miss raises ``KeyError``.
    """

    def __init__(self, max_entries: int = 24) -> None:
        self._entries: Dict[Tuple[Any, ...], Any] = {}
        self._order: list[Tuple[Any, ...]] = []
        self._lock = threading.Lock()
        self._key_locks: Dict[Tuple[Any, ...], threading.Lock] = {}
        self._max_entries = max_entries
        self._frozen = False
        self.hits = 0
        self.misses = 0

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        """읽기 전용 전환(Switch to read-only after warm-up)."""

        self._frozen = True
        logger.debug("Eigen cache frozen with %d entries", len(self._entries))

    def get_or_compute(self, key: Tuple[Any, ...], factory: Callable[[], Any]) -> Any:
        """값 조회 또는 계산(Return cached value or compute it once).

        Concurrent callers asking for the same key block on a per-key lock so
        the factory runs only once.
        """

        with self._lock:
            if key in self._entries:
                self.hits += 1
                return self._entries[key]
            if self._frozen:
                raise KeyError(f"eigen cache is frozen; missing {key}")
            key_lock = self._key_locks.setdefault(key, threading.Lock())

        with key_lock:
            with self._lock:
                if key in self._entries:
                    self.hits += 1
                    return self._entries[key]
            value = factory()
            with self._lock:
                self.misses += 1
                self._entries[key] = value
                self._order.append(key)
                while len(self._order) > self._max_entries:
                    evicted = self._order.pop(0)
                    self._entries.pop(evicted, None)
                    self._key_locks.pop(evicted, None)
            logger.debug("Eigen cache miss stored: %s", key)
            return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._order.clear()
            self._key_locks.clear()
            self._frozen = False
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def stats(self) -> Dict[str, int]:
        return {"entries": len(self._entries), "hits": self.hits, "misses": self.misses}


def get_eigen_cache() -> EigenCache:
    """프로세스 공용 캐시 반환(Return the process-wide cache)."""

    global _cache_instance
    if _cache_instance is None:
        with _instance_lock:
            if _cache_instance is None:
                _cache_instance = EigenCache()
    return _cache_instance
