"""Memoized evaluation of the set function f(S) and its marginal gains.

A :class:`SetFnContext` owns the problem data, the trainer configuration and
an unbounded cache keyed by the sorted index tuple.  Values are
path-independent: every f(S) trains from the configured initialization, so
cached numbers do not depend on the order in which subsets were queried.
Concurrent cache misses may both train; values are deterministic, so the
first write wins and duplicates are identical.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .dataset import Dataset, ValidationPartition
from .dual import (
    DEFAULT_HIDDEN_WIDTH,
    TrainedState,
    TrainerConfig,
    train_dual_exact,
    train_dual_sgd,
)
from .errors import ElementAlreadyPresent

__all__ = ["SetFnContext"]


def _canonical(subset: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in subset))


@dataclass
class SetFnContext:
    """Everything needed to evaluate f(S), plus the value cache.

    ``backend`` selects the trainer: ``"exact"`` (linear closed-form inner
    solve, the reference implementation) or ``"sgd"`` (any model kind).
    ``threads`` caps the fan-out used by :meth:`singletons`; results are
    assembled by element index, so the output is thread-count invariant.
    """

    train: Dataset
    valpart: ValidationPartition
    lam: float
    C: float
    backend: str = "exact"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    model_kind: str = "linear"
    hidden_width: int = DEFAULT_HIDDEN_WIDTH
    threads: int = 1

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.C < 0:
            raise ValueError("C must be >= 0")
        if self.backend not in ("exact", "sgd"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "exact" and self.model_kind != "linear":
            raise ValueError("the exact backend supports the linear model only")
        self._cache: dict[tuple[int, ...], tuple[float, TrainedState]] = {}
        self._lock = threading.Lock()
        self.cache_hits = 0
        self.cache_misses = 0
        self.negative_marginals: list[tuple[int, tuple[int, ...], float]] = []

    # -- training -----------------------------------------------------------

    def _train(self, key: tuple[int, ...], epochs: int | None = None,
               init_state: TrainedState | None = None) -> TrainedState:
        if self.backend == "exact":
            return train_dual_exact(key, self.train, self.valpart, self.lam, self.C, self.trainer)
        return train_dual_sgd(
            key,
            self.train,
            self.valpart,
            self.lam,
            self.C,
            self.trainer,
            model_kind=self.model_kind,
            hidden_width=self.hidden_width,
            init_state=init_state,
            epochs=epochs,
        )

    def f_of(self, subset: Iterable[int]) -> tuple[float, TrainedState]:
        """Value and trained state for a subset, from cache when available."""
        key = _canonical(subset)
        cached = self._cache.get(key)
        if cached is not None:
            self.cache_hits += 1
            return cached
        state = self._train(key)
        entry = (state.f_value, state)
        with self._lock:
            # Publish-once: a concurrent duplicate trained the same value.
            entry = self._cache.setdefault(key, entry)
            self.cache_misses += 1
        return entry

    def refine(self, subset: Iterable[int], epochs: int,
               init_state: TrainedState) -> tuple[float, TrainedState]:
        """Warm-started short training (sgd only); bypasses and fills the cache.

        This is the opt-in speed mode for leave-one-out evaluations; it makes
        cached values path-dependent and is therefore never used by default.
        """
        if self.backend != "sgd":
            raise ValueError("warm-started refinement exists for the sgd backend only")
        key = _canonical(subset)
        state = self._train(key, epochs=epochs, init_state=init_state)
        entry = (state.f_value, state)
        with self._lock:
            entry = self._cache.setdefault(key, entry)
        return entry

    # -- derived quantities --------------------------------------------------

    def marginal(self, a: int, subset: Iterable[int]) -> float:
        """f(S + a) - f(S)."""
        key = _canonical(subset)
        if a in key:
            raise ElementAlreadyPresent(f"element {a} is already in the subset")
        gain = self.f_of(key + (a,))[0] - self.f_of(key)[0]
        if gain < 0 and self.backend == "sgd":
            self.negative_marginals.append((int(a), key, gain))
        return gain

    def singletons(self) -> np.ndarray:
        """f({i}) for every training element, fanned out over ``threads``."""
        n = self.train.n
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                values = list(pool.map(lambda i: self.f_of((i,))[0], range(n)))
            return np.asarray(values)
        return np.asarray([self.f_of((i,))[0] for i in range(n)])

    def f_empty(self) -> float:
        return self.f_of(())[0]

    # -- bookkeeping ----------------------------------------------------------

    def with_C(self, C: float) -> "SetFnContext":
        """Fresh context (empty cache) sharing the data but with a new C."""
        return SetFnContext(
            train=self.train,
            valpart=self.valpart,
            lam=self.lam,
            C=C,
            backend=self.backend,
            trainer=self.trainer,
            model_kind=self.model_kind,
            hidden_width=self.hidden_width,
            threads=self.threads,
        )

    def dump_values(self) -> dict[str, float]:
        """JSON-able map from subset key to cached f value, for cross-checks."""
        with self._lock:
            items = sorted(self._cache.items())
        return {",".join(map(str, k)): v for k, (v, _) in items}

    def dump_values_json(self) -> str:
        return json.dumps(self.dump_values(), sort_keys=True)
