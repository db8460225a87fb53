"""Comparison methods sharing the SelectionResult schema with the driver.

Full-data training with and without constraints, and uniform random subsets
with and without constraints.  Each returns the same result type as the
selection driver so the metrics layer is method-agnostic; the ``method``
slot also leaves room for merging externally computed numbers into reports.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import InvalidK
from .selection import SelectionResult, _digest
from .setfn import SetFnContext

__all__ = [
    "full_selection",
    "full_with_constraints",
    "random_subset",
    "random_with_constraints",
]


def _train_fixed(ctx: SetFnContext, subset: tuple[int, ...], method: str) -> SelectionResult:
    t0 = time.perf_counter()
    f_value, state = ctx.f_of(subset)
    return SelectionResult(
        selected=subset,
        f_value=f_value,
        trace=[(0, f_value, _digest(subset))],
        state=state,
        wall_time=time.perf_counter() - t0,
        method=method,
    )


def full_selection(ctx: SetFnContext) -> SelectionResult:
    """Train on all of D with the constraints disabled (C = 0)."""
    everything = tuple(range(ctx.train.n))
    return _train_fixed(ctx.with_C(0.0), everything, "full")


def full_with_constraints(ctx: SetFnContext) -> SelectionResult:
    """Train on all of D with the configured C and delta."""
    everything = tuple(range(ctx.train.n))
    return _train_fixed(ctx, everything, "full-constrained")


def random_subset(n: int, k: int, seed: int) -> tuple[int, ...]:
    """Uniform k-subset without replacement, sorted, deterministic per seed."""
    if not (1 <= k <= n):
        raise InvalidK(f"k = {k} is outside [1, {n}]")
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))


def random_with_constraints(ctx: SetFnContext, k: int, seed: int) -> SelectionResult:
    """Random subset trained with the configured constraints."""
    subset = random_subset(ctx.train.n, k, seed)
    result = _train_fixed(ctx, subset, "random-constrained")
    return result


def random_selection(ctx: SetFnContext, k: int, seed: int) -> SelectionResult:
    """Random subset trained without constraints."""
    subset = random_subset(ctx.train.n, k, seed)
    result = _train_fixed(ctx.with_C(0.0), subset, "random")
    return result
