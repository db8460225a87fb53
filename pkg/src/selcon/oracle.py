"""Brute-force and exhaustive verifiers for the set function's properties.

These are the independent reference implementations every guarantee is
checked against at desk scale: exhaustive subset enumeration for the optimal
k-subset, the exact (measured) submodularity ratio and generalized curvature,
and samplers for monotonicity, the marginal-gain sandwich bounds and the
modular upper bound.  All checkers run on the exact backend and return a
machine-readable :class:`OracleReport`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import solve_inner_linear
from .errors import InvalidK, TooLarge
from .setfn import SetFnContext

__all__ = [
    "OracleReport",
    "brute_force_optimum",
    "empirical_alpha",
    "empirical_alpha_detail",
    "empirical_kappa",
    "empirical_kappa_max",
    "check_monotone",
    "check_sandwich",
    "check_modular_bound",
]

DENOM_CUTOFF = 1e-12


@dataclass
class OracleReport:
    property_name: str
    instances_checked: int
    worst_slack: float
    tolerance: float
    passed: bool
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "property": self.property_name,
            "instances_checked": self.instances_checked,
            "worst_slack": float(self.worst_slack),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "witness": self.witness,
            "details": self.details,
        }


def _report(name: str, checked: int, worst: float, tol: float,
            witness: dict | None = None, **details) -> OracleReport:
    return OracleReport(
        property_name=name,
        instances_checked=checked,
        worst_slack=worst,
        tolerance=tol,
        passed=worst >= -tol,
        witness=witness if worst < -tol else None,
        details=details,
    )


def f_table(ctx: SetFnContext, max_n: int = 14) -> np.ndarray:
    """f over all subsets, indexed by bitmask (bit i = training element i)."""
    n = ctx.train.n
    if n > max_n:
        raise TooLarge(f"full enumeration of 2^{n} subsets exceeds the cap 2^{max_n}")
    vals = np.empty(1 << n)
    for mask in range(1 << n):
        subset = tuple(i for i in range(n) if (mask >> i) & 1)
        vals[mask] = ctx.f_of(subset)[0]
    return vals


def brute_force_optimum(ctx: SetFnContext, k: int, cap: int = 20_000) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum of f over all k-subsets; ties keep the
    lexicographically first subset."""
    n = ctx.train.n
    if not (1 <= k <= n):
        raise InvalidK(f"k = {k} is outside [1, {n}]")
    count = math.comb(n, k)
    if count > cap:
        raise TooLarge(f"{count} candidate subsets exceed the cap {cap}")
    best_val = math.inf
    best_set: tuple[int, ...] = ()
    for comb in itertools.combinations(range(n), k):
        v = ctx.f_of(comb)[0]
        if v < best_val:
            best_val, best_set = v, comb
    return best_set, best_val


def empirical_alpha_detail(ctx: SetFnContext, max_n: int = 12,
                           cutoff: float = DENOM_CUTOFF) -> tuple[float, int, int]:
    """Exact submodularity ratio plus (skipped, checked) triple counts.

    The ratio is min over nested pairs S within T and elements a outside T of
    gain(a, S) / gain(a, T); triples whose denominator is at most ``cutoff``
    are skipped and counted rather than silently dropped.
    """
    n = ctx.train.n
    if n > max_n:
        raise TooLarge(f"exhaustive ratio check on n = {n} exceeds max_n = {max_n}")
    f = f_table(ctx, max_n=max_n)
    masks = np.arange(1 << n)
    best = math.inf
    skipped = 0
    checked = 0
    for a in range(n):
        bit = 1 << a
        no_a = masks[(masks & bit) == 0]
        gains = np.full(1 << n, np.inf)
        gains[no_a] = f[no_a | bit] - f[no_a]
        # Subset-minimum over the lattice: after the sweep, m[T] is the
        # smallest gain over every S contained in T.
        m = gains.copy()
        for j in range(n):
            if j == a:
                continue
            bj = 1 << j
            has = masks[(masks & bj) != 0]
            m[has] = np.minimum(m[has], m[has ^ bj])
        for t_mask in no_a:
            n_triples = 1 << int(t_mask).bit_count()
            g_t = gains[t_mask]
            if g_t <= cutoff:
                skipped += n_triples
                continue
            checked += n_triples
            best = min(best, m[t_mask] / g_t)
    return (best if checked else math.inf), skipped, checked


def empirical_alpha(ctx: SetFnContext, max_n: int = 12) -> float:
    value, _, _ = empirical_alpha_detail(ctx, max_n=max_n)
    return value


def empirical_kappa(ctx: SetFnContext, subset, cutoff: float = DENOM_CUTOFF) -> float:
    """Measured generalized curvature of a single subset:
    1 - min over elements a of gain(a, S minus a) / gain(a, empty).
    Elements with near-zero empty-set gain are skipped."""
    key = tuple(sorted(int(i) for i in subset))
    f0 = ctx.f_of(())[0]
    ratios = []
    for a in range(ctx.train.n):
        denom = ctx.f_of((a,))[0] - f0
        if denom <= cutoff:
            continue
        rest = tuple(i for i in key if i != a)
        num = ctx.f_of(tuple(sorted(rest + (a,))))[0] - ctx.f_of(rest)[0]
        ratios.append(num / denom)
    if not ratios:
        return 0.0
    return 1.0 - min(ratios)


def empirical_kappa_max(ctx: SetFnContext, max_n: int = 12,
                        cutoff: float = DENOM_CUTOFF) -> float:
    """Largest measured curvature over every subset of the ground set."""
    n = ctx.train.n
    f = f_table(ctx, max_n=max_n)
    masks = np.arange(1 << n)
    denoms = np.array([f[1 << a] - f[0] for a in range(n)])
    min_ratio = np.full(1 << n, np.inf)
    for a in range(n):
        if denoms[a] <= cutoff:
            continue
        bit = 1 << a
        rest = masks & ~bit
        ratios = (f[rest | bit] - f[rest]) / denoms[a]
        np.minimum(min_ratio, ratios, out=min_ratio)
    finite = np.isfinite(min_ratio)
    if not finite.any():
        return 0.0
    return float(np.max(1.0 - min_ratio[finite]))


def _sample_pair(rng: np.random.Generator, n: int) -> tuple[tuple[int, ...], int]:
    size = int(rng.integers(0, n))  # empty subsets included
    perm = rng.permutation(n)
    subset = tuple(sorted(int(i) for i in perm[:size]))
    a = int(perm[size])
    return subset, a


def check_monotone(ctx: SetFnContext, trials: int = 200, seed: int = 0,
                   tol: float = 1e-8) -> OracleReport:
    """Sampled marginal gains must all be non-negative (up to tol)."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    witness = None
    for _ in range(trials):
        subset, a = _sample_pair(rng, ctx.train.n)
        gain = ctx.marginal(a, subset)
        if gain < worst:
            worst = gain
            witness = {"subset": list(subset), "element": a, "gain": float(gain)}
    return _report("monotone", trials, worst, tol, witness)


def check_sandwich(ctx: SetFnContext, trials: int = 200, seed: int = 0,
                   tol: float = 1e-7) -> OracleReport:
    """Marginal gains must sit between the two cross-evaluated closed forms.

    Lower: the loss of element a at the parameters trained on S + a with the
    multipliers frozen at S's optimum.  Upper: the same expression with the
    roles of the two subsets swapped.
    """
    if ctx.backend != "exact" or ctx.model_kind != "linear":
        raise ValueError("the sandwich check needs the exact linear backend")
    rng = np.random.default_rng(seed)
    lam = ctx.lam
    worst = math.inf
    witness = None
    for _ in range(trials):
        subset, a = _sample_pair(rng, ctx.train.n)
        with_a = tuple(sorted(subset + (a,)))
        f_s, st_s = ctx.f_of(subset)
        f_sa, st_sa = ctx.f_of(with_a)
        gain = f_sa - f_s
        x_a = ctx.train.features[a]
        y_a = ctx.train.targets[a]

        w_lo = solve_inner_linear(st_s.mu, with_a, ctx.train, ctx.valpart, lam).w
        lower = lam * float(w_lo @ w_lo) + float(y_a - w_lo @ x_a) ** 2
        w_up = solve_inner_linear(
            st_sa.mu, subset, ctx.train, ctx.valpart, lam, allow_degenerate=True
        ).w
        upper = lam * float(w_up @ w_up) + float(y_a - w_up @ x_a) ** 2

        for name, slack in (("lower", gain - lower), ("upper", upper - gain)):
            if slack < worst:
                worst = slack
                witness = {
                    "subset": list(subset),
                    "element": a,
                    "side": name,
                    "gain": float(gain),
                    "lower": float(lower),
                    "upper": float(upper),
                }
    return _report("sandwich", trials, worst, tol, witness)


def check_modular_bound(ctx: SetFnContext, s_hat, alpha: float,
                        tol: float = 1e-8, tight_tol: float = 1e-9) -> OracleReport:
    """The modular bound built at s_hat must dominate f everywhere and be
    tight at s_hat; verified over every subset of the ground set."""
    from .selection import modular_scores

    n = ctx.train.n
    if n > 12:
        raise TooLarge(f"modular-bound enumeration on n = {n} exceeds 12")
    s_hat = tuple(sorted(int(i) for i in s_hat))
    scores = modular_scores(ctx, s_hat, alpha)
    f_hat = ctx.f_of(s_hat)[0]
    const = f_hat - float(sum(scores[i] for i in s_hat))
    f = f_table(ctx)

    worst = math.inf
    witness = None
    for mask in range(1 << n):
        members = [i for i in range(n) if (mask >> i) & 1]
        bound = const + float(sum(scores[i] for i in members))
        slack = bound - f[mask]
        if slack < worst:
            worst = slack
            witness = {"subset": members, "bound": float(bound), "f": float(f[mask])}
    s_hat_mask = sum(1 << i for i in s_hat)
    bound_at_hat = const + float(sum(scores[i] for i in s_hat))
    tight_gap = abs(bound_at_hat - f[s_hat_mask])

    report = _report(
        "modular_bound",
        1 << n,
        worst,
        tol,
        witness,
        tight_gap=float(tight_gap),
        alpha=float(alpha),
    )
    report.passed = report.passed and tight_gap <= tight_tol
    return report
