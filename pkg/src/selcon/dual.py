"""Training objective F(w, mu, S) and the max-min trainers that evaluate f(S).

The objective couples the per-element regularized training loss over a
candidate subset S with multiplier-weighted validation-error terms:

    F(w, mu, S) = sum_{i in S} [lam * ||w||^2 + (y_i - h_w(x_i))^2]
                  + sum_q mu_q * [mean_{j in V_q} (y_j - h_w(x_j))^2 - delta]

Note the regularizer is summed once per element of S.  The set value is
f(S) = max over mu in the box [0, C]^Q of min over w of F, and two backends
realize it:

* ``exact`` (linear model only): the inner minimum has a closed form, and the
  outer concave maximization runs fixed-step projected gradient ascent on mu,
  with a quasi-Newton refinement and an active-set Newton finisher picking up
  the badly conditioned cases the fixed step cannot finish.  This backend is
  the ground truth for every property check.
* ``sgd`` (any model): alternating adaptive-moment descent on the parameters
  over mini-batches of S and projected ascent on mu, mirroring how the
  objective is trained at scale.  Its error relative to ``exact`` is the
  imperfect-estimate epsilon quoted by the approximation guarantee.

``primal_value`` solves the equivalent penalized primal directly by a
restarted Polyak subgradient method; it is kept deliberately independent of
the dual path so the two can cross-check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .dataset import Dataset, ValidationPartition
from .errors import DivergenceDetected, NotConverged, SingularSystem
from .models import (
    LinearModel,
    Model,
    TwoLayerModel,
    model_from_params,
    params_of,
    predict_many,
)

__all__ = [
    "TrainerConfig",
    "TrainedState",
    "dual_objective",
    "solve_inner_linear",
    "train_dual_exact",
    "train_dual_sgd",
    "primal_value",
]

DEFAULT_HIDDEN_WIDTH = 5


@dataclass(frozen=True)
class TrainerConfig:
    """Settings shared by both trainer backends.

    ``learning_rate_mu=None`` resolves to 0.05 for the sgd backend (swept so
    the multiplier can cross its box within the default epoch budget without
    oscillating) and to an automatic stability-bounded step for the exact
    backend, whose dual curvature varies wildly with lam and |S|.
    """

    epochs: int = 2000
    batch_size: int = 1000
    learning_rate_w: float = 0.01
    learning_rate_mu: float | None = None
    mu_tolerance: float = 1e-10
    max_outer_iters: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.max_outer_iters < 1:
            raise ValueError("epochs, batch_size and max_outer_iters must be >= 1")
        if self.learning_rate_w <= 0 or self.mu_tolerance <= 0:
            raise ValueError("learning_rate_w and mu_tolerance must be positive")
        if self.learning_rate_mu is not None and self.learning_rate_mu <= 0:
            raise ValueError("learning_rate_mu must be positive when given")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class TrainedState:
    """Result of one max-min training run on a fixed subset."""

    model: Model
    mu: np.ndarray
    f_value: float
    iterations_used: int
    backend: str
    converged: bool = True

    def __post_init__(self):
        mu = np.ascontiguousarray(np.asarray(self.mu, dtype=float))
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def params(self) -> np.ndarray:
        return params_of(self.model)


def _subset_arrays(subset: Sequence[int], train: Dataset):
    idx = np.asarray(list(subset), dtype=int)
    return train.features[idx], train.targets[idx]


def dual_objective(
    model: Model,
    mu: np.ndarray,
    subset: Sequence[int],
    train: Dataset,
    valpart: ValidationPartition,
    lam: float,
) -> float:
    """Evaluate F(w, mu, S) exactly as written above.

    ``subset`` is consumed as a sequence: repeated indices contribute one
    regularizer-plus-loss term each.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (valpart.q,):
        raise ValueError(f"mu must have length {valpart.q}")
    w_flat = params_of(model)
    total = 0.0
    subset = list(subset)
    if subset:
        Xs, ys = _subset_arrays(subset, train)
        resid = ys - predict_many(model, Xs)
        total += len(subset) * lam * float(w_flat @ w_flat) + float(resid @ resid)
    val_pred = predict_many(model, valpart.data.features)
    val_resid = valpart.data.targets - val_pred
    for q, rows in enumerate(valpart.subsets):
        e_q = float(np.mean(val_resid[rows] ** 2))
        total += mu[q] * (e_q - valpart.delta)
    return total


class _LinearPieces:
    """Precomputed Gram blocks for the linear inner solve and ascent loop."""

    def __init__(self, subset: Sequence[int], train: Dataset, valpart: ValidationPartition):
        self.d = train.d
        self.ns = len(subset)
        if self.ns:
            Xs, ys = _subset_arrays(subset, train)
            self.Gs = Xs.T @ Xs
            self.bs = Xs.T @ ys
            self.Xs, self.ys = Xs, ys
        else:
            self.Gs = np.zeros((self.d, self.d))
            self.bs = np.zeros(self.d)
            self.Xs = np.zeros((0, self.d))
            self.ys = np.zeros(0)
        Xv, yv = valpart.data.features, valpart.data.targets
        self.Gbar = np.stack(
            [Xv[rows].T @ Xv[rows] / len(rows) for rows in valpart.subsets]
        )
        self.bbar = np.stack(
            [Xv[rows].T @ yv[rows] / len(rows) for rows in valpart.subsets]
        )
        self.cbar = np.array([float(np.mean(yv[rows] ** 2)) for rows in valpart.subsets])
        self.delta = valpart.delta
        self._eye = np.eye(self.d)

    def system(self, mu: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
        A = lam * self.ns * self._eye + self.Gs + np.tensordot(mu, self.Gbar, axes=1)
        return A, self.bs + mu @ self.bbar

    def solve(self, mu: np.ndarray, lam: float) -> np.ndarray:
        A, b = self.system(mu, lam)
        if self.ns:
            return np.linalg.solve(A, b)
        # Empty training sum: A is only PSD; b lies in its range, so the
        # least-squares solution is a true minimizer.
        return np.linalg.lstsq(A, b, rcond=None)[0]

    def val_errors(self, w: np.ndarray) -> np.ndarray:
        return np.einsum("qij,i,j->q", self.Gbar, w, w) - 2.0 * (self.bbar @ w) + self.cbar

    def objective(self, w: np.ndarray, mu: np.ndarray, lam: float) -> float:
        total = float(mu @ (self.val_errors(w) - self.delta))
        if self.ns:
            r = self.ys - self.Xs @ w
            total += self.ns * lam * float(w @ w) + float(r @ r)
        return total


def solve_inner_linear(
    mu: np.ndarray,
    subset: Sequence[int],
    train: Dataset,
    valpart: ValidationPartition,
    lam: float,
    allow_degenerate: bool = False,
) -> LinearModel:
    """Exact minimizer of F(., mu, S) for the linear model.

    With S empty and mu = 0 the objective is identically zero; that case is
    only defined when ``allow_degenerate`` is set, and returns w = 0.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    mu = np.asarray(mu, dtype=float)
    subset = list(subset)
    if not subset and not np.any(mu > 0):
        if allow_degenerate:
            return LinearModel(w=np.zeros(train.d))
        raise SingularSystem("empty subset with mu = 0 leaves the inner problem degenerate")
    pieces = _LinearPieces(subset, train, valpart)
    return LinearModel(w=pieces.solve(mu, lam))


def _auto_mu_step(pieces: _LinearPieces, lam: float, C: float, Q: int, delta: float) -> float:
    """Fixed ascent step from a probed Lipschitz estimate of the dual gradient.

    The gradient of the concave dual is the vector of validation errors at
    the inner minimizer; its variation over a few box-spanning probe points
    estimates the curvature scale.  Underestimates are caught by the
    divergence safeguard in the ascent loop, which halves the step.
    """
    probes = [np.zeros(Q), np.full(Q, 0.5 * C), np.full(Q, C)]
    if Q >= 2:
        probes.append(C * np.eye(Q)[0])
    if pieces.ns == 0:
        # The inner minimizer only depends on the direction of mu here, and
        # mu = 0 leaves it undefined; probe away from the origin.
        probes = [p for p in probes if p.any()]
    grads = [pieces.val_errors(pieces.solve(p, lam)) - delta for p in probes]
    lipschitz = 0.0
    for i in range(len(probes)):
        for j in range(i + 1, len(probes)):
            dist = float(np.linalg.norm(probes[i] - probes[j]))
            if dist > 0:
                lipschitz = max(
                    lipschitz, float(np.linalg.norm(grads[i] - grads[j])) / dist
                )
    if lipschitz <= 1e-14 or not math.isfinite(lipschitz):
        # Essentially linear dual: a step that crosses the box in one move.
        g_scale = max(float(np.linalg.norm(g)) for g in grads)
        return 2.0 * C * math.sqrt(Q) / g_scale if g_scale > 1e-14 else 1.0
    return 0.5 / lipschitz


def train_dual_exact(
    subset: Sequence[int],
    train: Dataset,
    valpart: ValidationPartition,
    lam: float,
    C: float,
    cfg: TrainerConfig,
) -> TrainedState:
    """Solve max over mu in [0, C]^Q of min over w of F for the linear model.

    The inner minimum is re-solved in closed form at every mu step; the outer
    ascent is fixed-step projected gradient on the concave dual, terminated
    when the projected-gradient norm drops below ``cfg.mu_tolerance``.  When
    the iteration budget runs out, the best state found so far is returned
    with ``converged=False``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if C < 0:
        raise ValueError("C must be >= 0")
    subset = sorted(int(i) for i in subset)
    Q = valpart.q
    pieces = _LinearPieces(subset, train, valpart)

    def finish(w, mu, iters, converged):
        model = LinearModel(w=w)
        f = dual_objective(model, mu, subset, train, valpart, lam)
        return TrainedState(
            model=model,
            mu=mu,
            f_value=f,
            iterations_used=iters,
            backend="exact",
            converged=converged,
        )

    if C == 0.0:
        # The multiplier box collapses to a point; one inner solve suffices.
        mu = np.zeros(Q)
        w = pieces.solve(mu, lam) if subset else np.zeros(train.d)
        return finish(w, mu, 0, True)

    if not subset and Q == 1:
        # With an empty training sum and a single constraint the dual is
        # linear in mu, so the maximum sits at a box endpoint.
        w_ls = np.linalg.lstsq(pieces.Gbar[0], pieces.bbar[0], rcond=None)[0]
        slack = float(pieces.val_errors(w_ls)[0]) - valpart.delta
        if slack <= 0:
            return finish(np.zeros(train.d), np.zeros(1), 0, True)
        return finish(w_ls, np.array([C]), 0, True)

    lr = cfg.learning_rate_mu
    if lr is None:
        lr = _auto_mu_step(pieces, lam, C, Q, valpart.delta)

    # With an empty training sum the dual only depends on the direction of
    # mu, so start in the interior; otherwise start at zero, where slack
    # constraints terminate immediately.
    mu = np.zeros(Q) if subset else np.full(Q, C / 2.0)

    def evaluate(m):
        w = pieces.solve(m, lam)
        errs = pieces.val_errors(w)
        phi = float(m @ (errs - valpart.delta))
        if pieces.ns:
            r = pieces.ys - pieces.Xs @ w
            phi += pieces.ns * lam * float(w @ w) + float(r @ r)
        return w, errs, phi

    # Badly conditioned duals would need millions of fixed steps, so the
    # ascent gets a bounded budget and an exact Newton finisher takes over.
    ascent_budget = min(cfg.max_outer_iters, max(40, 15 * Q))
    w, errs, phi = evaluate(mu)
    best = (phi, mu.copy(), w.copy())
    converged = False
    iters = 0
    for iters in range(1, cfg.max_outer_iters + 1):
        grad = errs - valpart.delta
        mu_next = np.clip(mu + lr * grad, 0.0, C)
        pg = (mu_next - mu) / lr
        if float(np.linalg.norm(pg)) <= cfg.mu_tolerance:
            converged = True
            break
        if iters >= ascent_budget:
            break
        w_next, errs_next, phi_next = evaluate(mu_next)
        if phi_next < phi - 1e-12 * (1.0 + abs(phi)):
            # The probed step overestimated the safe size: halve it and
            # resume from the best point seen.  The step stays fixed between
            # these rare recalibrations.
            lr *= 0.5
            if lr <= 0.0 or not math.isfinite(lr):
                break
            phi, mu, w = best
            mu, w = mu.copy(), w.copy()
            errs = pieces.val_errors(w)
            continue
        mu, w, errs, phi = mu_next, w_next, errs_next, phi_next
        if phi > best[0]:
            best = (phi, mu.copy(), w.copy())

    if not converged:
        refined = _box_refine(pieces, lam, C, Q, valpart.delta, best, evaluate)
        if refined[0] > best[0]:
            best = refined
        if subset:
            # The Newton polisher needs a positive-definite inner system,
            # which only non-empty subsets guarantee.
            newton = _active_set_newton(pieces, lam, C, Q, valpart.delta, best, cfg)
            if newton is not None and newton[0] >= best[0] - 1e-12 * (1.0 + abs(best[0])):
                best = newton[:3]
        n_w = best[2]
        n_mu = best[1]
        grad = pieces.val_errors(n_w) - valpart.delta
        pg = (np.clip(n_mu + lr * grad, 0.0, C) - n_mu) / lr
        converged = float(np.linalg.norm(pg)) <= cfg.mu_tolerance
        mu, w = n_mu, n_w

    if not subset and best[0] <= 0.0:
        # The zero multiplier is always feasible here and yields objective 0,
        # so a non-positive best means the origin is the exact maximum.
        return finish(np.zeros(train.d), np.zeros(Q), iters, True)
    if converged:
        return finish(w, mu, iters, True)
    return finish(best[2], best[1], iters, False)


def _box_refine(pieces, lam, C, Q, delta, best, evaluate):
    """Quasi-Newton refinement of the box-constrained dual maximization.

    Gets close enough to the optimum that the active-set polisher's hint
    ordering and Newton starts are reliable even on badly conditioned duals.
    """
    def neg(mu):
        w, errs, phi = evaluate(mu)
        return -phi, -(errs - delta)

    res = scipy.optimize.minimize(
        neg,
        best[1],
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, C)] * Q,
        options={"maxiter": 500, "ftol": 1e-18, "gtol": 1e-12},
    )
    mu = np.clip(res.x, 0.0, C)
    w, _, phi = evaluate(mu)
    return phi, mu, w


def _active_set_newton(pieces, lam, C, Q, delta, best, cfg,
                       max_newton: int = 14):
    """Exact maximizer of the box-constrained concave dual for non-empty S.

    Tries assignments of each coordinate to {0, C, interior}, ordered by
    closeness to the ascent's best iterate, solving the interior
    stationarity system by Newton (the Jacobian of the validation-error
    gradient is -2 V' A^-1 V, available in closed form).  Concavity makes
    the first KKT-consistent candidate the global maximum.
    Returns (phi, mu, w, iterations) or None if no candidate emerged.
    """
    def objective(m, w, errs):
        phi = float(m @ (errs - delta))
        r = pieces.ys - pieces.Xs @ w
        return phi + pieces.ns * lam * float(w @ w) + float(r @ r)

    scale = 1.0 + float(np.max(np.abs(pieces.cbar))) + delta
    kkt_tol = 1e-9 * scale
    hint = [0 if m < 0.02 * C else 1 if m > 0.98 * C else 2 for m in best[1]]

    def decode(pattern):
        codes = []
        for _ in range(Q):
            codes.append(pattern % 3)  # 0 -> at 0, 1 -> at C, 2 -> interior
            pattern //= 3
        return codes

    all_codes = sorted(
        (decode(p) for p in range(3**Q)),
        key=lambda c: sum(a != b for a, b in zip(c, hint)),
    )
    used = 0
    for codes in all_codes:
        interior = [q for q, c in enumerate(codes) if c == 2]
        mu = np.array([0.0 if c == 0 else C if c == 1 else 0.5 * C for c in codes])
        if interior:
            mu[interior] = np.clip(best[1][interior], 1e-6 * C, (1 - 1e-6) * C)
            ok = False
            prev_norm = math.inf
            stalls = 0
            for _ in range(max_newton):
                used += 1
                A, b = pieces.system(mu, lam)
                try:
                    cho = scipy.linalg.cho_factor(A, check_finite=False)
                except scipy.linalg.LinAlgError:
                    break
                w = scipy.linalg.cho_solve(cho, b, check_finite=False)
                errs = pieces.val_errors(w)
                g_int = errs[interior] - delta
                g_norm = float(np.linalg.norm(g_int))
                if g_norm <= 1e-11 * scale:
                    ok = True
                    break
                if g_norm > 0.9 * prev_norm:
                    stalls += 1
                    if stalls >= 3:
                        ok = g_norm <= 1e-9 * scale  # numerically stationary
                        break
                prev_norm = min(prev_norm, g_norm)
                V = (pieces.Gbar @ w).T[:, interior] - pieces.bbar.T[:, interior]
                J = -2.0 * V.T @ scipy.linalg.cho_solve(cho, V, check_finite=False)
                step, *_ = np.linalg.lstsq(J, -g_int, rcond=None)
                if not np.all(np.isfinite(step)):
                    break
                # Damped update: halve the step until the residual shrinks.
                t = 1.0
                accepted = False
                for _ in range(8):
                    cand = np.clip(mu[interior] + t * step, 0.0, C)
                    trial = mu.copy()
                    trial[interior] = cand
                    A_t, b_t = pieces.system(trial, lam)
                    w_t = np.linalg.solve(A_t, b_t)
                    g_t = pieces.val_errors(w_t)[interior] - delta
                    if float(np.linalg.norm(g_t)) < g_norm:
                        mu = trial
                        accepted = True
                        break
                    t *= 0.5
                used += 1
                if not accepted:
                    stalls += 1
                    if stalls >= 3:
                        ok = g_norm <= 1e-9 * scale
                        break
            if not ok:
                continue
            if np.any(mu[interior] <= 0.0) or np.any(mu[interior] >= C):
                continue
        used += 1
        w = pieces.solve(mu, lam)
        errs = pieces.val_errors(w)
        g = errs - delta
        feasible = all(
            not (c == 0 and g[q] > kkt_tol) and not (c == 1 and g[q] < -kkt_tol)
            for q, c in enumerate(codes)
        )
        if feasible:
            return objective(mu, w, errs), mu.copy(), w.copy(), used
    return None


def _init_model(model_kind: str, d: int, hidden_width: int, rng: np.random.Generator) -> Model:
    if model_kind == "linear":
        return LinearModel(w=np.zeros(d))
    if model_kind == "two_layer":
        hidden = rng.normal(0.0, 1.0 / math.sqrt(d), size=(hidden_width, d))
        output = rng.normal(0.0, 1.0 / math.sqrt(hidden_width), size=hidden_width)
        return TwoLayerModel(hidden=hidden, output=output)
    raise ValueError(f"unknown model kind {model_kind!r}")


def _mse_grad_flat(model: Model, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of mean((y - h(x))^2) over the rows of X, flat layout."""
    if isinstance(model, LinearModel):
        r = X @ model.w - y
        return (2.0 / len(y)) * (X.T @ r)
    Z = X @ model.hidden.T
    A = np.maximum(Z, 0.0)
    r = A @ model.output - y
    g_out = (2.0 / len(y)) * (A.T @ r)
    g_hid = (2.0 / len(y)) * ((r[:, None] * (Z > 0.0) * model.output).T @ X)
    return np.concatenate([g_hid.ravel(), g_out])


def train_dual_sgd(
    subset: Sequence[int],
    train: Dataset,
    valpart: ValidationPartition,
    lam: float,
    C: float,
    cfg: TrainerConfig,
    model_kind: str = "linear",
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    init_state: TrainedState | None = None,
    epochs: int | None = None,
) -> TrainedState:
    """Stochastic saddle-point trainer: Adam on the parameters, projected
    ascent on the multipliers after every mini-batch step.

    Deterministic for a fixed config seed and subset; passing ``init_state``
    warm-starts from a previous run (used by the opt-in fast leave-one-out
    mode of the selection driver).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    subset = sorted(int(i) for i in subset)
    ns = len(subset)
    Q = valpart.q
    rng = np.random.default_rng([cfg.seed, 1 + ns, *subset])

    if init_state is not None:
        model = init_state.model
        mu = init_state.mu.copy()
    else:
        model = _init_model(model_kind, train.d, hidden_width, rng)
        mu = np.zeros(Q)
    params = params_of(model)

    lr_w = cfg.learning_rate_w
    lr_mu = cfg.learning_rate_mu if cfg.learning_rate_mu is not None else 0.05
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_t = np.zeros_like(params)
    v_t = np.zeros_like(params)

    Xs, ys = _subset_arrays(subset, train)
    Xv, yv = valpart.data.features, valpart.data.targets
    rows_per_q = valpart.subsets
    b_eff = min(ns, cfg.batch_size) if ns else 0
    n_epochs = epochs if epochs is not None else cfg.epochs

    step = 0
    for _ in range(n_epochs):
        if ns:
            order = rng.permutation(ns) if ns > b_eff else np.arange(ns)
            batch_starts = range(0, ns, b_eff)
        else:
            batch_starts = range(1)  # constraint-only update
        for start in batch_starts:
            grad = np.zeros_like(params)
            if ns:
                batch = order[start : start + b_eff]
                grad += ns * (2.0 * lam * params + _mse_grad_flat(model, Xs[batch], ys[batch]))
            for q in range(Q):
                if mu[q] != 0.0:
                    grad += mu[q] * _mse_grad_flat(model, Xv[rows_per_q[q]], yv[rows_per_q[q]])
            step += 1
            m_t = beta1 * m_t + (1 - beta1) * grad
            v_t = beta2 * v_t + (1 - beta2) * grad * grad
            m_hat = m_t / (1 - beta1**step)
            v_hat = v_t / (1 - beta2**step)
            params = params - lr_w * m_hat / (np.sqrt(v_hat) + eps)
            model = model_from_params(model, params)
            if C > 0:
                val_resid = yv - predict_many(model, Xv)
                errs = np.array([float(np.mean(val_resid[r] ** 2)) for r in rows_per_q])
                mu = np.clip(mu + lr_mu * (errs - valpart.delta), 0.0, C)

    f = dual_objective(model, mu, subset, train, valpart, lam)
    if not math.isfinite(f):
        raise DivergenceDetected(f"sgd trainer diverged on subset of size {ns}")
    return TrainedState(
        model=model,
        mu=mu,
        f_value=f,
        iterations_used=step,
        backend="sgd",
        converged=True,
    )


def primal_value(
    subset: Sequence[int],
    train: Dataset,
    valpart: ValidationPartition,
    lam: float,
    C: float,
    tol: float = 1e-6,
    model_kind: str = "linear",
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    seed: int = 0,
    max_rounds: int = 80,
    inner_steps: int = 150,
) -> float:
    """Minimize the penalized primal directly:

        sum_{i in S} [lam ||w||^2 + (y_i - h(x_i))^2]
        + C * sum_q max(0, val_err_q(w) - delta)

    with the optimal slack substituted analytically.  Solved by a restarted
    Polyak subgradient method: within each round the step targets the best
    value seen minus a gap, and the gap halves whenever a round stalls.
    Raises :class:`NotConverged` (carrying the best value) if the gap cannot
    be driven below ``tol`` within the round budget.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    subset = sorted(int(i) for i in subset)
    ns = len(subset)
    Q = valpart.q
    Xs, ys = _subset_arrays(subset, train)
    Xv, yv = valpart.data.features, valpart.data.targets
    rows_per_q = valpart.subsets
    delta = valpart.delta

    rng = np.random.default_rng(seed)
    if model_kind == "linear" and ns:
        A = lam * ns * np.eye(train.d) + Xs.T @ Xs
        model = LinearModel(w=np.linalg.solve(A, Xs.T @ ys))
    else:
        model = _init_model(model_kind, train.d, hidden_width, rng)
        if model_kind == "linear":
            model = LinearModel(w=np.zeros(train.d))
    params = params_of(model)

    def value_and_subgrad(p: np.ndarray) -> tuple[float, np.ndarray]:
        mdl = model_from_params(model, p)
        total = 0.0
        g = np.zeros_like(p)
        if ns:
            r = ys - predict_many(mdl, Xs)
            total += ns * lam * float(p @ p) + float(r @ r)
            g += ns * (2.0 * lam * p + _mse_grad_flat(mdl, Xs, ys))
        val_resid = yv - predict_many(mdl, Xv)
        for q in range(Q):
            e_q = float(np.mean(val_resid[rows_per_q[q]] ** 2))
            gap = e_q - delta
            if gap > 0:
                total += C * gap
                g += C * _mse_grad_flat(mdl, Xv[rows_per_q[q]], yv[rows_per_q[q]])
        return total, g

    best_val, _ = value_and_subgrad(params)
    best_params = params.copy()
    theta = max(0.5 * abs(best_val), 1.0)
    p = params
    for _ in range(max_rounds):
        target = max(best_val - theta, 0.0)
        round_start = best_val
        for _ in range(inner_steps):
            val, g = value_and_subgrad(p)
            if val < best_val:
                best_val, best_params = val, p.copy()
            gn2 = float(g @ g)
            if gn2 < 1e-30:
                break
            gamma = (val - target) / gn2
            p = p - gamma * g
        if best_val > round_start - 0.5 * theta:
            theta *= 0.5
        p = best_params.copy()
        if theta <= tol * (1.0 + abs(best_val)):
            return best_val
    raise NotConverged(
        f"primal subgradient descent did not reach tolerance {tol}", value=best_val
    )
