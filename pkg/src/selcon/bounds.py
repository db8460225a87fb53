"""Closed-form constants and certificates for the selection guarantees.

Everything here is a pure function of the data extrema and the problem
scalars: the per-element regularized-loss minimum and its closed form, the
certified submodularity-ratio lower bound ``alpha_hat``, the certified
curvature upper bound ``kappa_hat``, the regularization threshold that makes
those certificates valid, the trained-parameter norm bound, and the
approximation ratios for exact and imperfect training.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.optimize

from .dataset import Dataset
from .errors import InvalidAlpha, ZeroTarget
from .models import TwoLayerModel, predict

__all__ = [
    "DataConstants",
    "BoundReport",
    "data_constants",
    "claim1_min",
    "ell_star_linear",
    "ell",
    "alpha_hat_linear",
    "alpha_hat_nonlinear",
    "kappa_hat",
    "lambda_min_linear",
    "w_norm_bound",
    "approx_ratio",
    "bound_report",
]


@dataclass(frozen=True)
class DataConstants:
    """Extrema of the data that enter every certificate.

    ``x_max`` is the largest Euclidean feature norm over train and validation
    rows; ``y_min``/``y_max`` bound |y| over both sets, with y_min > 0.
    """

    y_max: float
    y_min: float
    x_max: float
    n: int
    d: int
    q: int


@dataclass(frozen=True)
class BoundReport:
    alpha_hat: float
    kappa_hat: float
    ell_star: float
    ell: float
    lambda_min: float
    ratio_perfect: float
    ratio_imperfect: float
    epsilon_used: float

    def as_dict(self) -> dict:
        # Vacuous ratios are infinite; JSON has no Infinity, so emit null.
        return {
            k: (float(v) if math.isfinite(v) else None)
            for k, v in asdict(self).items()
        }


def data_constants(train: Dataset, val: Dataset, q: int = 1) -> DataConstants:
    """Exact extrema over train and validation rows.

    Raises :class:`ZeroTarget` when any |y| is zero; the certificates need
    min|y| > 0, which an offset to the targets restores.
    """
    ys = np.abs(np.concatenate([train.targets, val.targets]))
    if np.any(ys == 0.0):
        raise ZeroTarget()
    norms = np.linalg.norm(np.vstack([train.features, val.features]), axis=1)
    return DataConstants(
        y_max=float(ys.max()),
        y_min=float(ys.min()),
        x_max=float(norms.max()),
        n=train.n,
        d=train.d,
        q=q,
    )


def claim1_min(lam: float, y: float, x: np.ndarray) -> float:
    """min over w of lam*||w||^2 + (y - w.x)^2 = lam*y^2 / (lam + ||x||^2)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=float)
    return lam * y * y / (lam + float(x @ x))


def ell_star_linear(train: Dataset, x_max: float) -> float:
    """Per-element loss floor with the regularizer weight set to x_max^2.

    This is the curvature-scale variant of the per-element minimum: the same
    closed form with lam replaced by x_max^2 (the linear model's Hessian
    scale), minimized over the training elements.
    """
    vals = [claim1_min(x_max * x_max, y, x) for x, y in zip(train.features, train.targets)]
    return float(min(vals))


def _two_layer_element_min(lam: float, y: float, x: np.ndarray, width: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    d = len(x)

    def obj(p):
        hidden = p[: width * d].reshape(width, d)
        out = p[width * d :]
        model = TwoLayerModel(hidden=hidden, output=out)
        return lam * float(p @ p) + (y - predict(model, x)) ** 2

    best = lam * 0.0 + y * y  # value at zero parameters
    for _ in range(4):
        p0 = rng.normal(0.0, 0.5, size=width * d + width)
        res = scipy.optimize.minimize(obj, p0, method="L-BFGS-B")
        best = min(best, float(res.fun))
    return best


def ell(train: Dataset, lam: float, model_kind: str = "linear",
        hidden_width: int = 5, seed: int = 0) -> float:
    """min over elements of min over w of lam*||w||^2 + (y_i - h_w(x_i))^2.

    Closed form per element for the linear model; numeric minimization with
    restarts for the two-layer model.
    """
    if model_kind == "linear":
        vals = [claim1_min(lam, y, x) for x, y in zip(train.features, train.targets)]
        return float(min(vals))
    vals = [
        _two_layer_element_min(lam, y, x, hidden_width, seed + i)
        for i, (x, y) in enumerate(zip(train.features, train.targets))
    ]
    return float(min(vals))


def alpha_hat_linear(lam: float, C: float, q: int, consts: DataConstants) -> float:
    """Certified submodularity-ratio lower bound for the linear model.

    May be <= 0 when lam sits below :func:`lambda_min_linear`; the value is
    reported unclamped and the caller decides how to substitute.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    num = 16.0 * (1.0 + C * q) ** 2 * consts.y_max**2 * consts.x_max**2
    return 1.0 - num / (lam * consts.y_min**2)


def alpha_hat_nonlinear(lam: float, C: float, q: int, y_max: float, H: float, ell_star: float) -> float:
    """Certified ratio bound for an H-Lipschitz model with loss floor ell_star."""
    if lam <= 0 or ell_star <= 0 or H <= 0:
        raise ValueError("lam, ell_star and H must be positive")
    return 1.0 - 32.0 * (1.0 + C * q) ** 2 * y_max**2 * H**2 / (lam * ell_star)


def kappa_hat(C: float, q: int, y_max: float, ell_star: float) -> float:
    """Certified upper bound on the generalized curvature."""
    if ell_star <= 0:
        raise ValueError("ell_star must be positive")
    return 1.0 - ell_star / ((C * q + 1.0) * y_max**2)


def lambda_min_linear(C: float, q: int, consts: DataConstants) -> float:
    """Smallest regularizer weight at which the linear certificates hold."""
    if consts.x_max == 0.0:
        return 0.0
    return max(
        consts.x_max**2,
        16.0 * (1.0 + C * q) ** 2 * consts.y_max**2 * consts.x_max**2 / consts.y_min**2,
    )


def w_norm_bound(C: float, q: int, y_max: float, scale: float, lam: float,
                 linear: bool = True) -> float:
    """Norm bound on the trained parameters for any box multiplier and
    non-empty subset: (1+CQ)*y_max*x_max/lam for the linear model, twice
    that with the Lipschitz constant for a generic model."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    base = (1.0 + C * q) * y_max * scale / lam
    return base if linear else 2.0 * base


def approx_ratio(k: int, alpha: float, kappa: float, epsilon: float, ell_value: float) -> tuple[float, float]:
    """Approximation ratios of the selection driver.

    ``perfect`` covers exact training; ``imperfect`` adds the 2*k*eps/ell
    degradation caused by trainers that only approximate f within eps.
    Raises :class:`InvalidAlpha` when alpha <= 0 (the certificate is vacuous;
    raise lam or switch to an empirical alpha).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if epsilon < 0 or ell_value <= 0:
        raise ValueError("need epsilon >= 0 and ell > 0")
    if alpha <= 0:
        raise InvalidAlpha(f"alpha = {alpha} is not positive; the ratio is vacuous")
    perfect = k / (alpha * (1.0 + (k - 1) * (1.0 - kappa) * alpha))
    return perfect, perfect + 2.0 * k * epsilon / ell_value


def bound_report(train: Dataset, val: Dataset, lam: float, C: float, q: int,
                 k: int, epsilon: float = 0.0) -> BoundReport:
    """Assemble every certificate for a linear problem into one report."""
    consts = data_constants(train, val, q=q)
    e_star = ell_star_linear(train, consts.x_max)
    e = ell(train, lam)
    a_hat = alpha_hat_linear(lam, C, q, consts)
    k_hat = kappa_hat(C, q, consts.y_max, e_star)
    if a_hat > 0:
        perfect, imperfect = approx_ratio(k, a_hat, k_hat, epsilon, e)
    else:
        perfect = imperfect = float("inf")
    return BoundReport(
        alpha_hat=a_hat,
        kappa_hat=k_hat,
        ell_star=e_star,
        ell=e,
        lambda_min=lambda_min_linear(C, q, consts),
        ratio_perfect=perfect,
        ratio_imperfect=imperfect,
        epsilon_used=epsilon,
    )
