"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from selcon.dataset import Dataset, ValidationPartition, partition_validation
from selcon.dual import TrainerConfig
from selcon.setfn import SetFnContext


def make_problem(seed, n=6, d=2, q=1, nval=6, lam=None, C=None, delta=None,
                 signed=False, y_lo=0.3, y_hi=2.0):
    """Random desk-scale problem with positive (optionally sign-flipped) targets."""
    r = np.random.default_rng(seed)
    X = r.uniform(-1.0, 1.0, (n, d))
    y = r.uniform(y_lo, y_hi, n)
    if signed:
        y = y * r.choice([1.0, 1.0, 1.0, -1.0], n)
    Xv = r.uniform(-1.0, 1.0, (nval, d))
    yv = r.uniform(y_lo, y_hi, nval)
    train = Dataset(features=X, targets=y)
    val = Dataset(features=Xv, targets=yv)
    if delta is None:
        delta = float(r.uniform(0.0, 1.0))
    if lam is None:
        lam = float(r.uniform(0.3, 4.0))
    if C is None:
        C = float(r.uniform(0.2, 2.0))
    if q == 1:
        vp = partition_validation(val, "single", delta)
    else:
        subsets = tuple(np.array_split(np.arange(nval), q))
        vp = ValidationPartition(data=val, subsets=subsets, delta=delta)
    return train, val, vp, lam, C


def make_ctx(seed, backend="exact", trainer=None, **kw):
    train, val, vp, lam, C = make_problem(seed, **kw)
    return SetFnContext(
        train=train,
        valpart=vp,
        lam=lam,
        C=C,
        backend=backend,
        trainer=trainer or TrainerConfig(),
    )


@pytest.fixture
def tiny_train():
    """Three 1-d points whose singleton values are 0.5, 2.0 and 0.2 at lam=1."""
    return Dataset(features=np.array([[1.0], [1.0], [2.0]]), targets=np.array([1.0, 2.0, 1.0]))


@pytest.fixture
def tiny_ctx(tiny_train):
    val = Dataset(features=np.array([[0.5], [1.0]]), targets=np.array([1.0, 1.5]))
    vp = partition_validation(val, "single", delta=0.5)
    return SetFnContext(train=tiny_train, valpart=vp, lam=1.0, C=0.0)


_ACCEPTANCE_LABELS = {}


def register_acceptance(nodeid: str, label: str):
    _ACCEPTANCE_LABELS[nodeid.split("::")[-1]] = label


def pytest_runtest_logreport(report):
    # One pass/fail line per acceptance criterion, independent of capture.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    label = _ACCEPTANCE_LABELS.get(name, name)
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[{status}] {label}", flush=True)
