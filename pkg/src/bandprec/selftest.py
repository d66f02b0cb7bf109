"""Quick internal consistency checks behind ``bandprec project-selftest``."""

from __future__ import annotations

import numpy as np

from .cholesky import (BandedCholesky, PrecisionEstimate, assemble_covariance,
                       assemble_precision, norm_inf_elementwise)
from .estimators import BlockPenalizedPrecision
from .simulation import ModelSpec, generate
from .solver import project_block_norms


def _random_estimate(rng, p):
    bands = tuple(rng.uniform(-0.4, 0.4, size=p - j) for j in range(1, p))
    sigma2 = rng.uniform(0.5, 1.5, size=p)
    return PrecisionEstimate(factor=BandedCholesky(p=p, bands=bands),
                             sigma2=sigma2)


def _check_roundtrip(rng):
    est = _random_estimate(rng, 6)
    prod = assemble_covariance(est) @ assemble_precision(est)
    return norm_inf_elementwise(prod, np.eye(6)) < 1e-8


def _check_projection(rng):
    for _ in range(50):
        m = rng.integers(1, 5)
        b = rng.uniform(0, 2, size=m)
        w = np.where(rng.random(m) < 0.25, 0.0, rng.uniform(0.2, 2, size=m))
        M = float(rng.uniform(0, 2))
        out = project_block_norms(b, w, M)
        if np.any(out < -1e-12):
            return False
        if w @ out > M + 1e-9 and np.any(w > 0):
            if w[w > 0] @ b[w > 0] > M:
                return False
    return True


def _check_determinism():
    spec = ModelSpec(kind="identity_scaled", p=8)
    a = generate(spec, 20, "normal", seed=7)
    b = generate(spec, 20, "normal", seed=7)
    return np.array_equal(a, b)


def _check_fit():
    spec = ModelSpec(kind="identity_scaled", p=10)
    Y = generate(spec, 40, "normal", seed=3)
    model = BlockPenalizedPrecision(assume_centered=True).fit(Y)
    eigvals = np.linalg.eigvalsh(model.precision_)
    return bool(np.all(eigvals > 0))


def run_selftest(verbose=False):
    """Run the checks; returns the list of failed check names."""
    rng = np.random.default_rng(0)
    checks = [
        ("covariance/precision round-trip", lambda: _check_roundtrip(rng)),
        ("block-norm projection feasibility", lambda: _check_projection(rng)),
        ("seeded generation determinism", _check_determinism),
        ("penalized fit positive definite", _check_fit),
    ]
    failures = []
    for name, check in checks:
        ok = False
        try:
            ok = bool(check())
        except Exception as exc:  # noqa: BLE001 - reported below
            if verbose:
                print(f"FAIL {name}: {exc}")
        if not ok:
            failures.append(name)
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
    return failures
