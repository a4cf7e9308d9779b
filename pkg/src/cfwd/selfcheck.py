"""Fast structural self-check behind ``cfwd check``.

Runs a compact battery of the invariants the library is built on: the
projection identities, the isotonic projection contract, and the exact
conservation and cluster-persistence properties of the stepper.  Each check
either passes or reports what broke; the whole battery takes on the order
of a second.
"""

from __future__ import annotations

import numpy as np

from .dynamics import SimConfig, run
from .monotone import (
    GridFunction,
    PotentialSpec,
    distinct_count,
    hs_norm_sq,
    inner_product,
    isotonic_project,
    make_test_function,
    project,
)
from .observables import supermartingale_test

__all__ = ["run_selfcheck", "CHECKS"]


def _random_monotone(rng: np.random.Generator, n: int) -> GridFunction:
    raw = rng.standard_normal(n)
    if rng.random() < 0.5:
        raw = np.round(raw * 2) / 2  # force ties
    return GridFunction(np.sort(raw))


def _check_projection_counts(rng: np.random.Generator) -> None:
    for _ in range(200):
        n = int(rng.integers(1, 49))
        f = _random_monotone(rng, n)
        hs = hs_norm_sq(f)
        count = distinct_count(f)
        if abs(hs - count) > 1e-12:
            raise AssertionError(
                f"HS norm {hs!r} != particle count {count} (n={n})"
            )


def _check_projection_laws(rng: np.random.Generator) -> None:
    for _ in range(200):
        n = int(rng.integers(1, 49))
        f = _random_monotone(rng, n)
        g = rng.standard_normal(n)
        h = rng.standard_normal(n)
        pg = project(f, g)
        if np.max(np.abs(project(f, pg) - pg)) > 1e-12:
            raise AssertionError("projection is not idempotent")
        lhs = inner_product(pg, h)
        rhs = inner_product(g, project(f, h))
        if abs(lhs - rhs) > 1e-12:
            raise AssertionError(f"projection not self-adjoint: {lhs!r} vs {rhs!r}")
        pm = project(f, _random_monotone(rng, n).values)
        if np.any(np.diff(pm) < 0):
            raise AssertionError("projection broke monotonicity")


def _check_isotonic(rng: np.random.Generator) -> None:
    for _ in range(200):
        n = int(rng.integers(1, 65))
        y = rng.standard_normal(n)
        out = isotonic_project(y).values
        if np.any(np.diff(out) < 0):
            raise AssertionError("isotonic output not ordered")
        if abs(float(np.sum(out)) - float(np.sum(y))) > 1e-10:
            raise AssertionError("isotonic projection moved the total mass")
        again = isotonic_project(out).values
        if not np.array_equal(again, out):
            raise AssertionError("isotonic projection is not idempotent")


def _check_dynamics(rng: np.random.Generator) -> None:
    config = SimConfig(
        n=32,
        dt=1e-3,
        t_end=0.2,
        seed=7,
        potential=PotentialSpec.levels(4),
        initial="identity",
    )
    h = make_test_function(0.0, 0.25, 32)
    records = [
        run(config, replica=r, h_probes=(h,), pair_probes=((3, 4),))
        for r in range(3)
    ]
    report = supermartingale_test(records, h)
    if not report.zero_persistent:
        raise AssertionError("absorbed probe left zero")
    if report.verdict != "consistent":
        raise AssertionError("probe increments drift upward")


def _check_drift_only_conservation(rng: np.random.Generator) -> None:
    config = SimConfig(
        n=48,
        dt=1e-3,
        t_end=0.5,
        seed=11,
        potential=PotentialSpec.levels(6),
        initial="constant:0.0",
        noise_enabled=False,
    )
    rec = run(config)
    drift = abs(float(rec.com[-1]) - float(rec.com[0]))
    if drift > 1e-9:
        raise AssertionError(f"drift-only run moved the center of mass by {drift:.2e}")


CHECKS = (
    ("projection trace counts particles", _check_projection_counts),
    ("projection identities", _check_projection_laws),
    ("isotonic projection contract", _check_isotonic),
    ("coalescence and probe absorption", _check_dynamics),
    ("drift-only mass conservation", _check_drift_only_conservation),
)


def run_selfcheck(seed: int = 0) -> tuple[bool, list[str]]:
    """Run all checks; returns (all_passed, one report line per check)."""
    lines = []
    ok = True
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        try:
            fn(rng)
        except AssertionError as e:
            ok = False
            lines.append(f"FAIL {name}: {e}")
        else:
            lines.append(f"ok   {name}")
    return ok, lines
