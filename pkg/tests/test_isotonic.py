"""Isotonic projection against brute-force oracles and its exact contracts.

Two independent oracles:

* ``isotonic_enum`` enumerates every blocking of the input (2^(n-1) of
  them), keeps the feasible ones (non-decreasing block means), and returns
  the best candidate.  The optimum is always among these, so for small n
  this is the ground truth for arbitrary weights.
* ``isotonic_dp`` solves the problem restricted to a finite value grid by
  dynamic programming.  For inputs drawn from the quarter grid
  {-2, -1.75, ..., 2} with n <= 6 and uniform weights, every pooled mean is
  a multiple of 1/240, so the 1/240 grid contains the exact continuous
  optimum and the DP must reproduce it.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfwd import isotonic_project, pava, pava_blocks

# ---------------------------------------------------------------- oracles


def isotonic_enum(y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Exhaustive isotonic regression for small n: best feasible blocking."""
    n = len(y)
    best_obj = np.inf
    best = None
    for mask in range(2 ** (n - 1)):
        bounds = (
            [0] + [i + 1 for i in range(n - 1) if (mask >> i) & 1] + [n]
        )
        means = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            means.append(float(np.sum(w[a:b] * y[a:b]) / np.sum(w[a:b])))
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        z = np.concatenate(
            [np.full(b - a, m) for (a, b), m in zip(zip(bounds[:-1], bounds[1:]), means)]
        )
        obj = float(np.sum(w * (z - y) ** 2))
        if obj < best_obj:
            best_obj = obj
            best = z
    assert best is not None
    return best, best_obj


def isotonic_dp(y: np.ndarray, w: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """DP over a value grid: argmin of sum w_i (z_i - y_i)^2, z non-decreasing."""
    n = len(y)
    raw = np.empty((n, grid.size))
    raw[0] = w[0] * (grid - y[0]) ** 2
    acc = np.minimum.accumulate(raw[0])
    for i in range(1, n):
        raw[i] = w[i] * (grid - y[i]) ** 2 + acc
        acc = np.minimum.accumulate(raw[i])
    z = np.empty(n)
    v = int(np.argmin(raw[n - 1]))
    z[n - 1] = grid[v]
    for i in range(n - 2, -1, -1):
        v = int(np.argmin(raw[i][: v + 1]))
        z[i] = grid[v]
    return z


QUARTER = np.arange(-8, 9) / 4.0  # {-2, -1.75, ..., 2}
GRID_240 = np.arange(-2 * 240, 2 * 240 + 1) / 240.0


def test_enum_and_dp_oracles_agree():
    rng = np.random.default_rng(7)
    for _ in range(120):
        n = int(rng.integers(1, 4))
        y = rng.choice(QUARTER, size=n)
        z_enum, obj = isotonic_enum(y, np.ones(n))
        z_dp = isotonic_dp(y, np.ones(n), GRID_240)
        assert np.max(np.abs(z_enum - z_dp)) <= 1e-9
        assert float(np.sum((z_dp - y) ** 2)) <= obj + 1e-12


# ------------------------------------------------------- frozen small cases


@pytest.mark.parametrize(
    "y, w, expected, merges",
    [
        ([3.0, 1.0, 2.0], None, [2.0, 2.0, 2.0], 1),
        ([1.0, 3.0, 2.0], None, [1.0, 2.5, 2.5], 1),
        ([0.0, -1.0, -2.0], None, [-1.0, -1.0, -1.0], 2),
        ([2.0, 0.0], [1.0, 3.0], [0.5, 0.5], 1),
        ([5.0], None, [5.0], 0),
        ([1.0, 1.0, 1.0], None, [1.0, 1.0, 1.0], 0),
    ],
)
def test_frozen_cases(y, w, expected, merges):
    y = np.asarray(y)
    w = np.ones_like(y) if w is None else np.asarray(w)
    out, m = pava(y, w)
    np.testing.assert_array_equal(out, np.asarray(expected))
    assert m == merges


def test_blocks_report_lengths_and_values():
    vals, lens, merges = pava_blocks(np.array([3.0, 1.0, 2.0]), np.ones(3))
    np.testing.assert_array_equal(vals, [2.0, 2.0])
    np.testing.assert_array_equal(lens, [2, 1])
    assert lens.dtype == np.int64
    assert merges == 1


# ------------------------------------------------------------- properties

finite_floats = st.floats(
    min_value=-100.0, max_value=100.0, allow_nan=False, allow_infinity=False
)


@given(st.lists(finite_floats, min_size=1, max_size=60))
@settings(max_examples=250, deadline=None)
def test_output_is_ordered_and_conservative(ys):
    y = np.asarray(ys)
    out, _ = pava(y, np.ones_like(y))
    assert np.all(np.diff(out) >= 0)
    assert abs(float(np.sum(out)) - float(np.sum(y))) <= 1e-9 * (1 + np.abs(y).sum())


@given(st.lists(finite_floats, min_size=1, max_size=60))
@settings(max_examples=250, deadline=None)
def test_idempotent_and_block_structured(ys):
    y = np.asarray(ys)
    out, _ = pava(y, np.ones_like(y))
    again, merges = pava(out, np.ones_like(y))
    assert np.array_equal(again, out)
    assert merges == 0
    vals, lens, _ = pava_blocks(y, np.ones_like(y))
    assert np.array_equal(np.repeat(vals, lens), out)


@given(st.lists(finite_floats, min_size=1, max_size=60))
@settings(max_examples=250, deadline=None)
def test_monotone_inputs_pass_through_bitwise(ys):
    y = np.sort(np.asarray(ys))
    out, merges = pava(y, np.ones_like(y))
    assert np.array_equal(out, y)
    assert merges == 0


@given(
    st.lists(
        st.tuples(finite_floats, st.floats(min_value=0.1, max_value=10.0)),
        min_size=1,
        max_size=3,
    )
)
@settings(max_examples=150, deadline=None)
def test_weighted_optimum_matches_enumeration(pairs):
    y = np.asarray([p[0] for p in pairs])
    w = np.asarray([p[1] for p in pairs])
    out, _ = pava(y, w)
    _, best_obj = isotonic_enum(y, w)
    obj = float(np.sum(w * (out - y) ** 2))
    assert obj <= best_obj + 1e-9 * (1 + best_obj)
    assert np.all(np.diff(out) >= 0)


def test_quarter_grid_inputs_match_dp_oracle():
    rng = np.random.default_rng(11)
    cases = [QUARTER[[i]] for i in range(len(QUARTER))]
    cases += [np.array(c) for c in itertools.product(QUARTER[::4], repeat=2)]
    for _ in range(200):
        n = int(rng.integers(3, 7))
        cases.append(rng.choice(QUARTER, size=n))
    for y in cases:
        out, _ = pava(y, np.ones_like(y))
        z = isotonic_dp(y, np.ones_like(y), GRID_240)
        assert np.max(np.abs(out - z)) <= 1e-9


def test_projection_wrapper_validates_weights():
    with pytest.raises(ValueError):
        isotonic_project([1.0, 2.0], weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        isotonic_project([1.0, 2.0], weights=[1.0, -1.0])


def test_projection_wrapper_returns_grid_function():
    g = isotonic_project([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(g.values, [2.0, 2.0, 2.0])
    assert not g.values.flags.writeable
