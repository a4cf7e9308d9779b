"""Monotone step functions on a uniform grid and their cluster geometry.

A state of the particle system is a non-decreasing vector of n positions.
Cell i (0-based) represents the label interval [i/n, (i+1)/n) and carries
mass 1/n; the vector is read as a right-continuous step function on (0, 1).
Maximal runs of exactly equal values are *clusters*.  The central operator
is the level-set projection ``project``: conditional expectation given the
cluster structure, i.e. blockwise averaging.

Equality of positions is exact floating-point equality throughout.  Values
only become equal through the pooling step of ``isotonic_project``, which
assigns one shared float to every member of a pooled block, so no equality
tolerance is needed (and none is applied).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .isotonic import pava

__all__ = [
    "GridFunction",
    "ClusterPartition",
    "PotentialSpec",
    "TestFunction",
    "cluster_decompose",
    "project",
    "project_onto",
    "inner_product",
    "norm_sq",
    "hs_norm_sq",
    "distinct_count",
    "isotonic_project",
    "materialize_potential",
    "make_test_function",
]

# Blocks at least this long get their deviation sums recomputed with
# pairwise summation; reduceat accumulates sequentially.
_PAIRWISE_BLOCK_LEN = 4096


def as_values(h, n: int | None = None) -> np.ndarray:
    """Coerce a vector-like (array, list, GridFunction, TestFunction) to float64.

    Checks finiteness and, if ``n`` is given, the length.
    """
    v = getattr(h, "values", h)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"length mismatch: expected {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


@dataclass(frozen=True)
class GridFunction:
    """A non-decreasing step function: n finite positions on the uniform grid."""

    values: np.ndarray

    def __post_init__(self):
        v = as_values(self.values)
        if v.shape[0] < 1:
            raise ValueError("grid function needs at least one cell")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be non-decreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def _trusted(cls, values: np.ndarray) -> "GridFunction":
        # Fast path for values already known monotone and finite (e.g. the
        # output of the pooling step inside the simulation loop).
        self = object.__new__(cls)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        return self

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )

    def __hash__(self):
        return hash((self.values.shape[0], self.values.tobytes()))


@dataclass(frozen=True)
class ClusterPartition:
    """Ordered maximal blocks of equal-valued cells.

    ``bounds`` holds the B+1 block boundaries [0, b1, ..., n]; block k is the
    half-open index range ``bounds[k]:bounds[k+1]``.  Block masses are
    length/n and sum to 1 exactly because the integer lengths sum to n.
    """

    bounds: np.ndarray
    n: int

    def __post_init__(self):
        b = np.ascontiguousarray(self.bounds, dtype=np.int64)
        if b.ndim != 1 or b.shape[0] < 2 or b[0] != 0 or b[-1] != self.n:
            raise ValueError("bounds must run from 0 to n")
        lengths = np.diff(b)
        if np.any(lengths <= 0):
            raise ValueError("bounds must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "_lengths", lengths)
        object.__setattr__(self, "_masses", None)

    @classmethod
    def _trusted(
        cls, bounds: np.ndarray, n: int, lengths: np.ndarray | None = None
    ) -> "ClusterPartition":
        # Fast path for bounds already known valid (the simulation loop
        # builds them from cumulative block lengths every step).
        self = object.__new__(cls)
        bounds.setflags(write=False)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "n", n)
        object.__setattr__(
            self, "_lengths", np.diff(bounds) if lengths is None else lengths
        )
        object.__setattr__(self, "_masses", None)
        return self

    @property
    def size(self) -> int:
        """Number of blocks."""
        return self.bounds.shape[0] - 1

    @property
    def starts(self) -> np.ndarray:
        return self.bounds[:-1]

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    @property
    def masses(self) -> np.ndarray:
        if self._masses is None:
            object.__setattr__(self, "_masses", self._lengths / self.n)
        return self._masses

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """Half-open (start, stop) index pairs."""
        b = self.bounds
        return [(int(b[k]), int(b[k + 1])) for k in range(self.size)]

    def block_of(self, i: int) -> int:
        """Index of the block containing cell i."""
        if not 0 <= i < self.n:
            raise IndexError(f"cell index {i} out of range for n={self.n}")
        return int(np.searchsorted(self.bounds, i, side="right")) - 1

    def expand(self, per_block: np.ndarray) -> np.ndarray:
        """Broadcast one value per block back to the n cells."""
        return np.repeat(per_block, self.lengths)


def cluster_decompose(f: GridFunction) -> ClusterPartition:
    """Split a monotone vector into maximal runs of exactly equal values."""
    if not isinstance(f, GridFunction):
        f = GridFunction(as_values(f))
    v = f.values
    cuts = np.flatnonzero(np.diff(v) != 0) + 1
    bounds = np.concatenate(([0], cuts, [v.shape[0]]))
    return ClusterPartition(bounds=bounds, n=v.shape[0])


def _block_means(
    values: np.ndarray, bounds: np.ndarray, lengths: np.ndarray | None = None
) -> np.ndarray:
    """Per-block means, anchored at each block's first entry.

    Working with deviations from the anchor keeps constant blocks exact:
    their deviations are identically zero, so the mean returns the anchor
    bit-for-bit.  This is what makes projection idempotence and the
    zero-drift-on-level-sets property exact rather than approximate.
    """
    starts = bounds[:-1]
    if lengths is None:
        lengths = np.diff(bounds)
    anchors = values[starts]
    if values.ndim == 1:
        dev = values - np.repeat(anchors, lengths)
    else:
        dev = values - np.repeat(anchors, lengths, axis=0)
    sums = np.add.reduceat(dev, starts, axis=0)
    if lengths.max() >= _PAIRWISE_BLOCK_LEN:
        for k in np.flatnonzero(lengths >= _PAIRWISE_BLOCK_LEN):
            sums[k] = np.sum(dev[bounds[k] : bounds[k + 1]], axis=0)
    if values.ndim == 1:
        return anchors + sums / lengths
    return anchors + sums / lengths[:, None]


def project(f: GridFunction, h) -> np.ndarray:
    """Project h onto the functions measurable w.r.t. the level sets of f.

    Replaces h on every cluster of f by the cluster's arithmetic mean (cells
    carry equal mass).  The operator is idempotent, self-adjoint for
    ``inner_product``, and maps monotone inputs to monotone outputs.
    """
    part = cluster_decompose(f)
    h = as_values(h, part.n)
    return part.expand(_block_means(h, part.bounds))


def project_onto(partition: ClusterPartition, h: np.ndarray) -> np.ndarray:
    """Blockwise-mean projection against a precomputed partition."""
    return np.repeat(
        _block_means(h, partition.bounds, partition.lengths), partition.lengths
    )


def inner_product(a, b) -> float:
    """Discrete L2 pairing: (1/n) * sum(a*b), each cell weighted by mass 1/n."""
    a = as_values(a)
    b = as_values(b, a.shape[0])
    return float(np.sum(a * b) / a.shape[0])


def norm_sq(a) -> float:
    """Squared L2 norm under the uniform cell mass."""
    a = as_values(a)
    return float(np.sum(a * a) / a.shape[0])


def distinct_count(f: GridFunction) -> int:
    """Number of distinct values (= number of clusters)."""
    return cluster_decompose(f).size


def hs_norm_sq(f: GridFunction, chunk: int = 256) -> float:
    """Squared Hilbert-Schmidt norm of the level-set projection of f.

    Computed honestly as sum_k ||project(f, e_k)||^2 over the orthonormal
    basis e_k = sqrt(n) * 1_{cell k}, in column chunks.  The result equals
    ``distinct_count(f)`` (the trace of the blockwise-averaging matrix is
    the number of blocks); keeping the summation route makes that identity
    a testable statement instead of a tautology.
    """
    part = cluster_decompose(f)
    n = part.n
    scale = math.sqrt(n)
    total = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        basis = np.zeros((n, hi - lo))
        basis[np.arange(lo, hi), np.arange(hi - lo)] = scale
        proj = np.repeat(_block_means(basis, part.bounds), part.lengths, axis=0)
        total += float(np.sum(proj * proj))
    return total / n


def isotonic_project(proposal, weights=None) -> GridFunction:
    """Weighted least-squares projection onto the non-decreasing cone.

    Pool-adjacent-violators: the minimizer of sum w_i (y_i - proposal_i)^2
    over non-decreasing y.  Every pooled block receives exactly one shared
    float (its weighted mean), so the output decomposes into clusters by
    exact equality.  Monotone inputs are returned unchanged and the weighted
    sum is conserved up to roundoff.
    """
    p = as_values(proposal)
    if weights is None:
        w = np.ones_like(p)
    else:
        w = as_values(weights, p.shape[0])
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
    out, _ = pava(p, w)
    return GridFunction._trusted(out)


@dataclass(frozen=True)
class PotentialSpec:
    """A bounded non-decreasing right-continuous step function on (0, 1).

    Given as strictly increasing breakpoints inside (0, 1) and one level
    value per piece (len(level_values) == len(breakpoints) + 1).
    """

    breakpoints: tuple[float, ...]
    level_values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        lv = tuple(float(v) for v in self.level_values)
        if len(lv) != len(bp) + 1:
            raise ValueError("need exactly one more level value than breakpoints")
        if not all(np.isfinite(bp)) or not all(np.isfinite(lv)):
            raise ValueError("breakpoints and level values must be finite")
        if any(not 0.0 < b < 1.0 for b in bp):
            raise ValueError("breakpoints must lie strictly inside (0, 1)")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(v2 < v1 for v1, v2 in zip(lv, lv[1:])):
            raise ValueError("level values must be non-decreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "level_values", lv)

    @property
    def bound(self) -> float:
        """Max absolute level value."""
        return max(abs(v) for v in self.level_values)

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls(breakpoints=(), level_values=(float(c),))

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls.constant(0.0)

    @classmethod
    def levels(cls, k: int) -> "PotentialSpec":
        """k equal-width steps spanning [0, 1) with values j/k, j = 0..k-1."""
        if k < 1:
            raise ValueError("level count must be >= 1")
        return cls(
            breakpoints=tuple(j / k for j in range(1, k)),
            level_values=tuple(j / k for j in range(k)),
        )

    def materialize(self, n: int) -> np.ndarray:
        """Evaluate on the n-cell grid at each cell's left endpoint.

        Right-continuous convention: a cell starting exactly at a breakpoint
        takes the value of the piece to the right.
        """
        if n < 1:
            raise ValueError("grid size must be >= 1")
        u = np.arange(n) / n
        idx = np.searchsorted(np.asarray(self.breakpoints), u, side="right")
        return np.asarray(self.level_values)[idx]

    def distinct_level_count(self, n: int) -> int:
        """Number of distinct values after materialization on the n-grid."""
        return int(np.unique(self.materialize(n)).size)


def materialize_potential(spec: PotentialSpec, n: int) -> np.ndarray:
    """Grid restriction of a potential; see PotentialSpec.materialize."""
    return spec.materialize(n)


@dataclass(frozen=True)
class TestFunction:
    """The probe h = 1 on [(u+v)/2, v), -1 on [u, (u+v)/2), 0 elsewhere.

    For every monotone f the pairing (f, h) is non-negative: the upper half
    of the support dominates the lower half cell by cell.  ``pairing``
    evaluates the inner product as a difference of two equal-length slice
    sums, which returns exactly 0.0 whenever the argument is constant on the
    support (both sums are then bitwise identical).
    """

    n: int
    i_lo: int
    i_mid: int
    i_hi: int
    values: np.ndarray = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if not 0 <= self.i_lo < self.i_mid < self.i_hi <= self.n:
            raise ValueError("support indices out of order")
        if self.i_mid - self.i_lo != self.i_hi - self.i_mid:
            raise ValueError("support halves must have equal length")
        v = np.zeros(self.n)
        v[self.i_lo : self.i_mid] = -1.0
        v[self.i_mid : self.i_hi] = 1.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def u(self) -> float:
        return self.i_lo / self.n

    @property
    def v(self) -> float:
        return self.i_hi / self.n

    def pairing(self, x) -> float:
        """(x, h) as (sum over upper half - sum over lower half) / n."""
        xv = getattr(x, "values", x)
        upper = np.sum(xv[self.i_mid : self.i_hi])
        lower = np.sum(xv[self.i_lo : self.i_mid])
        return float((upper - lower) / self.n)

    def support_in_one_block(self, partition: ClusterPartition) -> bool:
        """True when some cluster contains the whole support [u, v)."""
        k = partition.block_of(self.i_lo)
        return int(partition.bounds[k + 1]) >= self.i_hi


def _grid_index(u: float, n: int, name: str) -> int:
    i = u * n
    j = round(i)
    if abs(i - j) > 1e-9:
        raise ValueError(f"{name}={u} is not a multiple of 1/{n}")
    return int(j)


def make_test_function(u: float, v: float, n: int) -> TestFunction:
    """Build the +/-1 probe for grid points u < v with (u+v)/2 on the grid."""
    i_lo = _grid_index(u, n, "u")
    i_hi = _grid_index(v, n, "v")
    if not 0 <= i_lo < i_hi <= n:
        raise ValueError(f"need 0 <= u < v <= 1 on the 1/{n} grid")
    if (i_lo + i_hi) % 2 != 0:
        raise ValueError(f"midpoint ({u}+{v})/2 is not a grid point for n={n}")
    return TestFunction(n=n, i_lo=i_lo, i_mid=(i_lo + i_hi) // 2, i_hi=i_hi)
