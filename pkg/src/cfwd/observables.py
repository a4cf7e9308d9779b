"""Trajectory records and the estimators that read them.

A :class:`TrajectoryRecord` is one replica's time series: particle counts,
center of mass, optional full snapshots, and per-probe series (tracked
coordinate pairs and +/-1 test functions).  The estimators here turn those
series into the quantities the verification suite asserts on: quadratic
variations, compensated martingales, supermartingale verdicts, and the
growth of the running maximum of the particle count across potentials with
more and more levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .monotone import (
    ClusterPartition,
    GridFunction,
    PotentialSpec,
    TestFunction,
    distinct_count,
    norm_sq,
    project_onto,
)

__all__ = [
    "PairProbeSeries",
    "ProbeSeries",
    "TrajectoryRecord",
    "CompensatedMartingale",
    "PairQvEstimate",
    "LagStat",
    "SupermartingaleReport",
    "particle_count",
    "compensated_martingale_h",
    "pair_qv_estimate",
    "supermartingale_test",
    "sup_count_statistic",
    "SweepCountSummary",
]


@dataclass(frozen=True)
class PairProbeSeries:
    """Per-snapshot state of a tracked coordinate pair plus running QV sums.

    ``realized_qv`` accumulates products of drift-compensated increments of
    the two coordinates over every step (not just snapshot steps);
    ``predicted_qv`` accumulates dt/mass over the steps on which the two
    coordinates coincided (always, for i == j).  ``mass`` is the cluster
    mass of coordinate i at the snapshot.
    """

    i: int
    j: int
    equal: np.ndarray
    mass: np.ndarray
    realized_qv: np.ndarray
    predicted_qv: np.ndarray


@dataclass(frozen=True)
class ProbeSeries:
    """Per-snapshot series for one +/-1 test function.

    ``xh`` is the pairing (X_t, h); ``compensator`` the left-endpoint
    quadrature of (drift, h); ``mh = xh - compensator`` the compensated
    martingale; ``qv`` the left-endpoint quadrature of the squared norm of
    the projected probe.  ``absorbed`` flags snapshots whose state is
    constant on the probe's support (equivalently, xh == 0 exactly).
    """

    probe_id: str
    fn: TestFunction
    xh: np.ndarray
    compensator: np.ndarray
    mh: np.ndarray
    qv: np.ndarray
    absorbed: np.ndarray


@dataclass(frozen=True)
class TrajectoryRecord:
    """One replica's recorded observables on the snapshot grid."""

    times: np.ndarray
    counts: np.ndarray
    com: np.ndarray
    pair_probes: tuple[PairProbeSeries, ...]
    h_probes: tuple[ProbeSeries, ...]
    snapshots: np.ndarray | None
    metadata: dict

    def __post_init__(self):
        m = self.times.shape[0]
        series = [self.counts, self.com]
        series += [p.equal for p in self.pair_probes]
        series += [p.xh for p in self.h_probes]
        if any(s.shape[0] != m for s in series):
            raise ValueError("all recorded series must share the snapshot grid")
        if self.snapshots is not None and self.snapshots.shape[0] != m:
            raise ValueError("snapshots must share the snapshot grid")

    @property
    def n(self) -> int:
        return int(self.metadata["config"]["n"])

    @property
    def dt(self) -> float:
        return float(self.metadata["config"]["dt"])

    @property
    def replica(self) -> int:
        return int(self.metadata["replica"])

    def potential(self) -> PotentialSpec:
        p = self.metadata["config"]["potential"]
        return PotentialSpec(tuple(p["breakpoints"]), tuple(p["level_values"]))

    def xi_grid(self) -> np.ndarray:
        return self.potential().materialize(self.n)

    def pair_probe(self, i: int, j: int) -> PairProbeSeries:
        for p in self.pair_probes:
            if (p.i, p.j) == (i, j):
                return p
        raise ValueError(f"pair ({i}, {j}) was not tracked in this record")

    def h_probe(self, fn: TestFunction) -> ProbeSeries:
        for p in self.h_probes:
            if (p.fn.i_lo, p.fn.i_hi, p.fn.n) == (fn.i_lo, fn.i_hi, fn.n):
                return p
        raise ValueError(
            f"test function on [{fn.u}, {fn.v}) was not tracked in this record"
        )


def particle_count(x: GridFunction) -> int:
    """Number of distinct particles: distinct values of the state."""
    return distinct_count(x)


@dataclass(frozen=True)
class CompensatedMartingale:
    """Discrete compensated martingale of a probe, from stored snapshots."""

    times: np.ndarray
    xh: np.ndarray
    mh: np.ndarray
    qv: np.ndarray


def compensated_martingale_h(
    record: TrajectoryRecord, h: TestFunction, xi_grid: np.ndarray | None = None
) -> CompensatedMartingale:
    """Recompute M_h and its predicted quadratic variation from snapshots.

    M_h(t) = (X_t, h) minus the left-endpoint quadrature of (xi - pr xi, h);
    the predicted QV is the left-endpoint quadrature of ||pr_{X_s} h||^2.
    Both quadratures run at snapshot resolution on the true step grid
    (intervals are integer multiples of dt), so with snapshot stride 1 they
    agree with the per-step accumulators recorded during the run up to
    summation order.
    """
    if record.snapshots is None:
        raise ValueError("record holds no snapshots; rerun with record_snapshots=True")
    if xi_grid is None:
        xi_grid = record.xi_grid()
    xi_grid = np.asarray(xi_grid, dtype=np.float64)
    times = record.times
    dt = record.dt
    steps = np.rint(times / dt).astype(np.int64)
    m = times.shape[0]
    xh = np.empty(m)
    mh = np.empty(m)
    qv = np.empty(m)
    comp = 0.0
    qv_acc = 0.0
    for s in range(m):
        x = record.snapshots[s]
        xh[s] = h.pairing(x)
        mh[s] = xh[s] - comp
        qv[s] = qv_acc
        if s + 1 < m:
            dt_s = int(steps[s + 1] - steps[s]) * dt
            part = _partition_of(x)
            drift = xi_grid - project_onto(part, xi_grid)
            comp += h.pairing(drift) * dt_s
            qv_acc += norm_sq(project_onto(part, h.values)) * dt_s
    return CompensatedMartingale(times=times, xh=xh, mh=mh, qv=qv)


def _partition_of(values: np.ndarray) -> ClusterPartition:
    cuts = np.flatnonzero(np.diff(values) != 0) + 1
    bounds = np.concatenate(([0], cuts, [values.shape[0]]))
    return ClusterPartition(bounds=bounds, n=values.shape[0])


@dataclass(frozen=True)
class PairQvEstimate:
    """Realized vs predicted joint quadratic variation of a tracked pair."""

    i: int
    j: int
    realized: float
    predicted: float

    @property
    def difference(self) -> float:
        return self.realized - self.predicted


def pair_qv_estimate(record: TrajectoryRecord, i: int, j: int) -> PairQvEstimate:
    """Final realized cross-variation and its predicted integral for (i, j).

    Realized: sum over steps of the product of drift-compensated increments.
    Predicted: sum of dt/mass over the steps where the coordinates shared a
    cluster (every step when i == j).
    """
    p = record.pair_probe(i, j)
    return PairQvEstimate(
        i=i,
        j=j,
        realized=float(p.realized_qv[-1]),
        predicted=float(p.predicted_qv[-1]),
    )


@dataclass(frozen=True)
class LagStat:
    lag: int
    mean: float
    se: float
    count: int


@dataclass(frozen=True)
class SupermartingaleReport:
    """Verdict on one probe: is (X_t, h) behaving as a supermartingale?

    ``verdict`` is "violated" only when some lag's mean increment exceeds
    +k standard errors; otherwise "consistent".  ``absorption_steps`` holds,
    per replica, the first snapshot index at which the state was constant on
    the probe support (None if never); ``zero_persistent`` reports whether
    every probe value from that snapshot on was exactly zero.
    """

    probe_id: str
    u: float
    v: float
    lag_stats: tuple[LagStat, ...]
    verdict: str
    absorption_steps: tuple[int | None, ...]
    zero_persistent: bool
    min_value: float
    k: float


def _default_lags(length: int) -> list[int]:
    lags = []
    lag = 1
    while lag <= max(1, (length - 1) // 2):
        lags.append(lag)
        lag *= 4
    return lags


def supermartingale_test(
    records: TrajectoryRecord | Sequence[TrajectoryRecord],
    h: TestFunction,
    k: float = 4.0,
    lags: Sequence[int] | None = None,
) -> SupermartingaleReport:
    """Check the non-negative supermartingale contract of (X_t, h).

    The probe must sit inside one level interval of the potential (the
    supermartingale property is only guaranteed there); probes straddling a
    potential breakpoint are refused.  Mean increments are estimated per lag
    by pooling non-overlapping increments across all replicas.
    """
    if isinstance(records, TrajectoryRecord):
        records = [records]
    if not records:
        raise ValueError("need at least one record")
    xi = records[0].xi_grid()
    support = xi[h.i_lo : h.i_hi]
    if support.size and np.any(support != support[0]):
        raise ValueError(
            f"probe on [{h.u}, {h.v}) straddles a potential breakpoint; "
            "the supermartingale contract holds only within one level interval"
        )

    series = [rec.h_probe(h) for rec in records]
    length = min(s.xh.shape[0] for s in series)
    if lags is None:
        lags = _default_lags(length)

    lag_stats = []
    violated = False
    for lag in lags:
        incs = []
        for s in series:
            xh = s.xh[:length]
            incs.append(xh[lag::lag] - xh[:-lag:lag])
        inc = np.concatenate(incs) if incs else np.empty(0)
        if inc.size == 0:
            continue
        mean = float(np.mean(inc))
        se = float(np.std(inc, ddof=1) / np.sqrt(inc.size)) if inc.size > 1 else 0.0
        lag_stats.append(LagStat(lag=lag, mean=mean, se=se, count=int(inc.size)))
        if mean > k * se:
            violated = True

    absorption_steps: list[int | None] = []
    zero_persistent = True
    min_value = np.inf
    for s in series:
        min_value = min(min_value, float(np.min(s.xh)))
        hit = np.flatnonzero(s.absorbed)
        if hit.size == 0:
            absorption_steps.append(None)
            continue
        a = int(hit[0])
        absorption_steps.append(a)
        if np.any(s.xh[a:] != 0.0) or not np.all(s.absorbed[a:]):
            zero_persistent = False

    return SupermartingaleReport(
        probe_id=f"u={h.u:.6g},v={h.v:.6g}",
        u=h.u,
        v=h.v,
        lag_stats=tuple(lag_stats),
        verdict="violated" if violated else "consistent",
        absorption_steps=tuple(absorption_steps),
        zero_persistent=zero_persistent,
        min_value=float(min_value),
        k=float(k),
    )


@dataclass(frozen=True)
class SweepCountSummary:
    """Particle-count statistics for one potential in a sweep."""

    distinct_levels: int
    replicas: int
    sup_counts: np.ndarray
    timeavg_counts: np.ndarray
    sup_mean: float
    sup_se: float
    sup_quantiles: dict
    timeavg_mean: float
    timeavg_se: float


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se


def sup_count_statistic(
    records: Iterable[TrajectoryRecord],
) -> tuple[SweepCountSummary, ...]:
    """Summarize max and time-average particle counts per potential.

    All records must share n, dt, and horizon, and differ only in the
    potential; each potential must appear with the same number of replicas.
    Rows come back ordered by the number of distinct potential levels.
    Per-replica values are ordered by replica index so that paired
    (common-seed) comparisons across rows line up.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    base = records[0].metadata["config"]
    groups: dict[int, list[TrajectoryRecord]] = {}
    for rec in records:
        cfg = rec.metadata["config"]
        for key in ("n", "dt", "t_end"):
            if cfg[key] != base[key]:
                raise ValueError(
                    f"records are inhomogeneous: {key}={cfg[key]!r} vs {base[key]!r}"
                )
        groups.setdefault(int(rec.metadata["distinct_levels"]), []).append(rec)

    sizes = {len(g) for g in groups.values()}
    if len(sizes) > 1:
        raise ValueError(f"unequal replica counts across potentials: {sorted(sizes)}")

    rows = []
    for levels in sorted(groups):
        group = sorted(groups[levels], key=lambda r: r.replica)
        sups = np.array([float(np.max(r.counts)) for r in group])
        tavgs = np.array([float(np.mean(r.counts)) for r in group])
        sup_mean, sup_se = _mean_se(sups)
        ta_mean, ta_se = _mean_se(tavgs)
        q = np.quantile(sups, [0.0, 0.25, 0.5, 0.75, 1.0])
        rows.append(
            SweepCountSummary(
                distinct_levels=levels,
                replicas=len(group),
                sup_counts=sups,
                timeavg_counts=tavgs,
                sup_mean=sup_mean,
                sup_se=sup_se,
                sup_quantiles={
                    "min": float(q[0]),
                    "q25": float(q[1]),
                    "median": float(q[2]),
                    "q75": float(q[3]),
                    "max": float(q[4]),
                },
                timeavg_mean=ta_mean,
                timeavg_se=ta_se,
            )
        )
    return tuple(rows)
