"""Discrete-time dynamics: sticky ordered diffusion with mass-scaled noise.

One step, from a non-decreasing state x on the n-cell grid:

1. decompose x into clusters (maximal runs of exactly equal values);
2. draw one Gaussian increment per cluster with variance dt / mass, where
   mass = cells / n, and add it to every cell of the cluster;
3. add dt * (xi - pr_x xi), the fragmentation drift, which pulls each cell
   toward its own potential value relative to the cluster average;
4. restore order with the isotonic projection; newly level runs of the
   projected proposal are the merged clusters of the next state.

The projection is what makes clusters sticky: once two cells share a value
(and their potential values agree) their proposals coincide bitwise, so no
later step can split them.  All cluster bookkeeping relies on exact float
equality; see :mod:`cfwd.monotone` for why that is stable here.

Noise is drawn from one Philox stream per (seed, replica) pair, one normal
per cluster per step in block order, so runs are reproducible bit for bit
across processes and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .isotonic import pava_blocks
from .monotone import (
    ClusterPartition,
    GridFunction,
    PotentialSpec,
    TestFunction,
    _block_means,
    cluster_decompose,
    materialize_potential,
    norm_sq,
    project_onto,
)
from .observables import PairProbeSeries, ProbeSeries, TrajectoryRecord

__all__ = [
    "SimConfig",
    "SimState",
    "StepReport",
    "InvariantViolation",
    "parse_initial",
    "init_state",
    "drift_term",
    "sample_cluster_noise",
    "step",
    "run",
]

RNG_ALGORITHM = "Philox4x64-10"

_MEAN_TOL = 1e-10


class InvariantViolation(RuntimeError):
    """A structural invariant of the dynamics failed during a run.

    ``kind`` is one of "order", "conservation", "level_set_separation",
    "non_finite"; ``detail`` carries a JSON-serializable diagnostic payload
    including the step index and enough state to reproduce the failure.
    """

    def __init__(self, kind: str, step_index: int, message: str, detail: dict):
        super().__init__(f"[step {step_index}] {kind}: {message}")
        self.kind = kind
        self.step_index = step_index
        self.detail = dict(detail, kind=kind, step_index=step_index)


@dataclass(frozen=True)
class SimConfig:
    """Immutable description of one simulation.

    ``initial`` is either a preset string ("constant:c", "identity",
    "levels:k") or an explicit non-decreasing vector of length n.  The
    potential is a :class:`PotentialSpec`; it is materialized onto the grid
    once per run.  ``snapshot_stride`` controls how often observables are
    recorded; the initial state and the final step are always recorded.
    """

    n: int
    dt: float
    t_end: float
    seed: int
    potential: PotentialSpec
    initial: str | tuple[float, ...] = "constant:0.0"
    noise_enabled: bool = True
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (self.t_end >= 0 and np.isfinite(self.t_end)):
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if not isinstance(self.potential, PotentialSpec):
            raise TypeError("potential must be a PotentialSpec")
        if not isinstance(self.initial, str):
            object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        self.initial_values()  # fail fast on a bad initial condition

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.t_end / self.dt + 1e-9))

    def initial_values(self) -> np.ndarray:
        return parse_initial(self.initial, self.n)

    def xi_grid(self) -> np.ndarray:
        return materialize_potential(self.potential, self.n)

    def describe(self) -> dict:
        """JSON-serializable view of the configuration."""
        initial = self.initial if isinstance(self.initial, str) else list(self.initial)
        return {
            "n": self.n,
            "dt": self.dt,
            "t_end": self.t_end,
            "seed": self.seed,
            "initial": initial,
            "potential": {
                "breakpoints": list(self.potential.breakpoints),
                "level_values": list(self.potential.level_values),
            },
            "noise_enabled": self.noise_enabled,
            "snapshot_stride": self.snapshot_stride,
        }


def parse_initial(initial: str | Sequence[float], n: int) -> np.ndarray:
    """Materialize an initial-condition preset onto the n-cell grid.

    Presets: "constant:c" (every cell at c), "identity" (cell i at i/n),
    "levels:k" (the k-level staircase, same shape as the levels potential).
    An explicit sequence must have length n and be non-decreasing.
    """
    if isinstance(initial, str):
        name, _, arg = initial.partition(":")
        if name == "constant":
            try:
                c = float(arg)
            except ValueError:
                raise ValueError(f"bad constant initial {initial!r}") from None
            if not np.isfinite(c):
                raise ValueError(f"constant initial must be finite, got {c}")
            return np.full(n, c)
        if name == "identity":
            if arg:
                raise ValueError(f"identity initial takes no argument, got {initial!r}")
            return np.arange(n, dtype=np.float64) / n
        if name == "levels":
            try:
                k = int(arg)
            except ValueError:
                raise ValueError(f"bad levels initial {initial!r}") from None
            return PotentialSpec.levels(k).materialize(n)
        raise ValueError(f"unknown initial preset {initial!r}")
    values = np.asarray(initial, dtype=np.float64)
    if values.shape != (n,):
        raise ValueError(f"explicit initial must have length {n}, got {values.shape}")
    return GridFunction(values).values


@dataclass(frozen=True)
class SimState:
    """State of the simulation after ``step_index`` steps."""

    x: GridFunction
    partition: ClusterPartition
    t: float
    step_index: int
    rng: np.random.Generator


@dataclass(frozen=True)
class StepReport:
    """What one step did, for probes and diagnostics.

    ``noise_increments`` has one entry per cluster of the pre-step state (in
    block order); ``drift_increments`` is per cell and already scaled by dt;
    ``pre_pool_proposal`` is the proposal before the isotonic projection;
    ``merges`` counts the pooling operations the projection performed.
    """

    noise_increments: np.ndarray
    drift_increments: np.ndarray
    pre_pool_proposal: np.ndarray
    merges: int


def init_state(config: SimConfig, replica: int = 0) -> SimState:
    """Initial state plus a replica-specific Philox stream.

    Streams for different (seed, replica) pairs are statistically
    independent and reproducible: the generator is seeded from the spawn-safe
    sequence of the two integers, so replica r of seed s is the same bit
    stream on every machine and in every process layout.
    """
    if replica < 0:
        raise ValueError(f"replica must be >= 0, got {replica}")
    x = GridFunction(config.initial_values())
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([config.seed, replica]))
    )
    return SimState(
        x=x,
        partition=cluster_decompose(x),
        t=0.0,
        step_index=0,
        rng=rng,
    )


def drift_term(x: GridFunction, xi_grid: np.ndarray) -> np.ndarray:
    """Fragmentation drift rate xi - pr_x xi, per cell.

    On a cluster where xi is constant the centered values are exact zeros,
    so the drift cannot nudge a fully relaxed cluster.
    """
    xi_grid = np.asarray(xi_grid, dtype=np.float64)
    if xi_grid.shape != (x.n,):
        raise ValueError(f"xi_grid must have shape ({x.n},), got {xi_grid.shape}")
    part = cluster_decompose(x)
    return xi_grid - part.expand(_block_means(xi_grid, part.bounds))


def sample_cluster_noise(
    partition: ClusterPartition, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """One Gaussian increment per cluster, variance dt / mass, block order."""
    z = rng.standard_normal(partition.size)
    return z * np.sqrt(dt / partition.masses)


def step(
    state: SimState,
    config: SimConfig,
    xi_grid: np.ndarray | None = None,
    _weights: np.ndarray | None = None,
) -> tuple[SimState, StepReport]:
    """Advance one step of size dt; returns the new state and a report.

    Noise and drift form the proposal; the isotonic projection restores
    order and merges any newly level neighbors into common clusters.  The
    state advances in place of the shared rng (cluster noise consumes
    ``partition.size`` normals), so replaying a step requires replaying the
    stream.
    """
    n = config.n
    if xi_grid is None:
        xi_grid = config.xi_grid()
    part = state.partition
    x = state.x.values
    lengths = part.lengths

    means = _block_means(xi_grid, part.bounds, lengths)
    drift_inc = (xi_grid - np.repeat(means, lengths)) * config.dt
    if config.noise_enabled:
        noise_inc = sample_cluster_noise(part, config.dt, state.rng)
    else:
        noise_inc = np.zeros(part.size)
    proposal = x + np.repeat(noise_inc, lengths) + drift_inc

    if _weights is None:
        _weights = np.ones(n)
    block_values, block_lengths, merges = pava_blocks(proposal, _weights)
    if not np.all(np.isfinite(block_values)):
        raise InvariantViolation(
            "non_finite",
            state.step_index + 1,
            "state left the finite range",
            {"t": state.t + config.dt},
        )
    new_values = np.repeat(block_values, block_lengths)

    # merge adjacent projection blocks that landed on the same value
    cuts = np.cumsum(block_lengths)[:-1][np.diff(block_values) != 0]
    bounds = np.empty(cuts.shape[0] + 2, dtype=np.int64)
    bounds[0] = 0
    bounds[1:-1] = cuts
    bounds[-1] = n
    new_lengths = block_lengths if cuts.shape[0] + 1 == block_values.shape[0] else None
    new_state = SimState(
        x=GridFunction._trusted(new_values),
        partition=ClusterPartition._trusted(bounds, n, new_lengths),
        t=(state.step_index + 1) * config.dt,
        step_index=state.step_index + 1,
        rng=state.rng,
    )
    report = StepReport(
        noise_increments=noise_inc,
        drift_increments=drift_inc,
        pre_pool_proposal=proposal,
        merges=merges,
    )
    return new_state, report


def _xi_flat_mask(xi_grid: np.ndarray) -> np.ndarray:
    """mask[p] for interior boundaries p=1..n-1: xi equal across p."""
    n = xi_grid.shape[0]
    mask = np.zeros(n + 1, dtype=bool)
    mask[1:n] = xi_grid[1:] == xi_grid[:-1]
    return mask


def _cut_mask(bounds: np.ndarray, n: int) -> np.ndarray:
    mask = np.zeros(n + 1, dtype=bool)
    mask[bounds] = True
    return mask


def run(
    config: SimConfig,
    replica: int = 0,
    pair_probes: Sequence[tuple[int, int]] = (),
    h_probes: Sequence[TestFunction] = (),
    record_snapshots: bool = False,
    check_invariants: bool = True,
    debug_state_hook: Callable[[int, np.ndarray], np.ndarray] | None = None,
) -> TrajectoryRecord:
    """Run one replica and record observables on the snapshot grid.

    Per-step invariant checks (on by default): the post-step state is
    ordered, its mean equals the proposal mean to 1e-10 (pooling conserves
    mass), no cluster boundary appears inside a run of equal potential
    values where none existed (coalesced cells with equal potential never
    separate), and the state stays finite.  Violations raise
    :class:`InvariantViolation` with the offending step in the payload.

    ``pair_probes`` tracks coordinate pairs (i, j): per step, the realized
    product of drift-compensated increments and the predicted dt / mass on
    steps where the pair shares a cluster.  ``h_probes`` tracks +/-1 test
    functions: the pairing (X_t, h), its drift compensator, and the
    predicted quadratic variation, all on the left-endpoint quadrature.

    ``debug_state_hook`` maps (step_index, values) -> values and is applied
    to the post-step state before checks; it exists to fault-inject states
    in tests of the failure path and must be None in production runs.
    """
    for i, j in pair_probes:
        if not (0 <= i < config.n and 0 <= j < config.n):
            raise ValueError(f"pair probe ({i}, {j}) out of range for n={config.n}")
    for h in h_probes:
        if h.n != config.n:
            raise ValueError(f"test function on n={h.n} grid, config has n={config.n}")

    state = init_state(config, replica)
    xi = config.xi_grid()
    xi_flat = _xi_flat_mask(xi)
    cut_mask = _cut_mask(state.partition.bounds, config.n)
    weights = np.ones(config.n)
    n_steps = config.n_steps

    times = [0.0]
    counts = [state.partition.size]
    com = [float(np.mean(state.x.values))]
    snaps = [state.x.values.copy()] if record_snapshots else None

    pair_acc = [
        {"realized": 0.0, "predicted": 0.0, "equal": [], "mass": [],
         "r_series": [], "p_series": []}
        for _ in pair_probes
    ]
    h_acc = [
        {"comp": 0.0, "qv": 0.0, "xh": [], "comp_series": [], "qv_series": [],
         "absorbed": []}
        for _ in h_probes
    ]

    def _pair_snapshot(st: SimState):
        for (i, j), acc in zip(pair_probes, pair_acc):
            xv = st.x.values
            acc["equal"].append(bool(xv[i] == xv[j]))
            bi = st.partition.block_of(i)
            acc["mass"].append(st.partition.lengths[bi] / config.n)
            acc["r_series"].append(acc["realized"])
            acc["p_series"].append(acc["predicted"])

    def _h_snapshot(st: SimState):
        for h, acc in zip(h_probes, h_acc):
            acc["xh"].append(h.pairing(st.x.values))
            acc["comp_series"].append(acc["comp"])
            acc["qv_series"].append(acc["qv"])
            acc["absorbed"].append(h.support_in_one_block(st.partition))

    _pair_snapshot(state)
    _h_snapshot(state)

    for k in range(n_steps):
        prev = state
        state, report = step(prev, config, xi_grid=xi, _weights=weights)

        if debug_state_hook is not None:
            hooked = np.asarray(
                debug_state_hook(state.step_index, state.x.values), dtype=np.float64
            )
            if hooked.shape != (config.n,):
                raise ValueError("debug_state_hook must preserve the state shape")
            cuts = np.flatnonzero(np.diff(hooked) != 0) + 1
            state = replace(
                state,
                x=GridFunction._trusted(hooked),
                partition=ClusterPartition(
                    bounds=np.concatenate(([0], cuts, [config.n])), n=config.n
                ),
            )

        if check_invariants:
            cut_mask = _check_step(state, report, cut_mask, xi_flat, config)

        # probe accumulators advance every step at the pre-step state
        for (i, j), acc in zip(pair_probes, pair_acc):
            xv = prev.x.values
            bi = prev.partition.block_of(i)
            if xv[i] == xv[j]:
                acc["predicted"] += config.dt * config.n / prev.partition.lengths[bi]
            dmi = state.x.values[i] - xv[i] - report.drift_increments[i]
            dmj = state.x.values[j] - xv[j] - report.drift_increments[j]
            acc["realized"] += dmi * dmj
        for h, acc in zip(h_probes, h_acc):
            acc["comp"] += h.pairing(report.drift_increments)
            acc["qv"] += norm_sq(project_onto(prev.partition, h.values)) * config.dt

        if (k + 1) % config.snapshot_stride == 0 or (k + 1) == n_steps:
            times.append(state.t)
            counts.append(state.partition.size)
            com.append(float(np.mean(state.x.values)))
            if snaps is not None:
                snaps.append(state.x.values.copy())
            _pair_snapshot(state)
            _h_snapshot(state)

    pair_series = tuple(
        PairProbeSeries(
            i=i,
            j=j,
            equal=np.array(acc["equal"], dtype=bool),
            mass=np.array(acc["mass"]),
            realized_qv=np.array(acc["r_series"]),
            predicted_qv=np.array(acc["p_series"]),
        )
        for (i, j), acc in zip(pair_probes, pair_acc)
    )
    h_series = tuple(
        ProbeSeries(
            probe_id=f"u={h.u:.6g},v={h.v:.6g}",
            fn=h,
            xh=np.array(acc["xh"]),
            compensator=np.array(acc["comp_series"]),
            mh=np.array(acc["xh"]) - np.array(acc["comp_series"]),
            qv=np.array(acc["qv_series"]),
            absorbed=np.array(acc["absorbed"], dtype=bool),
        )
        for h, acc in zip(h_probes, h_acc)
    )

    metadata = {
        "config": config.describe(),
        "replica": replica,
        "n_steps": n_steps,
        "distinct_levels": config.potential.distinct_level_count(config.n),
        "rng": {
            "algorithm": RNG_ALGORITHM,
            "provider": "numpy.random.Philox",
            "numpy_version": np.__version__,
            "seed": config.seed,
            "replica": replica,
        },
        "invariant_checks": bool(check_invariants),
    }
    return TrajectoryRecord(
        times=np.array(times),
        counts=np.array(counts, dtype=np.int64),
        com=np.array(com),
        pair_probes=pair_series,
        h_probes=h_series,
        snapshots=np.array(snaps) if snaps is not None else None,
        metadata=metadata,
    )


def _check_step(
    state: SimState,
    report: StepReport,
    old_cuts: np.ndarray,
    xi_flat: np.ndarray,
    config: SimConfig,
) -> np.ndarray:
    """Validate one step; returns the new cut mask for the next call."""
    values = state.x.values
    block_values = values[state.partition.starts]
    if np.any(np.diff(block_values) < 0):
        raise InvariantViolation(
            "order",
            state.step_index,
            "post-step state is not non-decreasing",
            _state_payload(state),
        )
    n = config.n
    mean_before = float(np.sum(report.pre_pool_proposal)) / n
    mean_after = float(np.sum(values)) / n
    if abs(mean_after - mean_before) > _MEAN_TOL:
        raise InvariantViolation(
            "conservation",
            state.step_index,
            f"pooling moved the mean by {mean_after - mean_before:.3e}",
            dict(
                _state_payload(state),
                mean_before=mean_before,
                mean_after=mean_after,
            ),
        )
    new_cuts = _cut_mask(state.partition.bounds, n)
    bad = new_cuts & ~old_cuts & xi_flat
    if np.any(bad):
        raise InvariantViolation(
            "level_set_separation",
            state.step_index,
            "a cluster split inside a flat stretch of the potential",
            dict(_state_payload(state), positions=np.flatnonzero(bad).tolist()),
        )
    return new_cuts


def _state_payload(state: SimState) -> dict:
    values = state.x.values
    if values.shape[0] <= 1024:
        dump = values.tolist()
    else:
        dump = {
            "head": values[:32].tolist(),
            "tail": values[-32:].tolist(),
            "min": float(values.min()),
            "max": float(values.max()),
        }
    return {"t": state.t, "state": dump}
