"""Experiment plans, batch execution, and deterministic result emission.

A plan is a small YAML document naming one simulation configuration, a
replica count, optional probes, and an optional sweep over potentials.
``run_plan`` executes every (sweep point, replica) pair; ``emit`` writes the
records as CSV tables plus a ``summary.json``.  Everything written is a pure
function of the plan: no timestamps, no environment-dependent formatting, so
rerunning a plan reproduces every output byte for byte.

Floats are rendered with ``repr``, the shortest round-trip representation,
and JSON keys are sorted.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import yaml

from ._version import __version__
from .dynamics import RNG_ALGORITHM, SimConfig, run
from .monotone import PotentialSpec, TestFunction, make_test_function
from .observables import TrajectoryRecord

__all__ = [
    "PlanError",
    "ExperimentPlan",
    "ResultBundle",
    "parse_plan",
    "parse_potential",
    "run_plan",
    "emit",
]

_PLAN_KEYS = {
    "name",
    "n",
    "dt",
    "t_end",
    "seed",
    "replicas",
    "potential",
    "initial",
    "noise_enabled",
    "snapshot_stride",
    "pair_probes",
    "h_probes",
    "record_snapshots",
    "sweep",
}


class PlanError(ValueError):
    """A plan file or configuration is malformed."""


def parse_potential(obj) -> tuple[PotentialSpec, str]:
    """Resolve a potential description to (spec, label).

    Accepts the presets "zero", "constant:c", "levels:k", or a mapping with
    explicit ``breakpoints`` and ``level_values``.
    """
    if isinstance(obj, str):
        name, _, arg = obj.partition(":")
        try:
            if obj == "zero":
                return PotentialSpec.zero(), "zero"
            if name == "constant":
                return PotentialSpec.constant(float(arg)), obj
            if name == "levels":
                return PotentialSpec.levels(int(arg)), obj
        except ValueError as e:
            raise PlanError(f"bad potential {obj!r}: {e}") from None
        raise PlanError(f"unknown potential preset {obj!r}")
    if isinstance(obj, dict):
        extra = set(obj) - {"breakpoints", "level_values"}
        if extra:
            raise PlanError(f"unknown potential keys {sorted(extra)}")
        try:
            spec = PotentialSpec(
                breakpoints=tuple(obj.get("breakpoints", ())),
                level_values=tuple(obj["level_values"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise PlanError(f"bad explicit potential: {e}") from None
        return spec, "custom"
    raise PlanError(f"potential must be a preset string or a mapping, got {obj!r}")


@dataclass(frozen=True)
class ExperimentPlan:
    """A named batch of replicas of one configuration, optionally swept.

    ``h_probes`` holds (u, v) endpoints; the test functions themselves are
    built against the grid when the plan runs.  ``sweep`` replaces the base
    potential point by point, everything else (seeds included) shared, so
    sweep points are coupled replica by replica.
    """

    name: str
    config: SimConfig
    replicas: int = 1
    pair_probes: tuple[tuple[int, int], ...] = ()
    h_probes: tuple[tuple[float, float], ...] = ()
    record_snapshots: bool = False
    potential_label: str = "custom"
    sweep: tuple[PotentialSpec, ...] = ()
    sweep_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.replicas < 1:
            raise PlanError(f"replicas must be >= 1, got {self.replicas}")
        if len(self.sweep) != len(self.sweep_labels):
            raise PlanError("sweep and sweep_labels must have equal length")
        self.test_functions()  # fail fast on off-grid probe endpoints

    def test_functions(self) -> tuple[TestFunction, ...]:
        try:
            return tuple(
                make_test_function(u, v, self.config.n) for u, v in self.h_probes
            )
        except ValueError as e:
            raise PlanError(str(e)) from None

    def points(self) -> tuple[tuple[str, SimConfig], ...]:
        """(label, config) per sweep point; a single point without a sweep."""
        if not self.sweep:
            return ((self.potential_label, self.config),)
        return tuple(
            (label, replace(self.config, potential=pot))
            for label, pot in zip(self.sweep_labels, self.sweep)
        )

    def describe(self) -> dict:
        """Canonical JSON-serializable echo of the plan."""
        return {
            "name": self.name,
            "config": self.config.describe(),
            "replicas": self.replicas,
            "pair_probes": [list(p) for p in self.pair_probes],
            "h_probes": [list(p) for p in self.h_probes],
            "record_snapshots": self.record_snapshots,
            "potential_label": self.potential_label,
            "sweep": [
                {
                    "label": label,
                    "breakpoints": list(pot.breakpoints),
                    "level_values": list(pot.level_values),
                }
                for label, pot in zip(self.sweep_labels, self.sweep)
            ],
        }

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_plan(source) -> ExperimentPlan:
    """Load a plan from a YAML file path or an equivalent mapping."""
    if isinstance(source, dict):
        doc = source
        default_name = "plan"
    elif isinstance(source, (str, Path)):
        path = Path(source)
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as e:
            raise PlanError(f"{path}: not valid YAML: {e}") from None
        default_name = path.stem
    else:
        raise PlanError(f"plan must be a mapping or a file path, got {type(source)}")
    if not isinstance(doc, dict):
        raise PlanError("plan must be a mapping of settings")
    extra = set(doc) - _PLAN_KEYS
    if extra:
        raise PlanError(f"unknown plan keys {sorted(extra)}")
    for key in ("n", "dt", "t_end", "seed", "potential"):
        if key not in doc:
            raise PlanError(f"plan is missing required key {key!r}")

    potential, label = parse_potential(doc["potential"])
    initial = doc.get("initial", "constant:0.0")
    if isinstance(initial, (list, tuple)):
        initial = tuple(float(v) for v in initial)
    try:
        config = SimConfig(
            n=int(doc["n"]),
            dt=float(doc["dt"]),
            t_end=float(doc["t_end"]),
            seed=int(doc["seed"]),
            potential=potential,
            initial=initial,
            noise_enabled=bool(doc.get("noise_enabled", True)),
            snapshot_stride=int(doc.get("snapshot_stride", 1)),
        )
    except (TypeError, ValueError) as e:
        raise PlanError(f"bad configuration: {e}") from None

    def _pairs(key, cast):
        out = []
        for item in doc.get(key) or ():
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise PlanError(f"{key} entries must be pairs, got {item!r}")
            out.append((cast(item[0]), cast(item[1])))
        return tuple(out)

    sweep: tuple[PotentialSpec, ...] = ()
    sweep_labels: tuple[str, ...] = ()
    if "sweep" in doc and doc["sweep"] is not None:
        sw = doc["sweep"]
        if not isinstance(sw, dict) or set(sw) != {"potential"}:
            raise PlanError("sweep must be a mapping with the single key 'potential'")
        specs, labels = [], []
        for idx, entry in enumerate(sw["potential"]):
            spec, lab = parse_potential(entry)
            if lab == "custom" or lab in labels:
                lab = f"{lab}-{idx}"
            specs.append(spec)
            labels.append(lab)
        if not specs:
            raise PlanError("sweep.potential must list at least one potential")
        sweep, sweep_labels = tuple(specs), tuple(labels)

    return ExperimentPlan(
        name=str(doc.get("name", default_name)),
        config=config,
        replicas=int(doc.get("replicas", 1)),
        pair_probes=_pairs("pair_probes", int),
        h_probes=_pairs("h_probes", float),
        record_snapshots=bool(doc.get("record_snapshots", False)),
        potential_label=label,
        sweep=sweep,
        sweep_labels=sweep_labels,
    )


@dataclass(frozen=True)
class ResultBundle:
    """All records a plan produced: one tuple of replicas per sweep point."""

    plan: ExperimentPlan
    labels: tuple[str, ...]
    records: tuple[tuple[TrajectoryRecord, ...], ...]

    def all_records(self) -> Iterator[TrajectoryRecord]:
        for group in self.records:
            yield from group

    def point(self, label: str) -> tuple[TrajectoryRecord, ...]:
        for lab, group in zip(self.labels, self.records):
            if lab == label:
                return group
        raise KeyError(f"no sweep point labeled {label!r}")


def _replica_task(args) -> TrajectoryRecord:
    config, replica, pair_probes, h_fns, record_snapshots = args
    return run(
        config,
        replica=replica,
        pair_probes=pair_probes,
        h_probes=h_fns,
        record_snapshots=record_snapshots,
    )


def run_plan(plan: ExperimentPlan, workers: int = 1) -> ResultBundle:
    """Execute every (sweep point, replica) pair of the plan.

    With ``workers > 1`` replicas run in separate processes; results are
    collected in task order, so the bundle is identical to a sequential run.
    """
    h_fns = plan.test_functions()
    points = plan.points()
    tasks = [
        (config, r, plan.pair_probes, h_fns, plan.record_snapshots)
        for _, config in points
        for r in range(plan.replicas)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_replica_task, tasks))
    else:
        flat = [_replica_task(t) for t in tasks]
    grouped = tuple(
        tuple(flat[p * plan.replicas : (p + 1) * plan.replicas])
        for p in range(len(points))
    )
    return ResultBundle(
        plan=plan, labels=tuple(label for label, _ in points), records=grouped
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in label)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _emit_point(
    directory: Path, records: Sequence[TrajectoryRecord], h_fns: Sequence[TestFunction]
) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: r.replica)
    written = []

    path = directory / "counts.csv"
    _write_csv(
        path,
        ["time", "replica", "count"],
        (
            (_fmt(t), rec.replica, int(c))
            for rec in records
            for t, c in zip(rec.times, rec.counts)
        ),
    )
    written.append(path)

    path = directory / "com.csv"
    _write_csv(
        path,
        ["time", "replica", "value"],
        (
            (_fmt(t), rec.replica, _fmt(v))
            for rec in records
            for t, v in zip(rec.times, rec.com)
        ),
    )
    written.append(path)

    for i, j in ((p.i, p.j) for p in records[0].pair_probes):
        rows = []
        for rec in records:
            p = rec.pair_probe(i, j)
            for t, eq, m, rq, pq in zip(
                rec.times, p.equal, p.mass, p.realized_qv, p.predicted_qv
            ):
                rows.append((_fmt(t), rec.replica, int(eq), _fmt(m), _fmt(rq), _fmt(pq)))
        path = directory / f"pair_{i}_{j}.csv"
        _write_csv(
            path,
            ["time", "replica", "equal", "mass", "realized_qv", "predicted_qv"],
            rows,
        )
        written.append(path)

    for fn in h_fns:
        rows = []
        for rec in records:
            p = rec.h_probe(fn)
            for t, xh, mh, qv in zip(rec.times, p.xh, p.mh, p.qv):
                rows.append((_fmt(t), rec.replica, _fmt(xh), _fmt(mh), _fmt(qv)))
        path = directory / f"probe_h_{fn.i_lo}_{fn.i_hi}.csv"
        _write_csv(path, ["time", "replica", "xh", "Mh", "QVh"], rows)
        written.append(path)

    return written


def emit(bundle: ResultBundle, out_dir) -> list[Path]:
    """Write the bundle under ``out_dir`` and return the files written.

    Single-point bundles write their tables at the top level; sweeps write
    one subdirectory per point plus a cross-point ``sweep.csv``.  Finishes
    with ``summary.json`` describing the plan, the potentials, and per-point
    particle-count statistics.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h_fns = bundle.plan.test_functions()
    multi = len(bundle.labels) > 1
    written: list[Path] = []
    point_rows = []
    for label, group in zip(bundle.labels, bundle.records):
        directory = out / _slug(label) if multi else out
        written += _emit_point(directory, group, h_fns)
        sups = np.array([float(np.max(rec.counts)) for rec in group])
        tavgs = np.array([float(np.mean(rec.counts)) for rec in group])
        finals = np.array([float(rec.counts[-1]) for rec in group])
        nrep = len(group)
        point_rows.append(
            {
                "label": label,
                "directory": _slug(label) if multi else ".",
                "distinct_levels": int(group[0].metadata["distinct_levels"]),
                "replicas": nrep,
                "sup_count_mean": float(np.mean(sups)),
                "sup_count_se": float(np.std(sups, ddof=1) / np.sqrt(nrep))
                if nrep > 1
                else 0.0,
                "timeavg_count_mean": float(np.mean(tavgs)),
                "final_count_mean": float(np.mean(finals)),
            }
        )

    if multi:
        path = out / "sweep.csv"
        _write_csv(
            path,
            ["label", "distinct_levels", "replica", "sup_count", "timeavg_count"],
            (
                (
                    label,
                    int(group[0].metadata["distinct_levels"]),
                    rec.replica,
                    int(np.max(rec.counts)),
                    _fmt(np.mean(rec.counts)),
                )
                for label, group in zip(bundle.labels, bundle.records)
                for rec in sorted(group, key=lambda r: r.replica)
            ),
        )
        written.append(path)

    summary = {
        "plan": bundle.plan.describe(),
        "plan_digest": bundle.plan.digest(),
        "package_version": __version__,
        "rng": {
            "algorithm": RNG_ALGORITHM,
            "provider": "numpy.random.Philox",
            "numpy_version": np.__version__,
        },
        "points": point_rows,
        "files": sorted(str(p.relative_to(out)) for p in written),
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    written.append(path)
    return written


def default_out_dir(plan_name: str) -> Path:
    """Default output directory: $CFWD_OUT_DIR/<plan>, else ./cfwd-results/<plan>."""
    base = os.environ.get("CFWD_OUT_DIR")
    root = Path(base) if base else Path.cwd() / "cfwd-results"
    return root / _slug(plan_name)
