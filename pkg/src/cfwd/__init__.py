"""Sticky-reflected ordered diffusions with mass-scaled noise.

A system of n ordered particles of mass 1/n evolves by independent Gaussian
increments per cluster (variance inversely proportional to cluster mass), a
drift that pulls each particle toward its own value of a non-decreasing
potential, and an isotonic projection that merges particles whose proposals
cross.  Coalescence is sticky: particles that meet while their potential
values agree share every subsequent increment and never separate.

The package provides the state geometry (:mod:`cfwd.monotone`), the stepper
(:mod:`cfwd.dynamics`), martingale and counting estimators
(:mod:`cfwd.observables`), and a plan-driven experiment harness with a
``cfwd`` command line (:mod:`cfwd.harness`, :mod:`cfwd.cli`).
"""

from ._version import __version__
from .dynamics import (
    InvariantViolation,
    SimConfig,
    SimState,
    StepReport,
    drift_term,
    init_state,
    parse_initial,
    run,
    sample_cluster_noise,
    step,
)
from .harness import (
    ExperimentPlan,
    PlanError,
    ResultBundle,
    emit,
    parse_plan,
    parse_potential,
    run_plan,
)
from .isotonic import HAVE_NUMBA, pava, pava_blocks
from .monotone import (
    ClusterPartition,
    GridFunction,
    PotentialSpec,
    TestFunction,
    cluster_decompose,
    distinct_count,
    hs_norm_sq,
    inner_product,
    isotonic_project,
    make_test_function,
    materialize_potential,
    norm_sq,
    project,
    project_onto,
)
from .observables import (
    CompensatedMartingale,
    PairProbeSeries,
    PairQvEstimate,
    ProbeSeries,
    SupermartingaleReport,
    SweepCountSummary,
    TrajectoryRecord,
    compensated_martingale_h,
    pair_qv_estimate,
    particle_count,
    sup_count_statistic,
    supermartingale_test,
)

__all__ = [
    "__version__",
    # state geometry
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
    "pava",
    "pava_blocks",
    "HAVE_NUMBA",
    # dynamics
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
    # observables
    "TrajectoryRecord",
    "PairProbeSeries",
    "ProbeSeries",
    "CompensatedMartingale",
    "PairQvEstimate",
    "SupermartingaleReport",
    "SweepCountSummary",
    "particle_count",
    "compensated_martingale_h",
    "pair_qv_estimate",
    "supermartingale_test",
    "sup_count_statistic",
    # harness
    "ExperimentPlan",
    "ResultBundle",
    "PlanError",
    "parse_plan",
    "parse_potential",
    "run_plan",
    "emit",
]
