"""Estimators: compensated martingales, pair QV, verdicts, count growth."""

from __future__ import annotations

import numpy as np
import pytest

from cfwd import (
    GridFunction,
    PotentialSpec,
    ProbeSeries,
    SimConfig,
    TrajectoryRecord,
    compensated_martingale_h,
    make_test_function,
    pair_qv_estimate,
    particle_count,
    run,
    sup_count_statistic,
    supermartingale_test,
)
from cfwd.observables import _default_lags


def make_config(**overrides) -> SimConfig:
    base = dict(
        n=16,
        dt=1e-3,
        t_end=0.05,
        seed=12,
        potential=PotentialSpec.levels(4),
        initial="identity",
    )
    base.update(overrides)
    return SimConfig(**base)


def synthetic_record(
    xh: np.ndarray,
    absorbed: np.ndarray | None = None,
    replica: int = 0,
    potential: PotentialSpec = PotentialSpec.levels(4),
    n: int = 16,
    dt: float = 1e-3,
    t_end: float | None = None,
    counts: np.ndarray | None = None,
) -> TrajectoryRecord:
    """A record with a hand-built probe series, for estimator unit tests."""
    m = len(xh)
    xh = np.asarray(xh, dtype=np.float64)
    if absorbed is None:
        absorbed = np.zeros(m, dtype=bool)
    h = make_test_function(0.0, 0.25, n)
    series = ProbeSeries(
        probe_id="u=0,v=0.25",
        fn=h,
        xh=xh,
        compensator=np.zeros(m),
        mh=xh.copy(),
        qv=np.zeros(m),
        absorbed=np.asarray(absorbed, dtype=bool),
    )
    config = SimConfig(
        n=n,
        dt=dt,
        t_end=t_end if t_end is not None else m * dt,
        seed=0,
        potential=potential,
    )
    return TrajectoryRecord(
        times=np.arange(m) * dt,
        counts=np.ones(m, dtype=np.int64) if counts is None else np.asarray(counts),
        com=np.zeros(m),
        pair_probes=(),
        h_probes=(series,),
        snapshots=None,
        metadata={
            "config": config.describe(),
            "replica": replica,
            "n_steps": m - 1,
            "distinct_levels": potential.distinct_level_count(n),
            "rng": {},
            "invariant_checks": False,
        },
    )


# ------------------------------------------------------------------ basics


def test_particle_count():
    assert particle_count(GridFunction(np.array([0.0, 0.0, 1.0, 2.0]))) == 3


def test_record_series_lengths_validated():
    rec = synthetic_record(np.zeros(5))
    with pytest.raises(ValueError):
        TrajectoryRecord(
            times=rec.times,
            counts=rec.counts[:-1],
            com=rec.com,
            pair_probes=(),
            h_probes=(),
            snapshots=None,
            metadata=rec.metadata,
        )


def test_probe_lookup_errors():
    rec = synthetic_record(np.zeros(5))
    with pytest.raises(ValueError):
        rec.pair_probe(0, 1)
    with pytest.raises(ValueError):
        rec.h_probe(make_test_function(0.5, 0.75, 16))


# ------------------------------------------- recomputation from snapshots


def test_compensated_martingale_matches_recorded_series():
    config = make_config()
    h = make_test_function(0.0, 0.25, 16)
    rec = run(config, h_probes=(h,), record_snapshots=True)
    cm = compensated_martingale_h(rec, h)
    series = rec.h_probe(h)
    # the pairing route is shared, so (X_t, h) agrees bit for bit; the
    # quadratures order their arithmetic differently and agree to roundoff
    assert np.array_equal(cm.xh, series.xh)
    np.testing.assert_allclose(cm.mh, series.mh, rtol=0, atol=1e-15)
    np.testing.assert_allclose(cm.qv, series.qv, rtol=1e-12, atol=1e-18)
    # after absorption both routes freeze at exactly zero
    absorbed = np.flatnonzero(series.absorbed)
    assert absorbed.size > 0
    a = int(absorbed[0])
    assert np.all(cm.xh[a:] == 0.0)
    assert np.all(np.diff(cm.qv[a:]) == 0.0)


def test_compensated_martingale_needs_snapshots():
    config = make_config()
    h = make_test_function(0.0, 0.25, 16)
    rec = run(config, h_probes=(h,))
    with pytest.raises(ValueError):
        compensated_martingale_h(rec, h)


# --------------------------------------------------------------- pair QV


def test_pair_qv_on_drift_free_deterministic_run():
    # flat potential, no noise: increments are exactly zero, so realized QV
    # is exactly zero while the predicted clock keeps ticking at dt/mass
    config = make_config(
        potential=PotentialSpec.constant(0.0),
        initial="constant:1.0",
        noise_enabled=False,
        dt=1e-3,
        t_end=0.05,
    )
    rec = run(config, pair_probes=((2, 9), (0, 0)))
    est = pair_qv_estimate(rec, 2, 9)
    assert est.realized == 0.0
    assert est.predicted == pytest.approx(50 * 1e-3, rel=1e-12)  # mass 1
    assert est.difference == -est.predicted
    est_self = pair_qv_estimate(rec, 0, 0)
    assert est_self.predicted == pytest.approx(0.05, rel=1e-12)


def test_pair_qv_realized_tracks_noise():
    config = make_config(
        n=1, potential=PotentialSpec.zero(), initial="constant:0.0", t_end=0.5
    )
    rec = run(config, pair_probes=((0, 0),))
    est = pair_qv_estimate(rec, 0, 0)
    assert est.predicted == pytest.approx(0.5, rel=1e-9)
    assert 0.2 < est.realized < 1.0  # concentration sanity, 500 increments


# ------------------------------------------------------------ verdict logic


def test_default_lags_quadruple():
    assert _default_lags(2001) == [1, 4, 16, 64, 256]
    assert _default_lags(3) == [1]


def test_supermartingale_consistent_on_flat_series():
    rec = synthetic_record(np.full(64, 0.25))
    h = make_test_function(0.0, 0.25, 16)
    report = supermartingale_test(rec, h)
    assert report.verdict == "consistent"
    assert report.min_value == 0.25
    assert report.absorption_steps == (None,)


def test_supermartingale_flags_upward_drift():
    rec = synthetic_record(np.linspace(0.0, 1.0, 64))
    h = make_test_function(0.0, 0.25, 16)
    report = supermartingale_test(rec, h)
    assert report.verdict == "violated"
    lag1 = report.lag_stats[0]
    assert lag1.lag == 1 and lag1.mean > 0


def test_supermartingale_tolerates_noise_around_decay():
    rng = np.random.default_rng(3)
    xh = np.exp(-np.arange(200) * 0.01) + rng.normal(0, 1e-3, 200)
    report = supermartingale_test(
        synthetic_record(xh), make_test_function(0.0, 0.25, 16)
    )
    assert report.verdict == "consistent"


def test_straddling_probe_is_refused():
    rec = synthetic_record(np.zeros(8))
    h = make_test_function(0.125, 0.375, 16)  # crosses the 0.25 breakpoint
    with pytest.raises(ValueError, match="straddles"):
        supermartingale_test(rec, h)


def test_zero_persistence_detection():
    absorbed = np.array([False, False, True, True, True])
    good = synthetic_record(np.array([0.5, 0.25, 0.0, 0.0, 0.0]), absorbed)
    h = make_test_function(0.0, 0.25, 16)
    report = supermartingale_test(good, h)
    assert report.absorption_steps == (2,)
    assert report.zero_persistent

    bad = synthetic_record(np.array([0.5, 0.25, 0.0, 1e-17, 0.0]), absorbed)
    report = supermartingale_test(bad, h)
    assert not report.zero_persistent  # any nonzero after absorption counts

    flicker = synthetic_record(
        np.zeros(5), np.array([False, True, False, True, True])
    )
    assert not supermartingale_test(flicker, h).zero_persistent


def test_supermartingale_pools_replicas():
    h = make_test_function(0.0, 0.25, 16)
    recs = [synthetic_record(np.full(32, 0.1), replica=r) for r in range(3)]
    report = supermartingale_test(recs, h)
    assert report.absorption_steps == (None, None, None)
    assert report.lag_stats[0].count == 31 * 3


# ------------------------------------------------------------ count growth


def test_sup_count_statistic_frozen():
    def rec(levels, replica, counts):
        return synthetic_record(
            np.zeros(len(counts)),
            replica=replica,
            potential=PotentialSpec.levels(levels),
            counts=np.asarray(counts),
        )

    records = [
        rec(1, 0, [1, 1, 1]),
        rec(1, 1, [1, 1, 1]),
        rec(4, 0, [1, 4, 3]),
        rec(4, 1, [1, 4, 4]),
    ]
    rows = sup_count_statistic(records)
    assert [r.distinct_levels for r in rows] == [1, 4]
    np.testing.assert_array_equal(rows[0].sup_counts, [1.0, 1.0])
    np.testing.assert_array_equal(rows[1].sup_counts, [4.0, 4.0])
    assert rows[0].sup_mean == 1.0 and rows[0].sup_se == 0.0
    assert rows[1].timeavg_counts[0] == pytest.approx(8 / 3)
    assert rows[1].sup_quantiles["median"] == 4.0


def test_sup_count_statistic_rejects_mixed_grids():
    a = synthetic_record(np.zeros(3), potential=PotentialSpec.levels(2))
    b = synthetic_record(np.zeros(3), potential=PotentialSpec.levels(4), dt=2e-3)
    with pytest.raises(ValueError, match="inhomogeneous"):
        sup_count_statistic([a, b])


def test_sup_count_statistic_rejects_unbalanced_replicas():
    a = synthetic_record(np.zeros(3), replica=0, potential=PotentialSpec.levels(2))
    b = synthetic_record(np.zeros(3), replica=0, potential=PotentialSpec.levels(4))
    c = synthetic_record(np.zeros(3), replica=1, potential=PotentialSpec.levels(4))
    with pytest.raises(ValueError, match="unequal"):
        sup_count_statistic([a, b, c])
