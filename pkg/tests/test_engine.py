from __future__ import annotations

import math

import numpy as np
import pytest

from delayopt.engine import (
    InsufficientDataError,
    SimSpec,
    replicate,
    replicate_seed,
    run,
)
from delayopt.mg1 import blended_delay, delay_table, priority_delay
from delayopt.policies import (
    FairAlternation,
    MaxWeight,
    PriorityTo,
    TimeShared,
    WeightedRoundRobin,
)
from delayopt.traffic import ClassParams, SystemConfig, UtilityCurve

ALL_POLICIES = [
    PriorityTo(1),
    PriorityTo(2),
    TimeShared(0.5),
    WeightedRoundRobin(3, 2),
    MaxWeight(),
    FairAlternation(),
]


def _config(lam1=0.4, lam2=0.2, s1=100.0, s2=100.0):
    return SystemConfig(
        server_rate=100.0,
        class1=ClassParams(arrival_rate=lam1, packet_size=s1, curve=UtilityCurve(1.0, 5.0)),
        class2=ClassParams(
            arrival_rate=lam2, packet_size=s2, curve=UtilityCurve(0.3, 10.0), weight=0.3
        ),
    )


def _spec(policy, horizon=100_000.0, seed=11, **kw):
    return SimSpec(config=_config(), policy=policy, horizon=horizon, seed=seed, **kw)


def _exponential_work(gen: np.random.Generator, cls: int, count: int) -> np.ndarray:
    mean = 100.0 if cls == 1 else 50.0
    return gen.exponential(mean, count)


class TestAgainstClosedForms:
    def test_md1_single_class(self):
        # lone deterministic class: textbook mean sojourn s + lam*s^2/(2*(1-rho))
        cfg = _config(lam1=0.4, lam2=0.0)
        m = run(SimSpec(config=cfg, policy=PriorityTo(1), horizon=200_000.0, seed=5))
        want = priority_delay(cfg, 1, 1)
        assert want == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert m.class1.mean_sojourn == pytest.approx(want, rel=0.02)
        assert m.class2.departures == 0
        assert math.isnan(m.class2.mean_sojourn)

    def test_mm1_single_class_via_work_sampler(self):
        # exponential work turns the queue into M/M/1: sojourn 1/(mu - lam)
        cfg = _config(lam1=0.5, lam2=0.0)
        m = run(
            SimSpec(
                config=cfg,
                policy=PriorityTo(1),
                horizon=200_000.0,
                seed=6,
                work_sampler=_exponential_work,
            )
        )
        assert m.class1.mean_sojourn == pytest.approx(2.0, rel=0.03)
        assert m.class1.mean_in_system == pytest.approx(1.0, rel=0.03)

    def test_two_class_priority_table(self):
        t = delay_table(_config())
        for policy, want1, want2 in [
            (PriorityTo(1), t.l11, t.l21),
            (PriorityTo(2), t.l12, t.l22),
        ]:
            m = run(_spec(policy, horizon=200_000.0))
            assert m.class1.mean_sojourn == pytest.approx(want1, rel=0.02)
            assert m.class2.mean_sojourn == pytest.approx(want2, rel=0.02)

    def test_time_shared_blend(self):
        cfg = _config()
        want = blended_delay(cfg, 0.5)
        m = run(_spec(TimeShared(0.5), horizon=300_000.0))
        assert m.class1.mean_sojourn == pytest.approx(want.l1, rel=0.03)
        assert m.class2.mean_sojourn == pytest.approx(want.l2, rel=0.03)

    def test_sojourn_never_beats_service(self):
        # every sojourn includes at least the packet's own service time
        m = run(_spec(PriorityTo(1), horizon=20_000.0, record_departures=True))
        assert m.departures
        for rec in m.departures:
            assert rec.sojourn >= 1.0 - 1e-12
        assert m.class1.mean_sojourn >= 1.0
        assert m.class2.mean_sojourn >= 1.0


class TestDeterminismAndStreams:
    def test_identical_seed_identical_metrics(self):
        a = run(_spec(TimeShared(0.5), horizon=30_000.0))
        b = run(_spec(TimeShared(0.5), horizon=30_000.0))
        assert a == b

    def test_different_seeds_differ(self):
        a = run(_spec(PriorityTo(1), horizon=30_000.0, seed=1))
        b = run(_spec(PriorityTo(1), horizon=30_000.0, seed=2))
        assert a.class1.mean_sojourn != b.class1.mean_sojourn

    def test_policies_share_arrival_streams(self):
        # policy choice must not perturb the traffic sample path
        counts = {
            run(_spec(p, horizon=30_000.0)).total_arrivals for p in ALL_POLICIES
        }
        assert len(counts) == 1

    def test_endpoint_time_share_equals_pure_priority(self):
        for alpha, cls in ((1.0, 1), (0.0, 2)):
            ts = run(_spec(TimeShared(alpha), horizon=50_000.0))
            pure = run(_spec(PriorityTo(cls), horizon=50_000.0))
            assert ts.class1.mean_sojourn == pure.class1.mean_sojourn
            assert ts.class2.mean_sojourn == pure.class2.mean_sojourn
            assert ts.class1.sojourn_variance == pure.class1.sojourn_variance
            assert ts.class2.sojourn_variance == pure.class2.sojourn_variance

    def test_replicate_seeds_are_stable_and_distinct(self):
        seeds = [replicate_seed(123, i) for i in range(10)]
        assert seeds == [replicate_seed(123, i) for i in range(10)]
        assert len(set(seeds)) == 10


class TestPhysics:
    @pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
    def test_littles_law_and_conservation(self, policy):
        cfg = _config()
        m = run(SimSpec(config=cfg, policy=policy, horizon=300_000.0, seed=17))
        for cls in (1, 2):
            lam = cfg.klass(cls).arrival_rate
            got = m.for_class(cls)
            assert got.mean_in_system == pytest.approx(
                lam * got.mean_sojourn, rel=0.01
            )
        # server occupancy equals offered load for every work-conserving policy
        assert m.busy_fraction == pytest.approx(cfg.total_utilization, rel=0.01)
        assert m.max_service_discrepancy <= 1e-9

    @pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
    def test_fifo_within_class(self, policy):
        m = run(
            SimSpec(
                config=_config(),
                policy=policy,
                horizon=20_000.0,
                seed=23,
                record_departures=True,
            )
        )
        arrivals = {1: [], 2: []}
        for rec in m.departures:
            arrivals[rec.cls].append(rec.time - rec.sojourn)
        for cls in (1, 2):
            assert arrivals[cls] == sorted(arrivals[cls])

    def test_mean_sojourn_at_least_service_time(self):
        m = run(_spec(FairAlternation(), horizon=50_000.0))
        assert m.class1.mean_sojourn >= 1.0
        assert m.class2.mean_sojourn >= 1.0
        assert m.class1.sojourn_variance >= 0.0

    def test_regime_occupancy_tracks_alpha(self):
        for alpha in (0.25, 0.5, 0.75):
            m = run(_spec(TimeShared(alpha), horizon=300_000.0, seed=29))
            assert m.regime1_fraction == pytest.approx(alpha, abs=0.005)

    def test_non_regime_policies_report_none(self):
        m = run(_spec(MaxWeight(), horizon=10_000.0))
        assert m.regime1_fraction is None

    def test_cycle_mode_occupancy(self):
        m = run(
            _spec(TimeShared(0.25, mode="cycle", cycle=50.0), horizon=100_000.0)
        )
        assert m.regime1_fraction == pytest.approx(0.25, abs=0.005)
        assert m.max_service_discrepancy <= 1e-9

    def test_mean_utilities_match_curve_of_sojourns(self):
        cfg = _config()
        m = run(
            SimSpec(
                config=cfg,
                policy=PriorityTo(1),
                horizon=20_000.0,
                seed=31,
                record_departures=True,
            )
        )
        for cls in (1, 2):
            curve = cfg.klass(cls).curve
            vals = [curve.utility(r.sojourn) for r in m.departures if r.cls == cls]
            assert m.for_class(cls).mean_utility == pytest.approx(
                sum(vals) / len(vals), rel=1e-9
            )


class TestEdgesAndErrors:
    def test_no_arrivals_is_insufficient(self):
        cfg = _config(lam1=0.0, lam2=0.0)
        with pytest.raises(InsufficientDataError):
            run(SimSpec(config=cfg, policy=PriorityTo(1), horizon=100.0, seed=1))

    def test_starved_class_is_insufficient(self):
        cfg = _config(lam1=0.4, lam2=1e-7)
        with pytest.raises(InsufficientDataError):
            run(SimSpec(config=cfg, policy=PriorityTo(1), horizon=1000.0, seed=1))

    def test_spec_validation(self):
        cfg = _config()
        with pytest.raises(ValueError):
            SimSpec(config=cfg, policy=PriorityTo(1), horizon=0.0, seed=1)
        with pytest.raises(ValueError):
            SimSpec(config=cfg, policy=PriorityTo(1), horizon=10.0, seed=1, warmup_fraction=0.5)
        with pytest.raises(ValueError):
            SimSpec(config=cfg, policy=PriorityTo(1), horizon=10.0, seed=-1)

    def test_departure_records_window(self):
        m = run(_spec(PriorityTo(1), horizon=10_000.0, record_departures=True))
        assert all(r.time > m.warmup_end for r in m.departures)
        times = [r.time for r in m.departures]
        assert times == sorted(times)
        assert len(m.departures) == m.class1.departures + m.class2.departures


class TestReplicate:
    def test_single_replicate_equals_run(self):
        spec = _spec(PriorityTo(1), horizon=20_000.0, seed=99)
        runs, summary = replicate(spec, 1)
        assert len(runs) == 1
        assert summary.replications == 1
        assert summary.l1.mean == runs[0].class1.mean_sojourn
        assert summary.l1.ci_halfwidth == 0.0

    def test_same_master_seed_reproduces_aggregate(self):
        spec = _spec(TimeShared(0.5), horizon=20_000.0, seed=77)
        _, s1 = replicate(spec, 3)
        _, s2 = replicate(spec, 3)
        assert s1 == s2

    def test_ci_shrinks_roughly_root_n(self):
        # deterministic given the master seed; expected ratio sqrt(4) = 2
        spec = _spec(PriorityTo(1), horizon=8_000.0, seed=0)
        _, wide = replicate(spec, 5)
        _, narrow = replicate(spec, 20)
        ratio = wide.l1.ci_halfwidth / narrow.l1.ci_halfwidth
        assert 1.4 <= ratio <= 2.6

    def test_parallel_jobs_match_serial(self):
        spec = _spec(PriorityTo(1), horizon=5_000.0, seed=42)
        serial_runs, serial_summary = replicate(spec, 2, jobs=1)
        par_runs, par_summary = replicate(spec, 2, jobs=2)
        assert serial_runs == par_runs
        assert serial_summary == par_summary

    def test_n_seeds_validated(self):
        with pytest.raises(ValueError):
            replicate(_spec(PriorityTo(1)), 0)
