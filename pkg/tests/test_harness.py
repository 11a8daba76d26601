"""Sweep harness, CSV schema, and sim-vs-theory validation checks."""
from __future__ import annotations

import csv
import io
from dataclasses import replace

import pytest

from delayopt.alphaopt import solve_alpha
from delayopt.engine import SimSpec, replicate
from delayopt.harness import (
    ANALYTIC_SCHEDULER,
    CSV_COLUMNS,
    SCHEDULER_NAMES,
    SweepSpec,
    config_with_lambda2,
    default_lambda2_grid,
    grid_from_range,
    policy_for,
    replicate_rows,
    run_sweep,
    validate,
    write_sweep_csv,
)
from delayopt.mg1 import delay_table
from delayopt.policies import (
    FairAlternation,
    MaxWeight,
    PriorityTo,
    TimeShared,
    WeightedRoundRobin,
)
from delayopt.traffic import ClassParams, SystemConfig, UtilityCurve

REF = SystemConfig(
    server_rate=100.0,
    class1=ClassParams(0.4, 100.0, UtilityCurve(1.0, 5.0), weight=1.0),
    class2=ClassParams(0.2, 100.0, UtilityCurve(0.3, 10.0), weight=0.3),
)


def small_spec(**overrides) -> SweepSpec:
    kwargs = dict(
        base=REF,
        lambda2_grid=(0.05, 0.2),
        schedulers=("proposed", "priority1", "wrr"),
        horizon=8000.0,
        replications=2,
        master_seed=7,
    )
    kwargs.update(overrides)
    return SweepSpec(**kwargs)


class TestGrid:
    def test_default_grid(self):
        grid = default_lambda2_grid()
        assert len(grid) == 28
        assert grid[0] == 0.01
        assert grid[-1] == 0.46
        assert grid == tuple(sorted(grid))

    def test_fine_segment_present(self):
        grid = default_lambda2_grid()
        for x in (0.15, 0.155, 0.16, 0.165, 0.17, 0.175, 0.18, 0.185, 0.19, 0.195, 0.2):
            assert x in grid

    def test_coarse_only(self):
        grid = grid_from_range(0.01, 0.46, 0.025, fine=False)
        assert len(grid) == 19
        assert 0.155 not in grid
        assert 0.175 in default_lambda2_grid() and 0.175 not in grid

    def test_fine_segment_clipped_to_range(self):
        grid = grid_from_range(0.17, 0.19, 0.02, fine=True)
        assert grid == (0.17, 0.175, 0.18, 0.185, 0.19)

    def test_grid_values_are_exact_milli_multiples(self):
        # integer stepping, so 0.01 + 12 * 0.025 lands exactly on 0.31
        grid = default_lambda2_grid()
        assert 0.31 in grid
        assert 0.435 in grid

    def test_rejects_bad_ranges(self):
        with pytest.raises(ValueError):
            grid_from_range(0.1, 0.2, 0.0)
        with pytest.raises(ValueError):
            grid_from_range(0.3, 0.2, 0.05)
        with pytest.raises(ValueError):
            grid_from_range(0.1, 0.2, 0.0004)


class TestConfigWithLambda2:
    def test_replaces_only_class2_rate(self):
        cfg = config_with_lambda2(REF, 0.33)
        assert cfg.class2.arrival_rate == 0.33
        assert cfg.class1 == REF.class1
        assert cfg.class2.curve == REF.class2.curve
        assert REF.class2.arrival_rate == 0.2


class TestPolicyFor:
    def test_each_name_builds_expected_type(self):
        assert isinstance(policy_for("proposed", REF), TimeShared)
        assert policy_for("priority1", REF) == PriorityTo(1)
        assert policy_for("priority2", REF) == PriorityTo(2)
        assert isinstance(policy_for("wrr", REF), WeightedRoundRobin)
        assert isinstance(policy_for("maxweight", REF), MaxWeight)
        assert isinstance(policy_for("fair", REF), FairAlternation)

    def test_proposed_defaults_to_solved_alpha(self):
        policy = policy_for("proposed", REF)
        assert policy.alpha == solve_alpha(REF).alpha

    def test_explicit_alpha_honored(self):
        assert policy_for("proposed", REF, alpha=0.25).alpha == 0.25

    def test_wrr_defaults_to_derived_weights(self):
        policy = policy_for("wrr", REF)
        assert (policy.weight1, policy.weight2) == (111, 43)

    def test_explicit_weights_honored(self):
        policy = policy_for("wrr", REF, weights=(5, 2))
        assert (policy.weight1, policy.weight2) == (5, 2)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown scheduler"):
            policy_for("edf", REF)


class TestSweepSpecValidation:
    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            small_spec(lambda2_grid=())

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            small_spec(lambda2_grid=(0.1, -0.2))

    def test_zero_replications_rejected(self):
        with pytest.raises(ValueError, match="replications"):
            small_spec(replications=0)

    def test_unknown_scheduler_rejected(self):
        with pytest.raises(ValueError, match="unknown schedulers"):
            small_spec(schedulers=("proposed", "edf"))


@pytest.fixture(scope="module")
def sweep_result():
    return run_sweep(small_spec())


class TestRunSweep:
    def test_row_count(self, sweep_result):
        # per stable point: one analytic row plus schedulers x replications
        assert len(sweep_result.rows) == 2 * (1 + 3 * 2)
        assert sweep_result.skipped == ()

    def test_analytic_rows(self, sweep_result):
        rows = sweep_result.rows_for(ANALYTIC_SCHEDULER)
        assert [r.lambda2 for r in rows] == [0.05, 0.2]
        for row in rows:
            assert row.alpha_star is not None
            assert row.analytic_l1 is not None and row.analytic_l2 is not None
            assert row.sim_l1 is None and row.sim_l2 is None
            assert row.var_l1 is None and row.var_l2 is None
            assert row.replications is None
            assert row.master_seed == 7

    def test_proposed_rows_carry_solved_alpha(self, sweep_result):
        by_point = {r.lambda2: r.alpha_star for r in sweep_result.rows_for(ANALYTIC_SCHEDULER)}
        for row in sweep_result.rows_for("proposed"):
            assert row.alpha_star == by_point[row.lambda2]
            assert row.analytic_l1 is not None
            assert row.sim_l1 is not None and row.sim_l2 is not None
            assert row.replications == 2

    def test_priority1_rows_use_delay_table(self, sweep_result):
        for row in sweep_result.rows_for("priority1"):
            table = delay_table(config_with_lambda2(REF, row.lambda2))
            assert row.alpha_star is None
            assert row.analytic_l1 == table.l11
            assert row.analytic_l2 == table.l21

    def test_heuristic_rows_have_no_analytic_columns(self, sweep_result):
        for row in sweep_result.rows_for("wrr"):
            assert row.alpha_star is None
            assert row.analytic_l1 is None and row.analytic_l2 is None
            assert row.sim_l1 is not None

    def test_replicate_rows_share_set_level_ci(self, sweep_result):
        rows = [r for r in sweep_result.rows_for("proposed") if r.lambda2 == 0.2]
        assert len(rows) == 2
        assert rows[0].sim_l1_ci == rows[1].sim_l1_ci
        assert rows[0].sim_l2_ci == rows[1].sim_l2_ci
        assert rows[0].sim_l1 != rows[1].sim_l1

    def test_deterministic_given_same_spec(self, sweep_result):
        assert run_sweep(small_spec()) == sweep_result

    def test_unstable_point_skipped_with_reason(self):
        result = run_sweep(small_spec(lambda2_grid=(0.2, 0.7)))
        assert len(result.skipped) == 1
        lam, reason = result.skipped[0]
        assert lam == 0.7
        assert "1.1" in reason and "lambda2=0.7" in reason
        assert {r.lambda2 for r in result.rows} == {0.2}

    def test_all_scheduler_names_runnable(self):
        result = run_sweep(
            small_spec(lambda2_grid=(0.2,), schedulers=SCHEDULER_NAMES, horizon=3000.0)
        )
        seen = {r.scheduler for r in result.rows}
        assert seen == set(SCHEDULER_NAMES) | {ANALYTIC_SCHEDULER}


class TestReplicateRows:
    def test_proposed_requires_alpha(self):
        spec = SimSpec(config=REF, policy=TimeShared(0.5), horizon=2000.0, seed=3)
        runs, summary = replicate(spec, 2)
        with pytest.raises(ValueError, match="alpha"):
            replicate_rows(REF, "proposed", runs, summary, 2, 3)
        rows = replicate_rows(REF, "proposed", runs, summary, 2, 3, alpha=0.5)
        assert len(rows) == 2
        assert all(r.alpha_star == 0.5 for r in rows)


class TestCsvOutput:
    def test_header_and_count(self, sweep_result):
        buf = io.StringIO()
        n = write_sweep_csv(sweep_result, buf)
        lines = buf.getvalue().splitlines()
        assert n == len(sweep_result.rows)
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + n

    def test_missing_values_are_empty_cells(self, sweep_result):
        buf = io.StringIO()
        write_sweep_csv(sweep_result, buf)
        buf.seek(0)
        records = list(csv.DictReader(buf))
        analytic = [r for r in records if r["scheduler"] == ANALYTIC_SCHEDULER]
        assert analytic
        for rec in analytic:
            assert rec["sim_l1"] == "" and rec["var_l2"] == ""
            assert rec["replications"] == ""
            assert rec["alpha_star"] != ""
        simulated = [r for r in records if r["scheduler"] == "proposed"]
        for rec in simulated:
            assert rec["sim_l1"] != ""

    def test_float_cells_round_trip_exactly(self, sweep_result):
        buf = io.StringIO()
        write_sweep_csv(sweep_result, buf)
        buf.seek(0)
        records = list(csv.DictReader(buf))
        first = [r for r in records if r["scheduler"] == "proposed"][0]
        row = sweep_result.rows_for("proposed")[0]
        assert float(first["sim_l1"]) == row.sim_l1
        assert float(first["logV"]) == row.logV

    def test_byte_identical_reruns(self):
        out1, out2 = io.StringIO(), io.StringIO()
        write_sweep_csv(run_sweep(small_spec()), out1)
        write_sweep_csv(run_sweep(small_spec()), out2)
        assert out1.getvalue() == out2.getvalue()

    def test_accepts_bare_row_iterable(self, sweep_result):
        buf = io.StringIO()
        n = write_sweep_csv(sweep_result.rows_for("priority1"), buf)
        assert n == 4


class TestValidate:
    def test_reference_system_passes(self):
        report = validate(REF, horizon=50_000.0)
        assert report.error is None
        assert [c.name for c in report.checks] == ["l11", "l21", "l12", "l22"]
        assert all(c.passed for c in report.checks)
        assert all(c.rel_error < report.tolerance for c in report.checks)
        assert report.passed

    def test_absurd_tolerance_fails(self):
        report = validate(REF, tolerance=1e-9, horizon=20_000.0)
        assert not report.passed
        assert any(c.passed is False for c in report.checks)

    def test_unstable_system_reported_in_header(self):
        cfg = config_with_lambda2(REF, 0.8)
        report = validate(cfg, horizon=1000.0)
        assert report.error is not None
        assert "0.8" in report.error and "0.4" in report.error
        assert report.checks == ()
        assert not report.passed

    def test_absent_class_marked_not_applicable(self):
        cfg = config_with_lambda2(REF, 0.0)
        report = validate(cfg, horizon=40_000.0)
        by_name = {c.name: c for c in report.checks}
        assert by_name["l21"].passed is None and by_name["l22"].passed is None
        assert by_name["l21"].simulated is None
        assert by_name["l11"].passed is not None
        assert report.passed == (by_name["l11"].passed and by_name["l12"].passed)

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError, match="tolerance"):
            validate(REF, tolerance=0.0, horizon=1000.0)
