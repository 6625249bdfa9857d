import math

import numpy as np
import pytest

from optislip.experiments import (
    SCENARIO_NAMES,
    Metrics,
    NoFeasibleTorqueError,
    ScenarioError,
    SuiteResult,
    SuiteRow,
    SuiteSettings,
    check_bands,
    default_scenarios,
    find_brake_torque,
    ideal_distance,
    parse_scenario,
    recovery_errors,
    rmse_series,
    run_closed_loop_suite,
    run_open_loop_suite,
    sweep_brake_torque,
    write_suite_csv,
)
from optislip.friction import optimal_slip, reference_surface
from optislip.mlp import init_model
from optislip.vehicle import ManeuverConfig, SurfaceSchedule, VehicleParams, run_maneuver

VP = VehicleParams()
DRY = reference_surface("D")


def test_scenario_set():
    scenarios = default_scenarios()
    assert len(scenarios) == 15
    assert len({s.name for s in scenarios}) == 15
    assert sum(len(s.tags) == 1 for s in scenarios) == 3
    assert sum(len(s.tags) == 3 for s in scenarios) == 12
    assert [s.name for s in scenarios] == list(SCENARIO_NAMES)


@pytest.mark.parametrize("text", ["D→S→W", "D->S->W", "d-s-w", "DSW", "D, S, W"])
def test_parse_scenario_spellings(text):
    sc = parse_scenario(text)
    assert sc.name == "D→S→W"
    assert sc.tags == ("D", "S", "W")
    assert sc.thresholds == pytest.approx((160 / 3, 80 / 3))


def test_parse_scenario_two_segments_and_errors():
    assert parse_scenario("S-D", 60.0).thresholds == (30.0,)
    assert parse_scenario("W").thresholds == ()
    for bad in ("", "X", "D→Q", "DWSD"):
        with pytest.raises(ScenarioError):
            parse_scenario(bad)


def test_rmse_series_examples():
    gt = np.linspace(0.05, 0.2, 40)
    assert rmse_series(gt, gt) == 0.0
    assert rmse_series(gt, gt + 0.02) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        rmse_series([], [])
    with pytest.raises(ValueError):
        rmse_series([1.0, 2.0], [1.0])


def test_metrics_nonnegative():
    Metrics(0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        Metrics(-0.1, 1.0, 2.0)


def test_ideal_distance():
    assert ideal_distance(DRY) == pytest.approx(278.79675, rel=1e-6)


def test_sweep_zero_torque_excluded_and_all_locking_rejected():
    res = sweep_brake_torque(DRY, [0.0, 3000.0])
    assert math.isnan(res.distances[0])
    assert res.best_torque == 3000.0
    with pytest.raises(NoFeasibleTorqueError):
        sweep_brake_torque(DRY, [0.0, 20000.0])
    with pytest.raises(ValueError):
        sweep_brake_torque(DRY, [])


@pytest.fixture(scope="module")
def dry_sweep():
    return find_brake_torque(DRY)


def test_sweep_is_unimodal(dry_sweep):
    d = dry_sweep.distances[~np.isnan(dry_sweep.distances)]
    k = int(np.argmin(d))
    assert np.all(np.diff(d[: k + 1]) <= 0)
    assert np.all(np.diff(d[k:]) >= 0)


def test_swept_dry_torque_drives_slip_near_optimum(dry_sweep):
    cfg = ManeuverConfig(VP, SurfaceSchedule.constant(DRY), dry_sweep.best_torque, measurement_noise_sigma=0.0)
    log = run_maneuver(cfg)
    # quasi-steady phase: the middle of the maneuver
    n = len(log)
    assert np.median(log.lam[n // 4: 3 * n // 4]) == pytest.approx(0.17, abs=0.01)
    assert dry_sweep.best_distance < ideal_distance(DRY) * 1.01


def test_recovery_errors_reads_window_after_switch():
    class FakeLog:
        switch_steps = [10, 95]
        lambda_gt = np.r_[np.full(10, 0.17), np.full(90, 0.06)]

        def __len__(self):
            return 100

    est = np.full(100, 0.10)
    est[60] = 0.065
    assert recovery_errors(FakeLog(), est, window=50) == pytest.approx([0.005])


@pytest.fixture(scope="module")
def tiny_model():
    return init_model((100, 8, 1), seed=3)


SUBSET = [parse_scenario("D"), parse_scenario("W→D→S")]
TORQUES = {"D": 5523.48, "W": 3783.53}


def test_open_loop_suite_rows_and_shared_stream(tiny_model):
    seen = {}
    res = run_open_loop_suite(SUBSET, tiny_model, TORQUES, on_log=lambda key, log: seen.setdefault(key, log))
    assert [(r.scenario, r.estimator) for r in res.rows] == [("D", "MLP"), ("D", "RLS"), ("W→D→S", "MLP"), ("W→D→S", "RLS")]
    assert all(r.ok and r.controller == "none" for r in res.rows)
    # both estimators read the same maneuver
    assert res.row("D", "MLP").distance_m == res.row("D", "RLS").distance_m
    assert len(res.recovery[("W→D→S", "MLP", "none")]) == 2
    log = seen[("W→D→S", "both", "none")]
    assert res.row("W→D→S", "RLS").rmse == pytest.approx(rmse_series(log.lambda_gt, log.observers["RLS"]))


def test_failed_scenario_does_not_stop_suite(tiny_model):
    res = run_open_loop_suite(SUBSET, tiny_model, {"W": 3783.53})
    assert not res.row("D", "MLP").ok and "KeyError" in res.row("D", "MLP").error
    assert res.row("W→D→S", "MLP").ok


def test_closed_loop_suite_shape_and_csv(tiny_model, tmp_path):
    res = run_closed_loop_suite(SUBSET[:1], tiny_model, TORQUES)
    assert [(r.estimator, r.controller) for r in res.rows] == [("MLP", "PI"), ("MLP", "SMC"), ("RLS", "PI"), ("RLS", "SMC")]
    path = tmp_path / "closed.csv"
    write_suite_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario,estimator,controller,rmse,distance_m,time_s"
    assert len(lines) == 5
    again = run_closed_loop_suite(SUBSET[:1], tiny_model, TORQUES)
    write_suite_csv(again, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_suite_csv_writes_failures_as_empty_cells(tmp_path):
    res = SuiteResult([SuiteRow("D", "MLP", "SMC", error="boom")])
    write_suite_csv(res, tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines()[1] == "D,MLP,SMC,,,"


def test_check_bands_physics_bound():
    good = SuiteResult([SuiteRow("D", "MLP", "SMC", 0.01, 280.0, 7.0)])
    too_short = SuiteResult([SuiteRow("D", "MLP", "SMC", 0.01, 270.0, 7.0)])
    assert all(c.passed for c in check_bands(None, good))
    bound = [c for c in check_bands(None, too_short) if "physics" in c.name][0]
    assert not bound.passed and "D/MLP/SMC" in bound.detail


def test_check_bands_open_loop_counts():
    rows = []
    for i, name in enumerate(SCENARIO_NAMES):
        mlp_wins = i < 10
        rows.append(SuiteRow(name, "MLP", "none", 0.01 if mlp_wins else 0.5, 1.0, 1.0))
        rows.append(SuiteRow(name, "RLS", "none", 0.2, 1.0, 1.0))
    res = SuiteResult(rows, {("D→S→D", "MLP", "none"): [0.01, 0.02]})
    checks = {c.name: c for c in check_bands(res, None)}
    assert checks["open-loop MLP beats RLS in >= 10 of 15"].passed
    assert checks["open-loop MLP recovery within P updates < 0.03"].passed
    rows[1] = SuiteRow("D", "RLS", "none", 0.001, 1.0, 1.0)
    checks = {c.name: c for c in check_bands(SuiteResult(rows), None)}
    assert not checks["open-loop MLP beats RLS in >= 10 of 15"].passed


def test_settings_builders():
    s = SuiteSettings(noise_sigma=0.0, hold=0.12)
    assert s.rls().hold == 0.12
    cfg = s.config(parse_scenario("D"), 1000.0)
    assert cfg.measurement_noise_sigma == 0.0 and cfg.brake_torque == 1000.0
    assert optimal_slip(cfg.schedule.surfaces[0]).lambda_star == pytest.approx(0.17, abs=1e-3)
