import math

import numpy as np
import pytest

from turnphase.bench import (
    EXPERIMENTS,
    ExperimentParams,
    ExperimentReport,
    Record,
    diff_metric,
    max_abs_difference,
    reference_solve,
    run_experiment,
)
from turnphase.specfun import bumps_q

TINY = dict(grid=2, points=50, repeat=1)


def test_reference_solve_cosine():
    ref = reference_solve(lambda t: np.ones_like(t), (0.0, 10.0), ((0.0, 1, 0, 1.0), (0.0, 0, 1, 0.0)))
    t = np.linspace(0, 10, 1001)
    assert ref.certified
    assert np.max(np.abs(ref(t) - np.cos(t))) <= 1e-12
    assert np.max(np.abs(ref.derivative(t) + np.sin(t))) <= 1e-12


def test_reference_solve_two_point_conditions():
    # y(0) = 0, y'(10) = 1 for y'' + y = 0 gives y = sin(t) / cos(10)
    ref = reference_solve(lambda t: np.ones_like(t), (0.0, 10.0), ((0.0, 1, 0, 0.0), (10.0, 0, 1, 1.0)))
    t = np.linspace(0, 10, 101)
    assert np.max(np.abs(ref(t) - np.sin(t) / math.cos(10.0))) <= 1e-11


def test_reference_levels_agree_bumps():
    nc = bumps_q(100.0)
    ref = reference_solve(nc.q, nc.domain, ((0.0, 1, 0, 0.0), (10.0, 0, 1, 1.0)))
    assert ref.certified
    assert ref.agreement <= 1e-11


def test_diff_metric_examples():
    t = np.linspace(-1, 1, 201)
    assert diff_metric(np.sin, np.sin, t) == 0.0
    xi = diff_metric(lambda z: np.sin(z) + 1e-9, np.sin, t)
    assert 5e-10 <= xi <= 1e-9


def test_max_abs_difference():
    t = np.linspace(0, 1, 11)
    assert max_abs_difference(lambda z: z + 3e-9, lambda z: z, t) == pytest.approx(3e-9, rel=1e-6)


def test_params_validation():
    with pytest.raises(ValueError):
        ExperimentParams(grid=0)
    with pytest.raises(ValueError):
        ExperimentParams(numax=0.5)
    with pytest.raises(ValueError):
        ExperimentParams(n_jobs=0)


def test_unknown_experiment():
    with pytest.raises(ValueError, match="unknown experiment"):
        run_experiment("nope", ExperimentParams(**TINY))


def test_csv_format():
    rep = ExperimentReport("x", [1.0], [Record(1.0, 0.1, 1 / 3, math.nan, 2.0)], {})
    text = rep.to_csv()
    assert "\r" not in text and text.endswith("\n")
    header, row = text.splitlines()
    assert header == "abscissa,err_supplied,err_spectral,err_predicted,wall_time_ms,status"
    assert row == "1,0.10000000000000001,0.33333333333333331,nan,2,ok"
    assert float(row.split(",")[2]) == 1 / 3


def test_mode_ratios_floor_at_machine_zero():
    rep = ExperimentReport(
        "x",
        [1, 2, 3],
        [Record(1, 0.0, 0.0), Record(2, 1e-12, 1e-11), Record(3, status="failed")],
    )
    assert rep.mode_ratios() == pytest.approx([1.0, 10.0])


@pytest.mark.slow
def test_bessel_small_grid_report():
    rep = run_experiment("bessel", ExperimentParams(numax=100.0, **TINY))
    assert rep.grid == [1.0, 100.0]
    assert [r.abscissa for r in rep.records] == rep.grid
    assert rep.metadata["eps"] == 1e-12 and rep.metadata["l"] == 16
    for r in rep.records:
        assert r.status == "ok"
        assert r.err_supplied <= 1e-9
        assert r.err_predicted > 0


@pytest.mark.slow
def test_timing_only_rows_above_reference_cap():
    rep = run_experiment("bessel", ExperimentParams(numax=1e4, ref_numax=10.0, **TINY))
    assert rep.records[0].status == "ok"
    assert rep.records[1].status == "timing only"
    assert math.isnan(rep.records[1].err_supplied)
    assert rep.records[1].wall_time_ms > 0


@pytest.mark.slow
def test_rows_are_deterministic_and_order_preserving():
    p1 = ExperimentParams(grid=3, numax=1e2, points=50, repeat=1)
    p2 = ExperimentParams(grid=3, numax=1e2, points=50, repeat=1, n_jobs=3)
    r1, r2 = run_experiment("high", p1), run_experiment("high", p2)
    assert r1.grid == r2.grid == [1.0, 2.0, 3.0]
    for a, b in zip(r1.records, r2.records):
        assert (a.abscissa, a.err_supplied, a.err_spectral, a.err_predicted) == (
            b.abscissa,
            b.err_supplied,
            b.err_spectral,
            b.err_predicted,
        )


@pytest.mark.slow
def test_airy_report_metadata():
    rep = run_experiment("airy", ExperimentParams(points=40, repeat=1))
    assert 60 <= rep.metadata["truncation_endpoint"] <= 70
    assert len(rep.records) == 40
    errs = np.array([r.err_supplied for r in rep.records])
    pred = np.array([r.err_predicted for r in rep.records])
    assert np.all(errs <= np.maximum(1e-12, 10 * pred))


def test_experiment_ids():
    assert EXPERIMENTS == ("airy", "bessel", "alf", "high", "bumps", "three", "many")
