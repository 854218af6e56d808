import csv
import math

import numpy as np
import pytest

from kinex import (
    CalibrationError,
    IntegrationSettings,
    InvalidArgumentError,
    SweepCell,
    calibrate_mu,
    correlation_report,
    gini,
    level_line_to_csv,
    make_params,
    rates_from_delta_tau,
    run_cell,
    solve_equilibrium,
    sweep_grid,
    sweep_to_csv,
    trace_level_line,
)

MU = 143.506258

# frozen (spread, tilt, G, M) rows along three constant-Gini lines,
# used to exercise the correlation report on a fixed dataset
LINE_A = [(0.15, 0.20, 0.341, 0.002700), (0.25, 0.28, 0.341, 0.002704),
          (0.35, 0.36, 0.341, 0.002707)]
LINE_B = [(0.15, 0.15, 0.338, 0.002712), (0.25, 0.24, 0.338, 0.002714),
          (0.35, 0.32, 0.338, 0.002717)]
LINE_C = [(0.20, 0.15, 0.335, 0.002723), (0.25, 0.20, 0.335, 0.002723),
          (0.35, 0.28, 0.335, 0.002727)]


def synthetic_cell(delta_tau, gamma, G, M, converged=True):
    lo, hi = rates_from_delta_tau(delta_tau)
    return SweepCell(
        tau_min=lo, tau_max=hi, delta_tau=delta_tau, gamma=gamma, mu=MU,
        G=G, M=M, TR=0.001, X_eq=np.full(15, 1.0 / 15.0), converged=converged,
    )


@pytest.mark.parametrize(
    "delta_tau, lo, hi",
    [
        (0.15, 0.30, 0.45),
        (0.20, 0.275, 0.475),
        (0.25, 0.25, 0.50),
        (0.35, 0.20, 0.55),
    ],
)
def test_rates_from_delta_tau(delta_tau, lo, hi):
    got_lo, got_hi = rates_from_delta_tau(delta_tau)
    assert got_lo == pytest.approx(lo, rel=0, abs=1e-15)
    assert got_hi == pytest.approx(hi, rel=0, abs=1e-15)
    assert got_hi - got_lo == pytest.approx(delta_tau, rel=0, abs=1e-15)


@pytest.mark.parametrize("delta_tau", [0.8, 1.5, -0.1])
def test_rates_reject_unusable_spread(delta_tau):
    with pytest.raises(InvalidArgumentError):
        rates_from_delta_tau(delta_tau)


def test_run_cell_default_regime():
    cell = run_cell(None, 0.15, 0.5, MU)
    assert cell.converged
    assert cell.tau_min == pytest.approx(0.30, abs=1e-15)
    assert cell.tau_max == pytest.approx(0.45, abs=1e-15)
    assert abs(cell.G - 0.368) <= 2e-4
    assert cell.M > 0.0
    assert cell.TR > 0.0
    assert cell.residual < 1e-12
    assert abs(cell.X_eq.sum() - 1.0) <= 1e-12


def test_run_cell_demotes_solver_failure():
    cell = run_cell(None, 0.15, 0.5, MU, IntegrationSettings(max_time=5.0))
    assert not cell.converged
    assert math.isnan(cell.G) and math.isnan(cell.M) and math.isnan(cell.TR)
    assert cell.X_eq.shape == (15,)  # last state reached is preserved
    assert cell.residual > 0.0


def test_sweep_grid_single_cell_matches_run_cell():
    direct = run_cell(None, 0.15, 0.5, MU)
    cells = sweep_grid([0.15], [0.5], MU)
    assert len(cells) == 1
    assert cells[0].G == direct.G
    assert cells[0].M == direct.M
    assert np.array_equal(cells[0].X_eq, direct.X_eq)


def test_sweep_grid_order_independent_of_threads():
    seq = sweep_grid([0.15, 0.25], [0.3, 0.5], MU, threads=1)
    par = sweep_grid([0.15, 0.25], [0.3, 0.5], MU, threads=3)
    assert [(c.delta_tau, c.gamma) for c in seq] == [
        (0.15, 0.3), (0.15, 0.5), (0.25, 0.3), (0.25, 0.5)
    ]
    for a, b in zip(seq, par):
        assert a.G == b.G and a.M == b.M  # deterministic regardless of pool
        assert np.array_equal(a.X_eq, b.X_eq)


def test_sweep_grid_rejects_empty_axes():
    with pytest.raises(InvalidArgumentError):
        sweep_grid([], [0.5], MU)
    with pytest.raises(InvalidArgumentError):
        sweep_grid([0.15], [], MU)
    with pytest.raises(InvalidArgumentError):
        sweep_grid([0.15], [0.5], MU, threads=-1)


def test_calibrate_mu_self_consistent():
    params = make_params()
    pivot = 143.5
    target = gini(params.grid, solve_equilibrium(params, pivot).X_eq)
    mu_star = calibrate_mu(
        {"tau_min": 0.30, "tau_max": 0.45, "gamma": 0.5, "target_G": target},
        (143.0, 144.0),
    )
    assert abs(mu_star - pivot) <= 1e-6


def test_calibrate_mu_unbracketed_target():
    with pytest.raises(CalibrationError) as err:
        calibrate_mu(
            {"tau_min": 0.30, "tau_max": 0.45, "gamma": 0.5, "target_G": 0.9},
            (140.0, 141.0),
        )
    assert "not bracketed" in str(err.value)


def test_calibrate_mu_rejects_bad_interval():
    with pytest.raises(InvalidArgumentError):
        calibrate_mu(
            {"tau_min": 0.30, "tau_max": 0.45, "gamma": 0.5, "target_G": 0.368},
            (144.0, 143.0),
        )


def test_trace_level_line_hits_target():
    line = trace_level_line(0.355, [0.15], (0.05, 0.5), MU)
    assert line.warnings == ()
    assert len(line.points) == 1
    pt = line.points[0]
    assert pt.delta_tau == 0.15
    assert abs(pt.G - 0.355) <= line.tolerance
    assert 0.05 < pt.gamma < 0.5
    assert pt.M > 0.0


def test_trace_level_line_reports_unreachable_spread():
    line = trace_level_line(0.30, [0.15], (0.45, 0.5), MU)
    assert line.points == ()
    assert len(line.warnings) == 1
    assert "outside" in line.warnings[0]


def test_trace_level_line_input_validation():
    with pytest.raises(InvalidArgumentError):
        trace_level_line(0.34, [], (0.05, 0.5), MU)
    with pytest.raises(InvalidArgumentError):
        trace_level_line(0.34, [0.25, 0.15], (0.05, 0.5), MU)


def test_correlation_report_on_frozen_lines():
    cells = [synthetic_cell(*row) for row in LINE_A + LINE_B + LINE_C]
    rep = correlation_report(cells)
    assert rep.n_cells == 9
    assert not rep.degenerate
    assert rep.pearson_GM < -0.9
    assert rep.all_opposite
    assert len(rep.row_products) > 0 and len(rep.col_products) > 0
    for entry in rep.row_products + rep.col_products:
        assert entry[-1] <= 0.0


def test_correlation_report_degenerate_when_flat():
    cells = [synthetic_cell(dt, g, 0.34, 0.0027 + 1e-5 * g)
             for dt in (0.15, 0.25) for g in (0.2, 0.3)]
    rep = correlation_report(cells)
    assert rep.degenerate
    assert math.isnan(rep.pearson_GM)


def test_correlation_report_needs_three_live_cells():
    cells = [
        synthetic_cell(0.15, 0.2, 0.34, 0.0027),
        synthetic_cell(0.25, 0.3, 0.33, 0.0028),
        synthetic_cell(0.35, 0.4, float("nan"), float("nan"), converged=False),
    ]
    with pytest.raises(InvalidArgumentError):
        correlation_report(cells)


def test_sweep_csv_round_trip(tmp_path):
    cells = [synthetic_cell(*row) for row in LINE_A]
    path = tmp_path / "sweep.csv"
    sweep_to_csv(cells, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    for cell, row in zip(cells, rows):
        assert float(row["G"]) == cell.G
        assert float(row["M"]) == cell.M
        assert row["converged"] == "True"


def test_level_line_csv_round_trip(tmp_path):
    line = trace_level_line(0.355, [0.15], (0.05, 0.5), MU)
    path = tmp_path / "line.csv"
    level_line_to_csv(line, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["gamma"]) == line.points[0].gamma
    assert float(rows[0]["delta_tau"]) == 0.15
