"""Exploration of the tax-spread / welfare-tilt plane.

A cell of the plane fixes the rate pair and the welfare tilt, solves the
equilibrium at a common mean income and records inequality, mobility and
revenue.  Calibration recovers the mean income that reproduces a reference
Gini value; level lines trace constant-Gini curves through the plane.

The spread alone does not fix the rate pair; the midpoint convention
tau_min = 0.375 - spread/2, tau_max = 0.375 + spread/2 is used throughout,
so spreads 0.15, 0.20, 0.25, 0.35 map to the rate pairs 30-45, 27.5-47.5,
25-50 and 20-55 percent.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import solve_equilibrium
from .errors import (
    CalibrationError,
    InvalidArgumentError,
    KinexError,
    NonConvergenceError,
)
from .indicators import gini, mobility_collective, tax_revenue
from .model import make_params

__all__ = [
    "SweepCell",
    "LevelLine",
    "LevelPoint",
    "CorrelationReport",
    "rates_from_delta_tau",
    "calibrate_mu",
    "run_cell",
    "sweep_grid",
    "trace_level_line",
    "correlation_report",
    "sweep_to_csv",
    "level_line_to_csv",
]

_RATE_MIDPOINT = 0.375


def rates_from_delta_tau(delta_tau):
    """Rate pair with the given spread around the standard midpoint."""
    lo = _RATE_MIDPOINT - delta_tau / 2.0
    hi = _RATE_MIDPOINT + delta_tau / 2.0
    if not (0.0 <= lo <= hi < 1.0):
        raise InvalidArgumentError(
            f"spread {delta_tau} leaves the valid rate range, pair ({lo}, {hi})"
        )
    return lo, hi


@dataclass(frozen=True)
class SweepCell:
    """One evaluated point of the plane.

    On solver failure converged is False and the indicator fields are nan;
    X_eq then holds the last state reached when one exists.
    """

    tau_min: float
    tau_max: float
    delta_tau: float
    gamma: float
    mu: float
    G: float
    M: float
    TR: float
    X_eq: np.ndarray
    converged: bool
    residual: float = float("nan")


@dataclass(frozen=True)
class LevelPoint:
    delta_tau: float
    gamma: float
    G: float
    M: float


@dataclass(frozen=True)
class LevelLine:
    """Constant-Gini trace through the plane.

    Every point satisfies |G - target_G| <= tolerance; spreads increase
    along the trace.  Spreads that could not bracket the target are listed
    in warnings instead of contributing points.
    """

    target_G: float
    points: tuple
    tolerance: float
    warnings: tuple = ()


def _base_shape(base):
    if base is None:
        return dict(n=15, c=25.0, S=1.0)
    return dict(n=base.n, c=float(base.grid.r[1]), S=base.S)


def _solve_gini(delta_tau, gamma, mu, base, settings):
    lo, hi = rates_from_delta_tau(delta_tau)
    params = make_params(tau_min=lo, tau_max=hi, gamma=gamma, **_base_shape(base))
    eq = solve_equilibrium(params, mu, settings)
    return params, eq, gini(params.grid, eq.X_eq)


def calibrate_mu(reference, search_interval, base=None, settings=None):
    """Mean income at which the reference regime attains its target Gini.

    reference is a mapping with tau_min, tau_max, gamma and target_G.
    Bisection runs on the mean income until the bracket is 1e-6 wide, then
    the achieved Gini must sit within 1e-4 of the target.  Inequality falls
    as the mean income rises in this family, which fixes the bracketing
    logic; a target outside the endpoint values fails immediately.
    """
    shape = _base_shape(base)
    params = make_params(
        tau_min=reference["tau_min"], tau_max=reference["tau_max"],
        gamma=reference["gamma"], **shape,
    )
    target = reference["target_G"]
    mu_lo, mu_hi = float(search_interval[0]), float(search_interval[1])
    if not mu_lo < mu_hi:
        raise InvalidArgumentError("search interval must satisfy mu_lo < mu_hi")

    def g_at(mu):
        eq = solve_equilibrium(params, mu, settings)
        return gini(params.grid, eq.X_eq)

    g_lo = g_at(mu_lo)
    g_hi = g_at(mu_hi)
    if not (min(g_lo, g_hi) <= target <= max(g_lo, g_hi)):
        raise CalibrationError(
            f"target G={target} not bracketed: G({mu_lo})={g_lo:.6f}, "
            f"G({mu_hi})={g_hi:.6f}"
        )
    sign = 1.0 if g_hi >= g_lo else -1.0
    lo, hi = mu_lo, mu_hi
    g_mid = g_lo
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        g_mid = g_at(mid)
        if sign * (g_mid - target) < 0.0:
            lo = mid
        else:
            hi = mid
    mu_star = 0.5 * (lo + hi)
    if abs(g_mid - target) > 1e-4:
        raise CalibrationError(
            f"bisection exhausted at mu={mu_star:.8f} with G={g_mid:.6f}, "
            f"target {target} missed by {abs(g_mid - target):.2e}"
        )
    return mu_star


def run_cell(base, delta_tau, gamma, mu, settings=None):
    """Solve one cell of the plane and package its indicators.

    Solver failures are demoted to converged=False so a sweep survives
    isolated bad cells.
    """
    lo, hi = rates_from_delta_tau(delta_tau)
    params = make_params(tau_min=lo, tau_max=hi, gamma=gamma, **_base_shape(base))
    nan = float("nan")
    try:
        eq = solve_equilibrium(params, mu, settings)
    except NonConvergenceError as err:
        return SweepCell(
            tau_min=lo, tau_max=hi, delta_tau=delta_tau, gamma=gamma, mu=mu,
            G=nan, M=nan, TR=nan, X_eq=err.X_last, converged=False,
            residual=err.residual,
        )
    except KinexError:
        return SweepCell(
            tau_min=lo, tau_max=hi, delta_tau=delta_tau, gamma=gamma, mu=mu,
            G=nan, M=nan, TR=nan, X_eq=np.full(params.n, nan), converged=False,
        )
    return SweepCell(
        tau_min=lo, tau_max=hi, delta_tau=delta_tau, gamma=gamma, mu=mu,
        G=gini(params.grid, eq.X_eq),
        M=mobility_collective(params, eq.X_eq).M,
        TR=tax_revenue(params, eq.X_eq),
        X_eq=eq.X_eq, converged=True, residual=eq.residual,
    )


def _pool_size(threads):
    if threads < 0:
        raise InvalidArgumentError("threads must be >= 0")
    return threads if threads > 0 else (os.cpu_count() or 1)


def sweep_grid(delta_tau_list, gamma_list, mu, base=None, settings=None, threads=0):
    """Evaluate the full cartesian grid of spreads and tilts at one mean income.

    Cells are independent; they are solved concurrently and returned in
    row-major order (spread outer, tilt inner) regardless of thread count.
    """
    if len(delta_tau_list) == 0 or len(gamma_list) == 0:
        raise InvalidArgumentError("grid axes must be nonempty")
    jobs = [(dt, g) for dt in delta_tau_list for g in gamma_list]
    with ThreadPoolExecutor(max_workers=_pool_size(threads)) as pool:
        cells = list(pool.map(
            lambda job: run_cell(base, job[0], job[1], mu, settings), jobs
        ))
    return cells


def _trace_point(target_G, delta_tau, gamma_bounds, mu, tol, base, settings):
    g_lo, g_hi = float(gamma_bounds[0]), float(gamma_bounds[1])
    _, _, G_lo = _solve_gini(delta_tau, g_lo, mu, base, settings)
    _, _, G_hi = _solve_gini(delta_tau, g_hi, mu, base, settings)
    if not (min(G_lo, G_hi) <= target_G <= max(G_lo, G_hi)):
        return None, (
            f"spread {delta_tau}: target G={target_G} outside "
            f"[{min(G_lo, G_hi):.6f}, {max(G_lo, G_hi):.6f}] "
            f"for tilt in [{g_lo}, {g_hi}]"
        )
    sign = 1.0 if G_hi >= G_lo else -1.0
    lo, hi = g_lo, g_hi
    while True:
        mid = 0.5 * (lo + hi)
        params, eq, G_mid = _solve_gini(delta_tau, mid, mu, base, settings)
        if abs(G_mid - target_G) <= tol:
            M = mobility_collective(params, eq.X_eq).M
            return LevelPoint(delta_tau=delta_tau, gamma=mid, G=G_mid, M=M), None
        if hi - lo < 1e-10:
            return None, (
                f"spread {delta_tau}: bisection stalled at tilt {mid:.10f} "
                f"with G={G_mid:.6f}, target missed by {abs(G_mid - target_G):.2e}"
            )
        if sign * (G_mid - target_G) < 0.0:
            lo = mid
        else:
            hi = mid


def trace_level_line(target_G, delta_tau_list, gamma_bounds, mu,
                     tol=5e-4, base=None, settings=None, threads=0):
    """Trace the constant-Gini line through the given spreads.

    For each spread the tilt is bisected until the Gini value sits within
    tol of the target; spreads whose bounds do not bracket the target are
    skipped and reported in warnings.  Distinct spreads run concurrently.
    """
    if len(delta_tau_list) == 0:
        raise InvalidArgumentError("need at least one spread")
    dts = list(delta_tau_list)
    if any(b >= a for a, b in zip(dts[1:], dts)):
        raise InvalidArgumentError("spreads must be strictly increasing")
    with ThreadPoolExecutor(max_workers=_pool_size(threads)) as pool:
        results = list(pool.map(
            lambda dt: _trace_point(target_G, dt, gamma_bounds, mu, tol,
                                    base, settings),
            dts,
        ))
    points = tuple(pt for pt, _ in results if pt is not None)
    warnings = tuple(msg for _, msg in results if msg is not None)
    return LevelLine(target_G=target_G, points=points, tolerance=tol,
                     warnings=warnings)


@dataclass(frozen=True)
class CorrelationReport:
    """Joint behaviour of inequality and mobility over a set of cells.

    pearson_GM is nan and degenerate is True when either indicator has zero
    variance.  The product tables list (coordinate, low, high, dG*dM) for
    every adjacent pair along grid rows and columns; opposite increments
    give nonpositive products.
    """

    n_cells: int
    pearson_GM: float
    degenerate: bool
    row_products: tuple
    col_products: tuple

    @property
    def all_opposite(self):
        return all(p[-1] <= 0.0 for p in self.row_products + self.col_products)


def correlation_report(cells):
    """Pearson correlation of (G, M) plus adjacent-increment sign tables."""
    live = [c for c in cells if c.converged]
    if len(live) < 3:
        raise InvalidArgumentError(
            f"need at least 3 converged cells, got {len(live)}"
        )
    G = np.array([c.G for c in live])
    M = np.array([c.M for c in live])
    degenerate = bool(G.std() == 0.0 or M.std() == 0.0)
    pearson = float("nan") if degenerate else float(np.corrcoef(G, M)[0, 1])

    by_gamma = {}
    by_dt = {}
    for c in live:
        by_gamma.setdefault(c.gamma, []).append(c)
        by_dt.setdefault(c.delta_tau, []).append(c)
    rows = []
    for g, row in sorted(by_gamma.items()):
        row.sort(key=lambda c: c.delta_tau)
        for a, b in zip(row, row[1:]):
            rows.append((g, a.delta_tau, b.delta_tau, (b.G - a.G) * (b.M - a.M)))
    cols = []
    for dt, col in sorted(by_dt.items()):
        col.sort(key=lambda c: c.gamma)
        for a, b in zip(col, col[1:]):
            cols.append((dt, a.gamma, b.gamma, (b.G - a.G) * (b.M - a.M)))
    return CorrelationReport(
        n_cells=len(live), pearson_GM=pearson, degenerate=degenerate,
        row_products=tuple(rows), col_products=tuple(cols),
    )


_SWEEP_COLUMNS = ["tau_min", "tau_max", "delta_tau", "gamma", "mu",
                  "G", "M", "TR", "converged"]


def sweep_to_csv(cells, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(_SWEEP_COLUMNS)
        for c in cells:
            out.writerow([
                repr(c.tau_min), repr(c.tau_max), repr(c.delta_tau),
                repr(c.gamma), repr(c.mu), repr(c.G), repr(c.M), repr(c.TR),
                c.converged,
            ])


def level_line_to_csv(line, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["tau_min", "tau_max", "delta_tau", "gamma", "G", "M"])
        for pt in line.points:
            lo, hi = rates_from_delta_tau(pt.delta_tau)
            out.writerow([repr(lo), repr(hi), repr(pt.delta_tau),
                          repr(pt.gamma), repr(pt.G), repr(pt.M)])
