"""Inequality and mobility indicators of a class distribution.

All indicator routines take the state as observed fractions; none of them
integrate anything.  Mobility probabilities exist for the interior classes
only: the top class has nowhere to advance to and the bottom class enters
the advancement channel with different bookkeeping, so reports carry no
values for boundary classes rather than fake zeros.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateStateError,
    InternalConsistencyError,
    InvalidArgumentError,
)
from .model import _check_simplex, _frozen, _welfare_mass

__all__ = [
    "LorenzCurve",
    "MobilityReport",
    "MobilityDelta",
    "lorenz",
    "gini",
    "tax_revenue",
    "mobility_individual",
    "mobility_class",
    "mobility_collective",
    "mobility_delta",
]


@dataclass(frozen=True)
class LorenzCurve:
    """Piecewise-linear Lorenz curve at class resolution.

    points has shape (n+1, 2); row j is (cumulative population share,
    cumulative income share) of the poorest j classes, from (0,0) to (1,1).
    Both columns are nondecreasing and the polyline is convex because class
    average incomes increase with the index.
    """

    points: np.ndarray

    @property
    def pop(self):
        return self.points[:, 0]

    @property
    def inc(self):
        return self.points[:, 1]


def lorenz(grid, X):
    """Lorenz curve of the distribution, classes weighted by average income."""
    X = _check_simplex(X, grid.n)
    income = grid.r_avg * X
    total = income.sum()
    if total <= 0:
        raise DegenerateStateError("total income is zero")
    pts = np.zeros((grid.n + 1, 2))
    pts[1:, 0] = np.cumsum(X)
    pts[1:, 1] = np.cumsum(income) / total
    pts[-1] = 1.0
    return LorenzCurve(points=_frozen(pts))


def gini(grid, X):
    """Gini coefficient, one minus twice the area under the Lorenz curve."""
    pts = lorenz(grid, X).points
    area = float(np.trapezoid(pts[:, 1], pts[:, 0]))
    return 1.0 - 2.0 * area


def tax_revenue(params, X):
    """Tax revenue per unit time redistributed below the top class.

    Evaluated twice: as the raw triple sum over payer pair and recipient
    class, and as the factored product of total collection and the welfare
    share of the first n-1 classes.  The two routes are algebraically equal;
    disagreement beyond roundoff reports corrupt inputs.
    """
    X = _check_simplex(X, params.n)
    n = params.n
    p = params.p.p
    tau = params.tau.tau
    S = params.S
    w = params.w.w
    W = _welfare_mass(params, X)

    direct = 0.0
    for h in range(n):
        for k in range(n):
            if p[h, k] == 0.0:
                continue
            pair = p[h, k] * S * tau[k] * X[h] * X[k]
            for j in range(n - 1):
                direct += pair * w[j] * X[j] / W

    collected = S * float(X @ (p * tau[None, :]) @ X)
    factored = collected * float(np.dot(w[:-1], X[:-1])) / W
    if abs(direct - factored) > 1e-14 * max(1.0, abs(factored)):
        raise InternalConsistencyError(
            f"tax revenue routes disagree: {direct!r} vs {factored!r}"
        )
    return factored


def _interior_index(params, i):
    if not isinstance(i, (int, np.integer)):
        raise InvalidArgumentError("class index must be an integer")
    if not (2 <= i <= params.n - 1):
        raise InvalidArgumentError(
            f"mobility is defined for interior classes 2..{params.n - 1}, got {i}"
        )
    return int(i)


def _interior_mass(X):
    m = 1.0 - X[0] - X[-1]
    if m <= 0:
        raise DegenerateStateError("no population in the interior classes")
    return m


def mobility_individual(params, X, i):
    """Advancement probability per unit time for one individual of class i.

    Returns (P_exch, P_welf): the rate of winning an exchange while taxed at
    the class rate and the rate of receiving a welfare advancement, each
    spread over the income span above the class.
    """
    i = _interior_index(params, i)
    X = _check_simplex(X, params.n)
    p = params.p.p
    tau = params.tau.tau
    r = params.grid.r
    S = params.S
    w = params.w.w
    span = S / (r[i + 1] - r[i])
    exch = span * (1.0 - tau[i - 1]) * float(p[:, i - 1] @ X)
    W = _welfare_mass(params, X)
    A = float(X @ (p * tau[None, :]) @ X)
    welf = span * (w[i - 1] / W) * A
    return exch, welf


def mobility_class(params, X, i):
    """Advancement probability of class i as a whole, normalized to the
    population currently in the interior classes.  Returns (P_exch, P_welf)."""
    i = _interior_index(params, i)
    X = _check_simplex(X, params.n)
    exch, welf = mobility_individual(params, X, i)
    scale = X[i - 1] / _interior_mass(X)
    return exch * scale, welf * scale


@dataclass(frozen=True)
class MobilityReport:
    """Advancement probabilities over the interior classes.

    classes holds the labels 2..n-1 and the six vectors align with it.
    Elementwise P_individual = P_exch_individual + P_welf_individual,
    M = P_exch_collective + P_welf_collective, and each class vector sums
    to its collective scalar.
    """

    classes: np.ndarray
    P_exch_individual: np.ndarray
    P_welf_individual: np.ndarray
    P_individual: np.ndarray
    P_exch_class: np.ndarray
    P_welf_class: np.ndarray
    P_class: np.ndarray
    P_exch_collective: float
    P_welf_collective: float
    M: float


def mobility_collective(params, X):
    """Full mobility report: per-class tables plus collective aggregates.

    The vectors come from the per-class routines; the collective scalars are
    accumulated independently as direct sums over the defining expressions,
    so the decomposition identity stays an honest external check instead of
    being true by construction.
    """
    X = _check_simplex(X, params.n)
    n = params.n
    p = params.p.p
    tau = params.tau.tau
    r = params.grid.r
    S = params.S
    w = params.w.w
    interior = _interior_mass(X)

    cols = {f.name: [] for f in _REPORT_VECTORS}
    for i in range(2, n):
        e_i, f_i = mobility_individual(params, X, i)
        ce_i, cf_i = mobility_class(params, X, i)
        cols["P_exch_individual"].append(e_i)
        cols["P_welf_individual"].append(f_i)
        cols["P_individual"].append(e_i + f_i)
        cols["P_exch_class"].append(ce_i)
        cols["P_welf_class"].append(cf_i)
        cols["P_class"].append(ce_i + cf_i)

    W = 0.0
    for j in range(n):
        W += w[j] * X[j]
    if W <= 0:
        raise DegenerateStateError("welfare mass is zero")
    H = 0.0
    for h in range(n):
        for k in range(n):
            H += p[h, k] * tau[k] * X[h] * X[k]
    coll_exch = 0.0
    coll_welf = 0.0
    for i in range(2, n):
        span = S / (r[i + 1] - r[i])
        acc = 0.0
        for k in range(n):
            acc += p[k, i - 1] * X[k]
        coll_exch += span * (1.0 - tau[i - 1]) * acc * X[i - 1]
        coll_welf += span * (w[i - 1] / W) * H * X[i - 1]
    coll_exch /= interior
    coll_welf /= interior

    return MobilityReport(
        classes=np.arange(2, n),
        P_exch_collective=coll_exch,
        P_welf_collective=coll_welf,
        M=coll_exch + coll_welf,
        **{name: _frozen(np.array(v)) for name, v in cols.items()},
    )


_REPORT_VECTORS = [
    f for f in MobilityReport.__dataclass_fields__.values()
    if f.name not in ("classes", "P_exch_collective", "P_welf_collective", "M")
]


@dataclass(frozen=True)
class MobilityDelta:
    """Differences (second regime minus first) of mobility and inequality."""

    classes: np.ndarray
    dP_exch_individual: np.ndarray
    dP_welf_individual: np.ndarray
    dP_individual: np.ndarray
    dP_exch_class: np.ndarray
    dP_welf_class: np.ndarray
    dP_class: np.ndarray
    M_a: float
    M_b: float
    delta_M: float
    gini_a: float
    gini_b: float
    delta_gini: float


def mobility_delta(params_a, eq_a, params_b, eq_b):
    """Compare mobility and Gini between two regimes on the same income grid.

    eq_a and eq_b may be state vectors or converged results carrying X_eq.
    """
    X_a = getattr(eq_a, "X_eq", eq_a)
    X_b = getattr(eq_b, "X_eq", eq_b)
    if params_a.n != params_b.n or not np.array_equal(params_a.grid.r, params_b.grid.r):
        raise InvalidArgumentError("regimes must share one income grid")
    rep_a = mobility_collective(params_a, X_a)
    rep_b = mobility_collective(params_b, X_b)
    ga = gini(params_a.grid, X_a)
    gb = gini(params_b.grid, X_b)
    return MobilityDelta(
        classes=rep_a.classes,
        dP_exch_individual=_frozen(rep_b.P_exch_individual - rep_a.P_exch_individual),
        dP_welf_individual=_frozen(rep_b.P_welf_individual - rep_a.P_welf_individual),
        dP_individual=_frozen(rep_b.P_individual - rep_a.P_individual),
        dP_exch_class=_frozen(rep_b.P_exch_class - rep_a.P_exch_class),
        dP_welf_class=_frozen(rep_b.P_welf_class - rep_a.P_welf_class),
        dP_class=_frozen(rep_b.P_class - rep_a.P_class),
        M_a=rep_a.M, M_b=rep_b.M, delta_M=rep_b.M - rep_a.M,
        gini_a=ga, gini_b=gb, delta_gini=gb - ga,
    )
