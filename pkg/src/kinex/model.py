"""Model construction and evolution right-hand side.

The economy has n income classes with boundaries 0 = r_0 < r_1 < ... < r_n
and class average incomes r_avg[i] = (r[i] + r[i+1]) / 2 (0-based storage;
class labels in docstrings are 1-based to match the accompanying analysis
conventions, so class i lives at array index i-1).

A state is a vector X of population fractions on the probability simplex.
Money moves in binary encounters: in an (h, k) encounter the h-individual
pays an amount S with frequency p[h][k], the receiver is taxed at its own
rate, and the collected tax is redistributed through class welfare weights.
The induced population flow is linear in class occupancy for the direct
part (tensor C) and state-dependent for the tax/welfare part (T = U + V).
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStateError, InvalidArgumentError, InternalConsistencyError

__all__ = [
    "IncomeGrid",
    "EncounterMatrix",
    "TaxSchedule",
    "WelfareWeights",
    "DirectTransitionTensor",
    "ModelParams",
    "build_grid",
    "build_encounter_matrix",
    "build_tax_schedule",
    "build_welfare_weights",
    "direct_transition_tensor",
    "indirect_variation",
    "indirect_variation_tensor",
    "rhs",
    "rhs_dense",
    "make_params",
    "mean_income",
    "params_hash",
    "transition_bands",
]

_SIMPLEX_TOL = 1e-6


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IncomeGrid:
    """Class boundaries r (length n+1, r[0] = 0) and class averages r_avg (length n)."""

    n: int
    r: np.ndarray
    r_avg: np.ndarray

    @property
    def is_linear(self):
        """True when r_j = c*j for a single spacing c."""
        c = self.r[1]
        return bool(np.allclose(self.r, c * np.arange(self.n + 1), rtol=1e-12, atol=1e-12))


@dataclass(frozen=True)
class EncounterMatrix:
    """p[h][k]: frequency that in an (h, k) encounter the h-individual pays."""

    p: np.ndarray


@dataclass(frozen=True)
class TaxSchedule:
    """Linearly progressive tax rates, tau[0] = tau_min up to tau[n-1] = tau_max."""

    tau: np.ndarray
    tau_min: float
    tau_max: float


@dataclass(frozen=True)
class WelfareWeights:
    """Redistribution weights w, decreasing in class index for gamma < 1/2.

    gamma = 1/2 yields uniform weights; smaller gamma concentrates welfare
    on the poorer classes.
    """

    gamma: float
    w: np.ndarray


@dataclass(frozen=True)
class DirectTransitionTensor:
    """C[i][h][k]: probability that the h-individual lands in class i after
    an (h, k) exchange.  Zero unless |i - h| <= 1; columns sum to one."""

    C: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    """Immutable bundle of everything the dynamics needs."""

    grid: IncomeGrid
    S: float
    p: EncounterMatrix
    tau: TaxSchedule
    w: WelfareWeights
    C: DirectTransitionTensor = field(repr=False, default=None)

    @property
    def n(self):
        return self.grid.n


def build_grid(n, c):
    """Linear income grid r_j = c*j for j = 0..n.

    n must be at least 3 so that interior classes exist.
    """
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise InvalidArgumentError(f"class count n must be an integer >= 3, got {n!r}")
    if not c > 0:
        raise InvalidArgumentError(f"class width c must be positive, got {c!r}")
    r = c * np.arange(n + 1, dtype=float)
    r_avg = 0.5 * (r[:-1] + r[1:])
    return IncomeGrid(n=int(n), r=_frozen(r), r_avg=_frozen(r_avg))


def build_encounter_matrix(grid):
    """Encounter/payment frequencies p[h][k].

    General rule min(r_avg[h], r_avg[k]) / (4 r_avg[n]); the diagonal and the
    flows involving the extreme classes are special: the poorest class never
    pays and receives at a doubled rate, the richest class never receives
    a payment and pays at a doubled rate, and same-class encounters among
    interior classes use the doubled rate as well.  Zero rules take
    precedence, then the extreme-class rules, then the diagonal.  The single
    overlap (richest pays poorest) is identical under both applicable rules.
    """
    n = grid.n
    ra = grid.r_avg
    top = ra[-1]
    p = np.minimum.outer(ra, ra) / (4.0 * top)
    idx = np.arange(1, n - 1)
    p[idx, idx] = ra[idx] / (2.0 * top)      # interior diagonal
    p[1:, 0] = ra[0] / (2.0 * top)           # paying the poorest class
    p[n - 1, : n - 1] = ra[: n - 1] / (2.0 * top)  # the richest class paying
    p[0, :] = 0.0                            # the poorest class never pays
    p[:, n - 1] = 0.0                        # the richest class never receives
    if p.min() < 0 or p.max() > 1 or (p + p.T).max() > 1 + 1e-15:
        raise InternalConsistencyError("encounter matrix violates its frequency bounds")
    return EncounterMatrix(p=_frozen(p))


def build_tax_schedule(n, tau_min, tau_max):
    """Linear interpolation between tau_min (class 1) and tau_max (class n)."""
    if not (0 <= tau_min <= tau_max < 1):
        raise InvalidArgumentError(
            f"tax rates must satisfy 0 <= tau_min <= tau_max < 1, got ({tau_min}, {tau_max})"
        )
    j = np.arange(n, dtype=float)
    tau = tau_min + j / (n - 1) * (tau_max - tau_min)
    return TaxSchedule(tau=_frozen(tau), tau_min=float(tau_min), tau_max=float(tau_max))


def build_welfare_weights(grid, gamma):
    """Welfare weights on a linear grid.

    w[j] = r_avg[n+1-j] + (2/(n-1)) * gamma * (j - (n+1)/2) * (r_avg[n] - r_avg[1])
    in 1-based labels: the mirrored class averages tilted by gamma.  The
    identity w[1] - w[n] = (r_avg[n] - r_avg[1]) * (1 - 2*gamma) follows.
    """
    if not (0 < gamma <= 0.5):
        raise InvalidArgumentError(f"gamma must lie in (0, 0.5], got {gamma!r}")
    if not grid.is_linear:
        raise InvalidArgumentError("welfare weights are defined only for the linear grid r_j = c*j")
    n = grid.n
    ra = grid.r_avg
    j = np.arange(1, n + 1, dtype=float)
    w = ra[::-1] + (2.0 / (n - 1)) * gamma * (j - (n + 1) / 2.0) * (ra[-1] - ra[0])
    if w.min() <= 0:
        raise InternalConsistencyError("welfare weights must be positive")
    return WelfareWeights(gamma=float(gamma), w=_frozen(w))


def direct_transition_tensor(params):
    """Direct-exchange transition tensor C[i][h][k] (0-based indices).

    Only the bands h = i-1, i, i+1 are nonzero.  In 1-based labels:

      C[i][i+1][k] = p[i+1][k] * 2S(1 - tau_k) / (r[i+1] - r[i-1])   (i <= n-1, k <= n-1)
      C[i][i-1][k] = p[k][i-1] * 2S(1 - tau_{i-1}) / (r[i] - r[i-2]) (i >= 2,  k >= 2)
      C[i][i][k]   = 1 - (advance leak) - (retreat leak)

    with each leak guarded by the same index conditions as the band entry it
    matches, so every column sums to one exactly.
    """
    n = params.n
    r = params.grid.r
    tau = params.tau.tau
    p = params.p.p
    S = params.S
    C = np.zeros((n, n, n))
    for i in range(n):  # 0-based class index
        # h = i+1 pays k and retreats into i
        if i + 1 <= n - 1:
            denom = r[i + 2] - r[i]
            for k in range(n - 1):
                C[i, i + 1, k] = p[i + 1, k] * 2.0 * S * (1.0 - tau[k]) / denom
        # h = i-1 receives from k and advances into i
        if i - 1 >= 0:
            denom = r[i + 1] - r[i - 1]
            for k in range(1, n):
                C[i, i - 1, k] = p[k, i - 1] * 2.0 * S * (1.0 - tau[i - 1]) / denom
        # h = i stays, minus the two leak terms
        for k in range(n):
            stay = 1.0
            if i <= n - 2 and k >= 1:
                stay -= p[k, i] * 2.0 * S * (1.0 - tau[i]) / (r[i + 2] - r[i])
            if i >= 1 and k <= n - 2:
                stay -= p[i, k] * 2.0 * S * (1.0 - tau[k]) / (r[i + 1] - r[i - 1])
            C[i, i, k] = stay
    col = C.sum(axis=0)
    if np.abs(col - 1.0).max() > 1e-12:
        raise InternalConsistencyError(
            f"transition tensor columns deviate from 1 by {np.abs(col - 1.0).max():.3e}"
        )
    if C.min() < 0.0 or C.max() > 1.0:
        raise InternalConsistencyError(
            "transition tensor entries left [0, 1]; S is too large for this grid"
        )
    return DirectTransitionTensor(C=_frozen(C))


def make_params(n=15, c=25.0, S=1.0, tau_min=0.30, tau_max=0.45, gamma=0.5):
    """Build a complete parameter bundle for the default model family."""
    grid = build_grid(n, c)
    gaps = np.diff(grid.r_avg)
    if not 0.0 < S < gaps.min():
        raise InvalidArgumentError(
            f"exchange amount S={S} must be positive and smaller than the class-average gap {gaps.min()}"
        )
    p = build_encounter_matrix(grid)
    tau = build_tax_schedule(grid.n, tau_min, tau_max)
    w = build_welfare_weights(grid, gamma)
    params = ModelParams(grid=grid, S=float(S), p=p, tau=tau, w=w)
    tensor = direct_transition_tensor(params)
    return ModelParams(grid=grid, S=float(S), p=p, tau=tau, w=w, C=tensor)


def mean_income(grid, X):
    """mu(X) = sum of r_avg[i] * X[i]; conserved by the dynamics."""
    return float(np.dot(grid.r_avg, X))


def params_hash(params):
    """Short stable digest of the defining parameters, for run records."""
    t = params.tau
    key = (params.n, tuple(params.grid.r.tolist()), params.S,
           t.tau_min, t.tau_max, params.w.gamma)
    return hashlib.sha256(repr(key).encode()).hexdigest()[:16]


def _welfare_mass(params, X):
    W = float(np.dot(params.w.w, X))
    if W <= 0.0:
        raise DegenerateStateError("welfare-weight mass sum(w_j X_j) must be positive")
    return W


def indirect_variation(params, X, h, k, i):
    """T^i for the (h, k) encounter at state X, 1-based class labels.

    Sum of the welfare advancement U (taxes redistributed push receivers one
    class up) and the payer retrocession V (the taxed part of the payment
    drops the payer one class down).  Defined for h >= 2; for h = 1 the
    encounter moves no taxable money and the value is zero.
    """
    n = params.n
    if not (1 <= h <= n and 1 <= k <= n and 1 <= i <= n):
        raise InvalidArgumentError(f"class labels must lie in 1..{n}, got {(h, k, i)}")
    if h == 1:
        return 0.0
    X = np.asarray(X, dtype=float)
    r = params.grid.r
    w = params.w.w
    S = params.S
    W = _welfare_mass(params, X)
    eff = float(np.dot(w[: n - 1], X[: n - 1])) / W
    phk = params.p.p[h - 1, k - 1]
    tk = params.tau.tau[k - 1]
    base = phk * 2.0 * S * tk

    u = 0.0
    if i >= 2:
        u += w[i - 2] * X[i - 2] / (r[i] - r[i - 2])
    if i <= n - 1:
        u -= w[i - 1] * X[i - 1] / (r[i + 1] - r[i - 1])
    u *= base / W

    v = 0.0
    if i <= n - 1 and h == i + 1:
        v += 1.0 / (r[h] - r[i - 1])
    if i >= 2 and h == i:
        v -= 1.0 / (r[h] - r[i - 2])
    v *= base * eff

    return u + v


def indirect_variation_tensor(params, X):
    """All T^i_{[hk]}(X) values as an (n, n, n) array indexed [i, h, k], 0-based.

    Vectorized transcription of the same formulas as indirect_variation;
    the scalar form is kept as an independently testable reference.
    """
    n = params.n
    X = np.asarray(X, dtype=float)
    r = params.grid.r
    w = params.w.w
    S = params.S
    W = _welfare_mass(params, X)
    eff = float(np.dot(w[: n - 1], X[: n - 1])) / W
    base = params.p.p * (2.0 * S * params.tau.tau[None, :])  # [h, k]

    T = np.zeros((n, n, n))
    for i in range(1, n + 1):  # 1-based class label
        u = 0.0
        if i >= 2:
            u += w[i - 2] * X[i - 2] / (r[i] - r[i - 2])
        if i <= n - 1:
            u -= w[i - 1] * X[i - 1] / (r[i + 1] - r[i - 1])
        T[i - 1] = base * (u / W)
        if i <= n - 1:
            T[i - 1, i, :] += base[i, :] * eff / (r[i + 1] - r[i - 1])
        if i >= 2:
            T[i - 1, i - 1, :] -= base[i - 1, :] * eff / (r[i] - r[i - 2])
    T[:, 0, :] = 0.0  # encounters where class 1 would pay move nothing
    return T


def _check_simplex(X, n):
    X = np.asarray(X, dtype=float)
    if X.shape != (n,):
        raise InvalidArgumentError(f"state must have shape ({n},), got {X.shape}")
    if abs(X.sum() - 1.0) > _SIMPLEX_TOL:
        raise InvalidArgumentError(f"state must lie on the simplex, sum is {X.sum()!r}")
    return X


def transition_bands(params):
    """The three nonzero bands of C as (n, n) matrices keyed by receiver index.

    down[i, k] = C[i, i+1, k] (payers dropping into i), stay[i, k] = C[i, i, k],
    up[i, k] = C[i, i-1, k] (receivers climbing into i).  Rows out of range are
    zero.  The integrator and the fast rhs consume these instead of the dense
    tensor.
    """
    n = params.n
    C = params.C.C if params.C is not None else direct_transition_tensor(params).C
    down = np.zeros((n, n))
    stay = np.zeros((n, n))
    up = np.zeros((n, n))
    for i in range(n):
        stay[i] = C[i, i, :]
        if i + 1 < n:
            down[i] = C[i, i + 1, :]
        if i - 1 >= 0:
            up[i] = C[i, i - 1, :]
    return _frozen(down), _frozen(stay), _frozen(up)


def rhs(params, X):
    """Time derivative dX/dt of the evolution equations, O(n^2).

    dX_i/dt = sum_{h,k} (C[i][h][k] + T^i_{[hk]}(X)) X_h X_k - X_i * sum_k X_k.
    Conserves total population and mean income up to round-off.
    """
    n = params.n
    X = _check_simplex(X, n)
    r = params.grid.r
    w = params.w.w
    S = params.S
    W = _welfare_mass(params, X)
    eff = float(np.dot(w[: n - 1], X[: n - 1])) / W
    ptau = params.p.p * params.tau.tau[None, :]
    b = ptau @ X                     # b[h] = sum_k p[h,k] tau_k X_k
    A = float(X @ b)                 # total encounter-weighted tax flow
    down, stay, up = transition_bands(params)

    out = X * (stay @ X)
    out[: n - 1] += X[1:] * (down[: n - 1] @ X)
    out[1:] += X[: n - 1] * (up[1:] @ X)

    # welfare advancement (U), telescoping in i
    adv = np.zeros(n + 1)
    adv[1:n] = w[: n - 1] * X[: n - 1] / (r[2:] - r[:-2])
    out += 2.0 * S * (A / W) * (adv[:n] - adv[1:])

    # payer retrocession (V)
    ret = np.zeros(n + 1)
    ret[1:n] = b[1:] * X[1:] / (r[2:] - r[:-2])
    out += 2.0 * S * eff * (ret[1:] - ret[:n])

    return out - X * X.sum()


def rhs_dense(params, X):
    """Reference evaluation by dense tensor contraction, O(n^3).

    Slow route used to verify the fast rhs and equilibrium fixed points.
    """
    n = params.n
    X = _check_simplex(X, n)
    C = params.C.C if params.C is not None else direct_transition_tensor(params).C
    T = indirect_variation_tensor(params, X)
    return np.einsum("ihk,h,k->i", C + T, X, X) - X * X.sum()
