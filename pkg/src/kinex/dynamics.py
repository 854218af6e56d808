"""Trajectory integration to equilibrium.

The evolution equations form a smooth polynomial ODE on the probability
simplex.  A classical fixed-step fourth-order scheme is sufficient and keeps
runs bit-for-bit reproducible.  The hot loop is compiled with numba; the
Python layer owns chunking, conservation audits and diagnostics.
"""

import json
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConservationError,
    InvalidArgumentError,
    NonConvergenceError,
    StabilityError,
)
from .model import mean_income, params_hash, rhs_dense, transition_bands

__all__ = [
    "IntegrationSettings",
    "EquilibriumState",
    "InitialConditionSpec",
    "make_initial_condition",
    "integrate",
    "solve_equilibrium",
    "equilibrium_record",
    "write_equilibrium_record",
]

_NEG_TOL = -1e-12


@dataclass(frozen=True)
class IntegrationSettings:
    """Fixed-step integration controls.

    dt was sized against the rhs magnitude of the default model family and is
    validated by the dt-halving robustness test.  renormalize projects sum(X)
    back to 1 after every step; the pre-projection drift is recorded and
    audited, never hidden.
    """

    dt: float = 0.5
    max_time: float = 5e6
    convergence_tol: float = 1e-12
    drift_tol: float = 1e-9
    renormalize: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not (self.convergence_tol > 0 and self.drift_tol > 0 and self.max_time > 0):
            raise InvalidArgumentError("tolerances and max_time must be positive")


@dataclass(frozen=True)
class EquilibriumState:
    """Converged state with its conserved mean income and diagnostics.

    rate_estimate is the exponential decay rate of the residual fitted over
    the final decade of convergence (nan when the solve returned immediately);
    rate_r2 is the goodness of that fit.
    """

    X_eq: np.ndarray
    mu: float
    residual: float
    elapsed_time: float
    rate_estimate: float
    rate_r2: float = float("nan")
    steps: int = 0
    max_sum_drift: float = 0.0
    max_mu_drift: float = 0.0


@dataclass(frozen=True)
class InitialConditionSpec:
    """Recipe for a starting distribution.

    kinds:
      uniform              equal fractions in every class
      low-middle-weighted  geometrically decaying mass from class 1 upward,
                           decay solved so the mean income hits target_mu
      two-point            mass split between classes a and b to hit target_mu
      explicit             a full vector supplied in params["X"]
    """

    kind: str
    target_mu: float = None
    params: dict = field(default_factory=dict)


_KINDS = ("uniform", "low-middle-weighted", "two-point", "explicit")
_MU_TOL = 1e-10


def _geometric_state(n, log_q):
    x = np.exp(np.arange(n) * log_q)
    return x / x.sum()


def make_initial_condition(spec, grid):
    """Construct the initial state described by spec on the given grid."""
    if spec.kind not in _KINDS:
        raise InvalidArgumentError(f"unknown initial-condition kind {spec.kind!r}")
    n = grid.n
    ra = grid.r_avg
    target = spec.target_mu
    if target is not None and not (ra[0] <= target <= ra[-1]):
        raise InvalidArgumentError(
            f"target_mu must lie in [{ra[0]}, {ra[-1]}], got {target}"
        )

    if spec.kind == "uniform":
        X = np.full(n, 1.0 / n)
    elif spec.kind == "low-middle-weighted":
        if target is None:
            raise InvalidArgumentError("low-middle-weighted requires target_mu")
        if target <= ra[0] + _MU_TOL:
            X = np.zeros(n)
            X[0] = 1.0
        elif target >= ra[-1] - _MU_TOL:
            X = np.zeros(n)
            X[-1] = 1.0
        else:
            f = lambda lq: mean_income(grid, _geometric_state(n, lq)) - target
            log_q = brentq(f, -40.0, 40.0, xtol=1e-14)
            X = _geometric_state(n, log_q)
    elif spec.kind == "two-point":
        if target is None:
            raise InvalidArgumentError("two-point requires target_mu")
        a = spec.params.get("a", 1)
        b = spec.params.get("b", n)
        if not (1 <= a < b <= n):
            raise InvalidArgumentError(f"need 1 <= a < b <= {n}, got a={a}, b={b}")
        xb = (target - ra[a - 1]) / (ra[b - 1] - ra[a - 1])
        if not (0.0 <= xb <= 1.0):
            raise InvalidArgumentError(
                f"target_mu={target} is not reachable mixing classes {a} and {b}"
            )
        X = np.zeros(n)
        X[a - 1] = 1.0 - xb
        X[b - 1] = xb
    else:  # explicit
        X = np.asarray(spec.params.get("X"), dtype=float)
        if X.shape != (n,):
            raise InvalidArgumentError(f"explicit state must have shape ({n},)")
        if X.min() < 0 or abs(X.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("explicit state must be nonnegative and sum to 1")

    if target is not None and abs(mean_income(grid, X) - target) > _MU_TOL:
        raise InvalidArgumentError(
            f"initial condition misses target_mu by "
            f"{abs(mean_income(grid, X) - target):.3e}"
        )
    return X


@numba.njit(cache=True, nogil=True)
def _rhs_kernel(X, down, stay, up, ptau, w, r, S, out):
    """Same contraction as model.rhs, in scalar form for the jit loop."""
    n = X.shape[0]
    W = 0.0
    effnum = 0.0
    for j in range(n):
        W += w[j] * X[j]
    for j in range(n - 1):
        effnum += w[j] * X[j]
    if not (W > 0.0 and np.isfinite(W)):
        # blown-up substate from an unstable step; poison the output so the
        # step loop can report the instability instead of dividing by zero
        for j in range(n):
            out[j] = np.nan
        return
    eff = effnum / W
    A = 0.0
    for h in range(n):
        bh = 0.0
        for k in range(n):
            bh += ptau[h, k] * X[k]
        out[h] = bh  # scratch: out holds b until the final loop
        A += X[h] * bh
    total = 0.0
    for j in range(n):
        total += X[j]
    res = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += stay[i, k] * X[k]
        v = X[i] * acc
        if i + 1 < n:
            acc = 0.0
            for k in range(n):
                acc += down[i, k] * X[k]
            v += X[i + 1] * acc
        if i - 1 >= 0:
            acc = 0.0
            for k in range(n):
                acc += up[i, k] * X[k]
            v += X[i - 1] * acc
        res[i] = v
    for i in range(n):
        u = 0.0
        if i >= 1:
            u += w[i - 1] * X[i - 1] / (r[i + 1] - r[i - 1])
        if i <= n - 2:
            u -= w[i] * X[i] / (r[i + 2] - r[i])
        v = 0.0
        if i <= n - 2:
            v += out[i + 1] * X[i + 1] / (r[i + 2] - r[i])
        if i >= 1:
            v -= out[i] * X[i] / (r[i + 1] - r[i - 1])
        res[i] += 2.0 * S * (A / W) * u + 2.0 * S * eff * v
    for i in range(n):
        out[i] = res[i] - X[i] * total


@numba.njit(cache=True, nogil=True)
def _advance(X, down, stay, up, ptau, w, r, ra, S, dt, tol, renorm, max_steps, residuals):
    """Run up to max_steps RK4 steps in place.

    Returns (steps_done, status, max_sum_drift, max_mu_drift, min_component)
    with status 0 = converged, 1 = step budget exhausted, 2 = negative
    component.  residuals[s] receives the rhs sup-norm seen at the START of
    step s; on convergence the final residual sits at index steps_done.
    """
    n = X.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xt = np.empty(n)
    mu0 = 0.0
    for j in range(n):
        mu0 += ra[j] * X[j]
    max_sum_drift = 0.0
    max_mu_drift = 0.0
    min_comp = 1.0
    steps = 0
    while steps < max_steps:
        _rhs_kernel(X, down, stay, up, ptau, w, r, S, k1)
        res = 0.0
        for j in range(n):
            a = abs(k1[j])
            if a > res:
                res = a
        residuals[steps] = res
        if res < tol:
            return steps, 0, max_sum_drift, max_mu_drift, min_comp
        for j in range(n):
            xt[j] = X[j] + 0.5 * dt * k1[j]
        _rhs_kernel(xt, down, stay, up, ptau, w, r, S, k2)
        for j in range(n):
            xt[j] = X[j] + 0.5 * dt * k2[j]
        _rhs_kernel(xt, down, stay, up, ptau, w, r, S, k3)
        for j in range(n):
            xt[j] = X[j] + dt * k3[j]
        _rhs_kernel(xt, down, stay, up, ptau, w, r, S, k4)
        total = 0.0
        mu = 0.0
        for j in range(n):
            X[j] = X[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            total += X[j]
            mu += ra[j] * X[j]
            if X[j] < min_comp:
                min_comp = X[j]
        drift = abs(total - 1.0)
        if drift > max_sum_drift:
            max_sum_drift = drift
        mud = abs(mu - mu0)
        if mud > max_mu_drift:
            max_mu_drift = mud
        if min_comp < -1e-12 or not np.isfinite(total) or total <= 0.0:
            return steps + 1, 2, max_sum_drift, max_mu_drift, min_comp
        if renorm:
            for j in range(n):
                X[j] = X[j] / total
        steps += 1
    _rhs_kernel(X, down, stay, up, ptau, w, r, S, k1)
    res = 0.0
    for j in range(n):
        a = abs(k1[j])
        if a > res:
            res = a
    residuals[max_steps] = res
    if res < tol:
        return max_steps, 0, max_sum_drift, max_mu_drift, min_comp
    return max_steps, 1, max_sum_drift, max_mu_drift, min_comp


def _rate_fit(times, logres):
    """Least-squares slope of log-residual over time; returns (rate, r_squared)."""
    if len(times) < 3:
        return float("nan"), float("nan")
    t = np.asarray(times)
    y = np.asarray(logres)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return float(-coef[0]), r2


_CHUNK = 65536


def integrate(params, X0, settings=None, trajectory_writer=None, trajectory_stride=0):
    """Integrate from X0 until the rhs sup-norm drops below convergence_tol.

    Per step the pre-renormalization drift of sum(X) and the drift of the
    mean income are tracked; either exceeding drift_tol aborts with a
    ConservationError.  A component dipping below -1e-12 aborts with a
    StabilityError suggesting a smaller dt.  Reaching max_time without
    convergence raises NonConvergenceError carrying the last state.

    trajectory_writer, if given, is called as writer(t, X, mu, residual)
    every trajectory_stride steps (and on the final state).
    """
    settings = settings or IntegrationSettings()
    n = params.n
    X = np.array(X0, dtype=float)
    if X.shape != (n,):
        raise InvalidArgumentError(f"X0 must have shape ({n},)")
    if abs(X.sum() - 1.0) > 1e-6:
        raise InvalidArgumentError("X0 must lie on the probability simplex")
    down, stay, up = transition_bands(params)
    ptau = params.p.p * params.tau.tau[None, :]
    r = params.grid.r
    ra = params.grid.r_avg
    mu0 = mean_income(params.grid, X)

    dt = settings.dt
    tol = settings.convergence_tol
    max_steps_total = int(np.ceil(settings.max_time / dt))
    stride = int(trajectory_stride) if trajectory_writer is not None else 0
    chunk = min(_CHUNK, max_steps_total) if stride == 0 else max(1, stride)

    res_trace = []
    t_trace = []
    steps_done = 0
    max_sum_drift = 0.0
    max_mu_drift = 0.0
    status = 1
    buf = np.empty(chunk + 1)
    if trajectory_writer is not None:
        out0 = np.empty(n)
        _rhs_kernel(X, down, stay, up, ptau, w=params.w.w, r=r, S=params.S, out=out0)
        trajectory_writer(0.0, X.copy(), mu0, float(np.abs(out0).max()))
    while steps_done < max_steps_total:
        todo = min(chunk, max_steps_total - steps_done)
        s, status, sd, md, _mc = _advance(
            X, down, stay, up, ptau, params.w.w, r, ra, params.S,
            dt, tol, settings.renormalize, todo, buf,
        )
        take = s if status != 0 else s + 1  # converged run also logs the final residual
        res_trace.append(buf[:take].copy())
        t_trace.append((steps_done + np.arange(take)) * dt)
        steps_done += s
        max_sum_drift = max(max_sum_drift, sd)
        max_mu_drift = max(max_mu_drift, md)
        t_now = steps_done * dt
        if trajectory_writer is not None and s > 0:
            trajectory_writer(t_now, X.copy(), mean_income(params.grid, X),
                              float(res_trace[-1][-1]))
        if status == 2:
            raise StabilityError(
                f"component reached {X.min():.3e} at t={t_now:.6g}; reduce dt below {dt}"
            )
        if max_sum_drift > settings.drift_tol:
            raise ConservationError(
                f"population drift {max_sum_drift:.3e} exceeds {settings.drift_tol:.1e}"
            )
        if max_mu_drift > settings.drift_tol:
            raise ConservationError(
                f"mean-income drift {max_mu_drift:.3e} exceeds {settings.drift_tol:.1e}"
            )
        if status == 0:
            break

    res_all = np.concatenate(res_trace) if res_trace else np.empty(0)
    t_all = np.concatenate(t_trace) if t_trace else np.empty(0)
    elapsed = steps_done * dt
    if status != 0:
        raise NonConvergenceError(
            f"residual {res_all[-1]:.3e} after t={elapsed:.4g} (tol {tol:.1e})",
            X_last=X, residual=float(res_all[-1]), elapsed_time=elapsed,
        )

    final_res = float(res_all[-1])
    # rate over the final decade of residual decay
    in_decade = res_all <= max(final_res, 1e-300) * 10.0
    rate, r2 = _rate_fit(t_all[in_decade], np.log(res_all[in_decade]))
    if steps_done == 0:
        rate, r2 = float("nan"), float("nan")
    return EquilibriumState(
        X_eq=X,
        mu=mean_income(params.grid, X),
        residual=final_res,
        elapsed_time=elapsed,
        rate_estimate=rate,
        rate_r2=r2,
        steps=steps_done,
        max_sum_drift=max_sum_drift,
        max_mu_drift=max_mu_drift,
    )


def solve_equilibrium(params, mu, settings=None, ic_spec=None,
                      trajectory_writer=None, trajectory_stride=0):
    """Equilibrium at the given mean income.

    Starts from a low-middle-weighted distribution at mu (or from ic_spec),
    integrates to convergence, then independently verifies the algebraic
    fixed-point condition with the dense tensor contraction.
    """
    settings = settings or IntegrationSettings()
    ra = params.grid.r_avg
    if not (ra[0] <= mu <= ra[-1]):
        raise InvalidArgumentError(f"mu must lie in [{ra[0]}, {ra[-1]}], got {mu}")
    spec = ic_spec or InitialConditionSpec(kind="low-middle-weighted", target_mu=mu)
    X0 = make_initial_condition(spec, params.grid)
    eq = integrate(params, X0, settings,
                   trajectory_writer=trajectory_writer,
                   trajectory_stride=trajectory_stride)
    check = float(np.abs(rhs_dense(params, eq.X_eq)).max())
    if check > 10.0 * settings.convergence_tol:
        raise ConservationError(
            f"fixed-point residual {check:.3e} fails the independent tensor check"
        )
    return eq


def equilibrium_record(params, eq):
    """Serializable summary of an equilibrium solve."""
    t = params.tau
    return {
        "params_hash": params_hash(params),
        "n": params.n,
        "c": float(params.grid.r[1]),
        "S": params.S,
        "tau_min": t.tau_min,
        "tau_max": t.tau_max,
        "gamma": params.w.gamma,
        "mu": eq.mu,
        "X_eq": [float(x) for x in eq.X_eq],
        "residual": eq.residual,
        "elapsed_time": eq.elapsed_time,
        "rate_estimate": eq.rate_estimate,
        "rate_r2": eq.rate_r2,
        "steps": eq.steps,
        "max_sum_drift": eq.max_sum_drift,
        "max_mu_drift": eq.max_mu_drift,
    }


def write_equilibrium_record(path, params, eq):
    with open(path, "w") as fh:
        json.dump(equilibrium_record(params, eq), fh, indent=2)
        fh.write("\n")
