"""Run configuration loaded from a TOML file.

One file drives every subcommand.  The schema is versioned through the
mandatory schema_version key and strict: unknown keys anywhere are rejected
so typos cannot silently fall back to defaults.

    schema_version = 1

    [model]          # all optional, defaults shown
    n = 15
    c = 25.0
    S = 1.0
    tau_min = 0.30
    tau_max = 0.45
    gamma = 0.5

    [initial]        # used by simulate / compare
    kind = "low-middle-weighted"   # uniform | two-point | explicit
    target_mu = "reference"        # number, or "reference" for the pinned value
    # a = 1, b = 15                # two-point classes
    # X = [ ... ]                  # explicit state

    [integration]    # all optional
    dt = 0.5
    max_time = 5e6
    convergence_tol = 1e-12
    drift_tol = 1e-9
    renormalize = true

    [output]
    out_dir = "runs/example"
    trajectory_stride = 0          # steps between snapshots; 0 disables

    [sweep]          # used by the sweep subcommand
    delta_tau = [0.10, 0.15, 0.20]
    gamma = [0.2, 0.3, 0.4]
    mu = "reference"

    [levelline]      # used by the levelline subcommand
    targets = [0.341, 0.338, 0.335]
    delta_tau = [0.15, 0.20, 0.25, 0.35]
    gamma_bounds = [0.05, 0.5]
    mu = "reference"
    tol = 5e-4

    [calibrate]      # used by the calibrate subcommand
    tau_min = 0.30
    tau_max = 0.45
    gamma = 0.5
    target_G = 0.368
    mu_interval = [80.0, 180.0]

    [kappa]          # used by the kappa subcommand
    alpha = [1.0, 2.0, 3.0, 4.0]
    kappa = [0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9]
    # abs_tol = 1e-6
"""

from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dynamics import InitialConditionSpec, IntegrationSettings, make_initial_condition
from .errors import ConfigError
from .kaniadakis import QuadratureSettings
from .model import make_params

__all__ = ["SCHEMA_VERSION", "RunConfig", "load_config", "resolve_mu"]

SCHEMA_VERSION = 1

# late import target; kept as a name so resolve_mu stays testable
_REFERENCE_SENTINEL = "reference"


def _reference_mu():
    from . import REFERENCE_MU

    return REFERENCE_MU


def resolve_mu(value, context):
    """A mean-income entry is a number or the string "reference"."""
    if value == _REFERENCE_SENTINEL:
        return _reference_mu()
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(
            f"{context}: expected a number or \"reference\", got {value!r}"
        )
    return float(value)


def _check_keys(section, allowed, context):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{context}: unknown key(s) {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _number(section, key, context, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{context}: missing required key {key}")
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{context}.{key}: expected a number, got {v!r}")
    return float(v)


def _number_list(section, key, context, required=True):
    if key not in section:
        if required:
            raise ConfigError(f"{context}: missing required key {key}")
        return None
    v = section[key]
    if not isinstance(v, list) or not v or any(
        isinstance(x, bool) or not isinstance(x, (int, float)) for x in v
    ):
        raise ConfigError(f"{context}.{key}: expected a nonempty list of numbers")
    return [float(x) for x in v]


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; raw echoes the parsed file for manifests."""

    raw: dict
    params: object
    initial: InitialConditionSpec  # None when the section is absent
    settings: IntegrationSettings
    out_dir: str
    trajectory_stride: int
    sweep: dict
    levelline: dict
    calibrate: dict
    kappa: dict


_TOP_KEYS = ("schema_version", "model", "initial", "integration", "output",
             "sweep", "levelline", "calibrate", "kappa")
_MODEL_KEYS = ("n", "c", "S", "tau_min", "tau_max", "gamma")
_INITIAL_KEYS = ("kind", "target_mu", "a", "b", "X")
_INTEGRATION_KEYS = ("dt", "max_time", "convergence_tol", "drift_tol", "renormalize")
_OUTPUT_KEYS = ("out_dir", "trajectory_stride")
_SWEEP_KEYS = ("delta_tau", "gamma", "mu")
_LEVELLINE_KEYS = ("targets", "delta_tau", "gamma_bounds", "mu", "tol")
_CALIBRATE_KEYS = ("tau_min", "tau_max", "gamma", "target_G", "mu_interval")
_KAPPA_KEYS = ("alpha", "kappa", "abs_tol")


def _section(data, name, allowed):
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a table")
    _check_keys(sec, allowed, name)
    return sec


def _parse_model(sec):
    kwargs = {}
    if "n" in sec:
        if isinstance(sec["n"], bool) or not isinstance(sec["n"], int):
            raise ConfigError(f"model.n: expected an integer, got {sec['n']!r}")
        kwargs["n"] = sec["n"]
    for key in ("c", "S", "tau_min", "tau_max", "gamma"):
        if key in sec:
            kwargs[key] = _number(sec, key, "model")
    return make_params(**kwargs)


def _parse_initial(sec, grid):
    if not sec:
        return None
    kind = sec.get("kind", "low-middle-weighted")
    if not isinstance(kind, str):
        raise ConfigError(f"initial.kind: expected a string, got {kind!r}")
    target = sec.get("target_mu", _REFERENCE_SENTINEL)
    if kind in ("uniform", "explicit") and "target_mu" not in sec:
        target = None
    if target is not None:
        target = resolve_mu(target, "initial.target_mu")
    params = {}
    for key in ("a", "b"):
        if key in sec:
            if isinstance(sec[key], bool) or not isinstance(sec[key], int):
                raise ConfigError(f"initial.{key}: expected an integer")
            params[key] = sec[key]
    if "X" in sec:
        params["X"] = _number_list(sec, "X", "initial")
    spec = InitialConditionSpec(kind=kind, target_mu=target, params=params)
    make_initial_condition(spec, grid)  # vet the recipe before any computation
    return spec


def _parse_integration(sec):
    kwargs = {}
    for key in ("dt", "max_time", "convergence_tol", "drift_tol"):
        if key in sec:
            kwargs[key] = _number(sec, key, "integration")
    if "renormalize" in sec:
        if not isinstance(sec["renormalize"], bool):
            raise ConfigError("integration.renormalize: expected a boolean")
        kwargs["renormalize"] = sec["renormalize"]
    return IntegrationSettings(**kwargs)


def _parse_output(sec):
    out_dir = sec.get("out_dir", ".")
    if not isinstance(out_dir, str):
        raise ConfigError(f"output.out_dir: expected a string, got {out_dir!r}")
    stride = sec.get("trajectory_stride", 0)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 0:
        raise ConfigError("output.trajectory_stride: expected an integer >= 0")
    return out_dir, stride


def _parse_sweep(sec):
    if not sec:
        return {}
    return {
        "delta_tau": _number_list(sec, "delta_tau", "sweep"),
        "gamma": _number_list(sec, "gamma", "sweep"),
        "mu": resolve_mu(sec.get("mu", _REFERENCE_SENTINEL), "sweep.mu"),
    }


def _parse_levelline(sec):
    if not sec:
        return {}
    bounds = _number_list(sec, "gamma_bounds", "levelline", required=False)
    if bounds is None:
        bounds = [0.05, 0.5]
    if len(bounds) != 2 or not bounds[0] < bounds[1]:
        raise ConfigError("levelline.gamma_bounds: expected [low, high] with low < high")
    return {
        "targets": _number_list(sec, "targets", "levelline"),
        "delta_tau": _number_list(sec, "delta_tau", "levelline"),
        "gamma_bounds": (bounds[0], bounds[1]),
        "mu": resolve_mu(sec.get("mu", _REFERENCE_SENTINEL), "levelline.mu"),
        "tol": _number(sec, "tol", "levelline", default=5e-4),
    }


def _parse_calibrate(sec):
    if not sec:
        return {}
    interval = _number_list(sec, "mu_interval", "calibrate")
    if len(interval) != 2 or not interval[0] < interval[1]:
        raise ConfigError("calibrate.mu_interval: expected [low, high] with low < high")
    return {
        "reference": {
            "tau_min": _number(sec, "tau_min", "calibrate"),
            "tau_max": _number(sec, "tau_max", "calibrate"),
            "gamma": _number(sec, "gamma", "calibrate"),
            "target_G": _number(sec, "target_G", "calibrate"),
        },
        "mu_interval": (interval[0], interval[1]),
    }


def _parse_kappa(sec):
    if not sec:
        return {}
    out = {
        "alpha": _number_list(sec, "alpha", "kappa"),
        "kappa": _number_list(sec, "kappa", "kappa"),
    }
    if "abs_tol" in sec:
        out["quadrature"] = QuadratureSettings(
            abs_tol=_number(sec, "abs_tol", "kappa")
        )
    return out


def load_config(path):
    """Parse and validate a configuration file.

    Every parameter is pushed through its owning module's constructor here,
    so a bad value fails before any computation starts.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}")

    _check_keys(data, _TOP_KEYS, "config")
    if "schema_version" not in data:
        raise ConfigError("config: missing required key schema_version")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"config: schema_version {data['schema_version']!r} unsupported, "
            f"expected {SCHEMA_VERSION}"
        )

    params = _parse_model(_section(data, "model", _MODEL_KEYS))
    initial = _parse_initial(_section(data, "initial", _INITIAL_KEYS), params.grid)
    settings = _parse_integration(_section(data, "integration", _INTEGRATION_KEYS))
    out_dir, stride = _parse_output(_section(data, "output", _OUTPUT_KEYS))
    return RunConfig(
        raw=data,
        params=params,
        initial=initial,
        settings=settings,
        out_dir=out_dir,
        trajectory_stride=stride,
        sweep=_parse_sweep(_section(data, "sweep", _SWEEP_KEYS)),
        levelline=_parse_levelline(_section(data, "levelline", _LEVELLINE_KEYS)),
        calibrate=_parse_calibrate(_section(data, "calibrate", _CALIBRATE_KEYS)),
        kappa=_parse_kappa(_section(data, "kappa", _KAPPA_KEYS)),
    )
