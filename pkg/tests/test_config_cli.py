import csv
import json
import shutil
import subprocess
import sys

import pytest

from kinex import (
    REFERENCE_MU,
    ConfigError,
    InvalidArgumentError,
    QuadratureSettings,
    __version__,
    load_config,
    resolve_mu,
)
from kinex.cli import main

FULL_CONFIG = """\
schema_version = 1

[model]
n = 15
c = 25.0
S = 1.0
tau_min = 0.30
tau_max = 0.45
gamma = 0.5

[initial]
kind = "two-point"
target_mu = "reference"
a = 1
b = 15

[integration]
dt = 0.5
max_time = 5e6
convergence_tol = 1e-12
drift_tol = 1e-9
renormalize = true

[output]
out_dir = "runs/example"
trajectory_stride = 100

[sweep]
delta_tau = [0.10, 0.15]
gamma = [0.2, 0.3]
mu = "reference"

[levelline]
targets = [0.341]
delta_tau = [0.15, 0.25]
mu = "reference"

[calibrate]
tau_min = 0.30
tau_max = 0.45
gamma = 0.5
target_G = 0.368
mu_interval = [80.0, 180.0]

[kappa]
alpha = [1.0, 2.0]
kappa = [0.0, 0.5]
abs_tol = 1e-7
"""


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_full_config(tmp_path):
    cfg = load_config(write_config(tmp_path, FULL_CONFIG))
    assert cfg.params.n == 15
    assert cfg.params.w.gamma == 0.5
    assert cfg.initial.kind == "two-point"
    assert cfg.initial.target_mu == REFERENCE_MU
    assert cfg.initial.params == {"a": 1, "b": 15}
    assert cfg.settings.dt == 0.5
    assert cfg.out_dir == "runs/example"
    assert cfg.trajectory_stride == 100
    assert cfg.sweep["mu"] == REFERENCE_MU
    assert cfg.levelline["gamma_bounds"] == (0.05, 0.5)  # default
    assert cfg.levelline["tol"] == 5e-4                  # default
    assert cfg.calibrate["reference"]["target_G"] == 0.368
    assert cfg.calibrate["mu_interval"] == (80.0, 180.0)
    assert cfg.kappa["quadrature"] == QuadratureSettings(abs_tol=1e-7)


def test_load_minimal_config(tmp_path):
    cfg = load_config(write_config(tmp_path, "schema_version = 1\n"))
    assert cfg.params.n == 15
    assert cfg.initial is None
    assert cfg.settings.dt == 0.5
    assert cfg.out_dir == "."
    assert cfg.trajectory_stride == 0
    assert cfg.sweep == {} and cfg.levelline == {}
    assert cfg.calibrate == {} and cfg.kappa == {}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "schema_version"),
        ("schema_version = 2\n", "unsupported"),
        ('schema_version = "1"\n', "unsupported"),
        ("schema_version = 1\nbogus = 3\n", "bogus"),
        ("schema_version = 1\n[model]\ngamm = 0.4\n", "gamm"),
        ("schema_version = 1\n[model]\nn = 15.0\n", "integer"),
        ("schema_version = 1\n[model]\nc = true\n", "number"),
        ("schema_version = 1\n[integration]\nrenormalize = 1\n", "boolean"),
        ("schema_version = 1\n[output]\ntrajectory_stride = -1\n", "trajectory_stride"),
        ("schema_version = 1\n[output]\nout_dir = 7\n", "out_dir"),
        ("schema_version = 1\n[sweep]\ngamma = [0.3]\n", "delta_tau"),
        ("schema_version = 1\n[sweep]\ndelta_tau = []\ngamma = [0.3]\n", "nonempty"),
        (
            "schema_version = 1\n[sweep]\ndelta_tau = [0.1]\ngamma = [0.3]\n"
            'mu = "sometimes"\n',
            "reference",
        ),
        (
            "schema_version = 1\n[levelline]\ntargets = [0.34]\ndelta_tau = [0.15]\n"
            "gamma_bounds = [0.5, 0.05]\n",
            "gamma_bounds",
        ),
        (
            "schema_version = 1\n[calibrate]\ntau_min = 0.3\ntau_max = 0.45\n"
            "gamma = 0.5\ntarget_G = 0.368\nmu_interval = [180.0, 80.0]\n",
            "mu_interval",
        ),
        ("schema_version = 1\n[kappa]\nalpha = [1.0]\n", "kappa"),
        ("not toml ][", ""),
    ],
)
def test_load_config_rejections(tmp_path, text, fragment):
    with pytest.raises(ConfigError) as err:
        load_config(write_config(tmp_path, text))
    assert fragment in str(err.value)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.toml"))


def test_load_config_vets_model_domain(tmp_path):
    with pytest.raises(InvalidArgumentError):
        load_config(write_config(tmp_path, "schema_version = 1\n[model]\ngamma = 0.7\n"))


def test_load_config_vets_initial_state(tmp_path):
    bad = (
        "schema_version = 1\n[initial]\nkind = \"explicit\"\n"
        "X = [0.5, 0.5, 0.5]\n"
    )
    with pytest.raises(InvalidArgumentError):
        load_config(write_config(tmp_path, bad))


def test_resolve_mu():
    assert resolve_mu("reference", "ctx") == REFERENCE_MU
    assert resolve_mu(143.5, "ctx") == 143.5
    assert resolve_mu(150, "ctx") == 150.0
    with pytest.raises(ConfigError):
        resolve_mu("midpoint", "ctx")
    with pytest.raises(ConfigError):
        resolve_mu(True, "ctx")


SIMULATE_CONFIG = """\
schema_version = 1

[initial]
kind = "uniform"
"""


def test_cli_simulate_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_CONFIG)
    out = tmp_path / "run"
    assert main(["simulate", "--config", cfg, "--out-dir", str(out)]) == 0

    for name in (
        "manifest.json", "summary.json", "equilibrium.json", "lorenz.csv",
        "mobility.csv", "individual_mobility.csv", "class_mobility.csv",
        "indicators.csv",
    ):
        assert (out / name).exists()
    assert not (out / "trajectory.csv").exists()  # stride 0 disables it

    summary = json.loads((out / "summary.json").read_text())
    assert 0.0 < summary["G"] < 1.0
    assert summary["M"] > 0.0
    assert summary["residual"] < 1e-12
    assert abs(summary["mu"] - 187.5) < 1e-6

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["calibration_constants"]["reference_mu"] == REFERENCE_MU
    assert manifest["config"]["initial"]["kind"] == "uniform"
    assert "summary.json" in manifest["outputs"]


def test_cli_simulate_streams_trajectory(tmp_path):
    text = SIMULATE_CONFIG + "\n[output]\ntrajectory_stride = 5000\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "run"
    assert main(["simulate", "--config", cfg, "--out-dir", str(out)]) == 0
    with open(out / "trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["t", "X_1"]
    assert rows[0][-2:] == ["mu", "residual"]
    assert len(rows[0]) == 15 + 3
    assert len(rows) >= 3
    ts = [float(r[0]) for r in rows[1:]]
    assert ts == sorted(ts) and ts[0] == 0.0


def test_cli_compare_identical_configs(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_CONFIG)
    out = tmp_path / "cmp"
    code = main([
        "compare", "--config-a", cfg, "--config-b", cfg, "--out-dir", str(out),
    ])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["delta_gini"] == 0.0
    assert summary["delta_M"] == 0.0
    assert (out / "delta_mobility.csv").exists()


def test_cli_compare_rejects_mismatched_grids(tmp_path):
    cfg_a = write_config(tmp_path, SIMULATE_CONFIG, "a.toml")
    cfg_b = write_config(
        tmp_path, "schema_version = 1\n[model]\nn = 12\n", "b.toml"
    )
    code = main([
        "compare", "--config-a", cfg_a, "--config-b", cfg_b,
        "--out-dir", str(tmp_path / "cmp"),
    ])
    assert code == 2


SWEEP_CONFIG = """\
schema_version = 1

[sweep]
delta_tau = [0.15]
gamma = [0.2, 0.35, 0.5]
mu = "reference"
"""


def test_cli_sweep_writes_grid_and_correlation(tmp_path):
    cfg = write_config(tmp_path, SWEEP_CONFIG)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out)]) == 0
    with open(out / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert all(r["converged"] == "True" for r in rows)
    correlation = json.loads((out / "correlation.json").read_text())
    assert correlation["n_cells"] == 3
    assert -1.0 <= correlation["pearson_GM"] <= 1.0


def test_cli_sweep_requires_section(tmp_path):
    cfg = write_config(tmp_path, "schema_version = 1\n")
    assert main(["sweep", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


LEVELLINE_CONFIG = """\
schema_version = 1

[levelline]
targets = [0.355]
delta_tau = [0.15]
mu = "reference"
tol = 5e-3
"""


def test_cli_levelline_writes_tables(tmp_path):
    cfg = write_config(tmp_path, LEVELLINE_CONFIG)
    out = tmp_path / "line"
    assert main(["levelline", "--config", cfg, "--out-dir", str(out)]) == 0
    assert (out / "levelline_0p355.csv").exists()
    text = (out / "level_tables.txt").read_text()
    assert "target G = 0.355" in text
    assert "30% - 45%" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert "levelline_0p355.csv" in manifest["outputs"]


def test_cli_calibrate_records_constant(tmp_path):
    text = (
        "schema_version = 1\n\n[calibrate]\ntau_min = 0.30\ntau_max = 0.45\n"
        "gamma = 0.5\ntarget_G = 0.368\nmu_interval = [143.4, 143.6]\n"
    )
    cfg = write_config(tmp_path, text)
    out = tmp_path / "cal"
    assert main(["calibrate", "--config", cfg, "--out-dir", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    mu_star = manifest["calibration_constants"]["mu_star"]
    assert 143.4 < mu_star < 143.6
    assert abs(mu_star - REFERENCE_MU) < 1e-3
    assert manifest["calibration_constants"]["target_G"] == 0.368


def test_cli_calibrate_numerical_failure_exit_code(tmp_path):
    text = (
        "schema_version = 1\n\n[calibrate]\ntau_min = 0.30\ntau_max = 0.45\n"
        "gamma = 0.5\ntarget_G = 0.9\nmu_interval = [140.0, 141.0]\n"
    )
    cfg = write_config(tmp_path, text)
    assert main(["calibrate", "--config", cfg, "--out-dir", str(tmp_path)]) == 1


KAPPA_CONFIG = """\
schema_version = 1

[kappa]
alpha = [1.0]
kappa = [0.0, 0.5, 0.999]
"""


def test_cli_kappa_table_and_warnings(tmp_path, capsys):
    cfg = write_config(tmp_path, KAPPA_CONFIG)
    out = tmp_path / "kappa"
    assert main(["kappa", "--config", cfg, "--out-dir", str(out)]) == 0
    with open(out / "kappa.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert rows[2]["flag"] == "near-divergent-mean"
    manifest = json.loads((out / "manifest.json").read_text())
    assert any("near-divergent-mean" in w for w in manifest["warnings"])
    assert "warning" in capsys.readouterr().err


def test_cli_rejects_seed(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_CONFIG)
    code = main(["simulate", "--config", cfg, "--seed", "42",
                 "--out-dir", str(tmp_path)])
    assert code == 2


def test_cli_rejects_negative_threads(tmp_path):
    cfg = write_config(tmp_path, SIMULATE_CONFIG)
    code = main(["simulate", "--config", cfg, "--threads", "-2",
                 "--out-dir", str(tmp_path)])
    assert code == 2


def test_cli_bad_config_exit_code(tmp_path):
    cfg = write_config(tmp_path, "schema_version = 1\n[model]\ngamma = 0.7\n")
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_cli_requires_subcommand():
    assert main([]) == 2


def test_cli_version_subprocess():
    exe = shutil.which("kinex")
    cmd = [exe, "--version"] if exe else [sys.executable, "-m", "kinex.cli", "--version"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == __version__
