"""CSV and structured-record writers shared by the command-line tools.

Floats are written with repr so files round-trip exactly; matrices carry an
index header row and 1-based row labels matching class numbering.
"""

import csv
import json

import numpy as np

__all__ = [
    "matrix_to_csv",
    "tensor_to_csv",
    "lorenz_to_csv",
    "mobility_to_csv",
    "delta_to_csv",
    "indicator_bundle_csv",
    "histogram_to_csv",
    "write_json",
    "TrajectoryWriter",
]


def matrix_to_csv(path, a):
    a = np.asarray(a)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([""] + [str(k + 1) for k in range(a.shape[1])])
        for h in range(a.shape[0]):
            out.writerow([str(h + 1)] + [repr(float(v)) for v in a[h]])


def tensor_to_csv(path, t):
    t = np.asarray(t)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "h", "k", "value"])
        for i in range(t.shape[0]):
            for h in range(t.shape[1]):
                for k in range(t.shape[2]):
                    out.writerow([i + 1, h + 1, k + 1, repr(float(t[i, h, k]))])


def lorenz_to_csv(path, curve):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["cum_population", "cum_income"])
        for p, q in curve.points:
            out.writerow([repr(float(p)), repr(float(q))])


_MOBILITY_COLUMNS = [
    "P_exch_individual", "P_welf_individual", "P_individual",
    "P_exch_class", "P_welf_class", "P_class",
]


def mobility_to_csv(path, report):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["class"] + _MOBILITY_COLUMNS)
        for j, i in enumerate(report.classes):
            out.writerow([int(i)] + [
                repr(float(getattr(report, c)[j])) for c in _MOBILITY_COLUMNS
            ])


def delta_to_csv(path, delta):
    cols = ["dP_exch_individual", "dP_welf_individual", "dP_individual",
            "dP_exch_class", "dP_welf_class", "dP_class"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["class"] + cols)
        for j, i in enumerate(delta.classes):
            out.writerow([int(i)] + [
                repr(float(getattr(delta, c)[j])) for c in cols
            ])


def indicator_bundle_csv(path, params, mu, G, M, TR, report):
    """Single-row summary: parameters, scalar indicators, per-class totals."""
    t = params.tau
    head = ["n", "c", "S", "tau_min", "tau_max", "gamma", "mu", "G", "M", "TR"]
    row = [params.n, repr(float(params.grid.r[1])), repr(params.S),
           repr(t.tau_min), repr(t.tau_max), repr(params.w.gamma),
           repr(mu), repr(G), repr(M), repr(TR)]
    for j, i in enumerate(report.classes):
        head.append(f"P_{int(i)}")
        row.append(repr(float(report.P_individual[j])))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(head)
        out.writerow(row)


def histogram_to_csv(path, classes, values, label):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["class", label])
        for i, v in zip(classes, values):
            out.writerow([int(i), repr(float(v))])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


class TrajectoryWriter:
    """Streams trajectory snapshots (t, X_1..X_n, mu, residual) to CSV."""

    def __init__(self, path, n):
        self._fh = open(path, "w", newline="")
        self._out = csv.writer(self._fh)
        self._out.writerow(
            ["t"] + [f"X_{i + 1}" for i in range(n)] + ["mu", "residual"]
        )

    def __call__(self, t, X, mu, residual):
        self._out.writerow([repr(float(t))] + [repr(float(x)) for x in X]
                           + [repr(float(mu)), repr(float(residual))])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
