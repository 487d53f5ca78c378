"""CSV serialization for runs, plans and calibration curves.

Floats are written with ``repr`` so files parse back to identical values.
"""

import csv
from typing import List, Tuple

import numpy as np

from .sim import RunRecord

CALIBRATION_COLUMNS = ("threshold", "rate_mean", "rate_min", "rate_max")


def _f(v) -> str:
    return repr(float(v))


def runs_columns(n: int, m: int) -> List[str]:
    cols = ["t"]
    cols += [f"x{i}" for i in range(1, n + 1)]
    cols += [f"z{i}" for i in range(1, m + 1)]
    cols += [f"eps{i}" for i in range(1, m + 1)]
    cols += [f"m{i}" for i in range(1, n + 1)]
    cols += [f"mt{i}" for i in range(1, n + 1)]
    return cols + ["sep_l1", "d_t", "g_k", "alarm"]


def write_runs_csv(path: str, rec: RunRecord) -> None:
    n, m = rec.x.shape[1], rec.z.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(runs_columns(n, m))
        for k in range(len(rec.t)):
            row = [str(int(rec.t[k]))]
            for arr in (rec.x, rec.z, rec.eps, rec.m, rec.mt):
                row += [_f(v) for v in arr[k]]
            row += [_f(rec.sep_l1[k]), _f(rec.d[k]), _f(rec.g[k]), str(int(bool(rec.alarm[k])))]
            w.writerow(row)


def read_runs_csv(path: str) -> RunRecord:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    keys = rows[0].keys()
    n = sum(1 for k in keys if k.startswith("x"))
    m = sum(1 for k in keys if k.startswith("z"))

    def block(prefix, dim):
        return np.array([[float(r[f"{prefix}{i}"]) for i in range(1, dim + 1)] for r in rows])

    z, eps = block("z", m), block("eps", m)
    return RunRecord(np.array([int(r["t"]) for r in rows]), block("x", n), z, eps, z + eps,
                     block("m", n), block("mt", n),
                     np.array([float(r["sep_l1"]) for r in rows]),
                     np.array([float(r["d_t"]) for r in rows]),
                     np.array([float(r["g_k"]) for r in rows]),
                     np.array([r["alarm"] == "1" for r in rows]))


def write_plan_csv(path: str, eps) -> None:
    eps = np.asarray(eps, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"eps{i}" for i in range(1, eps.shape[1] + 1)])
        for t, row in enumerate(eps, start=1):
            w.writerow([str(t)] + [_f(v) for v in row])


def read_plan_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row[1:]] for row in r]
    return np.array(rows).reshape(-1, len(header) - 1)


def write_table(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _f(v) for v in row])


def write_calibration_csv(path: str, cal) -> None:
    write_table(path, CALIBRATION_COLUMNS,
                zip(cal.thresholds, cal.rate_mean, cal.rate_min, cal.rate_max))


def read_calibration_csv(path: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return tuple(np.array([float(r[c]) for r in rows]) for c in CALIBRATION_COLUMNS)
