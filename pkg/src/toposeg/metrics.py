"""Image and segmentation quality measures, run traces, and report files."""
import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import ndimage

REPORT_FIELDS = (
    "stage", "method", "iteration", "mse", "psnr_db",
    "cracks_total", "regions", "boundary_f1", "wall_time_ms",
)


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, max_val=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    if not max_val > 0:
        raise ValueError(f"max_val must be > 0, got {max_val}")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / err)


def boundary_mask(labels):
    """Pixels having at least one 4-neighbour with a different label."""
    lab = np.asarray(labels)
    out = np.zeros(lab.shape, dtype=bool)
    dh = lab[:, 1:] != lab[:, :-1]
    dv = lab[1:, :] != lab[:-1, :]
    out[:, 1:] |= dh
    out[:, :-1] |= dh
    out[1:, :] |= dv
    out[:-1, :] |= dv
    return out


def _within(mask, tol):
    if tol == 0:
        return mask
    size = 2 * int(tol) + 1
    return ndimage.binary_dilation(mask, structure=np.ones((size, size), dtype=bool))


def boundary_f1(pred, truth, tol=1):
    """F1 of boundary pixels, matched within Chebyshev distance ``tol``."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    bp = boundary_mask(pred)
    bt = boundary_mask(truth)
    n_pred, n_truth = int(bp.sum()), int(bt.sum())
    if n_pred == 0 and n_truth == 0:
        return 1.0
    if n_pred == 0 or n_truth == 0:
        return 0.0
    precision = np.count_nonzero(bp & _within(bt, tol)) / n_pred
    recall = np.count_nonzero(bt & _within(bp, tol)) / n_truth
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def region_count(labels):
    return int(np.unique(np.asarray(labels)).size)


@dataclass
class IterationTrace:
    iteration: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    cracks_total: list = field(default_factory=list)
    mse: list = field(default_factory=list)

    def append(self, cost, cracks_total, err):
        self.iteration.append(len(self.iteration))
        self.cost.append(float(cost))
        self.cracks_total.append(int(cracks_total))
        self.mse.append(float(err))

    def __len__(self):
        return len(self.iteration)

    def rows(self):
        return [
            {"iteration": i, "cost": c, "cracks_total": k, "mse": m}
            for i, c, k, m in zip(self.iteration, self.cost, self.cracks_total, self.mse)
        ]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["iteration", "cost", "cracks_total", "mse"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: _fmt(v) for k, v in row.items()})


@dataclass
class MetricsReport:
    stage: str
    method: str
    iteration: int = 0
    mse: float | None = None
    psnr_db: float | None = None
    cracks_total: int = 0
    regions: int | None = None
    boundary_f1: float | None = None
    wall_time_ms: float = 0.0

    def __post_init__(self):
        if self.mse is not None and self.mse < 0:
            raise ValueError("mse must be >= 0")
        if self.cracks_total < 0 or (self.regions is not None and self.regions < 0):
            raise ValueError("counts must be >= 0")

    def as_row(self):
        return {k: _fmt(v) for k, v in asdict(self).items()}


def _fmt(v):
    """Serialize a report cell: None -> '', inf -> 'inf', floats with repr precision."""
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def write_report(reports, path, fmt="csv"):
    """Append report rows to ``path``; a new file gets a header first.

    An existing CSV must carry exactly the report header, otherwise ValueError.
    """
    path = Path(path)
    if fmt == "csv":
        header = ",".join(REPORT_FIELDS)
        exists = path.exists() and path.stat().st_size > 0
        if exists:
            with open(path, newline="") as fh:
                first = fh.readline().rstrip("\r\n")
            if first != header:
                raise ValueError(f"{path}: existing report header does not match")
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        if not exists:
            writer.writeheader()
        for rep in reports:
            writer.writerow(rep.as_row())
        with open(path, "a", newline="") as fh:
            fh.write(buf.getvalue())
    elif fmt == "json":
        rows = []
        if path.exists() and path.stat().st_size > 0:
            rows = json.loads(path.read_text())
            if not isinstance(rows, list) or any(set(r) != set(REPORT_FIELDS) for r in rows):
                raise ValueError(f"{path}: existing report is not a list of report rows")
        rows.extend({k: _json_value(v) for k, v in asdict(r).items()} for r in reports)
        path.write_text(json.dumps(rows, indent=2) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
