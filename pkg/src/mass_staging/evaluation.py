"""Confusion-matrix metrics, efficiency ratios and the mask-ratio sweep."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ingest.types import NUM_CLASSES, StageLabel
from .masking import AMPLIFIERS, gen_mask, power_estimate, signal_integrity
from .model import forward_batch

CLASS_NAMES = [s.name for s in StageLabel]

# reference values quoted for the 10% signal setting; units were not given
REFERENCE_ETA_P = 0.73
REFERENCE_ETA_T = 16.08


def score(preds, truth, classes=NUM_CLASSES) -> np.ndarray:
    """Confusion counts, rows = true stage, columns = predicted stage."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions vs {truth.size} labels")
    if preds.size == 0:
        raise ValueError("nothing to score")
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


@dataclass
class EvalReport:
    acc: float
    per_class_f1: list
    mf1: float
    kappa: float
    mgm: float
    confusion: list = field(default_factory=list)
    r_a: float = 0.0
    r_e: float = 0.0
    integrity: float = 1.0
    power_mw: dict = field(default_factory=dict)
    eta_p: float | None = None
    eta_t: float | None = None

    def to_dict(self):
        return asdict(self)


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def metrics(cm) -> EvalReport:
    """ACC, per-class F1, MF1, Cohen's kappa and macro G-mean.

    Classes with no support and no predictions contribute 0 to F1 and G-mean.
    MGm is the unweighted mean over classes of sqrt(sensitivity * specificity).
    """
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    acc = tp.sum() / total
    p_e = float((support * predicted).sum() / total**2)
    if p_e >= 1.0:
        kappa = 1.0 if acc == 1.0 else 0.0
    else:
        kappa = (acc - p_e) / (1.0 - p_e)
    fp = predicted - tp
    fn = support - tp
    tn = total - tp - fp - fn
    specificity = _safe_div(tn, tn + fp)
    mgm = float(np.mean(np.sqrt(recall * specificity)))
    return EvalReport(
        acc=float(acc),
        per_class_f1=[float(x) for x in f1],
        mf1=float(f1.mean()),
        kappa=float(kappa),
        mgm=mgm,
        confusion=cm.astype(np.int64).tolist(),
    )


def efficiency(acc, param_count, infer_seconds_per_epoch):
    """``(eta_p, eta_t)`` = accuracy (%) per million parameters and per millisecond."""
    if param_count <= 0 or infer_seconds_per_epoch <= 0:
        raise ZeroDivisionError("parameter count and inference time must be positive")
    acc_pct = 100.0 * acc
    return acc_pct / (param_count / 1e6), acc_pct / (infer_seconds_per_epoch * 1e3)


EFFICIENCY_UNITS = {"eta_p": "ACC% per million parameters", "eta_t": "ACC% per ms per epoch"}


def predict(params, psd, r_a, r_e, seed, batch_size=16):
    """Stage predictions ``[N, e]`` under masks seeded by ``(seed, window index)``."""
    n, e = psd.shape[:2]
    preds = np.empty((n, e), dtype=np.int64)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        plans = [gen_mask(e, r_a, r_e, seed=_window_seed(seed, i)) for i in idx]
        out = forward_batch(psd[idx], plans, params, train=False)
        preds[idx] = out.stage_logits.data.argmax(axis=-1)
    return preds


def _window_seed(seed, index):
    return int(np.random.SeedSequence([seed, int(index)]).generate_state(1, dtype=np.uint64)[0])


def evaluate(params, psd, labels, r_a=0.0, r_e=0.0, seed=0, batch_size=16, timing=False) -> EvalReport:
    t0 = time.perf_counter()
    preds = predict(params, psd, r_a, r_e, seed, batch_size)
    elapsed = time.perf_counter() - t0
    report = metrics(score(preds, labels))
    report.r_a, report.r_e = float(r_a), float(r_e)
    report.integrity = signal_integrity(r_a, r_e)
    report.power_mw = {a.name: round(power_estimate(a, report.integrity), 6) for a in AMPLIFIERS.values()}
    if timing:
        report.eta_p, report.eta_t = efficiency(report.acc, params.num_parameters(), elapsed / labels.size)
    return report


def mask_sweep(params, psd, labels, grid_r_a, grid_r_e, seed=0, threads=1, batch_size=16):
    """One :class:`EvalReport` per ``(r_a, r_e)`` cell, ``r_e``-major order."""
    cells = [(ra, re) for re in grid_r_e for ra in grid_r_a]

    def run(cell):
        return evaluate(params, psd, labels, cell[0], cell[1], seed, batch_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, cells))
    return [run(c) for c in cells]


SWEEP_COLUMNS = (
    ["r_a", "r_e", "integrity", "acc", "mf1", "kappa", "mgm"]
    + [f"f1_{c}" for c in CLASS_NAMES]
    + [f"power_{a.name}_mw" for a in AMPLIFIERS.values()]
)


def sweep_rows(reports):
    for r in reports:
        row = {
            "r_a": r.r_a,
            "r_e": r.r_e,
            "integrity": r.integrity,
            "acc": r.acc,
            "mf1": r.mf1,
            "kappa": r.kappa,
            "mgm": r.mgm,
        }
        row.update({f"f1_{c}": f for c, f in zip(CLASS_NAMES, r.per_class_f1)})
        row.update({f"power_{k}_mw": v for k, v in r.power_mw.items()})
        yield row


def sweep_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in sweep_rows(reports):
        w.writerow(row)
    return buf.getvalue()


def sweep_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def format_percent_grid(reports, metric="acc") -> str:
    """Percentage grid with ``r_e`` rows and ``r_a`` columns, as in the ablation tables."""
    r_as = sorted({r.r_a for r in reports})
    r_es = sorted({r.r_e for r in reports})
    cell = {(r.r_a, r.r_e): getattr(r, metric) for r in reports}
    lines = [f"{metric.upper()}(%)  r_a: " + " ".join(f"{a:>6.1f}" for a in r_as)]
    for re in r_es:
        vals = " ".join(f"{100 * cell[(a, re)]:6.2f}" if (a, re) in cell else "     -" for a in r_as)
        lines.append(f"r_e={re:.1f}        " + vals)
    return "\n".join(lines)
