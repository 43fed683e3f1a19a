"""Multi-label and binary evaluation, example-based (per-sample averaged)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PoselangError


class LengthMismatch(PoselangError):
    pass


@dataclass
class MultilabelScores:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def as_row(self):
        return (self.accuracy, self.precision, self.recall, self.f1)


def _as_sets(samples):
    out = []
    for s in samples:
        if isinstance(s, (set, frozenset)):
            out.append(frozenset(s))
        else:
            arr = np.asarray(s)
            out.append(frozenset(np.flatnonzero(arr).tolist()))
    return out


def multilabel_scores(pred, truth) -> MultilabelScores:
    """Per-sample Jaccard accuracy, precision, recall, and F1, averaged.

    Samples are label sets or N-hot vectors.  Empty prediction and empty
    truth score 1 on everything; an empty side against a nonempty one
    scores 0.
    """
    pred, truth = _as_sets(pred), _as_sets(truth)
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} truths")
    if not pred:
        raise LengthMismatch("no samples")
    accs, precs, recs, f1s = [], [], [], []
    for p, t in zip(pred, truth):
        inter = len(p & t)
        union = len(p | t)
        if union == 0:
            accs.append(1.0)
            precs.append(1.0)
            recs.append(1.0)
            f1s.append(1.0)
            continue
        acc = inter / union
        prec = inter / len(p) if p else 0.0
        rec = inter / len(t) if t else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
        accs.append(acc)
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
    return MultilabelScores(
        accuracy=float(np.mean(accs)), precision=float(np.mean(precs)),
        recall=float(np.mean(recs)), f1=float(np.mean(f1s)))


def binary_accuracy(pred, truth) -> float:
    """Fraction of exact matches."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise LengthMismatch("no samples")
    return float((pred == truth).mean())


def scores_csv(rows: dict[str, MultilabelScores]) -> str:
    """Metric table in Acc/Prec/Recall/F1 column order."""
    lines = ["name,accuracy,precision,recall,f1"]
    for name in rows:
        s = rows[name]
        lines.append(f"{name},{s.accuracy:.6f},{s.precision:.6f},"
                     f"{s.recall:.6f},{s.f1:.6f}")
    return "\n".join(lines) + "\n"


def scores_table(rows: dict[str, MultilabelScores]) -> str:
    """Aligned text rendering of the same table."""
    width = max([len(n) for n in rows] + [6])
    lines = [f"{'name':<{width}}  {'Acc.':>7} {'Prec.':>7} {'Recall':>7} {'F1':>7}"]
    for name, s in rows.items():
        lines.append(f"{name:<{width}}  {s.accuracy:7.3f} {s.precision:7.3f} "
                     f"{s.recall:7.3f} {s.f1:7.3f}")
    return "\n".join(lines) + "\n"
