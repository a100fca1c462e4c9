"""Explanation-quality metrics over normalized explanation/ground-truth
pairs of matching dimensionality.

The core suite is completeness (recall-flavoured), compactness
(precision-flavoured) and correctness (their mean), each in three modes:
"ne" considers every influencing pixel regardless of sign, "gt" only
positively and "lt" only negatively influencing pixels. A set of widely
used prior metrics (MAE, IoU, precision/recall/F1, EBPG, RRA, pointing
game, cosine similarity, deletion/insertion) is included for comparison.

All metrics expect tensors normalized to [-1, 1]; 2D explanations are
scored against the 2D ground truth and 3D against the 3D one, shape
mismatches are rejected.
"""

from __future__ import annotations

import numpy as np

from xaibench.network import Network, forward

MODES = ("ne", "gt", "lt")

DEFAULT_TAU = 0.25  # binarization threshold for |E| in the set-overlap metrics
STEP_FRACTION = 0.02  # pixels removed/added per deletion/insertion step


class MetricError(ValueError):
    pass


def _check_pair(e: np.ndarray, gt: np.ndarray) -> None:
    if e.shape != gt.shape:
        raise MetricError(f"shape mismatch: explanation {e.shape} vs ground truth {gt.shape}")


def _select(t: np.ndarray, mode: str) -> np.ndarray:
    if mode == "ne":
        return t != 0
    if mode == "gt":
        return t > 0
    if mode == "lt":
        return t < 0
    raise MetricError(f"unknown mode {mode!r}")


def _errors(e: np.ndarray, gt: np.ndarray, mode: str) -> np.ndarray:
    if mode == "ne":
        return np.abs(np.abs(e) - np.abs(gt))
    return np.clip(np.abs(e - gt), 0.0, 1.0)


def completeness(e: np.ndarray, gt: np.ndarray, mode: str = "ne") -> float:
    """1 minus the mean attribution error over the influencing pixels
    (1 when the ground truth has no pixels of the requested sign)."""
    _check_pair(e, gt)
    sel = _select(gt, mode)
    if not sel.any():
        return 1.0
    return 1.0 - float(np.mean(_errors(e, gt, mode)[sel]))


def compactness(e: np.ndarray, gt: np.ndarray, mode: str = "ne") -> float:
    """Accurate attribution mass on truly influencing pixels relative to
    the error mass spent elsewhere.

    1 when the explanation assigns nothing in this mode; 0 when it
    assigns mass but none of it lands accurately."""
    _check_pair(e, gt)
    e_sel = _select(e, mode)
    gt_sel = _select(gt, mode)
    f = _errors(e, gt, mode)
    tp_acc = float(np.sum((1.0 - f)[gt_sel & e_sel]))
    fp_err = float(np.sum(f[~gt_sel & e_sel]))
    if tp_acc != 0.0:
        return tp_acc / (tp_acc + fp_err)
    return 1.0 if fp_err == 0.0 else 0.0


def correctness(e: np.ndarray, gt: np.ndarray, mode: str = "ne") -> float:
    return 0.5 * (completeness(e, gt, mode) + compactness(e, gt, mode))


def correctness_ns(e: np.ndarray, gt: np.ndarray) -> float:
    """Correctness with the influence sign disregarded."""
    return correctness(e, gt, "ne")


def correctness_s(e: np.ndarray, gt: np.ndarray) -> float:
    """Correctness averaged over the sign-aware modes."""
    return 0.5 * (correctness(e, gt, "gt") + correctness(e, gt, "lt"))


def completeness_concepts(pairs, mode: str = "ne") -> float:
    """Concept-level variant: mean error term over per-concept pairs."""
    if not pairs:
        raise MetricError("at least one concept pair is required")
    return float(np.mean([completeness(e, gt, mode) for e, gt in pairs]))


def compactness_concepts(pairs, mode: str = "ne") -> float:
    if not pairs:
        raise MetricError("at least one concept pair is required")
    return float(np.mean([compactness(e, gt, mode) for e, gt in pairs]))


# ------------------------------------------------------------- prior metrics

def mae(e: np.ndarray, gt: np.ndarray) -> float:
    _check_pair(e, gt)
    return float(np.mean(np.abs(e - gt)))


def _masks(e, gt, tau):
    _check_pair(e, gt)
    return np.abs(e) > tau, gt != 0


def iou(e: np.ndarray, gt: np.ndarray, tau: float = DEFAULT_TAU) -> float:
    e_mask, gt_mask = _masks(e, gt, tau)
    union = int(np.sum(e_mask | gt_mask))
    if union == 0:
        return 1.0
    return float(np.sum(e_mask & gt_mask)) / union


def precision(e: np.ndarray, gt: np.ndarray, tau: float = DEFAULT_TAU) -> float:
    e_mask, gt_mask = _masks(e, gt, tau)
    if not e_mask.any():
        return 1.0 if not gt_mask.any() else 0.0
    return float(np.sum(e_mask & gt_mask)) / float(np.sum(e_mask))


def recall(e: np.ndarray, gt: np.ndarray, tau: float = DEFAULT_TAU) -> float:
    e_mask, gt_mask = _masks(e, gt, tau)
    if not gt_mask.any():
        return 1.0
    return float(np.sum(e_mask & gt_mask)) / float(np.sum(gt_mask))


def f1(e: np.ndarray, gt: np.ndarray, tau: float = DEFAULT_TAU) -> float:
    p = precision(e, gt, tau)
    r = recall(e, gt, tau)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def ebpg(e: np.ndarray, gt: np.ndarray) -> float:
    """Fraction of total absolute attribution inside the (binarized)
    ground-truth mask; 0 when the explanation is all zero."""
    _check_pair(e, gt)
    mass = np.abs(e)
    total = float(np.sum(mass))
    if total == 0.0:
        return 0.0
    return float(np.sum(mass[gt != 0])) / total


def rra(e: np.ndarray, gt: np.ndarray) -> float:
    """Fraction of the top-K attributed pixels lying inside the mask,
    with K the mask size. Ties break by flat index order."""
    _check_pair(e, gt)
    gt_mask = (gt != 0).ravel()
    k = int(np.sum(gt_mask))
    if k == 0:
        return 1.0
    order = np.argsort(-np.abs(e).ravel(), kind="stable")[:k]
    return float(np.sum(gt_mask[order])) / k


def pointing_game(e: np.ndarray, gt: np.ndarray) -> float:
    """1 if the single strongest attribution lies inside the mask."""
    _check_pair(e, gt)
    gt_mask = (gt != 0).ravel()
    if not gt_mask.any():
        return 1.0
    return float(gt_mask[int(np.argmax(np.abs(e)))])


def cosine(e: np.ndarray, gt: np.ndarray) -> float:
    """Cosine similarity clipped to [0, 1]; 1 when both are all zero."""
    _check_pair(e, gt)
    ne = float(np.linalg.norm(e))
    ng = float(np.linalg.norm(gt))
    if ne == 0.0 and ng == 0.0:
        return 1.0
    if ne == 0.0 or ng == 0.0:
        return 0.0
    return float(np.clip(float(np.dot(e.ravel(), gt.ravel())) / (ne * ng), 0.0, 1.0))


def _pixel_order(e: np.ndarray) -> np.ndarray:
    """Most-important-first pixel order from a 2D-projected |E|."""
    importance = np.max(np.abs(e), axis=2)
    return np.argsort(-importance.ravel(), kind="stable")


def _score_trajectory(net, start: np.ndarray, source: np.ndarray,
                      order: np.ndarray, class_index: int,
                      step_fraction: float) -> np.ndarray:
    h, w, _ = start.shape
    n = h * w
    step = max(1, int(round(step_fraction * n)))
    current = start.copy()
    out0, _ = forward(net, current)
    scores = [float(out0[class_index])]
    for lo in range(0, n, step):
        idx = order[lo:lo + step]
        ys, xs = np.unravel_index(idx, (h, w))
        current[ys, xs, :] = source[ys, xs, :]
        out, _ = forward(net, current)
        scores.append(float(out[class_index]))
    return np.asarray(scores)


def deletion(e: np.ndarray, net: Network, x: np.ndarray, class_index: int,
             step_fraction: float = STEP_FRACTION) -> float:
    """AUC of the class score as the most-attributed pixels are zeroed
    out most-important-first; lower is better."""
    scores = _score_trajectory(net, x, np.zeros_like(x), _pixel_order(e),
                               class_index, step_fraction)
    return float(np.trapezoid(scores, dx=1.0 / (len(scores) - 1)))


def insertion(e: np.ndarray, net: Network, x: np.ndarray, class_index: int,
              step_fraction: float = STEP_FRACTION) -> float:
    """AUC of the class score as pixels are restored into a zero image
    most-important-first; higher is better."""
    scores = _score_trajectory(net, np.zeros_like(x), x, _pixel_order(e),
                               class_index, step_fraction)
    return float(np.trapezoid(scores, dx=1.0 / (len(scores) - 1)))


def time_metric(elapsed_ms: list[float]) -> float:
    if not elapsed_ms:
        raise MetricError("at least one timing record is required")
    return float(np.mean(elapsed_ms))


# ------------------------------------------------------------- registry

def _pair_metrics():
    out = {}
    for mode in MODES:
        out[f"cpl_{mode}"] = (lambda e, g, m=mode: completeness(e, g, m))
        out[f"cpa_{mode}"] = (lambda e, g, m=mode: compactness(e, g, m))
        out[f"cor_{mode}"] = (lambda e, g, m=mode: correctness(e, g, m))
    out["cor_ns"] = correctness_ns
    out["cor_s"] = correctness_s
    out["mae"] = mae
    out["iou"] = iou
    out["precision"] = precision
    out["recall"] = recall
    out["f1"] = f1
    out["ebpg"] = ebpg
    out["rra"] = rra
    out["pointing_game"] = pointing_game
    out["cosine"] = cosine
    return out


PAIR_METRICS = _pair_metrics()
MODEL_METRICS = {"deletion": deletion, "insertion": insertion}
ALL_METRICS = tuple(PAIR_METRICS) + tuple(MODEL_METRICS)


def evaluate_explanation(e: np.ndarray, gt: np.ndarray, names,
                         net: Network | None = None,
                         x: np.ndarray | None = None,
                         class_index: int | None = None) -> dict[str, float]:
    """Scores one explanation/ground-truth pair on the named metrics."""
    out = {}
    for name in names:
        if name in PAIR_METRICS:
            out[name] = PAIR_METRICS[name](e, gt)
        elif name in MODEL_METRICS:
            if net is None or x is None or class_index is None:
                raise MetricError(f"{name} requires the model, input and class index")
            out[name] = MODEL_METRICS[name](e, net, x, class_index)
        else:
            raise MetricError(f"unknown metric {name!r}")
    return out
