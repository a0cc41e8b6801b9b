"""Group fairness and AI-reliance metrics, plus permutation tests between conditions."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ContractError
from .validation import check_labels, derive_rng

# first group minus second group
FAIRNESS_ORDER = {
    "census": ("female", "male"),
    "recidivism": ("white", "black"),
    "bias": ("rep", "dem"),
    "toxicity": ("black", "white"),
}


@dataclass(frozen=True)
class Undefined:
    """A metric whose denominator is empty. Behaves as NaN in arithmetic contexts."""

    reason: str

    def __float__(self):
        return math.nan

    def __bool__(self):
        return False


def is_defined(value):
    return not isinstance(value, Undefined)


def _sub(a, b, what):
    if not is_defined(a):
        return Undefined(f"{what}: {a.reason}")
    if not is_defined(b):
        return Undefined(f"{what}: {b.reason}")
    return a - b


class Rates(NamedTuple):
    fpr: object
    fnr: object


def fpr_fnr(y_true, y_pred, groups=None, group=None):
    """False positive and false negative rate, +1 being the positive class.

    With ``groups`` and ``group`` given, only rows of that group count. A
    rate with no qualifying rows is returned as :class:`Undefined`.
    """
    y_true = check_labels(y_true, "y_true")
    y_pred = check_labels(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise ContractError("y_true and y_pred must align")
    label = "all rows"
    if group is not None:
        keep = np.asarray(groups) == group
        y_true, y_pred = y_true[keep], y_pred[keep]
        label = f"group {group!r}"
    neg = y_true == -1
    pos = ~neg
    fpr = float(np.sum(y_pred[neg] == 1)) / neg.sum() if neg.any() else Undefined(f"no negatives in {label}")
    fnr = float(np.sum(y_pred[pos] == -1)) / pos.sum() if pos.any() else Undefined(f"no positives in {label}")
    return Rates(fpr, fnr)


def fairness_diff(y_true, y_pred, groups, task_kind=None, order=None):
    """Signed ``(FPRD, FNRD)``: rate of the first group minus rate of the second.

    The group order comes from ``FAIRNESS_ORDER[task_kind]`` unless ``order``
    is passed explicitly.
    """
    if order is None:
        if task_kind not in FAIRNESS_ORDER:
            raise ContractError(f"no fairness group order known for {task_kind!r}; pass order=")
        order = FAIRNESS_ORDER[task_kind]
    first, second = order
    a = fpr_fnr(y_true, y_pred, groups, first)
    b = fpr_fnr(y_true, y_pred, groups, second)
    return _sub(a.fpr, b.fpr, "FPRD"), _sub(a.fnr, b.fnr, "FNRD")


class Reliance(NamedTuple):
    accuracy: float
    overreliance: object
    underreliance: object


def reliance(y_true, y_ai, y_human):
    """Accuracy, overreliance (agreeing with a wrong AI) and underreliance (overriding a right AI)."""
    y_true = check_labels(y_true, "y_true")
    y_ai = check_labels(y_ai, "y_ai")
    y_human = check_labels(y_human, "y_human")
    if y_true.size == 0:
        raise ContractError("reliance needs at least one decision")
    if not (y_true.shape == y_ai.shape == y_human.shape):
        raise ContractError("label arrays must align")
    accuracy = float(np.mean(y_human == y_true))
    ai_wrong = y_ai != y_true
    over = (
        float(np.sum(y_human[ai_wrong] == y_ai[ai_wrong])) / ai_wrong.sum()
        if ai_wrong.any()
        else Undefined("AI never wrong")
    )
    ai_right = ~ai_wrong
    under = (
        float(np.sum(y_human[ai_right] != y_ai[ai_right])) / ai_right.sum()
        if ai_right.any()
        else Undefined("AI never right")
    )
    return Reliance(accuracy, over, under)


def permutation_test(a, b, num_perms=10000, seed=0):
    """Two-sided p-value for a difference in means, by label shuffling.

    Uses the ``(1 + extreme) / (1 + num_perms)`` estimator, so identical
    samples give exactly 1.0.
    """
    a = np.asarray([float(v) for v in a], dtype=np.float64)
    b = np.asarray([float(v) for v in b], dtype=np.float64)
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if a.size == 0 or b.size == 0:
        raise ContractError("both samples need at least one defined value")
    if num_perms < 1000:
        raise ContractError("num_perms must be >= 1000")
    pooled = np.concatenate([a, b])
    observed = abs(a.mean() - b.mean())
    rng = derive_rng(seed, "permutation")
    extreme = 0
    for start in range(0, num_perms, 1000):
        k = min(1000, num_perms - start)
        idx = np.argsort(rng.random((k, pooled.size)), axis=1)
        perm = pooled[idx]
        diff = np.abs(perm[:, : a.size].mean(axis=1) - perm[:, a.size:].mean(axis=1))
        extreme += int(np.sum(diff >= observed - 1e-12))
    return (1 + extreme) / (1 + num_perms)


def mean_ci(values, z=1.96):
    """Mean with a normal-approximation confidence interval over the defined values."""
    arr = np.asarray([float(v) for v in values], dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return {"mean": None, "ci_low": None, "ci_high": None, "n": 0}
    mean = float(arr.mean())
    half = z * float(arr.std(ddof=1)) / math.sqrt(arr.size) if arr.size > 1 else 0.0
    return {"mean": mean, "ci_low": mean - half, "ci_high": mean + half, "n": int(arr.size)}
