"""Targeted decisions for manipulation: group-biased (adversarial) or
human-AI combined (benign)."""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .data import GROUP_VOCAB, TaskInstance
from .exceptions import ContractError, VocabularyError
from .validation import check_label, check_labels

# group tag -> targeted decision
ADVERSARIAL_TARGETS = {
    "census": {"male": 1, "female": -1},
    "recidivism": {"black": 1, "white": -1},
    "bias": {"dem": 1, "rep": -1},
    "toxicity": {"white": 1, "black": -1},
}


def adversarial_target(instance, task_kind=None, target_map=None):
    """Group-biased target label for one instance.

    ``instance`` may be a :class:`TaskInstance` or a bare group tag (then
    ``task_kind`` or ``target_map`` is required). Synthetic tasks must pass
    ``target_map``.
    """
    if isinstance(instance, TaskInstance):
        group, task_kind = instance.group, task_kind or instance.task_kind
    else:
        group = instance
    mapping = target_map if target_map is not None else ADVERSARIAL_TARGETS.get(task_kind)
    if mapping is None:
        raise ContractError(f"no target map for task kind {task_kind!r}; pass target_map")
    if group not in mapping:
        vocab = GROUP_VOCAB.get(task_kind, tuple(mapping))
        raise VocabularyError(f"group {group!r} not in vocabulary {list(vocab)}")
    return check_label(mapping[group], "target")


def _idx(label):
    return (label + 1) // 2


class CombineModel(ClassifierMixin, BaseEstimator):
    """Naive-Bayes fusion of an independent human label and the AI label.

    ``fit(X, y)`` takes ``X`` with columns ``(y_h_indep, y_m)`` and the true
    labels ``y``. Confusion rows are indexed by the true label (-1 first) and
    estimated with add-``alpha`` smoothing. Ties in the posterior go to ``y_m``.
    """

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        X = np.asarray(X)
        y = check_labels(y, "y")
        if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] != y.shape[0] or y.size == 0:
            raise ContractError("X must have shape (n, 2) aligned with a nonempty y")
        yh, ym = check_labels(X[:, 0], "y_h_indep"), check_labels(X[:, 1], "y_m")
        a = self.alpha
        self.prior_ = (np.sum(y == 1) + a) / (y.size + 2 * a)
        self.human_confusion_ = self._confusion(y, yh)
        self.model_confusion_ = self._confusion(y, ym)
        self.classes_ = np.array([-1, 1])
        return self

    def _confusion(self, y, pred):
        counts = np.zeros((2, 2))
        np.add.at(counts, (_idx(y), _idx(pred)), 1.0)
        return (counts + self.alpha) / (counts.sum(axis=1, keepdims=True) + 2 * self.alpha)

    def log_odds(self, X):
        """``log P(y=+1 | labels) - log P(y=-1 | labels)`` under conditional independence."""
        check_is_fitted(self, "prior_")
        X = np.asarray(X)
        yh, ym = _idx(check_labels(X[:, 0])), _idx(check_labels(X[:, 1]))
        H, M = np.log(self.human_confusion_), np.log(self.model_confusion_)
        prior = math.log(self.prior_) - math.log(1.0 - self.prior_)
        return prior + (H[1, yh] - H[0, yh]) + (M[1, ym] - M[0, ym])

    def predict(self, X):
        lo = self.log_odds(X)
        ym = check_labels(np.asarray(X)[:, 1])
        return np.where(lo > 0, 1, np.where(lo < 0, -1, ym))

    def to_dict(self):
        check_is_fitted(self, "prior_")
        return {
            "alpha": self.alpha,
            "prior": self.prior_,
            "human_confusion": self.human_confusion_.tolist(),
            "model_confusion": self.model_confusion_.tolist(),
        }


def fit_combiner(calibration, alpha=1.0):
    """Fit a :class:`CombineModel` from ``(y, y_h_indep, y_m)`` triples."""
    rows = list(calibration)
    if not rows:
        raise ContractError("calibration data must be nonempty")
    arr = np.asarray(rows, dtype=np.int64)
    return CombineModel(alpha).fit(arr[:, 1:], arr[:, 0])


def combine(cm, y_h_indep, y_m):
    return int(cm.predict(np.array([[check_label(y_h_indep), check_label(y_m)]]))[0])


def weighted_vote_baseline(y_h_indep, y_m, human_acc, model_acc):
    """Log-odds-weighted vote of two labellers; a zero score goes to ``y_m``."""
    for acc in (human_acc, model_acc):
        if not 0.0 < acc < 1.0:
            raise ContractError("accuracies must lie in (0, 1)")
    y_h_indep, y_m = check_label(y_h_indep), check_label(y_m)
    w_h = math.log(human_acc) - math.log(1.0 - human_acc)
    w_m = math.log(model_acc) - math.log(1.0 - model_acc)
    score = w_h * y_h_indep + w_m * y_m
    if score > 0:
        return 1
    if score < 0:
        return -1
    return y_m
