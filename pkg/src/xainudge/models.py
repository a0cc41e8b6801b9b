"""The task model whose recommendations and explanations are shown to decision makers."""

import logging
import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.ensemble import RandomForestClassifier
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractError, SchemaError
from .validation import check_labels, check_matrix, check_vector, label_from_prob

logger = logging.getLogger(__name__)

FOREST_FORMAT = "xainudge.forest/1"


class RandomForestVoter(ClassifierMixin, BaseEstimator):
    """Bootstrap forest of Gini trees; ``P(+1)`` is the fraction of trees voting +1.

    Tree induction is delegated to scikit-learn. The fitted trees are copied
    into flat node arrays (``trees_``) which are the model of record: they are
    what prediction, explanation and JSON persistence use.
    """

    def __init__(self, num_trees=100, max_depth=8, seed=0, n_jobs=1):
        self.num_trees = num_trees
        self.max_depth = max_depth
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_labels(y, "y")
        if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
            raise ContractError("X and y must be nonempty and aligned")
        if self.num_trees < 1 or self.max_depth < 1:
            raise ContractError("num_trees and max_depth must be >= 1")
        n = X.shape[1]
        self.n_features_in_ = n
        self.classes_ = np.array([-1, 1])
        present = np.unique(y)
        if present.size == 1:
            logger.warning("single-class training set; fitting a constant model predicting %d", present[0])
            counts = [0.0, float(y.size)] if present[0] == 1 else [float(y.size), 0.0]
            self.trees_ = [_leaf_tree(counts) for _ in range(self.num_trees)]
            self._pack()
            return self
        forest = RandomForestClassifier(
            n_estimators=self.num_trees,
            max_depth=self.max_depth,
            max_features=math.ceil(math.sqrt(n)),
            criterion="gini",
            bootstrap=True,
            random_state=self.seed,
            n_jobs=self.n_jobs,
        ).fit(X, y)
        self.trees_ = [_export_tree(est.tree_) for est in forest.estimators_]
        self._pack()
        return self

    def _pack(self):
        feats, thrs, lefts, rights, votes, roots = [], [], [], [], [], []
        offset = 0
        for tree in self.trees_:
            size = len(tree["feature"])
            left = np.asarray(tree["left"], dtype=np.int64)
            right = np.asarray(tree["right"], dtype=np.int64)
            counts = np.asarray(tree["counts"], dtype=np.float64).reshape(size, 2)
            roots.append(offset)
            feats.append(np.asarray(tree["feature"], dtype=np.int64))
            thrs.append(np.asarray(tree["threshold"], dtype=np.float64))
            lefts.append(np.where(left >= 0, left + offset, -1))
            rights.append(np.where(right >= 0, right + offset, -1))
            votes.append(np.where(counts[:, 1] >= counts[:, 0], 1, -1))
            offset += size
        feature = np.concatenate(feats)
        leaf = feature < 0
        ids = np.arange(feature.size)
        # leaves point to themselves so traversal runs a fixed number of levels without masking
        self._feature = np.where(leaf, 0, feature)
        self._threshold = np.where(leaf, np.inf, np.concatenate(thrs))
        self._left = np.where(leaf, ids, np.concatenate(lefts))
        self._right = np.where(leaf, ids, np.concatenate(rights))
        self._vote = np.concatenate(votes)
        self._roots = np.asarray(roots, dtype=np.int64)
        self._depth = max(_tree_depth(t) for t in self.trees_)
        self._pack_paths()

    def _pack_paths(self):
        # root-to-leaf conditions of every leaf, padded to a common depth
        paths, votes = [], []
        for tree in self.trees_:
            counts = np.asarray(tree["counts"], dtype=np.float64).reshape(-1, 2)
            for leaf, path in _leaf_paths(tree):
                paths.append(path)
                votes.append(counts[leaf, 1] >= counts[leaf, 0])
        depth = max(1, max(len(p) for p in paths))
        shape = (len(paths), depth)
        self._path_feature = np.zeros(shape, dtype=np.int64)
        self._path_threshold = np.zeros(shape)
        self._path_left = np.zeros(shape, dtype=bool)
        self._path_valid = np.zeros(shape, dtype=bool)
        for i, path in enumerate(paths):
            for j, (f, t, left) in enumerate(path):
                self._path_feature[i, j], self._path_threshold[i, j] = f, t
                self._path_left[i, j], self._path_valid[i, j] = left, True
        self._leaf_positive = np.asarray(votes, dtype=bool)
        self._path_bits = np.where(self._path_valid, np.left_shift(1, self._path_feature), 0)
        self._background_tests = None

    def predict_proba(self, X):
        check_is_fitted(self, "trees_")
        X = check_matrix(X, self.n_features_in_)
        # thresholds were learned on float32-cast inputs
        flat = X.astype(np.float32).astype(np.float64).ravel()
        base = (np.arange(X.shape[0]) * X.shape[1])[:, None]
        node = np.broadcast_to(self._roots, (X.shape[0], self._roots.size)).copy()
        for _ in range(self._depth):
            go_left = flat[base + self._feature[node]] <= self._threshold[node]
            node = np.where(go_left, self._left[node], self._right[node])
        p = (self._vote[node] == 1).mean(axis=1)
        return np.column_stack([1.0 - p, p])

    def coalition_values(self, x, background):
        """Mean ``P(+1)`` over background rows for every coalition bitmask.

        Same values as evaluating the forest on all ``2^n * m`` hybrid rows,
        but computed from leaf paths: a leaf is reached under coalition ``S``
        iff ``S`` holds every feature whose path test only ``x`` passes and
        none whose test only the background row passes.
        """
        check_is_fitted(self, "trees_")
        x = check_vector(x, self.n_features_in_)
        B = check_matrix(background, self.n_features_in_, name="background")
        n = x.shape[0]
        f, t, left, valid = self._path_feature, self._path_threshold, self._path_left, self._path_valid

        def passes(v):
            z = v.astype(np.float32).astype(np.float64)[..., f]
            return np.where(left, z <= t, z > t) | ~valid

        # explainers reuse one background for every instance, so keep its tests
        key = B.tobytes()
        cached = self.__dict__.get("_background_tests")
        if cached is None or cached[0] != key:
            cached = (key, passes(B))
            self._background_tests = cached
        sx, sb = passes(x), cached[1]
        bits = self._path_bits
        need_in = np.bitwise_or.reduce(np.where(sx & ~sb, bits, 0), axis=-1)
        need_out = np.bitwise_or.reduce(np.where(sb & ~sx, bits, 0), axis=-1)
        live = ~np.any(~sx & ~sb, axis=-1) & ((need_in & need_out) == 0) & self._leaf_positive
        A, O = need_in[live], need_out[live]
        if A.size == 0:
            return np.zeros(2**n)
        # ternary code per leaf hit: digit 1 = feature must be in S, 2 = must be out, 0 = free
        pow3 = 3 ** np.arange(n)
        digit = ((A[:, None] >> np.arange(n)) & 1) + 2 * ((O[:, None] >> np.arange(n)) & 1)
        table = np.bincount(digit @ pow3, minlength=3**n).astype(np.float64).reshape((3,) * n)
        # push each free digit into both the "in" and "out" slots, one feature at a time
        for axis in range(n):
            free = np.take(table, [0], axis=axis)
            idx = [slice(None)] * n
            for slot in (1, 2):
                idx[axis] = slice(slot, slot + 1)
                table[tuple(idx)] += free
        masks = np.arange(2**n)
        member = (masks[:, None] >> np.arange(n)) & 1
        # table axis k holds feature n-1-k (C order puts feature 0 last)
        hits = table.ravel()[(2 - member) @ pow3]
        return hits / (len(self.trees_) * B.shape[0])

    def predict(self, X):
        return label_from_prob(self.predict_proba(X)[:, 1])

    def to_dict(self):
        check_is_fitted(self, "trees_")
        return {
            "format": FOREST_FORMAT,
            # n_jobs is a runtime setting and must not change the artifact
            "params": {k: v for k, v in self.get_params().items() if k != "n_jobs"},
            "n_features": self.n_features_in_,
            "trees": self.trees_,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FOREST_FORMAT:
            raise SchemaError(f"unsupported forest format {d.get('format')!r}")
        model = cls(**d["params"])
        model.n_features_in_ = d["n_features"]
        model.classes_ = np.array([-1, 1])
        model.trees_ = d["trees"]
        model._pack()
        return model


def _leaf_tree(counts):
    return {"feature": [-1], "threshold": [0.0], "left": [-1], "right": [-1], "counts": [counts]}


def _export_tree(tree):
    # sklearn >= 1.4 stores class fractions in value; scale back to (bootstrap-weighted) counts
    counts = tree.value[:, 0, :] * tree.weighted_n_node_samples[:, None]
    leaf = tree.children_left < 0
    return {
        "feature": np.where(leaf, -1, tree.feature).tolist(),
        "threshold": np.where(leaf, 0.0, tree.threshold).tolist(),
        "left": tree.children_left.tolist(),
        "right": tree.children_right.tolist(),
        "counts": np.round(counts, 6).tolist(),
    }


def _leaf_paths(tree):
    feature, threshold, left, right = tree["feature"], tree["threshold"], tree["left"], tree["right"]
    out, stack = [], [(0, ())]
    while stack:
        node, path = stack.pop()
        if left[node] < 0:
            out.append((node, path))
            continue
        stack.append((right[node], path + ((feature[node], threshold[node], False),)))
        stack.append((left[node], path + ((feature[node], threshold[node], True),)))
    return out


def _tree_depth(tree):
    left, right = tree["left"], tree["right"]
    depth, frontier = 0, [0]
    while True:
        frontier = [c for i in frontier for c in (left[i], right[i]) if c >= 0]
        if not frontier:
            return depth
        depth += 1


def train_forest(train, num_trees=100, max_depth=8, seed=0, n_jobs=1):
    """Fit a :class:`RandomForestVoter` on a :class:`~xainudge.data.Dataset`."""
    if len(train) == 0:
        raise ContractError("training set is empty")
    return RandomForestVoter(num_trees, max_depth, seed, n_jobs).fit(train.X, train.y)


class LogisticModel(ClassifierMixin, BaseEstimator):
    """Fixed-parameter logistic scorer, used as an analytic reference model."""

    def __init__(self, weights=None, bias=0.0):
        self.weights = weights
        self.bias = bias

    def fit(self, X=None, y=None):
        w = check_vector(self.weights, name="weights")
        if not math.isfinite(self.bias):
            raise ContractError("bias must be finite")
        self.coef_ = w
        self.intercept_ = float(self.bias)
        self.n_features_in_ = w.shape[0]
        self.classes_ = np.array([-1, 1])
        return self

    def _ensure(self):
        if not hasattr(self, "coef_"):
            self.fit()

    def decision_function(self, X):
        self._ensure()
        X = check_matrix(X, self.n_features_in_)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return label_from_prob(self.predict_proba(X)[:, 1])


def positive_proba(model, X):
    return model.predict_proba(X)[:, 1]


def predict_one(model, x):
    """Return ``(label, P(+1))`` for a single feature vector."""
    x = check_vector(x, name="x")
    n = getattr(model, "n_features_in_", None)
    if n is None and isinstance(model, LogisticModel):
        model.fit()
        n = model.n_features_in_
    if n is not None and x.shape[0] != n:
        raise ContractError(f"x has length {x.shape[0]}, model expects {n}")
    prob = float(positive_proba(model, x[None, :])[0])
    return (1 if prob >= 0.5 else -1), prob
