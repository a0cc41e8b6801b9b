"""Learned model of the human decision given features, AI label and explanation."""

import logging

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_is_fitted

from .data import records_to_arrays
from .exceptions import ContractError, SchemaError, StratificationError
from .validation import check_labels, check_matrix, check_vector, derive_rng, label_from_prob

logger = logging.getLogger(__name__)

BEHAVIOR_FORMAT = "xainudge.behavior-model/1"


def encode(x, y_m, e):
    """Behavior-model input ``[x, y_m, e, x * e]`` of length ``3n + 1``.

    Accepts single vectors or row-aligned batches.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if x.shape != e.shape:
        raise ContractError(f"x shape {x.shape} does not match explanation shape {e.shape}")
    if x.ndim == 1:
        return np.concatenate([x, [float(y_m)], e, x * e])
    y_m = np.asarray(y_m, dtype=np.float64).reshape(-1, 1)
    if y_m.shape[0] != x.shape[0]:
        raise ContractError("y_m must have one entry per row")
    return np.hstack([x, y_m, e, x * e])


_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _prob(z):
    # keep reported probabilities strictly inside (0, 1) at float resolution
    return np.clip(_sigmoid(z), _P_LO, _P_HI)


def _bce_from_logits(logit, t):
    # t in {0, 1}; log(1 + exp(z)) - t z, computed stably
    return np.logaddexp(0.0, logit) - t * logit


class BehaviorModel(ClassifierMixin, BaseEstimator):
    """Two-layer ReLU network giving ``P(y_h = +1)``, fitted by minibatch Adam.

    ``fit`` takes encoded inputs (see :func:`encode`) and labels in {-1, +1}.
    After fitting, ``n_steps_`` counts optimizer updates and ``loss_curve_``
    holds the full-training-set loss after each epoch.
    """

    def __init__(
        self,
        hidden_dim=64,
        learning_rate=1e-4,
        batch_size=128,
        epochs=10,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        seed=0,
    ):
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed

    @property
    def n_features(self):
        check_is_fitted(self, "W1_")
        return (self.n_features_in_ - 1) // 3

    def init_params(self, input_dim):
        if (input_dim - 1) % 3:
            raise ContractError(f"input_dim must be 3n+1, got {input_dim}")
        rng = derive_rng(self.seed, "behavior-init")
        b1 = 1.0 / np.sqrt(input_dim)
        b2 = 1.0 / np.sqrt(self.hidden_dim)
        self.W1_ = rng.uniform(-b1, b1, (self.hidden_dim, input_dim))
        self.b1_ = rng.uniform(-b1, b1, self.hidden_dim)
        self.W2_ = rng.uniform(-b2, b2, self.hidden_dim)
        self.b2_ = float(rng.uniform(-b2, b2))
        self.n_features_in_ = input_dim
        self.classes_ = np.array([-1, 1])
        return self

    def get_weights(self):
        return {"W1": self.W1_, "b1": self.b1_, "W2": self.W2_, "b2": np.array(self.b2_)}

    def set_weights(self, W1, b1, W2, b2):
        self.W1_ = np.asarray(W1, dtype=np.float64)
        self.b1_ = np.asarray(b1, dtype=np.float64)
        self.W2_ = np.asarray(W2, dtype=np.float64)
        self.b2_ = float(b2)
        self.n_features_in_ = self.W1_.shape[1]
        self.classes_ = np.array([-1, 1])
        return self

    def _forward(self, Z):
        pre = Z @ self.W1_.T + self.b1_
        hidden = np.maximum(pre, 0.0)
        logit = hidden @ self.W2_ + self.b2_
        return pre, hidden, logit

    def decision_function(self, Z):
        check_is_fitted(self, "W1_")
        Z = check_matrix(Z, self.n_features_in_, name="encoded")
        return self._forward(Z)[2]

    def predict_proba(self, Z):
        p = _prob(self.decision_function(Z))
        return np.column_stack([1.0 - p, p])

    def predict(self, Z):
        return label_from_prob(self.predict_proba(Z)[:, 1])

    def forward(self, encoded):
        """``P(y_h = +1)`` for one encoded input."""
        check_is_fitted(self, "W1_")
        z = check_vector(encoded, self.n_features_in_, name="encoded")
        return float(_prob(self._forward(z[None, :])[2])[0])

    def loss(self, Z, y):
        logit = self.decision_function(Z)
        return float(np.mean(_bce_from_logits(logit, (check_labels(y) + 1) / 2)))

    def loss_and_grads(self, Z, y):
        """Mean cross-entropy and its gradient with respect to every parameter."""
        t = (np.asarray(y, dtype=np.float64) + 1.0) / 2.0
        pre, hidden, logit = self._forward(Z)
        loss = float(np.mean(_bce_from_logits(logit, t)))
        dlogit = (_sigmoid(logit) - t) / Z.shape[0]
        dW2 = hidden.T @ dlogit
        db2 = dlogit.sum()
        dpre = np.outer(dlogit, self.W2_) * (pre > 0)
        grads = {"W1": dpre.T @ Z, "b1": dpre.sum(axis=0), "W2": dW2, "b2": np.array(db2)}
        return loss, grads

    def input_gradient(self, Z, target):
        """Per-row cross-entropy against ``target`` labels and its gradient wrt the encoded input."""
        t = (np.asarray(target, dtype=np.float64) + 1.0) / 2.0
        pre, _, logit = self._forward(Z)
        loss = _bce_from_logits(logit, t)
        dlogit = _sigmoid(logit) - t
        dZ = (np.outer(dlogit, self.W2_) * (pre > 0)) @ self.W1_
        return loss, dZ

    def explanation_gradient(self, x, y_m, E, target):
        """Behavior loss for explanations ``E`` (rows) of one instance, and its gradient wrt ``E``.

        Chains the encoded-input gradient through both the ``e`` block and
        the ``x * e`` block of the encoding.
        """
        n = x.shape[0]
        Z = encode(np.broadcast_to(x, E.shape), np.full(E.shape[0], y_m), E)
        loss, dZ = self.input_gradient(Z, np.full(E.shape[0], target))
        dE = dZ[:, n + 1:2 * n + 1] + dZ[:, 2 * n + 1:] * x
        return loss, dE

    def fit(self, Z, y):
        Z = check_matrix(Z, name="encoded")
        y = check_labels(y, "y")
        if Z.shape[0] == 0 or Z.shape[0] != y.shape[0]:
            raise ContractError("training data must be nonempty and aligned")
        if np.unique(y).size == 1:
            logger.warning("all behavior labels equal %d; the model will collapse to one class", y[0])
        self.init_params(Z.shape[1])
        names = ("W1", "b1", "W2", "b2")
        m = {k: np.zeros_like(v, dtype=np.float64) for k, v in self.get_weights().items()}
        v = {k: np.zeros_like(val) for k, val in m.items()}
        rng = derive_rng(self.seed, "behavior-batches")
        step = 0
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(Z.shape[0])
            for start in range(0, Z.shape[0], self.batch_size):
                idx = order[start:start + self.batch_size]
                _, grads = self.loss_and_grads(Z[idx], y[idx])
                step += 1
                params = self.get_weights()
                new = {}
                for k in names:
                    g = grads[k]
                    m[k] = self.beta1 * m[k] + (1 - self.beta1) * g
                    v[k] = self.beta2 * v[k] + (1 - self.beta2) * g * g
                    m_hat = m[k] / (1 - self.beta1**step)
                    v_hat = v[k] / (1 - self.beta2**step)
                    new[k] = params[k] - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
                self.set_weights(new["W1"], new["b1"], new["W2"], new["b2"])
            self.loss_curve_.append(self.loss(Z, y))
        self.n_steps_ = step
        self.final_loss_ = self.loss_curve_[-1] if self.loss_curve_ else self.loss(Z, y)
        return self

    def to_dict(self):
        check_is_fitted(self, "W1_")
        return {
            "format": BEHAVIOR_FORMAT,
            "train_config": self.get_params(),
            "input_dim": self.n_features_in_,
            "W1": self.W1_.tolist(),
            "b1": self.b1_.tolist(),
            "W2": self.W2_.tolist(),
            "b2": self.b2_,
            "final_loss": getattr(self, "final_loss_", None),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != BEHAVIOR_FORMAT:
            raise SchemaError(f"unsupported behavior-model format {d.get('format')!r}")
        model = cls(**d["train_config"]).set_weights(d["W1"], d["b1"], d["W2"], d["b2"])
        if d.get("final_loss") is not None:
            model.final_loss_ = d["final_loss"]
        return model


def encode_records(records):
    X, y_m, E, y_h = records_to_arrays(records)
    return encode(X, y_m, E), y_h


def train(records, **config):
    """Fit a :class:`BehaviorModel` on behavior records; returns ``(model, final_loss)``."""
    Z, y = encode_records(records)
    model = BehaviorModel(**config).fit(Z, y)
    return model, model.final_loss_


def cross_validate(records, k=5, seed=0, **config):
    """Stratified k-fold accuracy of the behavior model; returns ``(mean, per_fold)``."""
    Z, y = encode_records(records)
    if Z.shape[0] < k:
        raise ContractError(f"need at least k={k} records")
    counts = np.bincount((y + 1) // 2, minlength=2)
    if counts.min() < k:
        raise StratificationError(f"a label occurs {counts.min()} times; every one of {k} folds needs both")
    folds = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed % 2**32)
    accs = []
    for fold, (train_idx, test_idx) in enumerate(folds.split(Z, y)):
        if np.unique(y[test_idx]).size < 2:
            raise StratificationError(f"fold {fold} lacks one of the classes")
        model = BehaviorModel(**{**config, "seed": config.get("seed", 0) + fold}).fit(Z[train_idx], y[train_idx])
        accs.append(float(np.mean(model.predict(Z[test_idx]) == y[test_idx])))
    return float(np.mean(accs)), accs
