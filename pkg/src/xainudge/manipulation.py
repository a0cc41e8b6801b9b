"""Gradient search for explanations that steer a behavior model toward a target decision
while still supporting the AI recommendation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import Explanation
from .exceptions import ContractError, OptimizationError
from .explainers import rescale_max_abs
from .validation import check_label, check_vector, derive_rng

logger = logging.getLogger(__name__)

RESULT_FORMAT = "xainudge.manipulation/1"


def consistency_loss(e, y_m):
    """0 when the attribution sum has the sign of ``y_m``, else 1 (a zero sum counts as 1)."""
    attributions = e.attributions if isinstance(e, Explanation) else check_vector(e, name="e")
    y_m = check_label(y_m, "y_m")
    return 0 if y_m * attributions.sum() > 0 else 1


def consistency_surrogate(e, y_m, margin=0.05):
    """Hinge relaxation ``max(0, margin - y_m * sum(e))`` of :func:`consistency_loss`."""
    if margin < 0:
        raise ContractError("margin must be non-negative")
    attributions = e.attributions if isinstance(e, Explanation) else np.asarray(e, dtype=np.float64)
    return max(0.0, margin - check_label(y_m, "y_m") * float(np.sum(attributions)))


@dataclass(frozen=True)
class ManipulationConfig:
    step_size: float = 0.01
    tradeoff: float = 0.01
    threshold: float = 0.1
    max_rounds: int = 100
    restarts: int = 5
    init_low: float = -1.0
    init_high: float = 1.0
    hinge_margin: float = 0.05
    box: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ContractError("step_size must be > 0")
        if self.tradeoff < 0:
            raise ContractError("tradeoff must be >= 0")
        if not self.threshold > 0:
            raise ContractError("threshold must be > 0")
        if self.max_rounds < 1 or self.restarts < 1:
            raise ContractError("max_rounds and restarts must be >= 1")
        if not self.init_low < self.init_high:
            raise ContractError("init_low must be < init_high")
        if self.hinge_margin < 0:
            raise ContractError("hinge_margin must be >= 0")
        if self.box is not None and not self.box > 0:
            raise ContractError("box must be > 0 or None")


@dataclass
class ManipulationResult:
    explanation: Explanation
    feasible: bool
    final_behavior_loss: float
    loss_traces: list = field(default_factory=list)
    rounds_used: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    restart_feasible: list = field(default_factory=list)
    aborted: list = field(default_factory=list)
    target: int = 1

    @property
    def restarts_feasible(self):
        return int(sum(self.restart_feasible))

    def to_dict(self):
        d = asdict(self)
        d["explanation"] = {"attributions": self.explanation.attributions.tolist(), "kind": self.explanation.kind}
        d["restarts_feasible"] = self.restarts_feasible
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("restarts_feasible", None)
        d.pop("format", None)
        d.pop("id", None)
        e = d.pop("explanation")
        return cls(explanation=Explanation(np.asarray(e["attributions"]), e["kind"]), **d)


def _hinge_grad(E, y_m, margin):
    # subgradient at the kink is 0
    active = margin - y_m * E.sum(axis=1) > 0
    return np.where(active[:, None], -float(y_m), 0.0) * np.ones_like(E)


def manipulate(behavior, x, y_m, target, config=None):
    """Search for an explanation ``e'`` that makes ``behavior`` predict ``target``.

    Every restart starts from a uniform draw and takes gradient steps on
    ``CE(behavior, target) + tradeoff * hinge(e', y_m)``, projected onto
    ``[-box, box]^n`` unless ``box`` is None, stopping once the
    cross-entropy falls below ``threshold`` or after ``max_rounds``. Restarts
    whose endpoint satisfies the exact sign constraint are averaged; without
    any, the lowest-loss endpoint is returned with ``feasible=False``. The
    returned explanation is rescaled to max-abs 1.
    """
    config = config or ManipulationConfig()
    x = check_vector(x, name="x")
    y_m = check_label(y_m, "y_m")
    target = check_label(target, "target")
    n = x.shape[0]
    if behavior.n_features_in_ != 3 * n + 1:
        raise ContractError(f"behavior model expects n={behavior.n_features}, got x of length {n}")

    rng = derive_rng(config.seed, "manipulate-init")
    R = config.restarts
    E = rng.uniform(config.init_low, config.init_high, size=(R, n))
    active = np.ones(R, dtype=bool)
    aborted = np.zeros(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    rounds = np.zeros(R, dtype=np.int64)
    traces = [[] for _ in range(R)]
    last_loss = np.full(R, np.inf)

    for _ in range(config.max_rounds):
        loss, grad = behavior.explanation_gradient(x, y_m, E, target)
        grad = grad + config.tradeoff * _hinge_grad(E, y_m, config.hinge_margin)
        bad = active & ~(np.all(np.isfinite(grad), axis=1) & np.isfinite(loss))
        if bad.any():
            logger.warning("non-finite gradient; aborting %d restart(s)", int(bad.sum()))
            aborted |= bad
            active &= ~bad
        for r in np.flatnonzero(active):
            traces[r].append(float(loss[r]))
        rounds += active
        last_loss = np.where(active, loss, last_loss)
        done = active & (loss < config.threshold)
        converged |= done
        active &= ~done
        if not active.any():
            break
        stepped = E - config.step_size * grad
        if config.box is not None:
            # keep iterates on the scale of displayed explanations
            stepped = np.clip(stepped, -config.box, config.box)
        E = np.where(active[:, None], stepped, E)
    if active.any():
        # endpoints after the last update of restarts that ran out of rounds
        loss, _ = behavior.explanation_gradient(x, y_m, E, target)
        last_loss = np.where(active, loss, last_loss)

    if aborted.all():
        raise OptimizationError("every restart hit a non-finite gradient")
    feasible = ~aborted & (y_m * E.sum(axis=1) > 0)
    if feasible.any():
        pooled = E[feasible].mean(axis=0)
    else:
        candidates = np.flatnonzero(~aborted)
        pooled = E[candidates[np.argmin(last_loss[candidates])]]
    final_loss = float(behavior.explanation_gradient(x, y_m, pooled[None, :], target)[0][0])
    shown = rescale_max_abs(pooled)
    return ManipulationResult(
        explanation=Explanation(shown, "manipulated"),
        feasible=consistency_loss(shown, y_m) == 0,
        final_behavior_loss=final_loss,
        loss_traces=traces,
        rounds_used=rounds.tolist(),
        converged=converged.tolist(),
        restart_feasible=feasible.tolist(),
        aborted=aborted.tolist(),
        target=target,
    )


class ExplanationManipulator(TransformerMixin, BaseEstimator):
    """Transformer wrapper: maps rows ``(x, y_m, target)`` to manipulated explanations.

    ``transform`` takes the feature matrix plus aligned ``y_m`` and
    ``targets``; per-row seeds are derived from ``seed`` and the row's key so
    results do not depend on ``n_jobs``.
    """

    def __init__(self, behavior=None, step_size=0.01, tradeoff=0.01, threshold=0.1, max_rounds=100,
                 restarts=5, init_low=-1.0, init_high=1.0, hinge_margin=0.05, box=1.0, seed=0, n_jobs=1):
        self.behavior = behavior
        self.step_size = step_size
        self.tradeoff = tradeoff
        self.threshold = threshold
        self.max_rounds = max_rounds
        self.restarts = restarts
        self.init_low = init_low
        self.init_high = init_high
        self.hinge_margin = hinge_margin
        self.box = box
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        return self

    def config_for(self, key):
        return ManipulationConfig(
            self.step_size, self.tradeoff, self.threshold, self.max_rounds, self.restarts,
            self.init_low, self.init_high, self.hinge_margin, self.box, seed=int(derive_rng(self.seed, key).integers(2**31)),
        )

    def manipulate_all(self, X, y_m, targets, keys=None):
        X = np.asarray(X, dtype=np.float64)
        keys = list(range(X.shape[0])) if keys is None else list(keys)

        def one(i):
            return manipulate(self.behavior, X[i], int(y_m[i]), int(targets[i]), self.config_for(keys[i]))

        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                return list(pool.map(one, range(X.shape[0])))
        return [one(i) for i in range(X.shape[0])]

    def transform(self, X, y_m, targets):
        return np.stack([r.explanation.attributions for r in self.manipulate_all(X, y_m, targets)])
