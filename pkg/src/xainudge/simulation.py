"""Simulated decision makers used to generate behavior logs and to evaluate
manipulated explanations in closed loop.

A decision maker holds a private linear rule ``u``. Working alone it answers
``sign(u . x + offset + noise)``. With AI assistance it adopts the AI label
with a probability that rises with how plausible the explanation looks: the
cosine between the explanation and ``u`` over the ``attention_k`` most
salient features.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import BehaviorRecord, Explanation
from .exceptions import ContractError
from .explainers import augment, rescale_max_abs
from .validation import check_label, check_vector, derive_normal, derive_rng, derive_uniform

DM_FORMAT = "xainudge.population/1"


@dataclass(frozen=True)
class SimDM:
    name: str
    weights: np.ndarray
    offset: float
    noise_sd: float
    anchor: float
    sensitivity: float
    attention_k: int
    seed: int

    def __post_init__(self):
        w = check_vector(self.weights, name="weights")
        object.__setattr__(self, "weights", w)
        if not 0.0 <= self.anchor <= 1.0:
            raise ContractError("anchor must lie in [0, 1]")
        if self.sensitivity < 0 or self.noise_sd < 0:
            raise ContractError("sensitivity and noise_sd must be non-negative")
        if not 1 <= self.attention_k <= w.shape[0]:
            raise ContractError(f"attention_k must lie in [1, {w.shape[0]}]")
        if not all(math.isfinite(v) for v in (self.offset, self.noise_sd, self.anchor, self.sensitivity)):
            raise ContractError("decision-maker parameters must be finite")

    @property
    def n(self):
        return self.weights.shape[0]

    def to_dict(self):
        return {
            "name": self.name,
            "weights": self.weights.tolist(),
            "offset": self.offset,
            "noise_sd": self.noise_sd,
            "anchor": self.anchor,
            "sensitivity": self.sensitivity,
            "attention_k": self.attention_k,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def sample_population(
    num,
    true_weights,
    seed=0,
    distortion_sd=0.5,
    noise_sd=0.3,
    anchor_range=(0.2, 0.6),
    sensitivity_range=(0.5, 1.5),
    attention_k=None,
    center=0.5,
    prefix="dm",
):
    """Draw ``num`` decision makers around the task's true labelling rule.

    ``center`` is the point where a decision maker's score is zero before
    noise: a scalar for features on the unit cube, or a per-feature vector.
    """
    w = check_vector(true_weights, name="true_weights")
    c = np.broadcast_to(np.asarray(center, dtype=np.float64), w.shape)
    k = math.ceil(w.shape[0] / 2) if attention_k is None else attention_k
    population = []
    for i in range(num):
        name = f"{prefix}-{i:04d}"
        rng = derive_rng(seed, "population", name)
        u = w + rng.normal(0.0, distortion_sd, w.shape[0])
        population.append(
            SimDM(
                name=name,
                weights=u,
                offset=float(-(c @ u)),
                noise_sd=noise_sd,
                anchor=float(rng.uniform(*anchor_range)),
                sensitivity=float(rng.uniform(*sensitivity_range)),
                attention_k=k,
                seed=int(derive_rng(seed, "dm-seed", name).integers(2**31)),
            )
        )
    return population


def independent_decision(dm, x, instance_id):
    x = check_vector(x, dm.n, name="x")
    noise = derive_normal(dm.seed, instance_id, "independent")
    score = float(dm.weights @ x + dm.offset + dm.noise_sd * noise)
    return 1 if score >= 0 else -1


def plausibility(dm, e):
    """Agreement of ``e`` with the decision maker's rule on its attended features, in [0, 1]."""
    attributions = e.attributions if isinstance(e, Explanation) else check_vector(e, dm.n, name="e")
    if attributions.shape[0] != dm.n:
        raise ContractError("explanation length does not match the decision maker")
    top = np.argsort(-np.abs(attributions), kind="stable")[: dm.attention_k]
    a, u = attributions[top], dm.weights[top]
    norm = math.sqrt(float(a @ a) * float(u @ u))
    if norm == 0:
        return 0.5
    return float((a @ u / norm + 1.0) / 2.0)


def adoption_probability(dm, e=None, rho=None):
    if rho is None:
        rho = plausibility(dm, e)
    return min(1.0, max(0.0, dm.anchor + dm.sensitivity * (rho - 0.5)))


def assisted_decision(dm, x, y_m, e, instance_id):
    y_m = check_label(y_m, "y_m")
    draw = derive_uniform(dm.seed, instance_id, "adopt")
    if draw < adoption_probability(dm, e):
        return y_m
    return independent_decision(dm, x, instance_id)


def assign_tasks(dm, dataset, tasks_per_dm, seed):
    """Row indices of the instances a decision maker works through, balanced across groups."""
    rng = derive_rng(seed, "tasks", dm.name)
    groups = dataset.group_array()
    buckets = [rng.permutation(np.flatnonzero(groups == g)) for g in dataset.group_vocab]
    buckets = [b for b in buckets if b.size]
    shift = int(rng.integers(len(buckets)))
    buckets = buckets[shift:] + buckets[:shift]
    order = [int(b[j]) for j in range(max(b.size for b in buckets)) for b in buckets if j < b.size]
    if len(order) < tasks_per_dm:
        raise ContractError(f"dataset has fewer than {tasks_per_dm} instances")
    return order[:tasks_per_dm]


def _choose_kind(mix, seed, name):
    kinds = sorted(k for k, p in mix.items() if p > 0)
    probs = np.array([mix[k] for k in kinds], dtype=np.float64)
    return kinds[int(derive_rng(seed, "kind", name).choice(len(kinds), p=probs / probs.sum()))]


def shown_explanation(bank, instance_id, kind, seed, participant, augment_params=None):
    """The max-abs-normalized explanation a participant sees for one instance.

    ``bank`` maps instance id to ``{"shapley": ..., "lime": ...}`` raw
    attributions. Augmented explanations perturb one of the two, picked at
    random per (participant, instance).
    """
    entry = bank[instance_id]
    if kind == "augmented":
        base = "shapley" if derive_uniform(seed, "augment-base", participant, instance_id) < 0.5 else "lime"
        e = augment(
            entry[base],
            seed=int(derive_uniform(seed, "augment", participant, instance_id) * 2**31),
            **(augment_params or {}),
        )
        return Explanation(rescale_max_abs(e.attributions), "augmented")
    return Explanation(rescale_max_abs(entry[kind]), kind)


def generate_logs(
    population,
    dataset,
    ai_labels,
    bank,
    mix,
    seed=0,
    tasks_per_dm=15,
    augment_params=None,
    threads=1,
):
    """One behavior record per (decision maker, assigned instance).

    ``ai_labels`` maps instance id to the AI recommendation; each decision
    maker receives a single explanation kind drawn from ``mix``.
    """
    if not population:
        raise ContractError("population must be nonempty")
    instances = dataset.instances

    def run(dm):
        kind = _choose_kind(mix, seed, dm.name)
        out = []
        for row in assign_tasks(dm, dataset, tasks_per_dm, seed):
            inst = instances[row]
            e = shown_explanation(bank, inst.id, kind, seed, dm.name, augment_params)
            y_m = ai_labels[inst.id]
            y_h = assisted_decision(dm, inst.features, y_m, e, inst.id)
            out.append(BehaviorRecord(inst, y_m, e, y_h, dm.name))
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(run, population))
    else:
        chunks = [run(dm) for dm in population]
    return [r for chunk in chunks for r in chunk]
