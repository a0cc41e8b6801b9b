"""Synthetic stand-ins for the four decision tasks.

Each suite draws features uniformly on the unit cube and labels them with a
fixed hidden linear rule ``sign(w . (x - 0.5))`` whose output is flipped with
a suite-specific probability. The flip rate caps the attainable accuracy, so
it is set near each task's reported AI accuracy. Group tags are metadata
only and are drawn independently of features and labels, which keeps the
ground truth group-fair.
"""

from dataclasses import dataclass

import numpy as np

from .data import GROUP_VOCAB, Dataset
from .validation import derive_rng


@dataclass(frozen=True)
class Suite:
    kind: str
    n: int
    flip_rate: float
    groups: tuple
    # population overrides for the simulated decision makers
    distortion_sd: float = 0.5
    noise_sd: float = 0.3


SUITES = {
    "census": Suite("census", 7, 0.20, GROUP_VOCAB["census"]),
    "recidivism": Suite("recidivism", 8, 0.34, GROUP_VOCAB["recidivism"]),
    "bias": Suite("bias", 10, 0.18, GROUP_VOCAB["bias"]),
    "toxicity": Suite("toxicity", 10, 0.11, GROUP_VOCAB["toxicity"], distortion_sd=0.25, noise_sd=0.15),
}


def suite_weights(kind, n=None):
    """The hidden labelling rule of a suite; fixed per suite, independent of run seeds."""
    n = SUITES[kind].n if n is None else n
    w = derive_rng(0, "suite-weights", kind, n).normal(size=n)
    return w * np.sqrt(n) / np.linalg.norm(w)


def make_task(kind, n_instances, seed=0, n=None, groups=None):
    """Sample a synthetic dataset for ``kind``.

    ``kind`` is one of the four suite names, or ``"synthetic"`` together with
    explicit ``n`` and ``groups``.
    """
    if kind in SUITES:
        suite = SUITES[kind]
        n = suite.n if n is None else n
        groups = suite.groups if groups is None else tuple(groups)
        flip = suite.flip_rate
    else:
        if n is None or groups is None:
            raise ValueError("synthetic tasks need explicit n and groups")
        groups = tuple(groups)
        flip = 0.2
    rng = derive_rng(seed, "make-task", kind)
    w = suite_weights(kind, n)
    X = rng.uniform(0.0, 1.0, size=(n_instances, n))
    clean = np.where((X - 0.5) @ w >= 0, 1, -1)
    flips = rng.random(n_instances) < flip
    y = np.where(flips, -clean, clean)
    g = rng.integers(0, len(groups), size=n_instances)
    return Dataset(
        ids=tuple(f"{kind}-{i:05d}" for i in range(n_instances)),
        X=X,
        y=y,
        groups=tuple(groups[k] for k in g),
        group_vocab=groups,
        task_kind=kind if kind in SUITES else "synthetic",
        feature_names=tuple(f"f{i}" for i in range(n)),
        # features are drawn on [0, 1] already, so the stored scaling is the identity
        normalizer={"min": [0.0] * n, "range": [1.0] * n},
        meta={"true_weights": w.tolist(), "flip_rate": flip, "center": 0.5, "generator_seed": seed},
    )
