import numpy as np
import pytest

from xainudge import BehaviorModel, Dataset, make_task, split, train_forest


@pytest.fixture(scope="session")
def census():
    ds = make_task("census", 600, seed=1)
    return ds, split(ds, (0.5, 0.2, 0.3), seed=0)


@pytest.fixture(scope="session")
def small_forest(census):
    ds, (train, _, _) = census
    return train_forest(train, num_trees=10, max_depth=5, seed=2)


def tiny_dataset(n_rows=100, n=2, seed=0, groups=("a", "b")):
    rng = np.random.default_rng(seed)
    X = rng.random((n_rows, n))
    y = np.where(X @ np.arange(1, n + 1) > (n * (n + 1)) / 4, 1, -1)
    return Dataset(
        ids=[f"r{i}" for i in range(n_rows)],
        X=X,
        y=y,
        groups=[groups[i % len(groups)] for i in range(n_rows)],
        group_vocab=groups,
    )


def random_behavior_model(n, hidden=8, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    d = 3 * n + 1
    return BehaviorModel(hidden_dim=hidden).set_weights(
        scale * rng.normal(size=(hidden, d)), scale * rng.normal(size=hidden),
        scale * rng.normal(size=hidden), scale * rng.normal(),
    )


def planted_monotone_model(n, gain=5.0):
    """Behavior model whose logit is exactly ``gain * sum(x * e)``.

    Two ReLU units carry the positive and negative parts of the interaction
    sum, so ``P(+1)`` rises monotonically with it.
    """
    W1 = np.zeros((2, 3 * n + 1))
    W1[0, 2 * n + 1:] = 1.0
    W1[1, 2 * n + 1:] = -1.0
    return BehaviorModel(hidden_dim=2).set_weights(W1, np.zeros(2), np.array([gain, -gain]), 0.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
