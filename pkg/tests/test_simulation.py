import numpy as np
import pytest

from xainudge import (
    ContractError,
    SimDM,
    adoption_probability,
    assisted_decision,
    generate_logs,
    independent_decision,
    make_task,
    sample_population,
)
from xainudge.simulation import plausibility


def dm(weights, noise_sd=0.0, anchor=0.4, sensitivity=1.0, k=None, offset=None, seed=0):
    w = np.asarray(weights, dtype=float)
    return SimDM("dm", w, -0.5 * w.sum() if offset is None else offset, noise_sd, anchor, sensitivity,
                 k or w.size, seed)


def test_noiseless_sign_of_score():
    d = dm([1.0, -2.0, 0.5])
    rng = np.random.default_rng(0)
    for i in range(200):
        x = rng.random(3)
        score = d.weights @ x + d.offset
        assert independent_decision(d, x, f"i{i}") == (1 if score >= 0 else -1)


def test_aligned_rule_is_perfect_on_clean_labels():
    ds = make_task("census", 500, seed=3)
    w = np.asarray(ds.meta["true_weights"])
    d = dm(w)
    clean = np.where((ds.X - 0.5) @ w >= 0, 1, -1)
    assert all(independent_decision(d, ds.X[i], ds.ids[i]) == clean[i] for i in range(len(ds)))


def test_heavy_noise_is_chance():
    ds = make_task("census", 10_000, seed=4)
    d = dm(ds.meta["true_weights"], noise_sd=1e4)
    acc = np.mean([independent_decision(d, ds.X[i], ds.ids[i]) == ds.y[i] for i in range(len(ds))])
    assert abs(acc - 0.5) <= 0.02


def test_full_anchor_always_adopts():
    d = dm([1.0, 1.0], anchor=1.0, sensitivity=0.0, noise_sd=0.3)
    rng = np.random.default_rng(1)
    for i in range(100):
        e = rng.uniform(-1, 1, 2)
        assert assisted_decision(d, rng.random(2), -1, e, f"i{i}") == -1


def test_zero_anchor_is_independent():
    d = dm([1.0, -1.0], anchor=0.0, sensitivity=0.0, noise_sd=0.3)
    rng = np.random.default_rng(2)
    for i in range(100):
        x = rng.random(2)
        assert assisted_decision(d, x, 1, rng.uniform(-1, 1, 2), f"i{i}") == independent_decision(d, x, f"i{i}")


def test_proportional_explanation_clamps_to_one():
    d = dm([0.3, -1.2, 0.8], anchor=0.5, sensitivity=1.0)
    assert plausibility(d, 2.0 * d.weights) == pytest.approx(1.0)
    assert adoption_probability(d, 2.0 * d.weights) == 1.0


def test_zero_explanation_neutral():
    assert plausibility(dm([1.0, 2.0]), np.zeros(2)) == 0.5


def test_adoption_monotone_in_plausibility():
    d = dm([1.0, 2.0], anchor=0.3, sensitivity=1.4)
    grid = [adoption_probability(d, rho=r) for r in np.linspace(0, 1, 101)]
    assert all(b >= a for a, b in zip(grid, grid[1:]))


def test_attention_restricts_cosine():
    # only the top-1 attribution is attended; it agrees in sign with u there
    d = dm([1.0, -5.0], k=1)
    assert plausibility(d, np.array([0.9, 0.1])) == pytest.approx(1.0)


def test_population_heterogeneous_and_seeded():
    w = np.ones(4)
    a = sample_population(5, w, seed=1)
    b = sample_population(5, w, seed=1)
    assert [x.to_dict() for x in a] == [x.to_dict() for x in b]
    assert len({tuple(x.weights) for x in a}) == 5
    assert len({x.anchor for x in a}) == 5


def test_population_vector_center():
    w = np.array([1.0, 2.0])
    d = sample_population(1, w, center=np.array([0.2, 0.7]), distortion_sd=0.0)[0]
    assert d.offset == pytest.approx(-(0.2 + 1.4))


def test_invalid_dm():
    with pytest.raises(ContractError):
        dm([1.0], anchor=1.5)
    with pytest.raises(ContractError):
        dm([1.0, 1.0], k=3)


def bank_for(ds):
    rng = np.random.default_rng(0)
    return {i: {"shapley": rng.normal(size=ds.n), "lime": rng.normal(size=ds.n)} for i in ds.ids}


def test_log_scale_and_mix():
    ds = make_task("census", 200, seed=5)
    w = ds.meta["true_weights"]
    pop = sample_population(80, w, seed=2)
    labels = {i: 1 for i in ds.ids}
    logs = generate_logs(pop, ds, labels, bank_for(ds), {"augmented": 1.0}, seed=3)
    assert len(logs) == 1200
    assert {r.explanation.kind for r in logs} == {"augmented"}


def test_logs_deterministic_and_thread_independent():
    ds = make_task("census", 100, seed=6)
    pop = sample_population(10, ds.meta["true_weights"], seed=2)
    labels = {i: -1 for i in ds.ids}
    mix = {"shapley": 1, "lime": 1, "augmented": 1}
    a = generate_logs(pop, ds, labels, bank_for(ds), mix, seed=9)
    b = generate_logs(pop, ds, labels, bank_for(ds), mix, seed=9, threads=4)
    key = lambda rs: [(r.participant, r.instance.id, r.explanation.attributions.tobytes(), r.human_label) for r in rs]  # noqa: E731
    assert key(a) == key(b)


def test_empty_population():
    ds = make_task("census", 20, seed=0)
    with pytest.raises(ContractError):
        generate_logs([], ds, {}, {}, {"shapley": 1})
