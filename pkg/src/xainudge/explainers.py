"""Feature-attribution explainers: exact interventional Shapley, LIME-style
surrogates, and random mask/amplify augmentation."""

import logging
from functools import lru_cache
from math import factorial

import numpy as np

from .data import Dataset, Explanation
from .exceptions import ContractError, ExplainerError
from .validation import check_matrix, check_vector, derive_rng

logger = logging.getLogger(__name__)

MAX_BACKGROUND = 64


def _value_fn(model, output):
    if output == "proba":
        return lambda X: model.predict_proba(X)[:, 1]
    if output == "decision":
        return model.decision_function
    raise ContractError(f"output must be 'proba' or 'decision', got {output!r}")


def _background_matrix(background, cap=MAX_BACKGROUND, seed=0):
    B = background.X if isinstance(background, Dataset) else check_matrix(background, name="background")
    if B.shape[0] == 0:
        raise ContractError("background must be nonempty")
    if B.shape[0] > cap:
        B = B[np.sort(derive_rng(seed, "background").choice(B.shape[0], cap, replace=False))]
    return B


def coalition_values(model, x, background, output="proba", cap=MAX_BACKGROUND):
    """``v(S)`` for every coalition ``S`` of features, indexed by bitmask.

    Features in ``S`` take their value from ``x``; the rest come from each
    background row, and the model output is averaged over the rows.
    """
    B = _background_matrix(background, cap)
    n = x.shape[0]
    if output == "proba" and hasattr(model, "coalition_values"):
        return model.coalition_values(x, B)
    masks = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
    rows = np.where(masks[:, None, :], x[None, None, :], B[None, :, :])
    values = _value_fn(model, output)(rows.reshape(-1, n))
    return values.reshape(2**n, B.shape[0]).mean(axis=1)


def exact_shapley(model, x, background, max_n=15, output="proba", cap=MAX_BACKGROUND):
    """Shapley values by full enumeration of coalitions.

    ``output="decision"`` uses the model's pre-sigmoid score instead of
    ``P(+1)`` as the payoff. Refuses ``n > max_n``; use :func:`lime_explain`
    for wider inputs.
    """
    x = check_vector(x, name="x")
    n = x.shape[0]
    if n > max_n:
        raise ContractError(f"n={n} exceeds max_n={max_n}; use lime_explain for wide inputs")
    v = coalition_values(model, x, background, output, cap)
    return Explanation(_shapley_matrix(n) @ v, "shapley")


@lru_cache(maxsize=None)
def _shapley_matrix(n):
    # row i holds +w(|S|) at S u {i} and -w(|S|) at S, for every S without i
    masks = np.arange(2**n)
    sizes = np.array([bin(m).count("1") for m in masks])
    weights = np.array([factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)])
    M = np.zeros((n, 2**n))
    for i in range(n):
        without = masks[(masks >> i) & 1 == 0]
        M[i, without | (1 << i)] = weights[sizes[without]]
        M[i, without] = -weights[sizes[without]]
    M.setflags(write=False)
    return M


def lime_explain(
    model, x, background, num_samples=500, kernel_width=0.75, seed=0, ridge=1e-3, return_score=False
):
    """Weighted ridge surrogate on random feature masks.

    Each perturbation keeps a feature of ``x`` with probability 0.5 and
    otherwise replaces it with its background mean. The surrogate regresses
    ``P(+1)`` on the keep-indicators, weighting samples by
    ``exp(-d**2 / kernel_width**2)`` where ``d`` is the fraction of masked
    features. Attributions are the fitted coefficients; with
    ``return_score=True`` the surrogate's weighted R^2 is returned as well.
    """
    x = check_vector(x, name="x")
    n = x.shape[0]
    if num_samples < 10 * n:
        raise ContractError(f"num_samples must be >= 10*n = {10 * n}")
    means = _background_matrix(background, cap=np.inf).mean(axis=0)
    rng = derive_rng(seed, "lime")
    Z = rng.random((num_samples, n)) < 0.5
    Z[0] = True
    samples = np.where(Z, x, means)
    target = model.predict_proba(samples)[:, 1]
    d = 1.0 - Z.mean(axis=1)
    sw = np.exp(-(d**2) / kernel_width**2)

    Zf = Z.astype(np.float64)
    zbar = sw @ Zf / sw.sum()
    tbar = sw @ target / sw.sum()
    Zc = (Zf - zbar) * np.sqrt(sw)[:, None]
    tc = (target - tbar) * np.sqrt(sw)
    gram = Zc.T @ Zc
    for attempt in range(4):
        A = gram + ridge * np.eye(n)
        if np.linalg.cond(A) < 1e12:
            coef = np.linalg.solve(A, Zc.T @ tc)
            break
        if attempt == 3:
            raise ExplainerError("degenerate perturbation design even after raising ridge strength")
        ridge *= 10
    fitted = tbar + (Zf - zbar) @ coef
    ss_res = sw @ (target - fitted) ** 2
    ss_tot = sw @ (target - tbar) ** 2
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    logger.debug("lime surrogate weighted R^2 = %.4f", r2)
    exp = Explanation(coef, "lime")
    return (exp, float(r2)) if return_score else exp


def augment(e, mask_frac=0.3, amp_frac=0.2, amp_factor=2.0, seed=0):
    """Zero a random subset of attributions and scale a disjoint subset by ``amp_factor``."""
    if not (0 <= mask_frac <= 1 and 0 <= amp_frac <= 1):
        raise ContractError("mask_frac and amp_frac must lie in [0, 1]")
    if mask_frac + amp_frac > 1:
        raise ContractError("mask_frac + amp_frac must not exceed 1")
    attributions = e.attributions if isinstance(e, Explanation) else check_vector(e, name="e")
    n = attributions.shape[0]
    order = derive_rng(seed, "augment").permutation(n)
    n_mask = int(round(mask_frac * n))
    n_amp = min(int(round(amp_frac * n)), n - n_mask)
    out = attributions.copy()
    out[order[:n_mask]] = 0.0
    out[order[n_mask:n_mask + n_amp]] *= amp_factor
    return Explanation(out, "augmented")


def rescale_max_abs(attributions):
    """Scale to max-abs 1; an all-zero vector is returned unchanged."""
    a = np.asarray(attributions, dtype=np.float64)
    peak = np.max(np.abs(a)) if a.size else 0.0
    return a / peak if peak > 0 else a.copy()
