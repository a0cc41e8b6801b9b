"""Input validation helpers shared by the estimators and pipeline stages."""

import hashlib
import zlib
from statistics import NormalDist

import numpy as np

from .exceptions import ContractError

LABELS = (-1, 1)
_STD_NORMAL = NormalDist()


def check_label(value, name="label"):
    """Return ``value`` as a python int, accepting only -1 and +1."""
    if isinstance(value, (bool, np.bool_)):
        raise ContractError(f"{name} must be -1 or +1, got {value!r}")
    try:
        as_int = int(value)
    except (TypeError, ValueError):
        raise ContractError(f"{name} must be -1 or +1, got {value!r}") from None
    if as_int != value or as_int not in LABELS:
        raise ContractError(f"{name} must be -1 or +1, got {value!r}")
    return as_int


def check_labels(values, name="labels"):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, LABELS).all():
        bad = arr[~np.isin(arr, LABELS)][0]
        raise ContractError(f"{name} must contain only -1/+1, found {bad!r}")
    return arr.astype(np.int64)


def check_vector(x, n=None, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ContractError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def check_matrix(X, n=None, name="X"):
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-d, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise ContractError(f"{name} has {arr.shape[1]} columns, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def label_from_prob(prob):
    """Map P(+1) to a label; exactly 0.5 maps to +1."""
    return np.where(np.asarray(prob) >= 0.5, 1, -1)


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ContractError("seed keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(seed, *keys):
    """Derive an independent 32-bit seed from a base seed and a path of keys.

    Keys may be ints or strings; the result does not depend on call order,
    worker count or process, only on the arguments.
    """
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def derive_rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))


def _plain(key):
    return int(key) if isinstance(key, (int, np.integer)) else str(key)


def derive_uniform(seed, *keys):
    """One U(0, 1) draw keyed like :func:`derive_seed`, without building a generator.

    Used for the millions of single draws in simulation, where constructing
    a generator per draw dominates the cost.
    """
    path = repr(tuple(_plain(k) for k in (seed, *keys))).encode("utf-8")
    bits = int.from_bytes(hashlib.blake2b(path, digest_size=8).digest(), "little") >> 11
    return (bits + 0.5) * 2.0**-53


def derive_normal(seed, *keys):
    return _STD_NORMAL.inv_cdf(derive_uniform(seed, *keys))
