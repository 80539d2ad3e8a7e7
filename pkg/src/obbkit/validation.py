"""Input validation helpers shared by the estimators and functions."""

import numbers

import numpy as np

from .exceptions import ConfigError, DomainError, ShapeError


def check_finite(x, name="input"):
    """Return ``x`` as a float array, raising DomainError on NaN/inf."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def check_obb_array(X, name="X"):
    """Validate an ``(n, 5)`` array of boxes ``(cx, cy, w, h, theta)``.

    A single box of shape ``(5,)`` is promoted to ``(1, 5)``.
    """
    X = check_finite(X, name)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 5:
        raise ShapeError(f"{name} must have shape (n, 5), got {X.shape}")
    if np.any(X[:, 2] <= 0) or np.any(X[:, 3] <= 0):
        raise DomainError(f"{name}: box width and height must be > 0")
    return X


def check_quad_array(q, name="quad"):
    """Validate a ``(4, 2)`` corner array (or a batch ``(n, 4, 2)``)."""
    q = check_finite(q, name)
    if q.shape[-2:] != (4, 2):
        raise ShapeError(f"{name} must have trailing shape (4, 2), got {q.shape}")
    return q


def check_unit_interval(x, name="input", open_=False):
    """Check that every value lies in [0, 1] (or (0, 1) when ``open_``)."""
    x = check_finite(x, name)
    bad = (x <= 0) | (x >= 1) if open_ else (x < 0) | (x > 1)
    if np.any(bad):
        interval = "(0, 1)" if open_ else "[0, 1]"
        raise DomainError(f"{name} must lie in {interval}")
    return x


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_choice(value, choices, name):
    if value not in choices:
        raise ConfigError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an int, or an existing Generator (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    raise ConfigError(f"cannot seed a Generator from {seed!r}")
