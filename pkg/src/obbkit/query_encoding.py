"""Sinusoidal positional encoding of box geometry.

The ``spatial_only`` variant encodes ``(cx, cy, w, h)`` and never looks at
the angle. The other variants inject the angle in different ways so their
behaviour at the 0/pi seam can be compared.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigError, DomainError
from .obb_core import Obb5, wrap_pi
from .validation import check_choice, check_obb_array, check_positive_int

VARIANTS = (
    "spatial_only",
    "raw_theta",
    "sincos_theta",
    "sincos_2theta",
    "center_only",
    "center_theta",
)

_SCALAR_COUNT = {
    "spatial_only": 4,
    "raw_theta": 5,
    "sincos_theta": 6,
    "sincos_2theta": 6,
    "center_only": 2,
    "center_theta": 3,
}


@dataclass(frozen=True)
class EncodingConfig:
    variant: str = "spatial_only"
    channels_per_dim: int = 32
    temperature: float = 10000.0

    def __post_init__(self):
        check_choice(self.variant, VARIANTS, "variant")
        check_positive_int(self.channels_per_dim, "channels_per_dim", minimum=2)
        if self.channels_per_dim % 2:
            raise ConfigError("channels_per_dim must be even")
        if not self.temperature > 1:
            raise ConfigError("temperature must be > 1")

    @property
    def n_scalars(self):
        return _SCALAR_COUNT[self.variant]

    @property
    def n_features(self):
        return self.channels_per_dim * self.n_scalars


def encoded_scalars(boxes, variant):
    """Scalars fed to the sinusoidal stage, shape ``(n, n_scalars)``.

    Spatial parts must already be normalised to [0, 1]; the angle enters
    as ``theta / pi`` for the raw variants.
    """
    X = check_obb_array(boxes, "boxes")
    spatial = X[:, :4]
    if np.any((spatial < 0) | (spatial > 1)):
        raise DomainError("box coordinates must be normalised into [0, 1]")
    theta = wrap_pi(X[:, 4])
    if variant == "spatial_only":
        return spatial.copy()
    if variant == "raw_theta":
        return np.column_stack([spatial, theta / np.pi])
    if variant == "sincos_theta":
        return np.column_stack([spatial, np.sin(theta), np.cos(theta)])
    if variant == "sincos_2theta":
        return np.column_stack([spatial, np.sin(2 * theta), np.cos(2 * theta)])
    if variant == "center_only":
        return spatial[:, :2].copy()
    if variant == "center_theta":
        return np.column_stack([spatial[:, :2], theta / np.pi])
    raise ConfigError(f"unknown variant {variant!r}")


def sine_embed(values, channels_per_dim=32, temperature=10000.0):
    """Interleaved ``(sin(v / T^(2j/d)), cos(v / T^(2j/d)))`` per scalar.

    ``values`` has shape ``(n, k)``; the result is ``(n, k * d)`` with the
    ``d`` channels of each scalar kept contiguous.
    """
    values = np.asarray(values, dtype=float)
    d = channels_per_dim
    j = np.arange(d // 2)
    freq = temperature ** (2.0 * j / d)
    arg = values[..., None] / freq
    out = np.empty(values.shape + (d,))
    out[..., 0::2] = np.sin(arg)
    out[..., 1::2] = np.cos(arg)
    return out.reshape(values.shape[:-1] + (values.shape[-1] * d,))


def encode_positional(b, cfg: EncodingConfig = EncodingConfig()):
    """Encode one ``Obb5`` (-> 1-D vector) or an ``(n, 5)`` batch (-> ``(n, features)``)."""
    single = isinstance(b, Obb5) or np.ndim(b) == 1
    X = b.as_array() if isinstance(b, Obb5) else b
    out = sine_embed(encoded_scalars(X, cfg.variant), cfg.channels_per_dim, cfg.temperature)
    return out[0] if single else out


def seam_gap(cfg: EncodingConfig, eps: float) -> float:
    """``||encode(theta=eps) - encode(theta=pi-eps)||`` with the other scalars at 0.5."""
    if not 0 < eps < np.pi / 4:
        raise DomainError("eps must lie in (0, pi/4)")
    a = encode_positional(np.array([0.5, 0.5, 0.5, 0.5, eps]), cfg)
    b = encode_positional(np.array([0.5, 0.5, 0.5, 0.5, np.pi - eps]), cfg)
    return float(np.linalg.norm(a - b))


class BoxPositionalEncoder(TransformerMixin, BaseEstimator):
    """Sinusoidal box encoder as a stateless transformer on ``(n, 5)`` arrays."""

    def __init__(self, variant="spatial_only", channels_per_dim=32, temperature=10000.0):
        self.variant = variant
        self.channels_per_dim = channels_per_dim
        self.temperature = temperature

    def fit(self, X, y=None):
        self.config_ = EncodingConfig(self.variant, self.channels_per_dim, self.temperature)
        check_obb_array(X)
        self.n_features_in_ = 5
        self.n_features_out_ = self.config_.n_features
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("BoxPositionalEncoder is not fitted yet")
        return encode_positional(check_obb_array(X), self.config_)
