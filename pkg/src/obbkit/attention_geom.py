"""Sampling-point geometry for rotation-rectified deformable attention.

Each head rotates the (scaled) learned offsets by its own angle. With the
symmetric orthogonal split, half the heads follow the box heading and half
sample at a right angle to it. Only the geometry lives here; attention
weights and feature interpolation belong to the network.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DomainError
from .obb_core import rotation_matrices
from .validation import check_choice, check_finite, check_positive_int

KINDS = ("vanilla", "asymmetric", "symmetric_orthogonal", "multi_angle")


@dataclass(frozen=True)
class HeadSplitStrategy:
    """How ``num_heads`` heads are distributed over angle offsets.

    ``aligned_heads`` is the number of heads kept at ``theta`` for the
    asymmetric split (the 6:2 ablation setting by default).
    """

    kind: str = "symmetric_orthogonal"
    num_heads: int = 8
    aligned_heads: int = 6

    def __post_init__(self):
        check_choice(self.kind, KINDS, "kind")
        check_positive_int(self.num_heads, "num_heads")
        if self.num_heads % 2:
            raise ConfigError(f"num_heads must be even, got {self.num_heads}")
        if self.kind == "multi_angle" and self.num_heads % 4:
            raise ConfigError("multi_angle needs num_heads divisible by 4")
        if self.kind == "asymmetric" and not 0 <= self.aligned_heads <= self.num_heads:
            raise ConfigError("aligned_heads must lie in [0, num_heads]")

    def offsets(self):
        """Per-head angle offsets added to the box angle."""
        H = self.num_heads
        if self.kind == "vanilla":
            return np.zeros(H)
        if self.kind == "symmetric_orthogonal":
            return np.repeat([0.0, 0.5 * np.pi], H // 2)
        if self.kind == "asymmetric":
            k = self.aligned_heads
            return np.concatenate([np.zeros(k), np.full(H - k, 0.5 * np.pi)])
        return np.repeat(np.arange(4) * 0.25 * np.pi, H // 4)


@dataclass(frozen=True)
class SamplingSpec:
    """Query center, box extents used as offset scale, ``(K, 2)`` offsets, and angle."""

    center: np.ndarray
    scale: np.ndarray
    offsets: np.ndarray
    theta: float

    def __post_init__(self):
        center = check_finite(self.center, "center").reshape(2)
        scale = check_finite(self.scale, "scale").reshape(2)
        offsets = check_finite(self.offsets, "offsets").reshape(-1, 2)
        if np.any(scale <= 0):
            raise DomainError("scale components must be > 0")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "theta", float(check_finite(self.theta, "theta")))


def head_angles(theta, strat: HeadSplitStrategy):
    """Sampling angle of every head. Not wrapped: ``theta + pi/2`` may exceed pi."""
    return float(theta) + strat.offsets()


def rotation_matrix(theta):
    """``[[cos, -sin], [sin, cos]]``."""
    return rotation_matrices(float(theta))


def sampling_locations(spec: SamplingSpec, strat: HeadSplitStrategy):
    """``center + R(theta_h) (offset_k * scale)`` for every head and point -> ``(H, K, 2)``."""
    angles = head_angles(spec.theta, strat)
    scaled = spec.offsets * spec.scale
    rot = rotation_matrices(angles)
    return spec.center + np.einsum("hij,kj->hki", rot, scaled)


def sampling_locations_batch(centers, scales, offsets, thetas, strat: HeadSplitStrategy):
    """Batched form over ``Q`` queries -> ``(Q, H, K, 2)``.

    ``centers`` and ``scales`` are ``(Q, 2)``, ``offsets`` ``(Q, K, 2)``,
    ``thetas`` ``(Q,)``.
    """
    centers = check_finite(centers, "centers")
    scales = check_finite(scales, "scales")
    offsets = check_finite(offsets, "offsets")
    thetas = check_finite(thetas, "thetas")
    if np.any(scales <= 0):
        raise DomainError("scale components must be > 0")
    angles = thetas[:, None] + strat.offsets()[None, :]
    rot = rotation_matrices(angles)
    scaled = offsets * scales[:, None, :]
    return centers[:, None, None, :] + np.einsum("qhij,qkj->qhki", rot, scaled)
