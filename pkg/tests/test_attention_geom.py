import math

import numpy as np
import pytest

from obbkit.attention_geom import (
    HeadSplitStrategy,
    SamplingSpec,
    head_angles,
    rotation_matrix,
    sampling_locations,
    sampling_locations_batch,
)
from obbkit.exceptions import ConfigError, DomainError

PI = math.pi


def spec(theta, offsets=((1.0, 0.0),), center=(0.5, 0.5), scale=(0.2, 0.1)):
    return SamplingSpec(np.array(center), np.array(scale), np.array(offsets), theta)


class TestHeadAngles:
    def test_symmetric_orthogonal(self):
        np.testing.assert_allclose(head_angles(0.3, HeadSplitStrategy()), [0.3] * 4 + [0.3 + PI / 2] * 4)

    def test_vanilla(self):
        assert np.all(head_angles(1.7, HeadSplitStrategy("vanilla")) == 1.7)

    def test_multi_angle(self):
        off = head_angles(0.0, HeadSplitStrategy("multi_angle"))
        np.testing.assert_allclose(off, np.repeat([0, PI / 4, PI / 2, 3 * PI / 4], 2))

    def test_asymmetric(self):
        off = head_angles(0.0, HeadSplitStrategy("asymmetric", 8, 6))
        np.testing.assert_allclose(off, [0] * 6 + [PI / 2] * 2)

    def test_unwrapped(self):
        assert head_angles(3.0, HeadSplitStrategy())[-1] == pytest.approx(3.0 + PI / 2)

    @pytest.mark.parametrize("kind, H", [("symmetric_orthogonal", 7), ("multi_angle", 6), ("vanilla", 0)])
    def test_config_errors(self, kind, H):
        with pytest.raises(ConfigError):
            HeadSplitStrategy(kind, H)


class TestRotationMatrix:
    def test_identity_and_quarter(self):
        np.testing.assert_allclose(rotation_matrix(0.0), np.eye(2))
        np.testing.assert_allclose(rotation_matrix(PI / 2), [[0, -1], [1, 0]], atol=1e-16)

    def test_sixth(self):
        R = rotation_matrix(PI / 6)
        np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(R, [[math.sqrt(3) / 2, -0.5], [0.5, math.sqrt(3) / 2]], atol=1e-15)


class TestSamplingLocations:
    def test_vanilla_identity(self):
        pts = sampling_locations(spec(0.0), HeadSplitStrategy("vanilla"))
        assert pts.shape == (8, 1, 2)
        np.testing.assert_allclose(pts[0, 0], [0.7, 0.5], atol=1e-15)

    def test_orthogonal_head(self):
        pts = sampling_locations(spec(0.0), HeadSplitStrategy())
        np.testing.assert_allclose(pts[0, 0], [0.7, 0.5], atol=1e-15)
        np.testing.assert_allclose(pts[4, 0], [0.5, 0.7], atol=1e-15)

    def test_sixth_point(self):
        # explicit multiply: scaled offset (0.2, 0.1)
        c, s = math.cos(PI / 6), math.sin(PI / 6)
        expected = (0.5 + c * 0.2 - s * 0.1, 0.5 + s * 0.2 + c * 0.1)
        assert expected == pytest.approx((0.62321, 0.68660), abs=1e-5)
        pts = sampling_locations(spec(PI / 6, [(1.0, 1.0)]), HeadSplitStrategy("vanilla"))
        np.testing.assert_allclose(pts[0, 0], expected, atol=1e-15)

    def test_invalid_scale(self):
        with pytest.raises(DomainError):
            spec(0.0, scale=(0.0, 0.1))

    def test_properties_random(self):
        rng = np.random.default_rng(0)
        strat = HeadSplitStrategy()
        for _ in range(500):
            sp = SamplingSpec(rng.uniform(0, 1, 2), rng.uniform(0.01, 1, 2), rng.normal(size=(4, 2)), rng.uniform(0, PI))
            d = sampling_locations(sp, strat) - sp.center
            dots = np.sum(d[:4] * d[4:], axis=-1)
            norms = np.linalg.norm(d[:4], axis=-1) * np.linalg.norm(d[4:], axis=-1)
            assert np.all(np.abs(dots) <= 1e-12 * np.maximum(norms, 1e-300))
            ref = np.linalg.norm(sp.offsets * sp.scale, axis=-1)
            np.testing.assert_allclose(np.linalg.norm(d, axis=-1), np.broadcast_to(ref, (8, 4)), atol=1e-12)
            sp2 = SamplingSpec(sp.center, sp.scale, sp.offsets, sp.theta + PI)
            np.testing.assert_allclose(sampling_locations(sp2, strat) - sp.center, -d, atol=1e-12)

    def test_same_arity_for_every_strategy(self):
        sp = spec(0.4, np.zeros((3, 2)) + 0.5)
        shapes = {sampling_locations(sp, HeadSplitStrategy(k)).shape for k in ("vanilla", "asymmetric", "symmetric_orthogonal", "multi_angle")}
        assert shapes == {(8, 3, 2)}

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        Q, K = 5, 4
        centers, scales = rng.uniform(0, 1, (Q, 2)), rng.uniform(0.1, 1, (Q, 2))
        offsets, thetas = rng.normal(size=(Q, K, 2)), rng.uniform(0, PI, Q)
        strat = HeadSplitStrategy("multi_angle")
        batch = sampling_locations_batch(centers, scales, offsets, thetas, strat)
        assert batch.shape == (Q, 8, K, 2)
        for q in range(Q):
            single = sampling_locations(SamplingSpec(centers[q], scales[q], offsets[q], thetas[q]), strat)
            np.testing.assert_allclose(batch[q], single, atol=1e-15)
