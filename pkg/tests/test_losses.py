import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obbkit.exceptions import ConfigError, DomainError, NumericalError
from obbkit.losses import (
    LossWeights,
    focal_cost,
    kld_gauss,
    kld_loss,
    kld_loss_matrix,
    sp_l1,
    sp_l1_grad,
    total_box_loss,
)
from obbkit.obb_core import Gauss2, Obb5, obb_to_gauss

PI = math.pi


def monte_carlo_kld(p: Gauss2, t: Gauss2, n=1_000_000, seed=0):
    """E_p[ln p(x) - ln t(x)] from samples of p."""
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(p.mu, p.sigma, size=n)

    def logpdf(x, g):
        d = x - g.mu
        inv = np.linalg.inv(g.sigma)
        return -0.5 * np.einsum("ni,ij,nj->n", d, inv, d) - 0.5 * np.log(np.linalg.det(2 * PI * g.sigma))

    return float(np.mean(logpdf(x, p) - logpdf(x, t)))


def two_arc_min(a, b):
    d = abs(a - b) % PI
    return min(d, PI - d)


class TestSpL1:
    def test_examples(self):
        assert sp_l1(0.7, 0.7) == 0.0
        assert sp_l1(0.0, PI / 2) == pytest.approx(PI / 2, abs=1e-15)
        assert sp_l1(0.05, PI - 0.05) == pytest.approx(two_arc_min(0.05, PI - 0.05), abs=1e-12)
        assert sp_l1(0.05, PI - 0.05) == pytest.approx(0.1, abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            sp_l1(float("inf"), 0.0)

    @given(st.floats(0, PI, exclude_max=True), st.floats(0, PI, exclude_max=True), st.integers(-50, 50))
    def test_periodic_and_bounded(self, a, b, k):
        base = sp_l1(a, b)
        assert 0.0 <= base <= PI / 2
        assert sp_l1(a + k * PI, b) == pytest.approx(base, abs=1e-12)
        assert sp_l1(a, b + k * PI) == pytest.approx(base, abs=1e-12)
        assert base <= abs(a - b) + 1e-15


class TestSpL1Grad:
    def fd(self, p, t, h=1e-6):
        return (sp_l1(p + h, t) - sp_l1(p - h, t)) / (2 * h)

    def test_examples(self):
        assert sp_l1_grad(0.3, 0.1) == 1.0
        assert self.fd(0.3, 0.1) == pytest.approx(1.0, abs=1e-4)
        assert sp_l1_grad(0.4, 0.4) == 0.0
        assert sp_l1_grad(PI - 0.05, 0.05) == -1.0
        assert self.fd(PI - 0.05, 0.05) == pytest.approx(-1.0, abs=1e-4)

    def test_ridge_convention(self):
        assert sp_l1_grad(PI / 2, 0.0) == 1.0
        assert sp_l1_grad(0.0, PI / 2) == 1.0

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p, t = rng.uniform(0, PI, (2, 10_000))
        mag = sp_l1(p, t)
        ok = (mag > 1e-4) & (PI / 2 - mag > 1e-4)
        fd = (sp_l1(p + 1e-6, t) - sp_l1(p - 1e-6, t)) / 2e-6
        assert np.max(np.abs(sp_l1_grad(p, t) - fd)[ok]) <= 1e-4


class TestKldGauss:
    def test_identical(self):
        g = obb_to_gauss(Obb5(1, 2, 3, 1, 0.4))
        assert kld_gauss(g, g) == 0.0

    def test_unit_mean_shift(self):
        p = Gauss2(np.zeros(2), np.eye(2))
        t = Gauss2(np.array([1.0, 0.0]), np.eye(2))
        assert kld_gauss(p, t) == pytest.approx(0.5, abs=1e-15)

    def test_swapped_diagonals(self):
        p = Gauss2(np.zeros(2), np.diag([4.0, 1.0]))
        t = Gauss2(np.zeros(2), np.diag([1.0, 4.0]))
        # 0.5 * (4/1 + 1/4 - 2 + ln(4/4)) = 1.125
        assert kld_gauss(p, t) == pytest.approx(1.125, abs=1e-14)
        assert monte_carlo_kld(p, t) == pytest.approx(1.125, abs=1e-2)

    def test_random_pairs_against_monte_carlo(self):
        rng = np.random.default_rng(4)
        for seed in range(3):
            a = rng.normal(size=(2, 2))
            b = rng.normal(size=(2, 2))
            p = Gauss2(rng.normal(size=2), a @ a.T + 0.5 * np.eye(2))
            t = Gauss2(rng.normal(size=2), b @ b.T + 0.5 * np.eye(2))
            assert kld_gauss(p, t) == pytest.approx(monte_carlo_kld(p, t, 400_000, seed), abs=2e-2)

    def test_non_negative_on_random_pairs(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            a, b = rng.normal(size=(2, 2, 2))
            p = Gauss2(rng.normal(size=2), a @ a.T + 1e-3 * np.eye(2))
            t = Gauss2(rng.normal(size=2), b @ b.T + 1e-3 * np.eye(2))
            assert kld_gauss(p, t) > 0.0

    def test_singular_target(self):
        p = Gauss2(np.zeros(2), np.eye(2))
        t = Gauss2(np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(NumericalError) as exc:
            kld_gauss(p, t)
        assert exc.value.condition_number > 1e12
        assert "condition number" in str(exc.value)


class TestKldLoss:
    def test_identical(self):
        assert kld_loss(Obb5(0, 0, 4, 2, 1.0), Obb5(0, 0, 4, 2, 1.0)) == 0.0

    def test_unit_mean_shift(self):
        assert kld_loss(Obb5(0, 0, 2, 2, 0), Obb5(1, 0, 2, 2, 0)) == pytest.approx(
            1 - 1 / (1 + math.sqrt(0.5)), abs=1e-15
        )

    def test_quarter_pi_rotation(self):
        # sigma_t = [[2.5, 1.5], [1.5, 2.5]], det 4: D = 0.5 * (12.5/4 - 2) = 0.5625, loss = 3/7
        p, t = Obb5(0, 0, 4, 2, 0), Obb5(0, 0, 4, 2, PI / 4)
        assert kld_loss(p, t) == pytest.approx(3 / 7, abs=1e-14)
        d_mc = monte_carlo_kld(obb_to_gauss(p), obb_to_gauss(t))
        assert d_mc == pytest.approx(0.5625, abs=1e-2)

    def test_bounded(self):
        assert 0.0 <= kld_loss(Obb5(0, 0, 1, 1, 0), Obb5(1e4, 0, 1, 1, 0)) < 1.0

    def test_reparameterisation_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            a = Obb5(*rng.uniform(-3, 3, 2), *rng.uniform(0.2, 4, 2), rng.uniform(0, PI))
            b = Obb5(*rng.uniform(-3, 3, 2), *rng.uniform(0.2, 4, 2), rng.uniform(0, PI))
            base = kld_loss(a, b)
            assert kld_loss(a.swapped(), b) == pytest.approx(base, abs=1e-10)
            assert kld_loss(a, b.swapped()) == pytest.approx(base, abs=1e-10)

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(8)
        P = np.column_stack([rng.uniform(0, 5, (3, 2)), rng.uniform(0.5, 3, (3, 2)), rng.uniform(0, PI, 3)])
        T = np.column_stack([rng.uniform(0, 5, (4, 2)), rng.uniform(0.5, 3, (4, 2)), rng.uniform(0, PI, 4)])
        M = kld_loss_matrix(P, T)
        for i in range(3):
            for j in range(4):
                assert M[i, j] == pytest.approx(kld_loss(P[i], T[j]), abs=1e-14)


class TestFocalCost:
    def test_half_probability(self):
        pos = 0.25 * 0.5**2 * -math.log(0.5)
        neg = 0.75 * 0.5**2 * -math.log(0.5)
        assert pos - neg == pytest.approx(-0.125 * math.log(2), abs=1e-15)
        assert focal_cost(0.5, True, 0.25, 2.0) == pytest.approx(pos - neg, abs=1e-15)

    def test_monotone_decreasing(self):
        p = np.linspace(1e-6, 1 - 1e-6, 5001)
        assert np.all(np.diff(focal_cost(p)) < 0)

    def test_towards_one_goes_negative(self):
        assert focal_cost(0.999) < focal_cost(0.99) < 0

    def test_degenerate_parameters_antisymmetric(self):
        p = np.linspace(0.01, 0.99, 99)
        c = focal_cost(p, True, 0.5, 0.0)
        np.testing.assert_allclose(c, 0.5 * (np.log(1 - p) - np.log(p)), atol=1e-14)
        np.testing.assert_allclose(c, -focal_cost(1 - p, True, 0.5, 0.0), atol=1e-14)

    def test_clamping(self):
        assert np.isfinite(focal_cost(0.0))
        assert np.isfinite(focal_cost(1.0))
        assert focal_cost(0.0) == focal_cost(1e-8)

    def test_negative_term(self):
        assert focal_cost(0.3, False) == pytest.approx(0.75 * 0.09 * -math.log(0.7))


class TestTotalBoxLoss:
    def test_identical(self):
        b = Obb5(0.3, 0.4, 0.2, 0.1, 1.0)
        assert total_box_loss(b, b) == 0.0

    def test_zero_weights(self):
        w = LossWeights(0, 0, 0, 0, 0)
        assert total_box_loss(Obb5(0, 0, 1, 2, 0), Obb5(5, 5, 3, 1, 2), w) == 0.0

    def test_unit_center_offset(self):
        p, t = Obb5(0, 0, 2, 2, 0), Obb5(1, 0, 2, 2, 0)
        expected = 5 * 1.0 + 5 * (1 - 1 / (1 + math.sqrt(0.5))) + 5 * 0.0
        assert total_box_loss(p, t) == pytest.approx(expected, abs=1e-14)

    def test_angle_term_uses_shortest_arc(self):
        w = LossWeights(0, 0, 0, 1, 0)
        assert total_box_loss(Obb5(0, 0, 4, 2, 0.05), Obb5(0, 0, 4, 2, PI - 0.05), w) == pytest.approx(0.1)

    def test_weights_validated(self):
        with pytest.raises(ConfigError):
            LossWeights(w_l1=-1)
        assert LossWeights().as_dict() == {
            "w_focal": 1.0,
            "w_l1": 5.0,
            "w_kld": 5.0,
            "w_angle": 5.0,
            "w_hausdorff": 5.0,
        }
