import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gooddeal import (
    EllipsoidConstraint,
    MarketModel,
    SingularVolatility,
    UncertaintyEllipsoid,
    alpha_prime,
    check_growth_condition,
    check_separability,
    make_projections,
)
from gooddeal.validation import random_spd


def proj_of(sigma):
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    return make_projections(MarketModel(sigma, np.zeros(sigma.shape[1])))


class TestProjections:
    def test_axis_aligned(self):
        p = proj_of([[1.0, 0.0]])
        np.testing.assert_allclose(p.pi, [[1, 0], [0, 0]], atol=1e-15)
        np.testing.assert_allclose(p.pi_perp, [[0, 0], [0, 1]], atol=1e-15)

    def test_block_market_zeros_nontraded(self):
        sigma = np.hstack([[[0.5, 0.2], [0.0, 0.4]], np.zeros((2, 2))])
        p = proj_of(sigma)
        np.testing.assert_allclose(p.pi, np.diag([1, 1, 0, 0]), atol=1e-14)

    def test_against_pseudo_inverse_formula(self, rng):
        sigma = rng.normal(size=(2, 3))
        p = proj_of(sigma)
        ref = sigma.T @ np.linalg.solve(sigma @ sigma.T, sigma)
        np.testing.assert_allclose(p.pi, ref, atol=1e-12)
        np.testing.assert_allclose(p.pi @ p.pi, p.pi, atol=1e-12)
        np.testing.assert_allclose(sigma @ p.pi_perp, 0, atol=1e-12)

    @given(st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))), st.integers(0, 2**31))
    def test_identities(self, nd, seed):
        n, d = nd
        sigma = np.random.default_rng(seed).normal(size=(d, n))
        p = proj_of(sigma)
        for lhs, rhs in (
            (p.pi @ p.pi, p.pi),
            (p.pi_perp @ p.pi_perp, p.pi_perp),
            (p.pi + p.pi_perp, np.eye(n)),
            (p.pi, p.pi.T),
            (p.pi @ p.pi_perp, np.zeros((n, n))),
        ):
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)
        assert np.abs(sigma @ p.pi_perp).max() < 1e-10
        assert p.im_basis.shape == (n, d) and p.ker_basis.shape == (n, n - d)

    def test_rank_deficient_raises(self):
        with pytest.raises(SingularVolatility):
            MarketModel([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]], np.zeros(3))

    def test_xi0_must_be_hedgeable(self):
        with pytest.raises(ValueError, match="Im sigma"):
            MarketModel([[1.0, 0.0]], [0.0, 0.1])

    def test_frozen_arrays(self):
        m = MarketModel([[1.0, 0.0]], [0.1, 0.0])
        with pytest.raises(ValueError):
            m.sigma[0, 0] = 2.0
        p = make_projections(m)
        with pytest.raises(ValueError):
            p.pi[0, 0] = 0.0


class TestConstraints:
    def test_rejects_non_spd(self):
        with pytest.raises(ValueError, match="positive definite"):
            EllipsoidConstraint(np.diag([1.0, -1.0]), 1.0)
        with pytest.raises(ValueError, match="symmetric"):
            EllipsoidConstraint([[1.0, 0.5], [0.0, 1.0]], 1.0)
        with pytest.raises(ValueError):
            UncertaintyEllipsoid(np.eye(2), -0.1)

    def test_cached_inverse(self, rng):
        A = random_spd(rng, 3)
        c = EllipsoidConstraint(A, 0.5)
        np.testing.assert_allclose(c.A_inv @ A, np.eye(3), atol=1e-12)
        assert c.c == pytest.approx(np.linalg.eigvalsh(A)[0])


class TestSeparability:
    sigma = np.array([[0.5, 0.2, 0.0, 0.0], [0.0, 0.4, 0.0, 0.0]])

    def test_diagonal_block_market(self):
        assert check_separability(np.diag([0.5, 0.65, 0.8, 0.95]), proj_of(self.sigma))

    def test_identity_any_sigma(self, rng):
        assert check_separability(np.eye(3), proj_of(rng.normal(size=(2, 3))))

    def test_coupling_detected(self):
        # rotate the (1, 3) plane: mixes Im sigma' and Ker sigma
        c, s = np.cos(0.3), np.sin(0.3)
        R = np.eye(4)
        R[[0, 0, 2, 2], [0, 2, 0, 2]] = [c, -s, s, c]
        A = R @ np.diag([1.0, 2.0, 3.0, 4.0]) @ R.T
        assert not check_separability(A, proj_of(self.sigma))

    def test_accepts_constraint_objects(self):
        p = proj_of(self.sigma)
        assert check_separability(EllipsoidConstraint(np.eye(4), 1.0), p)
        assert check_separability(UncertaintyEllipsoid(np.diag([1, 2, 3, 4.0]), 0.1), p)

    @given(st.integers(0, 2**31), st.booleans())
    def test_inverse_invariance(self, seed, block):
        rng = np.random.default_rng(seed)
        sigma = rng.normal(size=(1, 3))
        p = proj_of(sigma)
        if block:
            Q = np.hstack([p.im_basis, p.ker_basis])
            M = np.zeros((3, 3))
            M[:1, :1] = random_spd(rng, 1)
            M[1:, 1:] = random_spd(rng, 2)
            A = Q @ M @ Q.T
        else:
            A = random_spd(rng, 3)
        assert check_separability(A, p) == check_separability(np.linalg.inv(A), p)


class TestAlphaPrime:
    def test_identity(self):
        assert alpha_prime(EllipsoidConstraint(np.eye(3), 1.0)) == (1.0, 1.0)

    def test_diag41(self):
        lemma, exact = alpha_prime(EllipsoidConstraint(np.diag([4.0, 1.0]), 1.0))
        assert lemma == pytest.approx(1 / 16, abs=1e-15)
        assert exact == pytest.approx(1 / 4, abs=1e-15)

    def test_table1_matrix(self):
        lemma, exact = alpha_prime(EllipsoidConstraint(np.diag([0.5, 0.65, 0.8, 0.95]), 0.3))
        assert lemma == pytest.approx(0.5 / 0.95**2, rel=1e-14)
        assert exact == pytest.approx(1 / 0.95, rel=1e-14)

    def test_ordering_many(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            lemma, exact = alpha_prime(EllipsoidConstraint(random_spd(rng, int(rng.integers(1, 6))), 1.0))
            assert lemma <= exact * (1 + 1e-14)


class TestGrowth:
    def test_zero_xi(self):
        assert check_growth_condition(MarketModel([[1.0, 0.0]], [0.0, 0.0]), EllipsoidConstraint(np.eye(2), 0.1))

    def test_table1(self):
        sigma = np.hstack([[[0.5, 0.2], [0.0, 0.4]], np.zeros((2, 2))])
        m = MarketModel(sigma, np.zeros(4))
        assert check_growth_condition(m, EllipsoidConstraint(np.diag([0.5, 0.65, 0.8, 0.95]), 0.3))

    def test_boundary_is_strict(self):
        m = MarketModel([[1.0, 0.0]], [0.2, 0.0])
        c = EllipsoidConstraint(np.eye(2), 0.2)
        assert not check_growth_condition(m, c, UncertaintyEllipsoid(np.eye(2), 0.0))
        assert not check_growth_condition(m, c)

    def test_uncertainty_widens_requirement(self):
        m = MarketModel([[1.0, 0.0]], [0.1, 0.0])
        c = EllipsoidConstraint(np.eye(2), 0.3)
        assert check_growth_condition(m, c, UncertaintyEllipsoid(np.eye(2), 0.15))
        assert not check_growth_condition(m, c, UncertaintyEllipsoid(np.eye(2), 0.25))

    def test_exact_flag_is_less_conservative(self):
        m = MarketModel([[1.0, 0.0]], [0.3, 0.0])
        c = EllipsoidConstraint(np.diag([2.0, 1.0]), 0.6)
        # lemma: 0.6*sqrt(1/4) = 0.3 (fails, strict); exact: 0.6*sqrt(1/2) = 0.424
        assert not check_growth_condition(m, c)
        assert check_growth_condition(m, c, exact=True)
