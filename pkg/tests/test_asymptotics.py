import math
import warnings

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning

import oracles
from lnwald.asymptotics import (inverse_2x2, j_matrix, joint_covariance, k_matrix, l_factors,
                                normal_expectation, sigma_matrix)
from lnwald.exceptions import NumericalError
from lnwald.model import EtaVector, LognormalParams

GRID = [(b, m, s) for b in (0.0, 0.1, 0.25, 0.5, 1.0) for m in (-1.0, 0.0, 2.0) for s in (0.5, 1.0, 2.0)]


@pytest.fixture(autouse=True)
def _quiet_quad():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        yield


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


class TestLFactors:
    def test_beta_zero_unit(self):
        assert l_factors(0.0, LognormalParams(0, 1)) == (1.0, 1.0, 1.0)

    def test_beta_zero_sigma_two(self):
        L = l_factors(0.0, LognormalParams(0, 2))
        assert L == pytest.approx((0.5, 0.5, 0.25), rel=1e-15)

    @pytest.mark.parametrize("b,m,s", [(0.5, 1.0, 1.0), (1.0, -3.0, 0.3), (0.2, 40.0, 2.5)])
    def test_high_precision(self, b, m, s):
        assert l_factors(b, LognormalParams(m, s)) == pytest.approx(oracles.l_factors_mp(b, m, s), rel=1e-13)


class TestJK:
    @pytest.mark.parametrize("m,s", [(0.0, 1.0), (1.5, 0.3), (-2.0, 3.0)])
    def test_fisher_at_zero(self, m, s):
        fisher = np.diag([1 / s ** 2, 2 / s ** 2])
        p = LognormalParams(m, s)
        assert np.allclose(j_matrix(p, 0.0), fisher, rtol=1e-14, atol=0)
        assert np.allclose(k_matrix(p, 0.0), fisher, rtol=1e-14, atol=0)

    @pytest.mark.parametrize("b,m,s", [(0.25, 0.0, 1.0), (0.5, 3.0, 0.7)])
    def test_j_oracle(self, b, m, s):
        assert _rel(j_matrix(LognormalParams(m, s), b), oracles.j_oracle(m, s, b)) < 1e-6

    @pytest.mark.parametrize("b,m,s", [(0.25, 0.0, 1.0), (1.0, -1.0, 2.0)])
    def test_k_oracle(self, b, m, s):
        assert _rel(k_matrix(LognormalParams(m, s), b), oracles.k_oracle(m, s, b)) < 1e-6

    @pytest.mark.parametrize("b,m,s", GRID)
    def test_symmetric_positive_definite(self, b, m, s):
        p = LognormalParams(m, s)
        for M in (j_matrix(p, b), k_matrix(p, b), sigma_matrix(p, b)):
            assert np.allclose(M, M.T, rtol=0, atol=1e-15 * np.max(np.abs(M)))
            assert np.all(np.linalg.eigvalsh(M) > 0)


class TestSigma:
    @pytest.mark.parametrize("m,s", [(0.0, 1.0), (2.0, 0.4)])
    def test_inverse_fisher(self, m, s):
        assert np.allclose(sigma_matrix(LognormalParams(m, s), 0.0), np.diag([s * s, s * s / 2]),
                           rtol=1e-15, atol=0)

    def test_mu_shift_invariance(self):
        a = sigma_matrix(LognormalParams(0.3, 0.8), 0.5)
        b = sigma_matrix(LognormalParams(0.3 + 2.0, 0.8), 0.5)
        assert np.allclose(a, b, rtol=1e-13, atol=0)

    def test_extreme_mu_no_overflow(self):
        a = sigma_matrix(LognormalParams(0.0, 1.0), 1.0)
        b = sigma_matrix(LognormalParams(900.0, 1.0), 1.0)
        assert np.allclose(a, b, rtol=1e-12, atol=0)

    def test_matches_sandwich_product(self):
        p = LognormalParams(0.4, 1.3)
        J, K = j_matrix(p, 0.3), k_matrix(p, 0.3)
        Ji = np.linalg.inv(J)
        assert np.allclose(sigma_matrix(p, 0.3), Ji @ K @ Ji, rtol=1e-12, atol=0)

    @pytest.mark.parametrize("kappa", [0.01, 3.0, 250.0])
    def test_scale_robust(self, kappa):
        # oracles rebuilt from kappa * h: J scales by kappa, K by kappa^2
        m, s, b = 0.0, 1.0, 0.25
        J = kappa * oracles.j_oracle(m, s, b)
        K = kappa ** 2 * oracles.k_oracle(m, s, b)
        Ji = np.linalg.inv(J)
        assert _rel(Ji @ K @ Ji, sigma_matrix(LognormalParams(m, s), b)) < 1e-6


class TestJoint:
    def test_standard(self):
        out = joint_covariance(EtaVector(0, 1, 0, 1), 0.5, 0.0)
        assert np.allclose(out, np.diag([0.5, 0.25, 0.5, 0.25]), rtol=1e-15, atol=0)

    def test_blocks(self):
        eta = EtaVector(1.1, math.sqrt(0.4), 1.2, math.sqrt(0.2))
        out = joint_covariance(eta, 0.6, 0.1)
        assert np.array_equal(out[:2, :2], 0.4 * sigma_matrix(eta.pop1, 0.1))
        assert np.array_equal(out[2:, 2:], 0.6 * sigma_matrix(eta.pop2, 0.1))
        assert not out[:2, 2:].any() and not out[2:, :2].any()

    def test_weight_limit(self):
        out = joint_covariance(EtaVector(0, 1, 0, 1), 1 - 1e-12, 0.2)
        assert np.max(np.abs(out[:2, :2])) < 1e-11

    @pytest.mark.parametrize("w", [0.0, 1.0, -0.1])
    def test_weight_range(self, w):
        with pytest.raises(ValueError):
            joint_covariance(EtaVector(0, 1, 0, 1), w, 0.1)


class TestHelpers:
    def test_inverse(self):
        m = np.array([[2.0, 1.0], [1.0, 3.0]])
        assert np.allclose(inverse_2x2(m) @ m, np.eye(2))

    def test_singular(self):
        with pytest.raises(NumericalError):
            inverse_2x2(np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_ill_conditioned(self):
        with pytest.raises(NumericalError):
            inverse_2x2(np.array([[1.0, 0.0], [0.0, 1e-14]]))

    def test_normal_expectation_moments(self):
        vals = normal_expectation(lambda y: np.vstack([y, y ** 2, np.exp(y)]).T, 0.5, 1.5)
        assert vals == pytest.approx([0.5, 0.25 + 2.25, math.exp(0.5 + 1.125)], rel=1e-13)
