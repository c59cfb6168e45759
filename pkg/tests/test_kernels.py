import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmfpf.errors import ConfigError, DomainError, IterationError
from dmfpf.kernels import (
    Ensemble,
    KernelConfig,
    build_markov,
    gaussian_kernel,
    kernel_matrix,
    stationary_by_power_iteration,
)

from conftest import random_cloud

# frozen values for the two-particle cloud {0, 1} at bandwidth 0.25
T11_2P = 0.7310585786300049
T12_2P = 0.26894142136999516
U_2P = math.sqrt(1.0 + math.exp(-1.0))


def two_particle():
    ens = Ensemble(np.array([[0.0], [1.0]]))
    return ens, build_markov(ens, KernelConfig(0.25))


class TestGaussianKernel:
    def test_zero_distance(self):
        assert gaussian_kernel([1.3, -2.0], [1.3, -2.0], KernelConfig(0.7)) == 1.0

    def test_direct_substitution(self):
        val = gaussian_kernel([0.0], [1.0], KernelConfig(0.25))
        assert val == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_normalized_prefactor_identity(self):
        # at eps = 1/(4 pi) the prefactor (4 pi eps)^(-1/2) is exactly 1
        val = gaussian_kernel([0.5], [0.5], KernelConfig(1.0 / (4.0 * math.pi)),
                              normalized=True)
        assert val == pytest.approx(1.0, rel=1e-15)

    def test_nonfinite_input(self):
        with pytest.raises(DomainError):
            gaussian_kernel([np.nan], [0.0], KernelConfig(0.5))

    def test_translation_exact(self):
        # dyadic values keep the additions exact, so the kernel must match bitwise
        cfg = KernelConfig(0.5)
        x, y, c = np.array([0.25, -1.5]), np.array([1.0, 0.75]), np.array([4.0, -8.0])
        assert gaussian_kernel(x + c, y + c, cfg) == gaussian_kernel(x, y, cfg)


class TestBuildMarkov:
    def test_two_particle_worked_case(self):
        _, b = two_particle()
        assert b.T[0, 0] == pytest.approx(T11_2P, abs=1e-15)
        assert b.T[0, 1] == pytest.approx(T12_2P, abs=1e-15)
        assert b.u[0] == pytest.approx(U_2P, rel=1e-15)
        np.testing.assert_allclose(b.pi, [0.5, 0.5], atol=1e-15)

    def test_row_sums_and_positivity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            X = random_cloud(rng)
            b = build_markov(Ensemble(X), KernelConfig(float(rng.uniform(0.05, 2.0))))
            np.testing.assert_allclose(b.T.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(b.T > 0)
            assert np.all(b.u >= 1.0)
            assert np.all(b.s > 0)
            assert b.pi.sum() == pytest.approx(1.0, abs=1e-14)

    def test_three_collinear_symmetry(self):
        ens = Ensemble(np.array([[-1.0], [0.0], [1.0]]))
        b = build_markov(ens, KernelConfig(0.8))
        assert b.T[0, 1] == b.T[2, 1]

    def test_permutation_equivariance_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            X = random_cloud(rng, n_max=96)
            perm = rng.permutation(X.shape[0])
            cfg = KernelConfig(0.4)
            b = build_markov(Ensemble(X), cfg)
            bp = build_markov(Ensemble(X[perm]), cfg)
            assert np.array_equal(bp.T, b.T[np.ix_(perm, perm)])
            assert np.array_equal(bp.u, b.u[perm])
            assert np.array_equal(bp.s, b.s[perm])
            assert np.array_equal(bp.pi, b.pi[perm])

    def test_translation_equivariance_exact(self):
        # dyadic coordinates and shift: all arithmetic is exact
        X = np.array([[0.5, -1.25], [1.75, 0.0], [-2.5, 3.0], [0.0, 0.625]])
        cfg = KernelConfig(0.75)
        b = build_markov(Ensemble(X), cfg)
        bshift = build_markov(Ensemble(X + np.array([16.0, -32.0])), cfg)
        assert np.array_equal(b.T, bshift.T)

    def test_single_particle_rejected(self):
        with pytest.raises(ConfigError):
            Ensemble(np.array([[1.0]]))

    def test_bounds_chain(self):
        # with delta just under the realised min of s/N the whole chain of
        # strict inequalities between g, qt/N, T and qt/(delta N) must hold
        rng = np.random.default_rng(3)
        for _ in range(5):
            X = random_cloud(rng, n=16, d=1, scale=0.5)
            cfg = KernelConfig(1.0)
            ens = Ensemble(X)
            b = build_markov(ens, cfg)
            G = kernel_matrix(ens, cfg)
            Q = G / b.u[None, :]
            n = ens.n
            delta = 0.99 * float(b.s.min()) / n
            assert np.all(G / n**1.5 < b.T)
            assert np.all(Q / n < b.T)
            assert np.all(b.T < Q / (delta * n))
            assert np.all(b.T < G / (delta * n))

    @given(seed=st.integers(0, 10_000), n=st.integers(2, 40), d=st.integers(1, 3))
    @settings(max_examples=25, deadline=None)
    def test_row_stochastic_property(self, seed, n, d):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, d))
        b = build_markov(Ensemble(X), KernelConfig(0.3))
        assert np.all(np.abs(b.T.sum(axis=1) - 1.0) <= 1e-12)
        assert np.all(b.T > 0)


class TestStationary:
    def test_two_particle_uniform(self):
        _, b = two_particle()
        res = stationary_by_power_iteration(b)
        np.testing.assert_allclose(res.nu, [0.5, 0.5], atol=1e-12)

    def test_degenerate_cloud_uniform(self):
        ens = Ensemble(np.full((6, 2), 1.5))
        b = build_markov(ens, KernelConfig(0.5))
        res = stationary_by_power_iteration(b)
        np.testing.assert_allclose(res.nu, np.full(6, 1.0 / 6.0), atol=1e-14)

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(5)
        b = build_markov(Ensemble(rng.standard_normal((8, 2))), KernelConfig(0.6))
        res = stationary_by_power_iteration(b, tol=1e-10)
        assert res.residual <= 1e-10
        assert res.nu.sum() == pytest.approx(1.0, abs=1e-12)

    def test_closed_form_pi_reported_not_asserted(self):
        # the closed-form weights are generally NOT the exact fixed point; the
        # true one is proportional to s/u.  Both facts are checked here.
        rng = np.random.default_rng(6)
        b = build_markov(Ensemble(rng.standard_normal((32, 1))), KernelConfig(0.3))
        res = stationary_by_power_iteration(b, tol=1e-13)
        su = b.s / b.u
        su /= su.sum()
        np.testing.assert_allclose(res.nu, su, atol=1e-11)
        assert res.residual_pi_closed_form > 10 * res.residual

    def test_non_convergence_raises(self):
        rng = np.random.default_rng(8)
        b = build_markov(Ensemble(rng.standard_normal((16, 1))), KernelConfig(0.1))
        with pytest.raises(IterationError) as exc:
            stationary_by_power_iteration(b, tol=1e-16, max_iter=2)
        assert exc.value.last_residual is not None
