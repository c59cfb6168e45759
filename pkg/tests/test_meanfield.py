import numpy as np
import pytest

from dmfpf.errors import ConfigError, DomainError, HypothesisViolationError, TailError
from dmfpf.gain import exact_gain_1d
from dmfpf.meanfield import (
    DensityGrid,
    gain_bound_certificate,
    gain_on_grid,
    meanfield_gain,
    poincare_check,
    solve_meanfield_fixed_point,
    transition_density,
    transition_row,
)

H_LIN = lambda p: p[:, 0]

# frozen from the bound formulas at c_v = 2, eps = 0.5, |grad h| = 1
BOUND1_CV2 = 0.5333333333333333
BOUND2_CV2 = 1.3492384683385084


def gaussian_grid(sigma=1.0, n=2001):
    return DensityGrid.gaussian(sigma, n=n)


def bimodal_grid(n=2001):
    f = lambda t: (np.exp(-0.5 * ((t - 1.5) / 0.6) ** 2)
                   + np.exp(-0.5 * ((t + 1.5) / 0.6) ** 2))
    return DensityGrid.from_function(f, [(-9.0, 9.0)], n=n)


class TestDensityGrid:
    def test_mass_normalisation(self):
        g = gaussian_grid()
        w = g.weights()[0]
        assert w @ g.rho == pytest.approx(1.0, abs=1e-12)

    def test_negative_density_rejected(self):
        x = np.linspace(-1, 1, 11)
        with pytest.raises(DomainError):
            DensityGrid(axes=(x,), rho=np.linspace(-0.1, 1.0, 11))

    def test_unnormalised_rejected(self):
        x = np.linspace(-1, 1, 11)
        with pytest.raises(DomainError):
            DensityGrid(axes=(x,), rho=np.full(11, 3.0))

    def test_gaussian_modulus(self):
        assert DensityGrid.gaussian(0.5).c_v == pytest.approx(4.0, rel=1e-12)


class TestTransitionDensity:
    def test_row_normalisation_interior(self):
        g = gaussian_grid()
        w = g.weights()[0]
        for x in (-1.0, 0.0, 2.0):
            p = transition_row(np.array([x]), g, 0.25)
            assert w @ p == pytest.approx(1.0, abs=1e-6)

    def test_symmetry_at_origin(self):
        g = gaussian_grid()
        p = transition_row(np.array([0.0]), g, 0.25)
        w = g.weights()[0]
        assert abs(w @ (g.axes[0] * p)) < 1e-12

    def test_uniform_box_recovers_gaussian(self):
        # constant reference density: away from the boundary the transition
        # kernel is the Gaussian itself
        eps = 0.25
        g = DensityGrid.from_function(lambda t: np.ones_like(t), [(-12.0, 12.0)], n=4801)
        x = g.axes[0]
        p = transition_row(np.array([0.0]), g, eps)
        target = np.exp(-x**2 / (4 * eps)) / np.sqrt(4 * np.pi * eps)
        inner = np.abs(x) <= 6.0
        assert np.max(np.abs(p[inner] - target[inner])) <= 1e-3

    def test_pointwise_between_nodes(self):
        g = gaussian_grid()
        val = transition_density(0.0, 0.513, g, 0.25)
        row = transition_row(np.array([0.0]), g, 0.25)
        approx = np.interp(0.513, g.axes[0], row)
        assert val == pytest.approx(approx, rel=1e-4)

    def test_tail_error(self):
        g = gaussian_grid()
        with pytest.raises(TailError):
            transition_row(np.array([200.0]), g, 0.1)

    def test_two_dimensional_pointwise(self):
        g = DensityGrid.gaussian(1.0, dim=2, n=81, span_sigmas=5.0)
        x = np.array([0.2, -0.4])
        row = transition_row(x, g, 0.4)
        i, j = 44, 36
        node = np.array([g.axes[0][i], g.axes[1][j]])
        val = transition_density(x, node, g, 0.4)
        assert val == pytest.approx(row[i, j], rel=1e-12)
        w1, w2 = g.weights()
        assert w1 @ row @ w2 == pytest.approx(1.0, abs=1e-5)


class TestMeanFieldSolve:
    def test_constant_h_zero(self):
        g = gaussian_grid(n=801)
        f = solve_meanfield_fixed_point(g, lambda p: np.full(p.shape[0], 3.0), 0.3,
                                        tol=1e-12)
        assert np.max(np.abs(f.phi)) == 0.0

    def test_residual_below_tol(self):
        g = gaussian_grid(n=801)
        f = solve_meanfield_fixed_point(g, H_LIN, 0.3, tol=1e-11)
        assert f.residual <= 1e-11

    def test_pi_is_probability(self):
        g = gaussian_grid(n=801)
        f = solve_meanfield_fixed_point(g, H_LIN, 0.3, tol=1e-10)
        w = g.weights()[0]
        assert w @ f.pi == pytest.approx(1.0, abs=1e-12)
        assert np.all(f.pi >= 0)

    def test_gaussian_gradient_matches_exact_gain(self):
        g = gaussian_grid()
        f = solve_meanfield_fixed_point(g, H_LIN, 0.2, tol=1e-10)
        x = g.axes[0]
        dphi = np.gradient(f.phi, x)
        exact = exact_gain_1d(x, g.rho, x, x[np.abs(x) <= 2.0])
        assert np.max(np.abs(dphi[np.abs(x) <= 2.0] - exact)) <= 0.1 * np.max(np.abs(exact))

    def test_odd_potential_for_even_density_odd_h(self):
        g = bimodal_grid()
        f = solve_meanfield_fixed_point(g, H_LIN, 0.3, tol=1e-11)
        assert np.max(np.abs(f.phi + f.phi[::-1])) <= 1e-6


class TestMeanFieldGain:
    def test_constant_h_zero_gain(self):
        g = gaussian_grid(n=801)
        f = solve_meanfield_fixed_point(g, lambda p: np.full(p.shape[0], 1.0), 0.3,
                                        tol=1e-12)
        assert np.linalg.norm(meanfield_gain(np.array([0.4]), g, f, 0.3)) < 1e-12

    def test_gaussian_linear_near_one(self):
        g = gaussian_grid()
        f = solve_meanfield_fixed_point(g, H_LIN, 0.2, tol=1e-10)
        k0 = meanfield_gain(np.array([0.0]), g, f, 0.2)[0]
        assert abs(k0 - 1.0) <= 0.10

    def test_bimodal_symmetry(self):
        g = bimodal_grid()
        f = solve_meanfield_fixed_point(g, H_LIN, 0.3, tol=1e-11)
        for q in (0.8, 1.6):
            km = meanfield_gain(np.array([-q]), g, f, 0.3)[0]
            kp = meanfield_gain(np.array([q]), g, f, 0.3)[0]
            assert km == pytest.approx(kp, abs=1e-6)

    def test_grid_evaluation_matches_pointwise(self):
        g = gaussian_grid(n=801)
        f = solve_meanfield_fixed_point(g, H_LIN, 0.4, tol=1e-10)
        K = gain_on_grid(g, f, 0.4)
        i = 400
        k_pt = meanfield_gain(np.array([g.axes[0][i]]), g, f, 0.4)
        assert K[i, 0] == pytest.approx(k_pt[0], rel=1e-10)

    def test_two_dimensional_solver(self):
        g = DensityGrid.gaussian(1.0, dim=2, n=121, span_sigmas=6.0)
        f = solve_meanfield_fixed_point(g, H_LIN, 0.3, tol=1e-9)
        k = meanfield_gain(np.array([0.0, 0.0]), g, f, 0.3)
        assert k.shape == (2,)
        assert abs(k[1]) < 1e-10  # no gain along the unobserved coordinate
        w1, w2 = g.weights()
        assert w1 @ f.pi @ w2 == pytest.approx(1.0, abs=1e-10)


class TestBoundCertificate:
    def grid_cv2(self):
        sigma = np.sqrt(0.5)
        f = lambda t: np.exp(-0.5 * (t / sigma) ** 2)
        g = DensityGrid.from_function(f, [(-8 * sigma, 8 * sigma)], n=2001, c_v=2.0)
        return g

    def test_bound_values_and_pass(self):
        cert = gain_bound_certificate(self.grid_cv2(), H_LIN, 0.5, grad_h_inf=1.0)
        assert cert["c_g"] == pytest.approx(2.5, rel=1e-14)
        assert cert["bound1"] == pytest.approx(BOUND1_CV2, rel=1e-13)
        assert cert["bound2"] == pytest.approx(BOUND2_CV2, rel=1e-13)
        assert cert["measured_sup_K"] <= cert["bound1"]
        assert cert["measured_sup_gradK"] <= cert["bound2"]
        assert cert["bound1_pass"] and cert["bound2_pass"]

    def test_constant_h_passes_trivially(self):
        cert = gain_bound_certificate(self.grid_cv2(),
                                      lambda p: np.full(p.shape[0], 1.0), 0.5,
                                      grad_h_inf=0.0)
        assert cert["measured_sup_K"] <= 1e-12

    def test_hypothesis_violation(self):
        g = DensityGrid.gaussian(np.sqrt(1.0 / 0.1))  # c_v = 0.1
        with pytest.raises(HypothesisViolationError):
            gain_bound_certificate(g, H_LIN, 0.5, grad_h_inf=1.0)

    def test_missing_modulus(self):
        g = bimodal_grid()
        with pytest.raises(ConfigError):
            gain_bound_certificate(g, H_LIN, 0.5, grad_h_inf=1.0)


class TestPoincare:
    def test_gaussian_quarter(self):
        rep = poincare_check(gaussian_grid(), 0.25, [0.0])
        assert rep["c_g"] == pytest.approx(2.0, rel=1e-14)
        assert rep["probes"][0]["max_variance"] <= 0.5 + 1e-3
        assert rep["pass"]

    def test_large_bandwidth_still_bounded(self):
        rep = poincare_check(gaussian_grid(0.5), 5.0, [0.0, 0.5])
        assert rep["pass"]

    def test_narrow_density_tiny_variance(self):
        rep = poincare_check(gaussian_grid(0.05, n=4001), 0.25, [0.0])
        assert rep["probes"][0]["max_variance"] < 0.01
        assert rep["pass"]

    def test_far_probe_tail_error(self):
        with pytest.raises(TailError):
            poincare_check(gaussian_grid(), 0.1, [500.0])
