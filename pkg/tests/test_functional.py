import numpy as np
import pytest

from swflow.diffgeo import curvature, gauge_act, gauge_transform
from swflow.functional import (
    GradientPair,
    fd_gradient_check,
    grad_connection,
    grad_spinor,
    gradients,
    sw_energy,
    sw_energy_k,
)
from swflow.grid import (
    connection,
    dealias,
    l2_norm,
    make_grid,
    scalar,
    spectral_partial,
    spinor,
    sup_norm,
    zeros,
)

from conftest import random_pair, random_phase


def sine_connection(grid, m=1):
    x, _ = grid.coordinates()
    return connection(grid, np.zeros(grid.sizes), np.sin(m * x))


class TestEnergy:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_zero_state(self, grid16, k):
        e = sw_energy_k(zeros(grid16, 1, form_degree=1, purely_imaginary=True), zeros(grid16), k)
        assert e.total == 0.0

    def test_constant_spinor_quartic(self, grid16):
        c = 0.7 + 0.2j
        A = zeros(grid16, 1, form_degree=1, purely_imaginary=True)
        e = sw_energy(A, scalar(grid16, c))
        assert e.total == pytest.approx(abs(c) ** 4 / 8 * grid16.volume)
        assert e.dirichlet_term == 0.0

    def test_scalar_term(self, grid16):
        A = zeros(grid16, 1, form_degree=1, purely_imaginary=True)
        phi = spinor(grid16, 0.5, 0.5j)
        e = sw_energy_k(A, phi, 1, S0=-2.0)
        assert e.scalar_term == pytest.approx(-2.0 / 4 * 0.5 * grid16.volume)

    def test_classical_weights_curvature_once(self, grid16):
        e = sw_energy(sine_connection(grid16), zeros(grid16))
        assert e.total == pytest.approx(2 * np.pi**2)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_sine_connection_all_orders(self, grid16, k):
        # each derivative of cos(x) keeps the integral of the square at 2 pi^2
        e = sw_energy_k(sine_connection(grid16), zeros(grid16), k)
        assert e.total == pytest.approx(np.pi**2)

    def test_first_order_curvature_brute_force(self, grid16):
        A, phi = random_pair(grid16, seed=3)
        F = curvature(A)
        total = 0.0
        for i in range(2):
            for j in range(2):
                for m in range(2):
                    comp = scalar(grid16, F.data[j, m, 0])
                    total += l2_norm(spectral_partial(comp, i)) ** 2
        # 1/2 from the functional, 1/2! from the form norm
        assert sw_energy_k(A, phi, 1).curvature_term == pytest.approx(total / 4, rel=1e-12)

    def test_breakdown_sums(self, grid16):
        A, phi = random_pair(grid16, seed=5)
        e = sw_energy_k(A, phi, 1, S0=0.3)
        d = e.as_dict()
        assert d["total"] == pytest.approx(
            d["curvature_term"] + d["dirichlet_term"] + d["scalar_term"] + d["quartic_term"])
        assert min(e.curvature_term, e.dirichlet_term, e.quartic_term) >= 0

    def test_negative_order_rejected(self, grid16):
        A, phi = random_pair(grid16)
        with pytest.raises(ValueError):
            sw_energy_k(A, phi, -1)


class TestGradients:
    def test_zero_spinor(self, grid16):
        A, _ = random_pair(grid16)
        assert sup_norm(grad_spinor(A, zeros(grid16), 1)) == 0.0

    def test_constant_spinor(self, grid16):
        c = 0.6 - 0.3j
        A = zeros(grid16, 1, form_degree=1, purely_imaginary=True)
        g = grad_spinor(A, scalar(grid16, c), 2)
        np.testing.assert_allclose(g.data, abs(c) ** 2 * c / 4, atol=1e-14)

    @pytest.mark.parametrize("k, m", [(0, 1), (0, 2), (1, 2), (2, 1)])
    def test_plane_wave_spinor(self, grid16, k, m):
        x, _ = grid16.coordinates()
        c = 0.4
        A = zeros(grid16, 1, form_degree=1, purely_imaginary=True)
        phi = scalar(grid16, c * np.exp(1j * m * x))
        expected = (m ** (2 * k + 2) + c**2 / 4) * phi.data
        np.testing.assert_allclose(grad_spinor(A, phi, k).data, expected, atol=1e-11)

    @pytest.mark.parametrize("k, m", [(0, 1), (0, 2), (1, 2), (2, 1)])
    def test_sine_connection_eigenmode(self, grid16, k, m):
        A = sine_connection(grid16, m)
        g = grad_connection(A, zeros(grid16), k)
        np.testing.assert_allclose(g.data, m ** (2 * k + 2) * A.data, atol=1e-10)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_connection_gradient_imaginary(self, grid16, k):
        A, phi = random_pair(grid16, seed=2)
        g = grad_connection(A, phi, k)
        assert g.purely_imaginary and np.all(g.data.real == 0)

    def test_joint_matches_separate(self, grid16):
        A, phi = random_pair(grid16, seed=8)
        pair = gradients(A, phi, 1, -1.0)
        np.testing.assert_array_equal(pair.g_phi.data, grad_spinor(A, phi, 1, -1.0).data)
        np.testing.assert_array_equal(pair.g_A.data, grad_connection(A, phi, 1).data)


class TestGaugeBehaviour:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_energy_invariant(self, grid32, k):
        A, phi = random_pair(grid32, seed=1)
        A, phi = dealias(A), dealias(phi)
        g = random_phase(grid32, seed=5)
        A2, phi2 = gauge_transform(g, A, phi)
        e1 = sw_energy_k(A, phi, k).total
        e2 = sw_energy_k(A2, phi2, k).total
        assert abs(e1 - e2) <= 1e-8 * (1 + e1)

    @pytest.mark.parametrize("k", [0, 1])
    def test_gradients_equivariant(self, grid32, k):
        A, phi = random_pair(grid32, seed=2)
        g = random_phase(grid32, seed=6)
        A2, phi2 = gauge_transform(g, A, phi)
        lhs = grad_spinor(A2, phi2, k)
        rhs = gauge_act(g, grad_spinor(A, phi, k))
        assert l2_norm(lhs - rhs) < 1e-8
        assert l2_norm(grad_connection(A2, phi2, k) - grad_connection(A, phi, k)) < 1e-8


class TestFiniteDifferenceCheck:
    def test_zero_fields(self, grid16):
        A = zeros(grid16, 1, form_degree=1, purely_imaginary=True)
        assert fd_gradient_check(A, zeros(grid16), 1, num_directions=3) == (0.0, 0.0)

    @pytest.mark.parametrize("k", [0, 1, 2])
    @pytest.mark.parametrize("spinor_rank", [1, 2])
    def test_random_pairs(self, grid16, k, spinor_rank):
        A, phi = random_pair(grid16, seed=k, spinor_rank=spinor_rank)
        e_phi, e_a = fd_gradient_check(A, phi, k, S0=-0.5, num_directions=6)
        assert e_phi < 1e-6 and e_a < 1e-6

    def test_second_order_in_h(self, grid16):
        A, phi = random_pair(grid16, seed=4, amp_phi=1.0, amp_a=1.0)
        coarse = fd_gradient_check(A, phi, 1, h=1e-3, num_directions=4)
        fine = fd_gradient_check(A, phi, 1, h=5e-4, num_directions=4)
        for c, f in zip(coarse, fine):
            assert 3.0 < c / f < 5.0

    @pytest.mark.parametrize("h", [1e-7, 1e-2])
    def test_step_range_enforced(self, grid16, h):
        A, phi = random_pair(grid16)
        with pytest.raises(ValueError):
            fd_gradient_check(A, phi, 0, h=h)

    def test_detects_sign_error(self, grid16):
        A, phi = random_pair(grid16, seed=1)

        def flipped(A_, phi_, k, S0):
            g = gradients(A_, phi_, k, S0)
            return GradientPair(-g.g_phi, g.g_A)

        e_phi, e_a = fd_gradient_check(A, phi, 1, num_directions=4, grad_fn=flipped)
        assert e_phi > 1.0 and e_a < 1e-6
