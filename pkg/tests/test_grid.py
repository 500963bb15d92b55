import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swflow.grid import (
    BumpWeight,
    Field,
    ball_lp_norm,
    bump_function,
    connection,
    dealias,
    fft,
    l2_inner,
    l2_norm,
    lp_norm,
    make_grid,
    pointwise_norm,
    random_band_limited,
    scalar,
    spectral_partial,
    spinor,
    sup_norm,
    torus_distance,
    weighted_l2_norm,
    zeros,
)

from conftest import antisymmetric


class TestGrid:
    def test_default_lengths_are_two_pi(self):
        g = make_grid(3, (8, 8, 8))
        assert g.lengths == (2 * np.pi,) * 3
        assert g.volume == pytest.approx((2 * np.pi) ** 3)
        assert g.cell_volume * g.num_sites == pytest.approx(g.volume)

    @pytest.mark.parametrize("sizes", [(8,), (8, 7), (8, 2)])
    def test_rejects_bad_sizes(self, sizes):
        with pytest.raises(ValueError):
            make_grid(2, sizes)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            make_grid(2, (8, 8), (1.0, 0.0))

    def test_nyquist_wavenumber_is_zero(self):
        g = make_grid(1, (8,))
        assert g.wavenumbers[0][4] == 0.0
        assert g.k_squared.max() == pytest.approx(9.0)

    def test_dealias_mask_band(self):
        g = make_grid(2, (12, 12))
        assert g.dealias_mask.sum() == 9 * 9

    def test_rescaled_keeps_sites(self):
        g = make_grid(2, (8, 8)).rescaled(0.5)
        assert g.sizes == (8, 8)
        assert g.lengths == pytest.approx((np.pi, np.pi))


class TestFieldContainer:
    def test_shape_validated(self, grid16):
        with pytest.raises(ValueError):
            Field(grid16, np.zeros((2, 1, 16, 16), complex), rank=0)

    def test_form_degree_bounded_by_rank(self, grid16):
        with pytest.raises(ValueError):
            Field(grid16, np.zeros((1, 16, 16), complex), rank=0, form_degree=1)

    def test_arithmetic_checks_compatibility(self, grid16):
        with pytest.raises(ValueError):
            zeros(grid16, 1) + zeros(grid16, 0)

    def test_connection_is_imaginary(self, grid16):
        x, y = grid16.coordinates()
        A = connection(grid16, np.sin(x), np.cos(y))
        assert A.purely_imaginary and A.rank == 1 and A.form_degree == 1
        assert np.all(A.data.real == 0)

    def test_imaginary_flag_dropped_by_complex_scale(self, grid16):
        A = connection(grid16, np.ones(grid16.sizes), np.zeros(grid16.sizes))
        assert not (A * 1j).purely_imaginary
        assert (A * 2.0).purely_imaginary


class TestSpectral:
    def test_partial_of_sine(self, grid16):
        x, y = grid16.coordinates()
        f = scalar(grid16, np.sin(3 * x) * np.cos(2 * y))
        dx = spectral_partial(f, 0)
        np.testing.assert_allclose(dx.data[0], 3 * np.cos(3 * x) * np.cos(2 * y), atol=1e-12)

    def test_partial_on_scaled_period(self):
        g = make_grid(1, (16,), (3.0,))
        (x,) = g.coordinates()
        w = 2 * np.pi / 3.0
        d = spectral_partial(scalar(g, np.exp(1j * w * x)), 0)
        np.testing.assert_allclose(d.data[0], 1j * w * np.exp(1j * w * x), atol=1e-12)

    def test_dealias_is_idempotent_projection(self, grid16):
        f = random_band_limited(grid16, 0, 1, 5, seed=1)
        once = dealias(f)
        np.testing.assert_allclose(dealias(once).data, once.data, atol=1e-14)
        assert abs(l2_inner(f - once, once)) < 1e-12


class TestNorms:
    def test_inner_product_hermitian(self, grid16):
        f = random_band_limited(grid16, 1, 2, 2, seed=1)
        g = random_band_limited(grid16, 1, 2, 2, seed=2)
        assert l2_inner(f, g) == pytest.approx(np.conj(l2_inner(g, f)))

    def test_two_form_half_factor(self, grid16):
        x, _ = grid16.coordinates()
        data = np.zeros((2, 2, 1, 16, 16), complex)
        data[0, 1, 0] = np.cos(x)
        data[1, 0, 0] = -np.cos(x)
        F = Field(grid16, data, 2, 1, 2)
        assert l2_norm(F) ** 2 == pytest.approx(2 * np.pi**2)
        np.testing.assert_allclose(pointwise_norm(F), np.abs(np.cos(x)), atol=1e-14)

    @pytest.mark.parametrize("p", [1, 2, 3.5])
    def test_lp_of_constant(self, grid16, p):
        f = spinor(grid16, 0.6, 0.8j)
        assert lp_norm(f, p) == pytest.approx(grid16.volume ** (1 / p))

    def test_lp_rejects_small_p(self, grid16):
        with pytest.raises(ValueError):
            lp_norm(zeros(grid16), 0.5)

    def test_sup_norm_sums_components(self, grid16):
        assert sup_norm(spinor(grid16, 3.0, 4.0)) == pytest.approx(5.0)

    def test_torus_distance_wraps(self, grid16):
        d = torus_distance(grid16, (0.0, 0.0))
        h = grid16.spacing[0]
        assert d[-1, 0] == pytest.approx(h)
        assert d.max() == pytest.approx(grid16.diameter)


class TestBallNorms:
    def test_large_radius_is_global(self, grid16):
        f = random_band_limited(grid16, 0, 1, 2, seed=4)
        assert ball_lp_norm(f, (1.0, 2.0), 100.0, 3) == lp_norm(f, 3)

    def test_empty_ball_raises(self, grid16):
        with pytest.raises(ValueError, match="no sites"):
            ball_lp_norm(zeros(grid16), (0.2, 0.2), 0.01, 2)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.0, 6.0), st.floats(0.0, 6.0))
    def test_monotone_in_radius(self, r1, r2, cx, cy):
        g = make_grid(2, (16, 16))
        f = random_band_limited(g, 0, 1, 2, seed=7)
        lo, hi = sorted((r1, r2))
        assert ball_lp_norm(f, (cx, cy), lo, 3) <= ball_lp_norm(f, (cx, cy), hi, 3) + 1e-15


class TestBump:
    def test_plateau_and_support(self):
        g = make_grid(2, (32, 32))
        gamma = bump_function(g, (np.pi, np.pi), 0.5, 1.5).data[0].real
        d = torus_distance(g, (np.pi, np.pi))
        assert np.all(gamma[d <= 0.5] == 1.0)
        assert np.all(gamma[d >= 1.5] == 0.0)
        assert gamma.min() >= 0.0 and gamma.max() <= 1.0

    def test_monotone_profile(self):
        g = make_grid(1, (64,))
        gamma = bump_function(g, (np.pi,), 0.5, 2.0).data[0].real
        half = gamma[32:]
        assert np.all(np.diff(half) <= 1e-15)

    def test_band_limited_variant_clamped(self):
        g = make_grid(2, (32, 32))
        gamma = bump_function(g, (1.0, 1.0), 0.5, 1.5, band_limit=True).data[0].real
        assert gamma.min() >= 0.0 and gamma.max() <= 1.0

    @pytest.mark.parametrize("r0, r1", [(1.0, 0.5), (0.0, 1.0), (1.0, 4.0)])
    def test_invalid_radii(self, grid16, r0, r1):
        with pytest.raises(ValueError):
            bump_function(grid16, (0, 0), r0, r1)

    def test_weight_validation(self, grid16):
        with pytest.raises(ValueError):
            BumpWeight(scalar(grid16, 2.0), 1.0)
        with pytest.raises(ValueError):
            BumpWeight(scalar(grid16, 1.0), 0.0)

    def test_unit_weight_is_plain_norm(self, grid16):
        f = random_band_limited(grid16, 1, 1, 2, seed=2)
        w = BumpWeight(scalar(grid16, 1.0), 3.0)
        assert weighted_l2_norm(f, w) == pytest.approx(l2_norm(f))


class TestRandomFields:
    def test_amplitude_and_band(self, grid16):
        f = random_band_limited(grid16, 1, 2, 2, seed=11, amplitude=0.7)
        assert sup_norm(f) == pytest.approx(0.7)
        hat = fft(f.data, grid16)
        m = np.broadcast_to(grid16.mode_index[0], grid16.sizes)
        flat = hat.reshape((-1,) + grid16.sizes)
        assert np.abs(flat[:, np.abs(m) > 2]).max() < 1e-12

    def test_deterministic(self, grid16):
        a = random_band_limited(grid16, 0, 1, 2, seed=5)
        b = random_band_limited(grid16, 0, 1, 2, seed=5)
        assert np.array_equal(a.data, b.data)

    def test_kinds(self, grid16):
        r = random_band_limited(grid16, 0, 1, 2, seed=1, kind="real")
        i = random_band_limited(grid16, 1, 1, 2, seed=1, kind="imaginary", form_degree=1)
        assert np.all(r.data.imag == 0) and np.all(i.data.real == 0)
        assert i.purely_imaginary

    def test_zero_amplitude(self, grid16):
        assert sup_norm(random_band_limited(grid16, 0, 1, 2, amplitude=0.0)) == 0.0

    def test_rejects_unresolved_band(self, grid16):
        with pytest.raises(ValueError):
            random_band_limited(grid16, 0, 1, 6)

    def test_antisymmetrised_form(self, grid16):
        F = antisymmetric(random_band_limited(grid16, 2, 1, 2, seed=3, form_degree=2))
        np.testing.assert_allclose(F.data, -np.swapaxes(F.data, 0, 1))
        assert math.isfinite(l2_norm(F))
