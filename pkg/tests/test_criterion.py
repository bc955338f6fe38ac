import math

import numpy as np
import pytest

from conftest import FIELD_BAND, J_MAX, square_lattice
from wavepacket_frames.config import settings
from wavepacket_frames.core.criterion import (
    SweepPoint,
    asymptotic_fit,
    certify_frame,
    compute_symbol_m,
    delta_lattice,
    fit_theta_envelope,
    largest_valid_spacing,
    lattice_sweep,
    predict_delta,
    refine_covering,
    symbol_grid,
    theta,
    theta_dual,
    theta_grid,
)
from wavepacket_frames.core.errors import PreconditionError, TruncationError
from wavepacket_frames.core.field import FrequencyGrid
from wavepacket_frames.core.geometry import Lattice, dual_lattice, rotation_matrix
from wavepacket_frames.core.window import CoarseWindowSpec, ZeroWindow


@pytest.fixture(scope="module")
def envelope(window, coarse, grid):
    return fit_theta_envelope(window, coarse, grid, J_MAX)


@pytest.fixture(scope="module")
def symbol(window, coarse, grid):
    return compute_symbol_m(window, coarse, grid, J_MAX)


@pytest.mark.slow
def test_standard_symbol_bounds(window, coarse):
    symbol = compute_symbol_m(window, coarse)
    assert symbol.grid == symbol_grid()
    assert symbol.j_max == settings.default_j_max
    assert 0.94 <= symbol.lower <= 0.96
    assert 2.23 <= symbol.upper <= 2.27


def test_default_grids_follow_settings(window):
    grid = symbol_grid()
    assert grid.n == settings.symbol_grid_n
    assert grid.extent == settings.symbol_extent
    sup = theta_grid(window, J_MAX)
    assert sup.n == settings.theta_grid_n
    assert sup.extent == pytest.approx(window.reach() * 4.0 ** J_MAX)
    assert theta_grid(window, J_MAX, n=64).n == 64


def test_theta_defaults_to_the_sup_grid(window, coarse):
    expected = compute_symbol_m(window, coarse, theta_grid(window, J_MAX), J_MAX).upper
    assert theta(window, coarse, (0.0, 0.0), j_max=J_MAX) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("band", [None, FIELD_BAND])
def test_covering_constants_tighten_monotonically_under_refinement(window, coarse, grid, symbol, band):
    levels = refine_covering(window, coarse, grid, J_MAX, 2, band=band)
    assert [level.n for level in levels] == [grid.n, 2 * grid.n, 4 * grid.n]
    assert (levels[0].A, levels[0].B) == pytest.approx(symbol.extrema(band), rel=1e-12)
    for coarser, finer in zip(levels, levels[1:]):
        assert finer.spacing == pytest.approx(coarser.spacing / 2.0)
        assert finer.A <= coarser.A * (1.0 + 1e-12)
        assert finer.B >= coarser.B * (1.0 - 1e-12)


def test_refinement_levels_must_be_non_negative(window, coarse, grid):
    assert len(refine_covering(window, coarse, grid, J_MAX, 0)) == 1
    with pytest.raises(ValueError):
        refine_covering(window, coarse, grid, J_MAX, -1)


def test_symbol_of_coarse_window_alone(coarse, grid):
    symbol = compute_symbol_m(ZeroWindow(), coarse, grid, 2)
    assert symbol.upper == pytest.approx(1.0, rel=1e-12)
    xi1, xi2 = grid.mesh()
    np.testing.assert_allclose(symbol.values, np.exp(-2.0 * (xi1 ** 2 + xi2 ** 2) / coarse.sigma), rtol=1e-12)


def test_symbol_fine_part_is_quadratic_in_amplitude(window, coarse, grid, symbol):
    doubled = compute_symbol_m(window.with_amplitudes_scaled(2.0), coarse, grid, J_MAX)
    xi1, xi2 = grid.mesh()
    coarse_part = np.exp(-2.0 * (xi1 ** 2 + xi2 ** 2) / coarse.sigma)
    np.testing.assert_allclose(doubled.values - coarse_part, 4.0 * (symbol.values - coarse_part), rtol=1e-10, atol=1e-14)


def test_symbol_is_positive_and_bounded(window, symbol):
    assert symbol.lower > 0.0
    assert symbol.upper <= 1.0 + J_MAX * 2 ** J_MAX * window.abs_bound() ** 2


def test_symbol_extrema_on_band(symbol):
    A, B = symbol.extrema(FIELD_BAND)
    assert symbol.lower <= A <= B <= symbol.upper
    with pytest.raises(PreconditionError):
        symbol.extrema(-1.0)


def test_theta_at_origin_is_symbol_maximum(window, coarse, grid, symbol):
    assert theta(window, coarse, (0.0, 0.0), grid, J_MAX) == pytest.approx(symbol.upper, rel=1e-12)


def test_theta_vanishes_for_far_shifts(window, coarse, grid):
    assert theta(window, coarse, (1e5, 0.0), grid, J_MAX) == 0.0


def test_theta_dual_with_same_window_is_theta(window, coarse, grid):
    zeta = (96.0, -40.0)
    expected = theta(window, coarse, zeta, grid, J_MAX)
    assert theta_dual(window, window, coarse, zeta, grid, J_MAX, 1) == pytest.approx(expected, rel=1e-12)
    assert theta_dual(window, window, coarse, zeta, grid, J_MAX, 2) == pytest.approx(
        theta(window, coarse, (-zeta[0], -zeta[1]), grid, J_MAX), rel=1e-12
    )
    with pytest.raises(ValueError):
        theta_dual(window, window, coarse, zeta, grid, J_MAX, 3)


def test_theta_envelope_dominates_samples(envelope):
    assert envelope.tau > 0.0
    for z1, z2, value in envelope.samples:
        assert value >= 0.0
        assert value <= envelope.C * math.exp(-envelope.tau * (z1 * z1 + z2 * z2)) * (1.0 + 1e-12)


def test_delta_is_tiny_for_a_very_fine_lattice(window):
    w = window.scaled(0.01)
    w0 = CoarseWindowSpec(sigma=1.0)
    grid = FrequencyGrid(n=128, extent=16.0)
    estimate = delta_lattice(w, w0, Lattice.rectangular(0.05, 0.05), grid, 3, gamma_radius=80.0, strict=False)
    assert estimate.value < 1e-8


def test_delta_is_unchanged_by_a_quarter_turn(window, coarse, grid, envelope):
    lat = Lattice.rectangular(1.0 / 200.0, 1.0 / 320.0)
    turned = Lattice.from_matrix(lat.matrix @ rotation_matrix(math.pi / 2))
    base = delta_lattice(window, coarse, lat, grid, J_MAX, strict=False, envelope=envelope).value
    other = delta_lattice(window, coarse, turned, grid, J_MAX, strict=False, envelope=envelope).value
    assert other == pytest.approx(base, rel=0.05)


def test_refined_defect_never_exceeds_the_maximum_form(window, coarse, frame_lattice, grid, envelope):
    plain = delta_lattice(window, coarse, frame_lattice, grid, J_MAX, envelope=envelope)
    refined = delta_lattice(window, coarse, frame_lattice, grid, J_MAX, refined=True, envelope=envelope)
    assert refined.value <= plain.value * (1.0 + 1e-12)
    assert refined.refined


def test_default_gamma_radius_scales_with_the_envelope(window, coarse, frame_lattice, grid, envelope):
    estimate = delta_lattice(window, coarse, frame_lattice, grid, J_MAX, envelope=envelope)
    diameter = dual_lattice(frame_lattice).fundamental_diameter
    assert estimate.gamma_radius == pytest.approx(settings.gamma_radius_factor / math.sqrt(envelope.tau) + diameter)
    assert estimate.gamma_count > 0
    assert estimate.tail_bound < settings.tail_relative_tolerance * estimate.value


def test_strict_truncation_reports_required_radius(window, coarse, frame_lattice, grid, envelope):
    with pytest.raises(TruncationError) as excinfo:
        delta_lattice(window, coarse, frame_lattice, grid, J_MAX, gamma_radius=300.0, envelope=envelope)
    assert excinfo.value.required_radius > 300.0


def test_band_certificate(band_certificate, frame_lattice):
    cert = band_certificate
    assert cert.valid == (cert.delta < cert.A)
    assert cert.valid
    assert cert.lower <= cert.upper
    assert cert.lower == pytest.approx((cert.A - cert.delta) / frame_lattice.volume)
    assert cert.upper == pytest.approx((cert.B + cert.delta) / frame_lattice.volume)
    assert cert.delta_tail < 1e-6 * cert.delta
    assert cert.band == FIELD_BAND
    assert cert.bound_ratio == pytest.approx(cert.upper / cert.lower)


def test_certificate_without_dual_points(window, coarse, frame_lattice, grid, envelope):
    cert = certify_frame(window, coarse, frame_lattice, grid, J_MAX, gamma_radius=1.0, strict=False, envelope=envelope)
    assert cert.gamma_count == 0
    assert cert.delta == 0.0
    assert cert.lower == pytest.approx(cert.A / frame_lattice.volume)
    assert cert.upper == pytest.approx(cert.B / frame_lattice.volume)


def test_coarse_lattice_is_not_certified(window, coarse, grid, envelope):
    cert = certify_frame(
        window, coarse, Lattice.rectangular(10.0, 10.0), grid, J_MAX, gamma_radius=1.0, strict=False, envelope=envelope
    )
    assert cert.gamma_count > 0
    assert not cert.valid
    assert cert.lower < 0.0


def test_asymptotic_fit_recovers_gaussian_rate():
    sweep = [SweepPoint(a=a, b=a, delta=math.exp(-2.0 / a ** 2)) for a in (1.0, 0.8, 0.6, 0.5)]
    fit = asymptotic_fit(sweep)
    assert fit.tau == pytest.approx(2.0, rel=1e-9)
    assert fit.prefactor == pytest.approx(1.0, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert predict_delta(fit, 0.7, 0.7) == pytest.approx(math.exp(-2.0 / 0.49), rel=1e-9)
    assert largest_valid_spacing(fit, math.exp(-8.0)) == pytest.approx(0.5, rel=1e-9)
    # each axis contributes half of the square-lattice law
    assert predict_delta(fit, 0.7, 0.5) == pytest.approx(0.5 * (math.exp(-2.0 / 0.49) + math.exp(-8.0)), rel=1e-9)


def test_asymptotic_fit_is_dominated_by_the_slowest_term():
    sweep = [
        SweepPoint(a=a, b=a, delta=math.exp(-2.0 / a ** 2) + math.exp(-5.0 / a ** 2))
        for a in (0.5, 0.45, 0.4, 0.35)
    ]
    assert asymptotic_fit(sweep).tau == pytest.approx(2.0, rel=1e-3)


def test_asymptotic_fit_preconditions():
    good = [SweepPoint(a=a, b=a, delta=math.exp(-1.0 / a ** 2)) for a in (1.0, 0.8, 0.6, 0.5)]
    with pytest.raises(PreconditionError):
        asymptotic_fit(good[:3])
    with pytest.raises(PreconditionError):
        asymptotic_fit(good[::-1])
    with pytest.raises(PreconditionError):
        asymptotic_fit(good[:2] + [SweepPoint(a=0.6, b=0.6, delta=0.0), SweepPoint(a=0.5, b=0.5, delta=-1.0)])
    with pytest.raises(PreconditionError):
        asymptotic_fit(good[:3] + [SweepPoint(a=0.4, b=0.3, delta=1e-3)])


def test_lattice_sweep_decreases_with_spacing_and_fits(window, coarse, grid):
    spacings = [square_lattice(m).generator[0][0] for m in (16, 20, 24, 28, 32)]
    sweep = lattice_sweep(window, coarse, spacings, grid, J_MAX)
    deltas = [point.delta for point in sweep]
    assert all(later <= earlier for earlier, later in zip(deltas, deltas[1:]))
    fit = asymptotic_fit(sweep)
    assert fit.slope < 0.0
    assert fit.r_squared >= 0.98
