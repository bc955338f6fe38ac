import math

import numpy as np
import pytest

from conftest import PROBE_SCALE
from wavepacket_frames.core.errors import PreconditionError
from wavepacket_frames.core.field import FrequencyGrid
from wavepacket_frames.core.geometry import Lattice
from wavepacket_frames.core.transform import build_dual
from wavepacket_frames.core.wavefront import (
    PhaseSpacePoint,
    SignalParams,
    angle_grid,
    calibrate_threshold,
    decay_probe,
    grid_params,
    make_test_signal,
    regularity_sum,
    usable_scale,
    wavefront_map,
)
from wavepacket_frames.core.window import reference_coarse_window

# 512 samples on [-1, 1)^2 reach frequency 128, enough for j = 5 with the probe window
PROBE_N = 512
PROBE_EXTENT = 1.0
SCALES = (3, 4, 5)
# at j = 3 the packets are still wide enough to feel an edge half a unit away
MAP_SCALES = (4, 5)
NORMAL, TANGENT = angle_grid(4)[0], angle_grid(4)[1]


@pytest.fixture(scope="module")
def lattice():
    return Lattice.rectangular(0.05, 0.05)


@pytest.fixture(scope="module")
def edge():
    return make_test_signal("edge", PROBE_N, PROBE_EXTENT)


def test_phase_space_point_normalizes_angle():
    assert PhaseSpacePoint(x0=(0.0, 0.0), theta0=-math.pi / 2).theta0 == pytest.approx(1.5 * math.pi)
    assert PhaseSpacePoint(x0=(0.0, 0.0), theta0=5 * math.pi).theta0 == pytest.approx(math.pi)
    assert PhaseSpacePoint(x0=(0.0, 0.0), theta0=2 * math.pi).theta0 == 0.0


def test_grid_params_tracks_direction_and_position(lattice):
    p = PhaseSpacePoint(x0=(0.1, 0.2), theta0=1.5 * math.pi - 0.1)
    assert grid_params(p, lattice, 2) == (1, (-64, 8))


def test_grid_params_selects_packet_along_the_probe_angle(lattice):
    p = PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL)
    for j in range(1, 6):
        assert grid_params(p, lattice, j) == (0, (0, 0))
    q = PhaseSpacePoint(x0=(0.0, 0.0), theta0=TANGENT)
    for j in range(2, 6):
        assert grid_params(q, lattice, j)[0] == 3 * 2 ** (j - 2)


def test_grid_params_ties_take_the_rotation_below(lattice):
    p = PhaseSpacePoint(x0=(0.0, 0.0), theta0=0.0)
    assert grid_params(p, lattice, 3)[0] == 7
    with pytest.raises(ValueError):
        grid_params(p, lattice, 0)


def test_angle_grid():
    angles = angle_grid(8)
    assert len(angles) == 8
    assert all(0.0 <= a < 2 * math.pi for a in angles)
    assert angles[2] == pytest.approx(math.pi / 2, abs=1e-8)
    with pytest.raises(ValueError):
        angle_grid(0)


def test_test_signals():
    bump = make_test_signal("bump", 64, 1.0, SignalParams(width=0.25))
    assert bump.samples[32, 32] == 1.0
    edge = make_test_signal("edge", 64, 1.0).samples.real
    assert edge[32, 40] == 0.0
    assert edge[32, 30] > 0.0
    corner = make_test_signal("corner", 64, 1.0).samples.real
    assert corner[30, 30] > 0.0
    assert corner[40, 30] == 0.0
    with pytest.raises(PreconditionError):
        make_test_signal("bump", 64, 1.0, SignalParams(center=(1.5, 0.0)))
    with pytest.raises(ValueError):
        make_test_signal("ring", 64, 1.0)


def test_usable_scale(probe_window, edge):
    assert usable_scale(probe_window, edge) == 5


def test_probe_beyond_usable_scale_is_marked(probe_window, edge, lattice):
    probe = decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, range(4, 7), probe_window)
    assert not probe.within_usable_range


def test_edge_normal_decays_slowly(probe_window, edge, lattice):
    probe = decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, SCALES, probe_window, s=1.0)
    assert [record.k for record in probe.records] == [0, 0, 0]
    assert probe.within_usable_range
    assert probe.sobolev_order == 1.0
    assert probe.rate <= 0.8


def test_edge_tangent_decays_fast(probe_window, edge, lattice):
    normal = decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, SCALES, probe_window)
    tangent = decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=TANGENT), lattice, SCALES, probe_window)
    assert tangent.rate >= 3.0
    assert tangent.rate - normal.rate >= 1.0
    assert tangent.coefficients()[-1] < normal.coefficients()[-1]


def test_smooth_region_decays_fast(probe_window, edge, lattice):
    probe = decay_probe(edge, PhaseSpacePoint(x0=(-0.7, 0.0), theta0=NORMAL), lattice, (4, 5), probe_window)
    assert probe.rate >= 2.0


def test_rotated_edge_is_singular_along_its_own_normal(probe_window, lattice):
    turned = make_test_signal("edge", PROBE_N, PROBE_EXTENT, SignalParams(normal_angle=math.pi / 2))
    normal = decay_probe(turned, PhaseSpacePoint(x0=(0.0, 0.0), theta0=TANGENT), lattice, SCALES, probe_window)
    across = decay_probe(turned, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, SCALES, probe_window)
    assert normal.rate <= 0.8
    assert across.rate >= 3.0


def test_bump_is_regular_in_every_direction(probe_window, lattice):
    bump = make_test_signal("bump", PROBE_N, PROBE_EXTENT, SignalParams(width=0.25))
    for theta in angle_grid(8):
        probe = decay_probe(bump, PhaseSpacePoint(x0=(0.0, 0.0), theta0=theta), lattice, SCALES, probe_window)
        assert probe.rate >= 3.0


def test_edge_normal_separates_from_far_angles_over_all_scales(probe_window, edge, lattice):
    angles = angle_grid(16)
    rates = {
        q: decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=angles[q]), lattice, range(1, 6), probe_window).rate
        for q in (0, 3, 4, 5, 11, 12, 13)
    }
    assert rates[0] <= 0.8
    for q in (3, 4, 5, 11, 12, 13):
        assert rates[q] - rates[0] >= 1.0


# a quarter turn maps these points onto each other: 1 -> 2 -> 3 -> 4 -> 1
EDGE_POINTS = [(0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (-0.3, 0.0), (0.0, -0.3)]
QUARTER_TURN = {0: 0, 1: 2, 2: 3, 3: 4, 4: 1}


def _edge_map(normal_angle, lattice, w, threshold):
    f = make_test_signal("edge", PROBE_N, PROBE_EXTENT, SignalParams(normal_angle=normal_angle))
    return wavefront_map(f, lattice, MAP_SCALES, EDGE_POINTS, angle_grid(8), 1.0, w, threshold=threshold)


def _angular_step(q1, q2, count=8):
    d = abs(q1 - q2) % count
    return min(d, count - d)


def test_flagged_directions_concentrate_on_the_edge_normal(probe_window, edge, lattice):
    threshold = _calibrated_threshold(edge, lattice, probe_window, MAP_SCALES)
    flagged = _edge_map(0.0, lattice, probe_window, threshold).flagged
    assert (0, 0) in flagged and (0, 4) in flagged
    near_normal = [(p, q) for p, q in flagged if min(_angular_step(q, 0), _angular_step(q, 4)) <= 1]
    assert len(near_normal) >= 0.8 * len(flagged)


def test_flagged_set_turns_with_the_edge(probe_window, edge, lattice):
    threshold = _calibrated_threshold(edge, lattice, probe_window, MAP_SCALES)
    original = _edge_map(0.0, lattice, probe_window, threshold).flagged
    turned = _edge_map(math.pi / 2, lattice, probe_window, threshold).flagged
    expected = [(QUARTER_TURN[p], (q + 2) % 8) for p, q in original]
    assert len(turned) > 0
    for p, q in expected:
        assert any(p2 == p and _angular_step(q, q2) <= 1 for p2, q2 in turned)
    for p2, q2 in turned:
        assert any(p2 == p and _angular_step(q, q2) <= 1 for p, q in expected)


def test_regularity_sum(probe_window, edge, lattice):
    probe = decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, SCALES, probe_window)
    expected = sum(c ** 2 * 4.0 ** (2 * j) for j, c in zip(SCALES, probe.coefficients()))
    assert regularity_sum(probe, 1.0) == pytest.approx(expected)
    assert regularity_sum(probe, 0.0) == pytest.approx(float(np.sum(probe.coefficients() ** 2)))


def test_calibrate_threshold():
    assert calibrate_threshold([1e-6, 1e-5], [1e-1, 1.0]) == pytest.approx(1e-3)
    assert calibrate_threshold([0.0], [1e-2]) == pytest.approx(1e-5)
    with pytest.raises(PreconditionError):
        calibrate_threshold([1.0], [0.5])


def _calibrated_threshold(f, lattice, w, scales, dual=None):
    calibration = wavefront_map(f, lattice, scales, [(0.0, 0.0)], [NORMAL, TANGENT], 1.0, w, dual=dual)
    return calibrate_threshold([calibration.sums[0, 1]], [calibration.sums[0, 0]])


def test_wavefront_map_flags_the_edge_normal(probe_window, edge, lattice):
    threshold = _calibrated_threshold(edge, lattice, probe_window, MAP_SCALES)
    result = wavefront_map(
        edge, lattice, MAP_SCALES, [(0.0, 0.1), (-0.5, 0.0)], [NORMAL, TANGENT], 1.0, probe_window, threshold=threshold
    )
    assert result.sums.shape == (2, 2)
    assert result.flagged == [(0, 0)]
    assert not result.approximate


def test_wavefront_map_of_zero_field_is_regular(probe_window, lattice):
    zero = make_test_signal("edge", PROBE_N, PROBE_EXTENT).with_samples(np.zeros((PROBE_N, PROBE_N)))
    result = wavefront_map(zero, lattice, SCALES, [(0.0, 0.0)], angle_grid(4), 1.0, probe_window)
    assert result.flagged == []
    assert np.all(result.sums == 0.0)


def test_wavefront_map_as_field(probe_window, edge, lattice):
    result = wavefront_map(edge, lattice, (3,), [(0.0, 0.0), (0.5, 0.5)], angle_grid(3), 1.0, probe_window, threshold=0.0)
    field = result.to_field()
    assert field.n == 4
    flat = field.samples.real.ravel()
    np.testing.assert_array_equal(flat[:6], (~result.regular).ravel().astype(float))
    assert np.all(flat[6:] == -1.0)


@pytest.mark.slow
def test_approximate_dual_verdicts_match(probe_window, lattice):
    edge = make_test_signal("edge", PROBE_N, PROBE_EXTENT).to_frequency()
    grid = edge.grid
    f = edge.with_samples(np.where(grid.band_mask(64.0), edge.samples, 0.0))
    dual = build_dual(probe_window, reference_coarse_window().scaled(PROBE_SCALE), 0.0, grid, 5)
    scales = (2, 3, 4)
    points = [(0.0, 0.1), (-0.5, 0.0)]
    verdicts = {}
    for name, source in (("direct", None), ("approximate", dual)):
        threshold = _calibrated_threshold(f, lattice, probe_window, scales, dual=source)
        verdicts[name] = wavefront_map(
            f, lattice, scales, points, [NORMAL, TANGENT], 1.0, probe_window, threshold=threshold, dual=source
        )
    assert verdicts["approximate"].approximate
    assert not verdicts["direct"].approximate
    np.testing.assert_array_equal(verdicts["approximate"].regular, verdicts["direct"].regular)
    assert (0, 0) in verdicts["approximate"].flagged
    assert (0, 1) not in verdicts["approximate"].flagged


def test_probe_with_dual_needs_matching_grid(probe_window, edge, lattice):
    coarse = reference_coarse_window().scaled(PROBE_SCALE)
    dual = build_dual(probe_window, coarse, 0.0, FrequencyGrid(n=64, extent=128.0), 2, band=0.0)
    with pytest.raises(PreconditionError):
        decay_probe(edge, PhaseSpacePoint(x0=(0.0, 0.0), theta0=NORMAL), lattice, SCALES, probe_window, dual=dual)
