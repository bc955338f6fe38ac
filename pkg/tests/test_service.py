import math

import pytest

from conftest import FIELD_BAND, GRID_N, J_MAX, SPATIAL_EXTENT
from wavepacket_frames.config import settings
from wavepacket_frames.core import formats
from wavepacket_frames.core.formats import read_field, save_window
from wavepacket_frames.core.service import service
from wavepacket_frames.core.wavefront import SignalParams, angle_grid

LATTICE = (2 * SPATIAL_EXTENT / 32, 2 * SPATIAL_EXTENT / 32)
NORMAL, TANGENT = angle_grid(4)[0], angle_grid(4)[1]

DESIGN = """\
[meta]
moment_order = 1

[main]
center = 10
width1 = 0.01
width2 = 0.000909

[corrector]
center = 0
width1 = 1
width2 = 0.000909

[corrector]
center = 1
width1 = 1
width2 = 0.000909
"""


@pytest.fixture(scope="module")
def window_file(tmp_path_factory, window, coarse):
    path = tmp_path_factory.mktemp("windows") / "standard.window"
    save_window(window, coarse, path)
    return str(path)


@pytest.fixture(scope="module")
def probe_window_file(tmp_path_factory, probe_window, coarse):
    path = tmp_path_factory.mktemp("windows") / "probe.window"
    save_window(probe_window, coarse, path)
    return str(path)


@pytest.mark.asyncio
async def test_design(tmp_path):
    spec = tmp_path / "moment1.design"
    spec.write_text(DESIGN)
    out = tmp_path / "moment1.window"
    result = await service.design(str(spec), str(out))
    assert result["success"]
    assert result["error"] is None
    assert len(result["data"]["amplitudes"]) == 3
    assert result["data"]["amplitudes"][0] == 1.0
    assert all(abs(m) <= 1e-8 for m in result["data"]["residual_moments"])
    w, w0 = formats.load_window(out)
    assert w.moment_order == 1
    assert w0.sigma == 1e4


@pytest.mark.asyncio
async def test_design_with_duplicate_centers_fails(tmp_path):
    spec = tmp_path / "bad.design"
    spec.write_text(DESIGN.replace("center = 1\n", "center = 0\n"))
    result = await service.design(str(spec))
    assert not result["success"]
    assert result["data"] is None
    assert result["error_type"] == "DegenerateSystemError"


@pytest.mark.asyncio
async def test_missing_window_file(tmp_path):
    result = await service.certify(str(tmp_path / "none.window"), LATTICE, GRID_N, SPATIAL_EXTENT, J_MAX)
    assert not result["success"]
    assert result["error_type"] == "FileNotFoundError"


@pytest.mark.asyncio
async def test_certify_writes_certificate(tmp_path, window_file, band_certificate):
    out = tmp_path / "frame.cert"
    result = await service.certify(window_file, LATTICE, GRID_N, SPATIAL_EXTENT, J_MAX, band=FIELD_BAND, out=str(out))
    assert result["success"]
    cert = result["data"]["certificate"]
    assert cert["valid"]
    assert cert["A"] == pytest.approx(band_certificate.A, rel=1e-12)
    assert cert["bound_ratio"] == pytest.approx(band_certificate.bound_ratio, rel=1e-9)
    assert formats.load_certificate(out)["valid"] is True


@pytest.mark.asyncio
async def test_certify_rejects_degenerate_lattice(window_file):
    result = await service.certify(window_file, (1.0, 2.0, 2.0, 4.0), GRID_N, SPATIAL_EXTENT, J_MAX)
    assert not result["success"]
    assert "degenerate lattice" in result["error"]


@pytest.mark.asyncio
async def test_sweep_table(tmp_path, window_file):
    spacings = [2 * SPATIAL_EXTENT / m for m in (32, 16, 24, 20, 28)]
    out = tmp_path / "sweep.txt"
    result = await service.sweep(window_file, spacings, GRID_N, SPATIAL_EXTENT, J_MAX, out=str(out))
    assert result["success"]
    points = result["data"]["points"]
    assert [p["a"] for p in points] == sorted(spacings, reverse=True)
    assert result["data"]["fit"]["tau"] > 0.0
    assert out.read_text() == result["data"]["table"]


@pytest.mark.asyncio
async def test_analyze_then_synthesize(tmp_path, window_file):
    coefficients = tmp_path / "field.wpc"
    analyzed = await service.analyze(
        window_file, LATTICE, J_MAX, str(coefficients), grid_n=GRID_N, extent=SPATIAL_EXTENT, seed=3, band=FIELD_BAND
    )
    assert analyzed["success"]
    assert analyzed["data"]["count"] == 32 * 32 * (1 + 2 * 8 + 4 * 64)
    field = tmp_path / "field.wpf"
    synthesized = await service.synthesize(window_file, LATTICE, str(coefficients), GRID_N, SPATIAL_EXTENT, str(field))
    assert synthesized["success"]
    f = read_field(field)
    assert f.domain == "frequency"
    assert f.n == GRID_N
    assert f.norm() == pytest.approx(synthesized["data"]["norm"])


@pytest.mark.asyncio
async def test_synthesize_rejects_corrupt_coefficients(tmp_path, window_file):
    coefficients = tmp_path / "broken.wpc"
    coefficients.write_bytes(b"WPC9" + bytes(4))
    result = await service.synthesize(window_file, LATTICE, str(coefficients), GRID_N, SPATIAL_EXTENT, str(tmp_path / "x.wpf"))
    assert result["error_type"] == "FormatError"


@pytest.mark.asyncio
async def test_reconstruct(tmp_path, window_file):
    out = tmp_path / "reconstruction.wpf"
    result = await service.reconstruct(
        window_file, LATTICE, J_MAX, 0.0, grid_n=GRID_N, extent=SPATIAL_EXTENT, seed=4, band=FIELD_BAND, out=str(out)
    )
    assert result["success"]
    report = result["data"]["report"]
    assert report["within_bound"]
    assert report["relative_error"] <= report["bound"]
    assert read_field(out).n == GRID_N


@pytest.mark.asyncio
async def test_probe_report(probe_window_file):
    result = await service.probe(probe_window_file, (0.05, 0.05), (0.0, 0.0), NORMAL, (3, 4, 5))
    assert result["success"]
    assert result["data"]["rate"] <= 0.8
    assert result["data"]["usable_j_max"] == 5
    assert "log4_abs" in result["data"]["report"]


@pytest.mark.asyncio
async def test_wavefront_writes_verdict_field(tmp_path, probe_window_file):
    out = tmp_path / "verdicts.wpf"
    result = await service.wavefront(
        probe_window_file, (0.05, 0.05), (4, 5), [(0.0, 0.1), (-0.5, 0.0)], [NORMAL, TANGENT], 1.0, str(out), threshold=math.inf
    )
    assert result["success"]
    assert result["data"]["flagged"] == []
    verdicts = read_field(out)
    assert verdicts.n == 2
    assert (verdicts.samples.real == 0.0).all()


@pytest.mark.asyncio
async def test_star_norm(window_file):
    result = await service.star_norm(window_file, 64.0, 65, 2)
    assert result["success"]
    data = result["data"]
    assert data["star_norm"] > 0.0
    assert len(data["level_maxima"]) == 2
    assert data["decay"]["varsigma_requirement_met"] in (True, False)


@pytest.mark.asyncio
async def test_star_norm_with_covering_constants(window_file, monkeypatch):
    monkeypatch.setattr(settings, "symbol_grid_n", 64)
    result = await service.star_norm(window_file, 64.0, 65, settings.default_j_max, covering=True)
    assert result["success"]
    covering = result["data"]["covering"]
    assert covering["grid_n"] == 64
    assert covering["grid_extent"] == settings.symbol_extent
    assert 0.9 <= covering["A"] <= covering["B"]


@pytest.mark.asyncio
async def test_star_norm_without_covering(window_file):
    result = await service.star_norm(window_file, 64.0, 65, J_MAX)
    assert result["data"]["covering"] is None


@pytest.mark.asyncio
async def test_certify_refinement_levels(window_file, band_certificate):
    result = await service.certify(window_file, LATTICE, GRID_N, SPATIAL_EXTENT, J_MAX, band=FIELD_BAND, refine_levels=1)
    assert result["success"]
    levels = result["data"]["refinement"]
    assert [level["n"] for level in levels] == [GRID_N, 2 * GRID_N]
    assert levels[0]["A"] == pytest.approx(band_certificate.A, rel=1e-12)
    assert levels[1]["A"] <= levels[0]["A"] * (1 + 1e-12)
    assert levels[1]["B"] >= levels[0]["B"] * (1 - 1e-12)


@pytest.mark.asyncio
async def test_certify_without_refinement(window_file):
    result = await service.certify(window_file, LATTICE, GRID_N, SPATIAL_EXTENT, J_MAX, band=FIELD_BAND)
    assert result["data"]["refinement"] == []


@pytest.mark.asyncio
async def test_decay_report_follows_the_signal_normal(probe_window_file):
    turned = SignalParams(normal_angle=math.pi / 2)
    along = await service.probe(probe_window_file, (0.05, 0.05), (0.0, 0.0), TANGENT, (3, 4, 5), signal_params=turned)
    across = await service.probe(probe_window_file, (0.05, 0.05), (0.0, 0.0), NORMAL, (3, 4, 5), signal_params=turned)
    assert along["data"]["rate"] <= 0.8
    assert across["data"]["rate"] >= 3.0
    assert not along["data"]["approximate"]


@pytest.mark.slow
@pytest.mark.asyncio
async def test_decay_report_through_the_approximate_dual(probe_window_file):
    result = await service.probe(
        probe_window_file, (0.05, 0.05), (0.0, 0.0), NORMAL, (2, 3, 4), dual_eps=0.0, dual_j_max=5, band=64.0
    )
    assert result["success"]
    assert result["data"]["approximate"]
    assert "log4_abs" in result["data"]["report"]


@pytest.mark.asyncio
async def test_analyze_is_byte_deterministic(tmp_path, window_file):
    outputs = []
    for name in ("first.wpc", "second.wpc"):
        path = tmp_path / name
        result = await service.analyze(
            window_file, LATTICE, J_MAX, str(path), grid_n=GRID_N, extent=SPATIAL_EXTENT, seed=5, band=FIELD_BAND
        )
        assert result["success"]
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
