import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vrdforge import augment as aug
from vrdforge.augment import (ArtifactConfig, AugmentConfig, TraceEntry, apply_artifacts, apply_geometric,
                              apply_photometric, gaussian_blur, invert, rotate)
from vrdforge.errors import ConfigError, UnsupportedPresetError
from vrdforge.renderer import RasterImage, StyleParams, render_text

STYLE = StyleParams(0, 30, (10, 10, 10), (240, 240, 240), (8, 8, 8, 8))
rasters = hnp.arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 14), st.just(3))).map(RasterImage)


@settings(max_examples=40, deadline=None)
@given(rasters)
def test_neutral_parameters_are_identity(img):
    assert gaussian_blur(img, 0.0) == img
    assert rotate(img, 0.0) == img
    assert aug.resize_degrade(img, 1.0) == img
    assert aug.add_noise(img, 0.0, np.random.default_rng(0)) == img
    assert aug.elastic(img, 0.0, 3.0, np.random.default_rng(0)) == img


@settings(max_examples=40, deadline=None)
@given(rasters)
def test_double_inversion(img):
    assert invert(invert(img)) == img


@settings(max_examples=30, deadline=None)
@given(rasters, st.sampled_from([90, 180, 270, -90, 450]))
def test_quarter_turns_follow_coordinate_formula(img, angle):
    out = rotate(img, angle)
    c, s = aug._rot_cos_sin(angle)
    w, h = img.width, img.height
    assert (out.width, out.height) == ((h, w) if s else (w, h))
    for yo in range(out.height):
        for xo in range(out.width):
            u, v = xo + 0.5 - out.width / 2, yo + 0.5 - out.height / 2
            sx, sy = u * c - v * s + w / 2 - 0.5, u * s + v * c + h / 2 - 0.5
            assert out.pixels[yo, xo].tolist() == img.pixels[round(sy), round(sx)].tolist()


def test_ninety_degrees_explicit():
    px = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    out = rotate(RasterImage(px), 90).pixels
    w = 3
    for yo in range(3):
        for xo in range(2):
            assert out[yo, xo].tolist() == px[xo, w - 1 - yo].tolist()


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 255), st.integers(0, 2 ** 32 - 1))
def test_constant_images_stay_constant(angle, gray, seed):
    img = RasterImage.filled(17, 9, (gray,) * 3)
    out = rotate(img, angle)
    assert (out.pixels == gray).all()
    assert out.width == math.ceil(round(17 * abs(math.cos(math.radians(angle)))
                                        + 9 * abs(math.sin(math.radians(angle))), 6))
    assert (aug.elastic(img, 20.0, 3.0, np.random.default_rng(seed)).pixels == gray).all()
    assert (aug.resize_degrade(img, 0.5).pixels == gray).all()
    assert (gaussian_blur(img, 1.3).pixels == gray).all()


def test_elastic_deterministic_and_shape_preserving(fonts):
    img, _ = render_text("Deformación", STYLE, fonts)
    a = aug.elastic(img, 25.0, 4.0, np.random.default_rng(9))
    b = aug.elastic(img, 25.0, 4.0, np.random.default_rng(9))
    assert a == b and (a.width, a.height) == (img.width, img.height) and a != img


def test_box_muller_matches_textbook_form():
    n = 10001
    z = aug.box_muller(np.random.default_rng(1), n)
    rng = np.random.default_rng(1)
    m = (n + 1) // 2
    u1, u2 = 1.0 - rng.random(m), rng.random(m)
    r = np.sqrt(-2 * np.log(u1))
    want = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
    assert np.allclose(z, want, atol=1e-6)


def test_box_muller_moments():
    z = aug.box_muller(np.random.default_rng(2), 400_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


def test_mono_noise_keeps_gray_images_gray(fonts):
    img, _ = render_text("Ruido", STYLE, fonts)
    assert aug.add_noise(img, 8.0, np.random.default_rng(0)).is_gray()
    assert not aug.add_noise(img, 8.0, np.random.default_rng(0), per_channel=True).is_gray()


def test_box_artifact_geometry(fonts):
    img, layout = render_text("Cantidad", STYLE, fonts)
    px = img.pixels.copy()
    p = aug.draw_box(px, layout, stroke=2, margin=3, gray=50)
    x0, y0, x1, y1 = p["rect"]
    assert x0 <= layout.cells[0][0] - 5 and x1 >= layout.cells[-1][1] + 5
    assert y0 <= layout.band[0] and y1 >= layout.band[1]
    assert len(p["separators"]) == len(layout.cells) - 1
    assert (px[y0:y0 + 2, x0:x1] == 50).all() and (px[y1 - 2:y1, x0:x1] == 50).all()
    assert (px[y0:y1, x0:x0 + 2] == 50).all()


def test_artifact_trace_vocabulary(fonts):
    img, layout = render_text("Firma del titular", STYLE, fonts)
    cfg = ArtifactConfig(box_prob=1.0, line_prob=1.0, h_line_count_range=(2, 2), v_line_count_range=(1, 1))
    out, trace = apply_artifacts(img, layout, cfg, np.random.default_rng(0))
    assert [t.name for t in trace] == ["box", "line", "line", "line"]
    assert [t.params["orientation"] for t in trace[1:]] == ["h", "h", "v"]
    assert out != img
    out, trace = apply_artifacts(img, layout, cfg.without_artifacts(), np.random.default_rng(0))
    assert out == img and trace == []


def test_trace_names_are_checked():
    with pytest.raises(ValueError):
        TraceEntry("sharpen", {})


def test_disabled_stages_are_identity(fonts):
    img, layout = render_text("Nada cambia", STYLE, fonts)
    off = AugmentConfig.disabled()
    out, trace = aug.augment(img, layout, ArtifactConfig().without_artifacts(), off, np.random.default_rng(0))
    assert out == img and trace == []


def test_stage_order_and_forced_probabilities(fonts):
    img, layout = render_text("Todo activo", STYLE, fonts)
    on = AugmentConfig(rotate=(1.0, 2.0), noise=(1.0, (3.0, 3.0)), invert=1.0, blur=(1.0, (0.8, 0.8)),
                       elastic=(1.0, (10.0, 10.0), (3.0, 3.0)), resize_degrade=(1.0, (0.7, 0.7)))
    _, photo = apply_photometric(img, on, np.random.default_rng(0))
    assert [t.name for t in photo] == ["noise", "invert", "blur"]
    out, geo = apply_geometric(img, on, np.random.default_rng(0))
    assert [t.name for t in geo] == ["rotate", "elastic", "resize"]
    assert (out.width, out.height) == (geo[0].params["w"], geo[0].params["h"])


def test_config_from_json_lists():
    cfg = AugmentConfig(**AugmentConfig().to_json())
    assert cfg == AugmentConfig()
    cfg = AugmentConfig(noise=[0.2, [1, 2]])
    assert cfg.noise.sigma_range == (1, 2) and cfg.noise.per_channel is False


@pytest.mark.parametrize("kwargs", [dict(invert=1.5), dict(noise=(0.5, (3.0, 1.0))),
                                    dict(resize_degrade=(0.5, (0.5, 1.0))), dict(rotate=(0.5, -1.0))])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        AugmentConfig(**kwargs)
    with pytest.raises(ConfigError):
        ArtifactConfig(crop_frac_range=(0.5, 0.2))


def test_presets():
    for name in aug.PRESET_NAMES:
        aug.preset(name)
    art, au = aug.preset("none")
    assert art.box_prob == art.line_prob == art.neighbor_prob == 0.0
    assert au == AugmentConfig.disabled()
    assert aug.preset("no-elastic")[1].elastic.prob == 0.0
    assert aug.preset("no-artifacts")[1] == AugmentConfig()
    with pytest.raises(UnsupportedPresetError, match="unsupported: external generative model"):
        aug.preset("hw-generation")
    with pytest.raises(ConfigError):
        aug.preset("sepia")
