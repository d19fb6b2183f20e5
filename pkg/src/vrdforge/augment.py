"""Document artifacts and photometric / geometric augmentations.

Each stage draws only from the generator it is handed and appends what it
did to a trace. Application order is fixed: artifacts, then noise, invert,
blur, then rotate, elastic, resize. Pixel arithmetic is integer / fixed
point (see ``kernels``) so results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigError, UnsupportedPresetError
from .renderer import GlyphLayout, RasterImage

TRACE_NAMES = frozenset({
    "neighbor_crop", "box", "line",
    "noise", "invert", "blur",
    "rotate", "elastic", "resize",
})
ARTIFACT_NAMES = frozenset({"neighbor_crop", "box", "line"})


@dataclass(frozen=True)
class TraceEntry:
    name: str
    params: dict

    def __post_init__(self):
        if self.name not in TRACE_NAMES:
            raise ValueError(f"unknown augmentation {self.name!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "params": self.params}


AugmentTrace = list  # list[TraceEntry], in application order


# ---------------------------------------------------------------- configs


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {p}")


def _check_range(name, r, lo_bound=0, hi_bound=None, allow_equal=True):
    lo, hi = r
    if lo > hi or (not allow_equal and lo == hi) or lo < lo_bound or (hi_bound is not None and hi > hi_bound):
        raise ConfigError(f"{name}: invalid range ({lo}, {hi})")


@dataclass(frozen=True)
class ArtifactConfig:
    box_prob: float = 0.3
    box_stroke_range: tuple[int, int] = (1, 2)
    box_margin_range: tuple[int, int] = (1, 4)
    box_gray_range: tuple[int, int] = (0, 100)
    line_prob: float = 0.4
    h_line_count_range: tuple[int, int] = (1, 2)
    v_line_count_range: tuple[int, int] = (0, 2)
    line_thickness_range: tuple[int, int] = (1, 3)
    line_gray_range: tuple[int, int] = (0, 160)
    neighbor_prob: float = 0.3
    crop_frac_range: tuple[float, float] = (0.1, 0.45)

    def __post_init__(self):
        for name in ("box_prob", "line_prob", "neighbor_prob"):
            _check_prob(f"artifacts.{name}", getattr(self, name))
        _check_range("artifacts.box_stroke_range", self.box_stroke_range, lo_bound=1)
        _check_range("artifacts.box_margin_range", self.box_margin_range)
        _check_range("artifacts.box_gray_range", self.box_gray_range, hi_bound=255)
        _check_range("artifacts.h_line_count_range", self.h_line_count_range)
        _check_range("artifacts.v_line_count_range", self.v_line_count_range)
        _check_range("artifacts.line_thickness_range", self.line_thickness_range, lo_bound=1)
        _check_range("artifacts.line_gray_range", self.line_gray_range, hi_bound=255)
        _check_range("artifacts.crop_frac_range", self.crop_frac_range, hi_bound=1)

    def without_artifacts(self) -> "ArtifactConfig":
        return replace(self, box_prob=0.0, line_prob=0.0, neighbor_prob=0.0)


class Rotate(NamedTuple):
    prob: float = 0.5
    max_degrees: float = 3.0


class Noise(NamedTuple):
    prob: float = 0.5
    sigma_range: tuple[float, float] = (2.0, 12.0)
    per_channel: bool = False  # False: one deviate per pixel, shared by R, G and B


class Blur(NamedTuple):
    prob: float = 0.5
    sigma_range: tuple[float, float] = (0.5, 1.5)


class Elastic(NamedTuple):
    prob: float = 0.5
    alpha_range: tuple[float, float] = (8.0, 34.0)
    smooth_sigma_range: tuple[float, float] = (3.0, 5.0)


class ResizeDegrade(NamedTuple):
    prob: float = 0.5
    scale_range: tuple[float, float] = (0.5, 0.9)


@dataclass(frozen=True)
class AugmentConfig:
    rotate: Rotate = Rotate()
    noise: Noise = Noise()
    invert: float = 0.1
    blur: Blur = Blur()
    elastic: Elastic = Elastic()
    resize_degrade: ResizeDegrade = ResizeDegrade()

    def __post_init__(self):
        # accept plain lists / dicts (from JSON) for the grouped fields
        for f in fields(self):
            if f.name == "invert":
                continue
            value = getattr(self, f.name)
            typ = type(f.default)
            if not isinstance(value, typ):
                value = typ(**value) if isinstance(value, dict) else typ(*value)
            value = typ(*(tuple(v) if isinstance(v, list) else v for v in value))
            object.__setattr__(self, f.name, value)
        _check_prob("augment.invert", self.invert)
        for name in ("rotate", "noise", "blur", "elastic", "resize_degrade"):
            _check_prob(f"augment.{name}.prob", getattr(self, name).prob)
        if self.rotate.max_degrees < 0:
            raise ConfigError("augment.rotate.max_degrees must be non-negative")
        _check_range("augment.noise.sigma_range", self.noise.sigma_range)
        _check_range("augment.blur.sigma_range", self.blur.sigma_range)
        _check_range("augment.elastic.alpha_range", self.elastic.alpha_range)
        _check_range("augment.elastic.smooth_sigma_range", self.elastic.smooth_sigma_range)
        lo, hi = self.resize_degrade.scale_range
        if not 0.0 < lo <= hi < 1.0:
            raise ConfigError(f"augment.resize_degrade.scale_range must lie in (0, 1), got ({lo}, {hi})")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(Rotate(0.0), Noise(0.0), 0.0, Blur(0.0), Elastic(0.0), ResizeDegrade(0.0))

    def to_json(self) -> dict:
        return {f.name: (getattr(self, f.name) if f.name == "invert" else getattr(self, f.name)._asdict())
                for f in fields(self)}


def artifact_config_to_json(cfg: ArtifactConfig) -> dict:
    return asdict(cfg)


# ---------------------------------------------------------------- presets

PRESET_NAMES = ("comprehensive", "none", "no-elastic", "no-artifacts")
UNSUPPORTED_PRESETS = {"hw-generation": "unsupported: external generative model"}


def preset(name: str, artifacts: ArtifactConfig | None = None,
           augment: AugmentConfig | None = None) -> tuple[ArtifactConfig, AugmentConfig]:
    """Named ablation configuration derived from a comprehensive base."""
    artifacts = artifacts or ArtifactConfig()
    augment = augment or AugmentConfig()
    if name == "comprehensive":
        return artifacts, augment
    if name == "none":
        return artifacts.without_artifacts(), AugmentConfig.disabled()
    if name == "no-elastic":
        return artifacts, replace(augment, elastic=augment.elastic._replace(prob=0.0))
    if name == "no-artifacts":
        return artifacts.without_artifacts(), augment
    if name in UNSUPPORTED_PRESETS:
        raise UnsupportedPresetError(f"preset {name!r}: {UNSUPPORTED_PRESETS[name]}")
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


# ---------------------------------------------------------------- primitives


def _randint(rng, lo, hi):
    return int(rng.integers(lo, hi + 1))


def _uniform(rng, lo, hi):
    return float(lo + (hi - lo) * rng.random())


def gaussian_kernel_q16(sigma: float) -> np.ndarray:
    """Gaussian taps over radius ceil(3 sigma), Q16, summing to exactly 65536."""
    if sigma <= 0:
        return np.array([1 << 16], dtype=np.int64)
    radius = int(math.ceil(3.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    w /= w.sum()
    q = np.floor(w * 65536.0 + 0.5).astype(np.int64)
    q[radius] += (1 << 16) - int(q.sum())
    return q


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    q = gaussian_kernel_q16(sigma)
    if len(q) == 1:
        return img.copy()
    out = kernels.convolve_separable(img.pixels.astype(np.int32), q)
    return RasterImage(np.clip(out, 0, 255).astype(np.uint8))


def invert(img: RasterImage) -> RasterImage:
    return RasterImage(255 - img.pixels)


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` standard normal deviates from uniform draws.

    The sine is recovered from the cosine (sign from the half-turn), which
    saves one transcendental per pair.
    """
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    c = np.cos(2.0 * np.pi * u2)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    s[u2 >= 0.5] *= -1.0
    out = np.empty(2 * m)
    np.multiply(r, c, out=out[:m])
    np.multiply(r, s, out=out[m:])
    return out[:n]


def add_noise(img: RasterImage, sigma: float, rng: np.random.Generator,
              per_channel: bool = False) -> RasterImage:
    """Additive Gaussian noise, rounded and clipped to 0..255."""
    px = img.pixels
    if per_channel:
        z = (box_muller(rng, px.size) * sigma).astype(np.float32).reshape(px.shape)
    else:
        z = (box_muller(rng, px.shape[0] * px.shape[1]) * sigma).astype(np.float32)
        z = np.repeat(z.reshape(px.shape[0], px.shape[1], 1), 3, axis=2)
    z += px
    np.rint(z, out=z)
    np.clip(z, 0, 255, out=z)
    return RasterImage(z.astype(np.uint8))


def _q8(a: np.ndarray) -> np.ndarray:
    return np.floor(a * 256.0 + 0.5).astype(np.int32)


def border_fill(img: RasterImage) -> tuple[int, int, int]:
    """Per-channel median of the outermost pixel ring."""
    px = img.pixels
    ring = np.concatenate((px[0], px[-1], px[:, 0], px[:, -1]))
    return tuple(int(v) for v in np.median(ring, axis=0).round())


def _rot_cos_sin(angle_deg: float) -> tuple[float, float]:
    quarter = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}
    if float(angle_deg).is_integer() and int(angle_deg) % 90 == 0:
        return quarter[int(angle_deg) % 360]
    rad = math.radians(angle_deg)
    return math.cos(rad), math.sin(rad)


def rotate(img: RasterImage, angle_deg: float, fill=None) -> RasterImage:
    """Counter-clockwise rotation about the center on an enlarged canvas.

    Exact multiples of 90 degrees use exact sines, so they are pure pixel
    permutations.
    """
    c, s = _rot_cos_sin(angle_deg)
    w, h = img.width, img.height
    new_w = max(1, math.ceil(round(w * abs(c) + h * abs(s), 6)))
    new_h = max(1, math.ceil(round(w * abs(s) + h * abs(c), 6)))
    u = np.arange(new_w, dtype=np.float64) + 0.5 - new_w / 2.0
    v = np.arange(new_h, dtype=np.float64) + 0.5 - new_h / 2.0
    uu, vv = np.meshgrid(u, v)
    src_x = uu * c - vv * s + w / 2.0 - 0.5
    src_y = uu * s + vv * c + h / 2.0 - 0.5
    fill = border_fill(img) if fill is None else fill
    out = kernels.remap_bilinear(img.pixels, _q8(src_x), _q8(src_y), np.asarray(fill, dtype=np.uint8))
    return RasterImage(out)


def elastic(img: RasterImage, alpha: float, smooth_sigma: float, rng: np.random.Generator) -> RasterImage:
    """Warp by a smoothed random displacement field.

    Uniform integer noise in [-32767, 32767] (one plane per axis) is smoothed
    with the fixed-point Gaussian, rescaled to [-1, 1] units and multiplied by
    ``alpha`` pixels.
    """
    h, w = img.height, img.width
    field_ = rng.integers(-32767, 32768, size=(h, w, 2), dtype=np.int32)
    smooth = kernels.convolve_separable(field_, gaussian_kernel_q16(smooth_sigma))
    scale = alpha / 32767.0
    xs = np.arange(w, dtype=np.float64)[None, :]
    ys = np.arange(h, dtype=np.float64)[:, None]
    map_x = _q8(xs + smooth[..., 0] * scale)
    map_y = _q8(ys + smooth[..., 1] * scale)
    return RasterImage(kernels.remap_bilinear(img.pixels, map_x, map_y, None))


def _resample(px: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    h, w = px.shape[:2]
    xs = (np.arange(new_w, dtype=np.float64) + 0.5) * (w / new_w) - 0.5
    ys = (np.arange(new_h, dtype=np.float64) + 0.5) * (h / new_h) - 0.5
    map_x = np.broadcast_to(_q8(xs)[None, :], (new_h, new_w))
    map_y = np.broadcast_to(_q8(ys)[:, None], (new_h, new_w))
    return kernels.remap_bilinear(px, map_x, map_y, None)


def resize_degrade(img: RasterImage, scale: float) -> RasterImage:
    """Bilinear downscale by ``scale`` then back up to the original size."""
    w, h = img.width, img.height
    small = _resample(img.pixels, max(1, round(w * scale)), max(1, round(h * scale)))
    return RasterImage(_resample(small, w, h))


# ---------------------------------------------------------------- artifacts


def _separator_positions(cells) -> list[int]:
    xs = []
    for (_, a1), (b0, _) in zip(cells, cells[1:]):
        xs.append(a1 if a1 == b0 else (a1 + b0) // 2)
    return xs


def draw_box(px: np.ndarray, layout: GlyphLayout, stroke: int, margin: int, gray: int) -> dict:
    """Comb field: rectangle around the glyph band plus per-character separators."""
    h, w = px.shape[:2]
    pad = margin + stroke
    x0 = max(0, layout.cells[0][0] - pad)
    x1 = min(w, layout.cells[-1][1] + pad)
    y0 = max(0, layout.band[0] - pad)
    y1 = min(h, layout.band[1] + pad)
    px[y0:min(y1, y0 + stroke), x0:x1] = gray
    px[max(y0, y1 - stroke):y1, x0:x1] = gray
    px[y0:y1, x0:min(x1, x0 + stroke)] = gray
    px[y0:y1, max(x0, x1 - stroke):x1] = gray
    seps = _separator_positions(layout.cells)
    for x in seps:
        left = max(0, x - stroke // 2)
        px[y0:y1, left:min(w, left + stroke)] = gray
    return {"rect": [x0, y0, x1, y1], "stroke": stroke, "gray": gray, "separators": seps}


def apply_artifacts(img: RasterImage, layout: GlyphLayout, cfg: ArtifactConfig,
                    rng: np.random.Generator) -> tuple[RasterImage, AugmentTrace]:
    trace: AugmentTrace = []
    px = None
    if rng.random() < cfg.box_prob and layout.cells:
        px = img.pixels.copy()
        params = draw_box(px, layout,
                          _randint(rng, *cfg.box_stroke_range),
                          _randint(rng, *cfg.box_margin_range),
                          _randint(rng, *cfg.box_gray_range))
        trace.append(TraceEntry("box", params))
    if rng.random() < cfg.line_prob:
        if px is None:
            px = img.pixels.copy()
        h, w = px.shape[:2]
        n_h = _randint(rng, *cfg.h_line_count_range)
        n_v = _randint(rng, *cfg.v_line_count_range)
        for orientation, count, extent in (("h", n_h, h), ("v", n_v, w)):
            for _ in range(count):
                thickness = min(_randint(rng, *cfg.line_thickness_range), extent)
                pos = _randint(rng, 0, extent - thickness)
                gray = _randint(rng, *cfg.line_gray_range)
                if orientation == "h":
                    px[pos:pos + thickness, :] = gray
                else:
                    px[:, pos:pos + thickness] = gray
                trace.append(TraceEntry("line", {"orientation": orientation, "pos": pos,
                                                 "thickness": thickness, "gray": gray}))
    return (RasterImage(px) if px is not None else img), trace


def apply_photometric(img: RasterImage, cfg: AugmentConfig,
                      rng: np.random.Generator) -> tuple[RasterImage, AugmentTrace]:
    trace: AugmentTrace = []
    if rng.random() < cfg.noise.prob:
        sigma = _uniform(rng, *cfg.noise.sigma_range)
        img = add_noise(img, sigma, rng, cfg.noise.per_channel)
        trace.append(TraceEntry("noise", {"sigma": sigma, "per_channel": cfg.noise.per_channel}))
    if rng.random() < cfg.invert:
        img = invert(img)
        trace.append(TraceEntry("invert", {}))
    if rng.random() < cfg.blur.prob:
        sigma = _uniform(rng, *cfg.blur.sigma_range)
        img = gaussian_blur(img, sigma)
        trace.append(TraceEntry("blur", {"sigma": sigma, "radius": math.ceil(3 * sigma)}))
    return img, trace


def apply_geometric(img: RasterImage, cfg: AugmentConfig, rng: np.random.Generator,
                    fill=None) -> tuple[RasterImage, AugmentTrace]:
    """Rotate, elastic warp, resize degradation; ``fill`` defaults to the border color."""
    trace: AugmentTrace = []
    if rng.random() < cfg.rotate.prob:
        angle = _uniform(rng, -cfg.rotate.max_degrees, cfg.rotate.max_degrees)
        fill_rgb = border_fill(img) if fill is None else tuple(fill)
        img = rotate(img, angle, fill_rgb)
        trace.append(TraceEntry("rotate", {"degrees": angle, "fill": list(fill_rgb),
                                           "w": img.width, "h": img.height}))
    if rng.random() < cfg.elastic.prob:
        alpha = _uniform(rng, *cfg.elastic.alpha_range)
        sigma = _uniform(rng, *cfg.elastic.smooth_sigma_range)
        img = elastic(img, alpha, sigma, rng)
        trace.append(TraceEntry("elastic", {"alpha": alpha, "smooth_sigma": sigma}))
    if rng.random() < cfg.resize_degrade.prob:
        scale = _uniform(rng, *cfg.resize_degrade.scale_range)
        img = resize_degrade(img, scale)
        trace.append(TraceEntry("resize", {"scale": scale}))
    return img, trace


def augment(img: RasterImage, layout: GlyphLayout, artifact_cfg: ArtifactConfig,
            augment_cfg: AugmentConfig, rng: np.random.Generator,
            photometric_rng: np.random.Generator | None = None,
            geometric_rng: np.random.Generator | None = None) -> tuple[RasterImage, AugmentTrace]:
    """Artifacts, then photometric, then geometric.

    The optional per-stage generators let callers keep stages independent
    (toggling one family then leaves the draws of the others unchanged).
    """
    img, trace = apply_artifacts(img, layout, artifact_cfg, rng)
    img, t2 = apply_photometric(img, augment_cfg, photometric_rng or rng)
    img, t3 = apply_geometric(img, augment_cfg, geometric_rng or rng)
    return img, trace + t2 + t3
