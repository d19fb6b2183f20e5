"""Font pool, style sampling and single-line text rasterization."""
from __future__ import annotations

import io
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import ConfigError, FontLoadError, RenderError, StyleSpaceError

SPANISH_CHARSET = frozenset(chr(c) for c in range(0x21, 0x7F)) | frozenset("áéíóúüñÁÉÍÓÚÜÑ¿¡")
FONT_SUFFIXES = (".ttf", ".otf")
DEFAULT_FONT_DIRS = ("/usr/share/fonts", "/usr/local/share/fonts", "~/.fonts")
MAX_STYLE_ATTEMPTS = 100


def luma(rgb) -> float:
    r, g, b = rgb
    return 0.299 * r + 0.587 * g + 0.114 * b


# ---------------------------------------------------------------- images


@dataclass(eq=False)
class RasterImage:
    """RGB 8-bit image; ``pixels`` is a C-contiguous (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty (h, w, 3) array, got {px.shape}")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, "RGB")

    def is_gray(self) -> bool:
        px = self.pixels
        return bool(np.array_equal(px[..., 0], px[..., 1]) and np.array_equal(px[..., 1], px[..., 2]))

    def to_png(self, compress_level: int = 1) -> bytes:
        """PNG bytes; equal-channel images are stored as 8-bit grayscale, losslessly."""
        buf = io.BytesIO()
        im = Image.fromarray(self.pixels[..., 0].copy(), "L") if self.is_gray() else self.to_pil()
        im.save(buf, format="PNG", compress_level=compress_level)
        return buf.getvalue()

    @classmethod
    def from_png(cls, data: bytes) -> "RasterImage":
        with Image.open(io.BytesIO(data)) as im:
            return cls(np.asarray(im.convert("RGB")))

    @classmethod
    def filled(cls, width: int, height: int, rgb) -> "RasterImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = rgb
        return cls(px)


# ---------------------------------------------------------------- fonts


@dataclass(frozen=True)
class CoverageReport:
    name: str
    missing: frozenset
    n_glyphs: int

    @property
    def admitted(self) -> bool:
        return not self.missing


def read_cmap(data: bytes, name: str = "<memory>") -> frozenset:
    """Unicode scalars mapped by the font's best cmap subtable."""
    from fontTools.ttLib import TTFont

    try:
        with TTFont(io.BytesIO(data), lazy=True, fontNumber=0) as tt:
            cmap = tt.getBestCmap()
    except Exception as exc:  # fontTools raises assorted types on corrupt data
        raise FontLoadError(f"cannot parse font {name}: {exc}") from exc
    if cmap is None:
        raise FontLoadError(f"font {name} has no Unicode cmap")
    return frozenset(chr(cp) for cp in cmap)


def validate_font_coverage(face, charset=SPANISH_CHARSET, name: str | None = None) -> CoverageReport:
    """Report which characters of ``charset`` the face has no glyph for.

    ``face`` is a path or raw font bytes.
    """
    if isinstance(face, (str, os.PathLike)):
        name = name or Path(face).name
        try:
            data = Path(face).read_bytes()
        except OSError as exc:
            raise FontLoadError(f"cannot read font {name}: {exc}") from exc
    else:
        data = bytes(face)
        name = name or "<memory>"
    coverage = read_cmap(data, name)
    missing = frozenset(ch for ch in charset if ch not in coverage)
    return CoverageReport(name, missing, len(coverage))


@dataclass(frozen=True)
class FontFace:
    font_id: int
    name: str
    data: bytes = field(repr=False)
    coverage: frozenset = field(repr=False)

    def covers(self, text: str) -> bool:
        return all(ch in self.coverage or ch.isspace() for ch in text)


def default_font_dir() -> Path | None:
    env = os.environ.get("VRDFORGE_FONTS")
    if env:
        return Path(env)
    for d in DEFAULT_FONT_DIRS:
        p = Path(d).expanduser()
        if p.is_dir():
            return p
    return None


class FontPool:
    """Immutable list of validated faces plus per-thread FreeType caches."""

    def __init__(self, faces, manifest=None, charset=SPANISH_CHARSET):
        if not faces:
            raise FontLoadError("font pool is empty")
        self.faces = tuple(faces)
        self.manifest = list(manifest or [])
        self.charset = frozenset(charset)
        self._local = threading.local()

    @classmethod
    def from_paths(cls, paths, charset=SPANISH_CHARSET, root=None):
        faces, manifest = [], []
        for path in paths:
            path = Path(path)
            name = str(path.relative_to(root)) if root else path.name
            try:
                data = path.read_bytes()
                coverage = read_cmap(data, name)
            except (OSError, FontLoadError) as exc:
                manifest.append({"file": name, "status": "unreadable", "error": str(exc)})
                continue
            missing = sorted(ch for ch in charset if ch not in coverage)
            if missing:
                manifest.append({"file": name, "status": "rejected", "missing": "".join(missing)})
                continue
            manifest.append({"file": name, "status": "admitted", "font_id": len(faces)})
            faces.append(FontFace(len(faces), name, data, coverage))
        if not faces:
            raise FontLoadError(f"no font covering the charset among {len(manifest)} candidates")
        return cls(faces, manifest, charset)

    @classmethod
    def from_directory(cls, directory=None, charset=SPANISH_CHARSET, limit: int | None = None):
        directory = Path(directory) if directory else default_font_dir()
        if directory is None or not directory.is_dir():
            raise FontLoadError(f"font directory not found: {directory}")
        paths = sorted(p for p in directory.rglob("*") if p.suffix.lower() in FONT_SUFFIXES)
        pool = cls.from_paths(paths, charset, root=directory)
        if limit is not None:
            pool = cls(pool.faces[:limit], pool.manifest, charset)
        return pool

    def __len__(self):
        return len(self.faces)

    def __getstate__(self):
        return {"faces": self.faces, "manifest": self.manifest, "charset": self.charset}

    def __setstate__(self, state):
        self.__init__(state["faces"], state["manifest"], state["charset"])

    def covers(self, text: str) -> bool:
        return all(f.covers(text) for f in self.faces)

    def font(self, font_id: int, size: int) -> ImageFont.FreeTypeFont:
        cache = getattr(self._local, "fonts", None)
        if cache is None:
            cache = self._local.fonts = {}
        key = (font_id, size)
        f = cache.get(key)
        if f is None:
            face = self.faces[font_id]
            try:
                f = ImageFont.truetype(io.BytesIO(face.data), size, layout_engine=ImageFont.Layout.BASIC)
            except OSError as exc:
                raise FontLoadError(f"cannot load font {face.name}: {exc}") from exc
            cache[key] = f
        return f

    def prefix_lengths(self, font_id: int, size: int, text: str) -> list[float]:
        """``getlength(text[:i])`` for every ``i``, from cached char and pair advances."""
        cache = getattr(self._local, "advances", None)
        if cache is None:
            cache = self._local.advances = {}
        table = cache.setdefault((font_id, size), {})
        font = self.font(font_id, size)
        out = [0.0]
        prev = None
        for ch in text:
            step = table.get(ch)
            if step is None:
                step = table[ch] = font.getlength(ch)
            if prev is not None:
                pair = prev + ch
                kern = table.get(pair)
                if kern is None:
                    kern = table[pair] = font.getlength(pair) - table[prev] - step
                step += kern
            out.append(out[-1] + step)
            prev = ch
        return out

    def line_height(self, font_id: int, size: int) -> int:
        ascent, descent = self.font(font_id, size).getmetrics()
        return ascent + descent

    def size_for_line_height(self, font_id: int, px: int) -> int:
        """Largest font size whose line height does not exceed ``px``."""
        cache = getattr(self._local, "sizes", None)
        if cache is None:
            cache = self._local.sizes = {}
        key = (font_id, px)
        if key not in cache:
            lo, hi = 1, max(2, px * 2)
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if self.line_height(font_id, mid) <= px:
                    lo = mid
                else:
                    hi = mid - 1
            cache[key] = lo
        return cache[key]


# ---------------------------------------------------------------- styles


@dataclass(frozen=True)
class StyleParams:
    font_id: int
    font_size: int
    text_color: tuple[int, int, int]
    background_color: tuple[int, int, int]
    padding: tuple[int, int, int, int]  # top, right, bottom, left

    def to_json(self, pool: FontPool | None = None) -> dict:
        return {
            "font": pool.faces[self.font_id].name if pool else self.font_id,
            "size": self.font_size,
            "text_rgb": list(self.text_color),
            "bg_rgb": list(self.background_color),
            "padding": list(self.padding),
        }


@dataclass(frozen=True)
class StyleSpace:
    """Ranges are inclusive integer bounds.

    In ``gray`` color mode text and background are gray levels drawn from
    their own ranges (dark ink on light paper by default); ``rgb`` mode draws
    every channel of both colors uniformly from 0..255. ``line_height``, when
    set, overrides the font size so each font's line box is at most that
    many pixels tall.
    """

    font_size_range: tuple[int, int] = (24, 64)
    padding_range: tuple[int, int] = (2, 20)
    color_mode: str = "gray"
    text_gray_range: tuple[int, int] = (0, 90)
    background_gray_range: tuple[int, int] = (165, 255)
    min_contrast: float = 60.0
    line_height: int | None = None

    def __post_init__(self):
        for name in ("font_size_range", "padding_range", "text_gray_range", "background_gray_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"style.{name}: empty or negative range ({lo}, {hi})")
        if self.font_size_range[0] < 1:
            raise ConfigError("style.font_size_range must be positive")
        if max(self.text_gray_range[1], self.background_gray_range[1]) > 255:
            raise ConfigError("style gray ranges must lie within 0..255")
        if self.color_mode not in ("gray", "rgb"):
            raise ConfigError(f"style.color_mode must be 'gray' or 'rgb', got {self.color_mode!r}")
        if self.line_height is not None and self.line_height < 2:
            raise ConfigError("style.line_height must be at least 2")


def _randint(rng, lo, hi):
    return int(rng.integers(lo, hi + 1))


def sample_style(space: StyleSpace, pool: FontPool, rng: np.random.Generator) -> StyleParams:
    font_id = _randint(rng, 0, len(pool) - 1)
    if space.line_height is not None:
        size = pool.size_for_line_height(font_id, space.line_height)
    else:
        size = _randint(rng, *space.font_size_range)
    padding = tuple(_randint(rng, *space.padding_range) for _ in range(4))
    for _ in range(MAX_STYLE_ATTEMPTS):
        if space.color_mode == "gray":
            t = _randint(rng, *space.text_gray_range)
            b = _randint(rng, *space.background_gray_range)
            text_rgb, bg_rgb = (t, t, t), (b, b, b)
        else:
            c = rng.integers(0, 256, 6)
            text_rgb, bg_rgb = tuple(int(v) for v in c[:3]), tuple(int(v) for v in c[3:])
        if abs(luma(text_rgb) - luma(bg_rgb)) >= space.min_contrast:
            return StyleParams(font_id, size, text_rgb, bg_rgb, padding)
    raise StyleSpaceError(
        f"no color pair reached contrast {space.min_contrast} in {MAX_STYLE_ATTEMPTS} attempts"
    )


# ---------------------------------------------------------------- rendering


@dataclass(frozen=True)
class GlyphLayout:
    """Geometry of a rendered line, in canvas pixel coordinates.

    ``cells`` holds one ``(x0, x1)`` advance span per non-whitespace
    character. ``band`` is the ink extent ``(top, bottom)``, bottom
    exclusive. ``line_box`` is ``(left, top, right, bottom)`` of the
    unpadded line.
    """

    chars: tuple[str, ...]
    cells: tuple[tuple[int, int], ...]
    band: tuple[int, int]
    line_box: tuple[int, int, int, int]
    neighbors: tuple = ()

    @property
    def boundaries(self) -> list[int]:
        out = []
        for x0, x1 in self.cells:
            out.extend((x0, x1))
        return out


def _check_renderable(text: str, style: StyleParams, pool: FontPool):
    if not text or not text.strip():
        raise RenderError("cannot render empty text")
    face = pool.faces[style.font_id]
    for ch in text:
        if not ch.isspace() and ch not in face.coverage:
            raise RenderError(f"font {face.name} has no glyph for {ch!r} (U+{ord(ch):04X})")


def _line_mask(text: str, font, width: int, height: int, x: int, y: int) -> np.ndarray:
    im = Image.new("L", (width, height), 0)
    ImageDraw.Draw(im).text((x, y), text, fill=255, font=font, anchor="la")
    return np.asarray(im, dtype=np.uint8)


def _blend(canvas: np.ndarray, alpha: np.ndarray, rgb) -> None:
    """In-place integer alpha blend of a solid color through ``alpha``."""
    ys, xs = np.nonzero(alpha)
    a = alpha[ys, xs].astype(np.int32)[:, None]
    fg = np.asarray(rgb, dtype=np.int32)
    canvas[ys, xs] = ((canvas[ys, xs].astype(np.int32) * (255 - a) + fg * a + 127) // 255).astype(np.uint8)


def _blend_solid(alpha: np.ndarray, bg, fg) -> np.ndarray:
    """Blend over a uniform ``bg`` canvas via per-channel lookup tables."""
    a = np.arange(256, dtype=np.int32)[:, None]
    lut = ((np.asarray(bg, dtype=np.int32) * (255 - a) + np.asarray(fg, dtype=np.int32) * a + 127)
           // 255).astype(np.uint8)
    return lut[alpha]


def _ink_rows(mask: np.ndarray) -> tuple[int, int] | None:
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    return int(rows[0]), int(rows[-1]) + 1


def render_text(text: str, style: StyleParams, pool: FontPool) -> tuple[RasterImage, GlyphLayout]:
    """Draw ``text`` on one baseline over a solid background.

    Ink is clipped to the unpadded line box, so the padding frame holds only
    the background color.
    """
    _check_renderable(text, style, pool)
    font = pool.font(style.font_id, style.font_size)
    top, right, bottom, left = style.padding
    ascent, descent = font.getmetrics()
    line_h = ascent + descent
    advance = max(1, math.ceil(font.getlength(text)))
    width, height = advance + left + right, line_h + top + bottom

    mask = _line_mask(text, font, width, height, left, top)
    clipped = np.zeros_like(mask)
    clipped[top:top + line_h, left:left + advance] = mask[top:top + line_h, left:left + advance]

    px = _blend_solid(clipped, style.background_color, style.text_color)

    prefix = pool.prefix_lengths(style.font_id, style.font_size, text)
    chars, cells = [], []
    prev_end = left
    for i, ch in enumerate(text):
        if ch.isspace():
            continue
        x0 = max(prev_end, left + round(prefix[i]))
        x1 = max(x0 + 1, left + round(prefix[i + 1]))
        chars.append(ch)
        cells.append((x0, x1))
        prev_end = x1
    band = _ink_rows(clipped) or (top, top + line_h)
    layout = GlyphLayout(tuple(chars), tuple(cells), band, (left, top, left + advance, top + line_h))
    return RasterImage(px), layout


def render_with_neighbors(text: str, neighbor_above: str | None, neighbor_below: str | None,
                          style: StyleParams, crop_fracs: tuple[float, float],
                          pool: FontPool) -> tuple[RasterImage, GlyphLayout]:
    """Render ``text`` with slivers of adjacent lines leaking into the padding.

    The bottom ``crop_fracs[0]`` of the above line's ink band is pasted at
    the top edge, the top ``crop_fracs[1]`` of the below line's band at the
    bottom edge. A sliver never exceeds the padding on its side, so the main
    glyph band is untouched.
    """
    for frac in crop_fracs:
        if not 0.0 <= frac <= 1.0:
            raise ConfigError(f"crop fraction {frac} outside [0, 1]")
    img, layout = render_text(text, style, pool)
    font = pool.font(style.font_id, style.font_size)
    top, _, bottom, left = style.padding
    line_h = layout.line_box[3] - layout.line_box[1]
    px = img.pixels
    placed = []
    for side, neighbor, frac, room in (("above", neighbor_above, crop_fracs[0], top),
                                       ("below", neighbor_below, crop_fracs[1], bottom)):
        if not neighbor or frac <= 0.0 or room <= 0:
            continue
        _check_renderable(neighbor, style, pool)
        nmask = _line_mask(neighbor, font, img.width, line_h, left, 0)
        ink = _ink_rows(nmask)
        if ink is None:
            continue
        n_top, n_bottom = ink
        visible = min(int(round(frac * (n_bottom - n_top))), room)
        if visible <= 0:
            continue
        if side == "above":
            sliver, rows = nmask[n_bottom - visible:n_bottom], (0, visible)
        else:
            sliver, rows = nmask[n_top:n_top + visible], (img.height - visible, img.height)
        _blend(px[rows[0]:rows[1]], sliver, style.text_color)
        placed.append({"side": side, "text": neighbor, "rows": list(rows)})
    if placed:
        layout = GlyphLayout(layout.chars, layout.cells, layout.band, layout.line_box, tuple(placed))
    return RasterImage(px), layout
