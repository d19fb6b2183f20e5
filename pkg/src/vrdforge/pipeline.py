"""Deterministic sample generation, parallel streaming and persistence.

Every random decision for sample ``i`` comes from streams derived from
``(master_seed, i + epoch_offset)``, so output keyed by id does not depend
on the number of workers or on emission order.
"""
from __future__ import annotations

import collections
import json
import logging
import multiprocessing as mp
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import kernels, seeding
from .augment import ArtifactConfig, AugmentConfig, TraceEntry, apply_artifacts, apply_geometric, apply_photometric
from .corpus import DEFAULT_MAX_CHARS, FixedWordCount, LengthDistribution, Sentence, make_sampler
from .errors import ConfigError, DataError, EmptyCorpusError, GenerationError, VrdForgeError
from .renderer import FontPool, RasterImage, StyleParams, StyleSpace, render_with_neighbors, sample_style

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
RUN_SIDECAR_NAME = "run.json"


@dataclass
class GenerationJob:
    master_seed: int
    n_samples: int
    pool: Sequence[Sentence]
    fonts: FontPool
    style: StyleSpace = field(default_factory=StyleSpace)
    artifacts: ArtifactConfig = field(default_factory=ArtifactConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    length: LengthDistribution | FixedWordCount | None = None
    output_mode: str = "stream"
    epoch_offset: int = 0
    max_chars: int = DEFAULT_MAX_CHARS

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be at least 1, got {self.n_samples}")
        if self.output_mode not in ("stream", "persist"):
            raise ConfigError(f"output_mode must be 'stream' or 'persist', got {self.output_mode!r}")
        pool = tuple(s for s in self.pool if s.char_count <= self.max_chars)
        renderable = tuple(s for s in pool if self.fonts.covers(s.text))
        self.n_dropped = len(self.pool) - len(renderable)
        if not renderable:
            raise EmptyCorpusError("no corpus sentence is renderable within the length cap by every font")
        if self.n_dropped:
            log.info("dropped %d corpus sentences (too long or glyphs missing)", self.n_dropped)
        self.pool = renderable
        if self.length is None:
            self.length = LengthDistribution("char_count", (((0, self.max_chars), 1.0),))
        self.sampler = make_sampler(self.pool, self.length)

    def sentence_for(self, index: int) -> Sentence:
        rng = seeding.derive_stream(self.master_seed, index + self.epoch_offset, seeding.STAGE_TEXT)
        return self.sampler.draw(rng, 1)[0]


@dataclass(eq=False)
class LabeledSample:
    id: int
    image: RasterImage
    ground_truth: str
    trace: list
    style: StyleParams
    seed_index: int
    font_name: str = ""
    _png: bytes | None = field(default=None, repr=False)

    def png(self) -> bytes:
        if self._png is None:
            self._png = self.image.to_png()
        return self._png

    def header(self) -> dict:
        """Manifest record without the image path."""
        style = self.style.to_json()
        style["font"] = self.font_name
        return {
            "id": self.id,
            "text": self.ground_truth,
            "w": self.image.width,
            "h": self.image.height,
            "seed_index": self.seed_index,
            "style": style,
            "trace": [t.to_json() for t in self.trace],
        }

    def record(self, image_path: str) -> dict:
        rec = self.header()
        return {"id": rec.pop("id"), "text": rec.pop("text"), "image": image_path, **rec}


def _neighbors(job: GenerationJob, rng):
    """Optional above / below texts and their visible crop fractions."""
    cfg = job.artifacts
    if not rng.random() < cfg.neighbor_prob:
        return None, None, (0.0, 0.0)
    which = int(rng.integers(0, 3))  # 0 above, 1 below, 2 both
    lo, hi = cfg.crop_frac_range
    texts, fracs = [None, None], [0.0, 0.0]
    for side in (0, 1):
        if which in (side, 2):
            texts[side] = job.pool[int(rng.integers(0, len(job.pool)))].text
            fracs[side] = float(lo + (hi - lo) * rng.random())
    return texts[0], texts[1], tuple(fracs)


def generate_sample(sentence: Sentence, job: GenerationJob, index: int) -> LabeledSample:
    seed_index = index + job.epoch_offset
    try:
        def stream(stage):
            return seeding.derive_stream(job.master_seed, seed_index, stage)

        style = sample_style(job.style, job.fonts, stream(seeding.STAGE_STYLE))
        above, below, fracs = _neighbors(job, stream(seeding.STAGE_NEIGHBOR))
        img, layout = render_with_neighbors(sentence.text, above, below, style, fracs, job.fonts)
        trace = [TraceEntry("neighbor_crop", {**n, "frac": fracs[0 if n["side"] == "above" else 1]})
                 for n in layout.neighbors]
        img, t = apply_artifacts(img, layout, job.artifacts, stream(seeding.STAGE_ARTIFACTS))
        trace += t
        img, t = apply_photometric(img, job.augment, stream(seeding.STAGE_PHOTOMETRIC))
        trace += t
        img, t = apply_geometric(img, job.augment, stream(seeding.STAGE_GEOMETRIC))
        trace += t
    except VrdForgeError as exc:
        raise GenerationError(index, exc) from exc
    return LabeledSample(index, img, sentence.text, trace, style, seed_index,
                         job.fonts.faces[style.font_id].name)


def generate_one(job: GenerationJob, index: int) -> LabeledSample:
    return generate_sample(job.sentence_for(index), job, index)


# ---------------------------------------------------------------- streaming

_worker_job: GenerationJob | None = None


def _init_worker(job, backend):
    global _worker_job
    _worker_job = job
    kernels.use_backend(backend)


def _work(index):
    sample = generate_one(_worker_job, index)
    sample.png()
    return sample


@dataclass
class StreamStats:
    n: int = 0
    elapsed: float = 0.0

    @property
    def samples_per_sec(self) -> float:
        return self.n / self.elapsed if self.elapsed > 0 else float("inf")


class SampleStream:
    """Iterable of samples in ascending id order, with throughput stats.

    ``workers > 1`` fans indices out over a process pool; at most
    ``buffer`` (default ``4 * workers``) samples are in flight, so
    reordering memory stays bounded.
    """

    def __init__(self, job: GenerationJob, workers: int = 1, buffer: int | None = None):
        if workers < 1:
            raise ConfigError(f"workers must be positive, got {workers}")
        self.job = job
        self.workers = workers
        self.buffer = buffer or 4 * workers
        self.stats = StreamStats()

    def __iter__(self) -> Iterator[LabeledSample]:
        start = time.perf_counter()
        try:
            if self.workers == 1:
                for i in range(self.job.n_samples):
                    yield generate_one(self.job, i)
                    self.stats.n += 1
            else:
                yield from self._parallel()
        finally:
            self.stats.elapsed = time.perf_counter() - start
            log.info("generated %d samples in %.2fs (%.1f samples/s, %s kernels, %d workers)",
                     self.stats.n, self.stats.elapsed, self.stats.samples_per_sec,
                     kernels.backend(), self.workers)

    def _parallel(self):
        methods = mp.get_all_start_methods()
        ctx = mp.get_context("fork" if "fork" in methods else "spawn")
        n = self.job.n_samples
        with ProcessPoolExecutor(self.workers, mp_context=ctx, initializer=_init_worker,
                                 initargs=(self.job, kernels.backend())) as ex:
            pending = collections.deque()
            next_index = 0
            try:
                while next_index < n or pending:
                    while next_index < n and len(pending) < self.buffer:
                        pending.append(ex.submit(_work, next_index))
                        next_index += 1
                    sample = pending.popleft().result()
                    self.stats.n += 1
                    yield sample
            except BaseException:
                for f in pending:
                    f.cancel()
                raise


def generate_stream(job: GenerationJob, workers: int = 1, buffer: int | None = None) -> SampleStream:
    return SampleStream(job, workers, buffer)


# ---------------------------------------------------------------- wire format

_U32 = struct.Struct("<I")


def encode_record(sample: LabeledSample) -> bytes:
    header = json.dumps(sample.header(), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    png = sample.png()
    return b"".join((_U32.pack(len(header)), header, _U32.pack(len(png)), png))


def write_stream(samples: Iterable[LabeledSample], fh) -> int:
    """Write length-prefixed records to a binary file object."""
    n = 0
    for sample in samples:
        fh.write(encode_record(sample))
        n += 1
    fh.flush()
    return n


def _read_exact(fh, n):
    data = fh.read(n)
    if len(data) != n:
        raise DataError(f"truncated stream: wanted {n} bytes, got {len(data)}")
    return data


def read_records(fh) -> Iterator[tuple[dict, bytes]]:
    """Decode ``(header, png_bytes)`` records until end of stream."""
    while True:
        prefix = fh.read(4)
        if not prefix:
            return
        if len(prefix) != 4:
            raise DataError("truncated stream in header length")
        header = json.loads(_read_exact(fh, _U32.unpack(prefix)[0]).decode("utf-8"))
        png = _read_exact(fh, _U32.unpack(_read_exact(fh, 4))[0])
        yield header, png


# ---------------------------------------------------------------- persistence


def _image_name(index: int) -> str:
    return f"{index:06d}.png"


def persist_dataset(stream: Iterable[LabeledSample], out_dir, image_format: str = "png",
                    overwrite: bool = False) -> Path:
    """Write one image per sample plus a JSON Lines manifest; returns its path.

    Timing goes to a separate ``run.json`` so the manifest itself is
    byte-stable across runs.
    """
    if image_format.lower() != "png":
        raise ConfigError(f"unsupported image format {image_format!r} (only png)")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise DataError(f"output directory {out} is not empty (pass overwrite to replace)")
        for p in out.iterdir():
            if p.name in (MANIFEST_NAME, RUN_SIDECAR_NAME) or (p.suffix == ".png" and p.stem.isdigit()):
                p.unlink()
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest = out / MANIFEST_NAME
        start = time.perf_counter()
        n = 0
        with open(manifest, "w", encoding="utf-8") as fh:
            for sample in stream:
                name = _image_name(sample.id)
                (out / name).write_bytes(sample.png())
                fh.write(json.dumps(sample.record(name), ensure_ascii=False) + "\n")
                n += 1
        elapsed = time.perf_counter() - start
        stats = getattr(stream, "stats", None)
        sidecar = {
            "n_samples": n,
            "elapsed_s": elapsed,
            "samples_per_sec": n / elapsed if elapsed > 0 else None,
            "kernels": kernels.backend(),
            "workers": getattr(stream, "workers", 1),
            "generation_elapsed_s": stats.elapsed if stats else None,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        (out / RUN_SIDECAR_NAME).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write dataset at {exc.filename or out}: {exc.strerror or exc}") from exc
    return manifest


def read_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def verify_dataset(out_dir) -> list[str]:
    """Problems found when re-decoding every manifest image (empty means sound)."""
    from PIL import Image

    out = Path(out_dir)
    problems = []
    for rec in read_manifest(out / MANIFEST_NAME):
        p = out / rec["image"]
        if not p.is_file():
            problems.append(f"{rec['id']}: missing {p.name}")
            continue
        with Image.open(p) as im:
            if im.size != (rec["w"], rec["h"]):
                problems.append(f"{rec['id']}: {im.size} != ({rec['w']}, {rec['h']})")
    return problems
