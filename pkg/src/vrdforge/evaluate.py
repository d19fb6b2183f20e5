"""External annotations, region crops, prediction scoring and ablation runs."""
from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from . import metrics
from .augment import ArtifactConfig, AugmentConfig, PRESET_NAMES, preset
from .errors import (AnnotationFormatError, AnnotationReferenceError, ConfigError, DataError,
                     JoinError, PresetRunError, VrdForgeError)
from .renderer import RasterImage


@dataclass(frozen=True)
class AnnotationEntry:
    image_ref: str
    box: tuple[int, int, int, int]
    text: str
    label: str | None = None
    doc_index: int = 0
    multiline: bool = False

    @property
    def width(self) -> int:
        return self.box[2] - self.box[0]

    @property
    def height(self) -> int:
        return self.box[3] - self.box[1]


@dataclass
class SkippedEntry:
    doc_index: int
    entry_index: int
    reason: str


@dataclass
class AnnotationSet:
    """Loaded entries; ``len(entries) + len(skipped) == n_in`` always."""

    entries: list[AnnotationEntry] = field(default_factory=list)
    skipped: list[SkippedEntry] = field(default_factory=list)
    n_in: int = 0

    @property
    def skip_count(self) -> int:
        return len(self.skipped)

    @property
    def n_flagged_multiline(self) -> int:
        return sum(e.multiline for e in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def _box_problem(box, width, height) -> tuple[tuple[int, int, int, int] | None, str]:
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        return None, "box is not four numbers"
    try:
        x1, y1, x2, y2 = (int(v) for v in box)
    except (TypeError, ValueError):
        return None, "box is not four numbers"
    if any(int(v) != v for v in box):
        return None, "box coordinates are not integers"
    if not (x1 < x2 and y1 < y2):
        return None, f"degenerate box {[x1, y1, x2, y2]}"
    if width is not None and height is not None:
        if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
            return None, f"box {[x1, y1, x2, y2]} outside page {width}x{height}"
    return (x1, y1, x2, y2), ""


def _validated(raw: dict, image_ref: str, page_w, page_h, doc_index: int, result: AnnotationSet, k: int):
    result.n_in += 1
    box, why = _box_problem(raw.get("box"), page_w, page_h)
    text = raw.get("text")
    if box is None:
        result.skipped.append(SkippedEntry(doc_index, k, why))
        return
    if not isinstance(text, str) or not text.strip():
        result.skipped.append(SkippedEntry(doc_index, k, "empty text"))
        return
    label = raw.get("label")
    result.entries.append(AnnotationEntry(image_ref, box, text.strip(),
                                          None if label is None else str(label), doc_index))


def _resolve(fname, pages_dir: Path, check: bool, doc_index: int) -> str:
    if not isinstance(fname, str) or not fname:
        raise AnnotationFormatError(f"document {doc_index}: image descriptor lacks a file name")
    path = pages_dir / fname
    if check and not path.is_file():
        raise AnnotationReferenceError(f"document {doc_index}: image {path} does not exist")
    return str(path)


def _load_xfund(obj, pages_dir: Path, check: bool, result: AnnotationSet):
    docs = obj.get("documents") if isinstance(obj, dict) else None
    if not isinstance(docs, list):
        raise AnnotationFormatError("xfund file lacks a top-level 'documents' array")
    for d, doc in enumerate(docs):
        if not isinstance(doc, dict) or not isinstance(doc.get("img"), dict) \
                or not isinstance(doc.get("document"), list):
            raise AnnotationFormatError(f"document {d}: expected 'img' object and 'document' array")
        img = doc["img"]
        ref = _resolve(img.get("fname"), pages_dir, check, d)
        w, h = img.get("width"), img.get("height")
        for k, raw in enumerate(doc["document"]):
            if not isinstance(raw, dict):
                raise AnnotationFormatError(f"document {d}, entry {k}: not an object")
            _validated(raw, ref, w, h, d, result, k)


def _load_jsonl(path: Path, pages_dir: Path, check: bool, result: AnnotationSet):
    """One region per line: ``{"image", "box", "text", "label"?, "width"?, "height"?}``."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationFormatError(f"line {lineno + 1}: {exc}") from exc
            if not isinstance(raw, dict):
                raise AnnotationFormatError(f"line {lineno + 1}: not an object")
            ref = _resolve(raw.get("image"), pages_dir, check, lineno)
            _validated(raw, ref, raw.get("width"), raw.get("height"), lineno, result, 0)


def flag_multiline(entries: Sequence[AnnotationEntry], factor: float = 2.0) -> list[AnnotationEntry]:
    """Mark entries taller than ``factor`` times the median box height."""
    if not entries:
        return []
    median = statistics.median(e.height for e in entries)
    return [AnnotationEntry(e.image_ref, e.box, e.text, e.label, e.doc_index, e.height > factor * median)
            for e in entries]


def load_annotations(path, format: str = "xfund", pages_dir=None, check_images: bool = True,
                     flag_multiline_boxes: bool = False) -> AnnotationSet:
    """Read labeled regions, skipping (and counting) entries with bad boxes or empty text.

    Image names resolve against ``pages_dir`` (default: the annotation file's
    directory). Multi-line regions pass through; ``flag_multiline_boxes``
    only marks suspects.
    """
    path = Path(path)
    pages = Path(pages_dir) if pages_dir is not None else path.parent
    result = AnnotationSet()
    if not path.is_file():
        raise AnnotationReferenceError(f"annotation file {path} does not exist")
    if format == "xfund":
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise AnnotationFormatError(f"{path}: not valid JSON ({exc})") from exc
        _load_xfund(obj, pages, check_images, result)
    elif format == "jsonl":
        _load_jsonl(path, pages, check_images, result)
    else:
        raise ConfigError(f"unknown annotation format {format!r} (xfund or jsonl)")
    if flag_multiline_boxes:
        result.entries = flag_multiline(result.entries)
    return result


def crop_regions(entries: Iterable[AnnotationEntry]) -> list[tuple[RasterImage, str]]:
    """Axis-aligned crop of every box, paired with its text."""
    pages: dict[str, np.ndarray] = {}
    out = []
    for e in entries:
        page = pages.get(e.image_ref)
        if page is None:
            try:
                with Image.open(e.image_ref) as im:
                    page = np.asarray(im.convert("RGB"))
            except (OSError, ValueError) as exc:
                raise AnnotationReferenceError(f"cannot decode {e.image_ref}: {exc}") from exc
            pages[e.image_ref] = page
        x1, y1, x2, y2 = e.box
        if x2 > page.shape[1] or y2 > page.shape[0]:
            raise AnnotationReferenceError(
                f"box {list(e.box)} exceeds {e.image_ref} ({page.shape[1]}x{page.shape[0]})")
        out.append((RasterImage(np.ascontiguousarray(page[y1:y2, x1:x2])), e.text))
    return out


# ---------------------------------------------------------------- scoring


def _read_keyed(path, keys: Sequence[str], role: str) -> dict[str, str]:
    out: dict[str, str] = {}
    dupes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            if "id" not in rec:
                raise DataError(f"{path}:{lineno}: {role} record has no 'id'")
            key = next((k for k in keys if isinstance(rec.get(k), str)), None)
            if key is None:
                raise DataError(f"{path}:{lineno}: {role} record lacks any of {', '.join(keys)}")
            rid = str(rec["id"])
            if rid in out:
                dupes.append(rid)
            out[rid] = rec[key]
    if dupes:
        raise JoinError(f"duplicate {role} ids in {path}", dupes)
    return out


def score_pairs(pairs: Iterable[tuple[str, str, str]], casefold: bool = False,
                strip_punct: bool = False) -> list[metrics.SampleScore]:
    return [metrics.score_sample(i, p, t, casefold, strip_punct) for i, p, t in pairs]


def evaluate_predictions(pred_path, truth_path, casefold: bool = False, strip_punct: bool = False,
                         mode: str = "mean", bucket_width: int = 10, min_count: int = 100) -> metrics.EvalReport:
    """Join predictions to truths by id and score them.

    Truth records use ``truth`` (or ``text``, as in generated manifests);
    prediction records use ``prediction`` with the same fallbacks, so a
    truth file scores against itself. Any prediction id without a truth is
    a join error; truths lacking a prediction are listed in the report.
    """
    truths = _read_keyed(truth_path, ("truth", "text"), "truth")
    preds = _read_keyed(pred_path, ("prediction", "truth", "text"), "prediction")
    orphans = [i for i in preds if i not in truths]
    if orphans:
        raise JoinError("prediction ids with no matching truth", orphans)
    if not preds:
        raise DataError(f"{pred_path} holds no predictions")
    scores = score_pairs(((i, p, truths[i]) for i, p in preds.items()), casefold, strip_punct)
    report = metrics.aggregate(scores, mode, bucket_width, min_count)
    report.unmatched_ids = [i for i in truths if i not in preds]
    return report


# ---------------------------------------------------------------- ablation


@dataclass
class AblationSpec:
    configs: dict[str, tuple[ArtifactConfig, AugmentConfig]]

    @classmethod
    def from_names(cls, names: Sequence[str], artifacts: ArtifactConfig | None = None,
                   augment: AugmentConfig | None = None) -> "AblationSpec":
        if len(set(names)) != len(names):
            raise ConfigError(f"preset names repeat: {', '.join(names)}")
        return cls({n: preset(n, artifacts, augment) for n in names})

    @classmethod
    def builtin(cls, artifacts=None, augment=None) -> "AblationSpec":
        return cls.from_names(PRESET_NAMES, artifacts, augment)


TABLE_COLUMNS = ("preset", "n_samples", "mean_chars", "mean_width", "share_box", "share_line",
                 "share_neighbor", "mean_trace_len", "cer", "wer")


@dataclass
class AblationResult:
    records: dict[str, list[dict]]
    out_dirs: dict[str, Path] = field(default_factory=dict)

    def table(self) -> list[dict]:
        """Per-preset dataset stats with blank slots for downstream model scores."""
        rows = []
        for name, recs in self.records.items():
            n = len(recs)

            def share(kind):
                return sum(any(t["name"] == kind for t in r["trace"]) for r in recs) / n

            rows.append({
                "preset": name,
                "n_samples": n,
                "mean_chars": sum(len(r["text"]) for r in recs) / n,
                "mean_width": sum(r["w"] for r in recs) / n,
                "share_box": share("box"),
                "share_line": share("line"),
                "share_neighbor": share("neighbor_crop"),
                "mean_trace_len": sum(len(r["trace"]) for r in recs) / n,
                "cer": None,
                "wer": None,
            })
        return rows

    def table_text(self) -> str:
        lines = ["  ".join(f"{c:>14}" for c in TABLE_COLUMNS)]
        for row in self.table():
            cells = []
            for c in TABLE_COLUMNS:
                v = row[c]
                cells.append(f"{'-' if v is None else (f'{v:.3f}' if isinstance(v, float) else v):>14}")
            lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"


def ablation_matrix(spec: AblationSpec, job, n: int | None = None, out_dir=None, workers: int = 1) -> AblationResult:
    """One dataset per preset from the same seed, corpus and style space.

    Without ``out_dir`` nothing touches disk; each record then carries the
    SHA-256 of its PNG instead of a file name.
    """
    from .pipeline import SampleStream, persist_dataset, read_manifest

    result = AblationResult({})
    for name, (art, aug) in spec.configs.items():
        sub = replace(job, artifacts=art, augment=aug, n_samples=n or job.n_samples)
        try:
            stream = SampleStream(sub, workers)
            if out_dir is not None:
                d = Path(out_dir) / name
                manifest = persist_dataset(stream, d)
                result.out_dirs[name] = d
                result.records[name] = read_manifest(manifest)
            else:
                result.records[name] = [
                    {**s.header(), "sha256": hashlib.sha256(s.png()).hexdigest()} for s in stream]
        except VrdForgeError as exc:
            raise PresetRunError(name, exc) from exc
    return result
