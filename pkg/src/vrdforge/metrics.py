"""Edit-distance alignment counts, CER / WER and their aggregation.

Conventions: tokens are Unicode scalars (CER) or whitespace-delimited words
(WER). D counts ground-truth tokens missing from the prediction, I counts
predicted tokens absent from the truth, so ``N = S + D + C`` always holds
with N the truth length. Means are computed exactly with fractions and
rounded once.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import unicodedata
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from . import kernels
from .errors import MetricError


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int
    correct: int

    @property
    def n(self) -> int:
        """Ground-truth length."""
        return self.substitutions + self.deletions + self.correct

    ground_truth_len = n

    @property
    def edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def rate(self) -> float:
        return self.edits / self.n

    def to_json(self) -> dict:
        return {"S": self.substitutions, "D": self.deletions, "I": self.insertions,
                "C": self.correct, "N": self.n}


def edit_counts(prediction: Sequence, truth: Sequence) -> EditCounts:
    """Minimal unit-cost alignment of ``prediction`` against ``truth``.

    When several alignments are minimal the backtrace prefers match or
    substitution, then deletion, then insertion.
    """
    if len(truth) == 0:
        raise MetricError("ground truth is empty; error rate is undefined")
    vocab: dict = {}
    t = [vocab.setdefault(tok, len(vocab)) for tok in truth]
    p = [vocab.setdefault(tok, len(vocab)) for tok in prediction]
    s, d, i, c = kernels.edit_ops(p, t)
    return EditCounts(s, d, i, c)


def normalize(text: str, casefold: bool = False, strip_punct: bool = False) -> str:
    if casefold:
        text = text.casefold()
    if strip_punct:
        text = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    return text


def char_edit_counts(prediction: str, truth: str) -> EditCounts:
    return edit_counts(list(prediction), list(truth))


def word_edit_counts(prediction: str, truth: str) -> EditCounts:
    words = truth.split()
    if not words:
        raise MetricError("ground truth has no words; WER is undefined")
    return edit_counts(prediction.split(), words)


def cer(prediction: str, truth: str) -> float:
    return char_edit_counts(prediction, truth).rate()


def wer(prediction: str, truth: str, casefold: bool = False, strip_punct: bool = False) -> float:
    return word_edit_counts(normalize(prediction, casefold, strip_punct),
                            normalize(truth, casefold, strip_punct)).rate()


@dataclass(frozen=True)
class SampleScore:
    id: str
    char_counts: EditCounts
    word_counts: EditCounts

    @property
    def cer(self) -> float:
        return self.char_counts.rate()

    @property
    def wer(self) -> float:
        return self.word_counts.rate()

    @property
    def length(self) -> int:
        return self.char_counts.n


def score_sample(sample_id, prediction: str, truth: str, casefold: bool = False,
                 strip_punct: bool = False) -> SampleScore:
    """Both rates for one pair; normalization applies to both sides."""
    prediction = normalize(prediction, casefold, strip_punct)
    truth = normalize(truth, casefold, strip_punct)
    try:
        return SampleScore(str(sample_id), char_edit_counts(prediction, truth),
                           word_edit_counts(prediction, truth))
    except MetricError as exc:
        raise MetricError(f"sample {sample_id}: {exc}") from None


# ---------------------------------------------------------------- aggregation


def _exact_mean(counts: Sequence[EditCounts]) -> float:
    return float(sum((Fraction(c.edits, c.n) for c in counts), Fraction(0)) / len(counts))


def _pooled(counts: Sequence[EditCounts]) -> float:
    return sum(c.edits for c in counts) / sum(c.n for c in counts)


@dataclass
class LengthBucket:
    lo: int
    hi: int  # exclusive
    count: int
    mean_cer: float
    mean_wer: float
    std_cer: float
    std_wer: float
    under_sampled: bool

    @property
    def label(self) -> str:
        return f"[{self.lo},{self.hi})"


def bucket_by_length(scores: Sequence[SampleScore], bucket_width: int = 10,
                     min_count: int = 100) -> list[LengthBucket]:
    """Group by ground-truth character length into ``[k*w, (k+1)*w)`` buckets.

    Buckets holding fewer than ``min_count`` samples are kept but flagged;
    ``headline_curve`` drops them.
    """
    if not scores:
        raise MetricError("no scores to bucket")
    if bucket_width < 1 or min_count < 1:
        raise MetricError("bucket_width and min_count must be positive")
    groups: dict[int, list[SampleScore]] = {}
    for s in scores:
        groups.setdefault(s.length // bucket_width, []).append(s)
    out = []
    for k in sorted(groups):
        members = groups[k]
        cers = [m.cer for m in members]
        wers = [m.wer for m in members]
        out.append(LengthBucket(
            k * bucket_width, (k + 1) * bucket_width, len(members),
            _exact_mean([m.char_counts for m in members]),
            _exact_mean([m.word_counts for m in members]),
            statistics.pstdev(cers), statistics.pstdev(wers),
            len(members) < min_count,
        ))
    return out


def headline_curve(buckets: Sequence[LengthBucket]) -> list[LengthBucket]:
    return [b for b in buckets if not b.under_sampled]


@dataclass
class EvalReport:
    n_samples: int
    mean_cer: float
    mean_wer: float
    weighted_cer: float
    weighted_wer: float
    mode: str = "mean"
    buckets: list[LengthBucket] = field(default_factory=list)
    unmatched_ids: list[str] = field(default_factory=list)

    @property
    def cer(self) -> float:
        return self.mean_cer if self.mode == "mean" else self.weighted_cer

    @property
    def wer(self) -> float:
        return self.mean_wer if self.mode == "mean" else self.weighted_wer

    def to_json(self) -> dict:
        d = asdict(self)
        d["cer"], d["wer"] = self.cer, self.wer
        return d

    def to_text(self) -> str:
        lines = [
            f"samples        {self.n_samples}",
            f"headline mode  {self.mode}",
            f"CER  mean {self.mean_cer:.4f}   weighted {self.weighted_cer:.4f}",
            f"WER  mean {self.mean_wer:.4f}   weighted {self.weighted_wer:.4f}",
        ]
        if self.unmatched_ids:
            lines.append(f"truth ids without prediction: {len(self.unmatched_ids)}")
        if self.buckets:
            lines.append("")
            lines.append(f"{'chars':>11} {'count':>6} {'mean CER':>9} {'mean WER':>9} {'sd CER':>8}")
            for b in self.buckets:
                flag = "  (under-sampled)" if b.under_sampled else ""
                lines.append(f"{b.label:>11} {b.count:>6} {b.mean_cer:>9.4f} {b.mean_wer:>9.4f} "
                             f"{b.std_cer:>8.4f}{flag}")
        return "\n".join(lines) + "\n"

    def buckets_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length_bucket", "count", "mean_cer", "mean_wer", "std_cer", "std_wer", "under_sampled"])
        for b in self.buckets:
            w.writerow([b.label, b.count, repr(b.mean_cer), repr(b.mean_wer),
                        repr(b.std_cer), repr(b.std_wer), int(b.under_sampled)])
        return buf.getvalue()


def aggregate(scores: Sequence[SampleScore], mode: str = "mean", bucket_width: int | None = None,
              min_count: int = 100) -> EvalReport:
    """Mean-of-rates and pooled (length-weighted) rates; ``mode`` picks the headline."""
    if mode not in ("mean", "weighted"):
        raise MetricError(f"mode must be 'mean' or 'weighted', got {mode!r}")
    if not scores:
        raise MetricError("cannot aggregate zero scores")
    chars = [s.char_counts for s in scores]
    words = [s.word_counts for s in scores]
    report = EvalReport(len(scores), _exact_mean(chars), _exact_mean(words),
                        _pooled(chars), _pooled(words), mode)
    if bucket_width:
        report.buckets = bucket_by_length(scores, bucket_width, min_count)
    return report


def report_json(report: EvalReport) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        return x

    return json.dumps(report.to_json(), indent=2, default=clean, ensure_ascii=False) + "\n"
