import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import levenshtein, minimal_alignments
from vrdforge import kernels, metrics
from vrdforge.errors import MetricError

tokens = st.lists(st.sampled_from("abcde"), max_size=7)


def test_identity_counts():
    assert metrics.char_edit_counts("abc", "abc") == metrics.EditCounts(0, 0, 0, 3)


def test_empty_prediction_is_all_deletions():
    c = metrics.char_edit_counts("", "abc")
    assert (c.deletions, c.correct, c.n, c.edits) == (3, 0, 3, 3)


def test_single_substitution():
    c = metrics.char_edit_counts("abd", "abc")
    assert (c.substitutions, c.correct, c.n) == (1, 2, 3)
    assert (c.substitutions, c.deletions, c.insertions, c.correct) in minimal_alignments("abd", "abc")


def test_deletion_and_insertion_directions():
    # the model dropped a truth char
    assert metrics.char_edit_counts("ac", "abc").deletions == 1
    # the model hallucinated one
    assert metrics.char_edit_counts("abxc", "abc").insertions == 1


def test_empty_truth_raises():
    with pytest.raises(MetricError):
        metrics.edit_counts(["a"], [])
    with pytest.raises(MetricError):
        metrics.cer("a", "")
    with pytest.raises(MetricError):
        metrics.wer("a", "   ")


@pytest.mark.parametrize("pred,truth,expected", [
    ("abc", "abc", 0.0), ("abd", "abc", 1 / 3), ("abxyz", "ab", 1.5),
])
def test_cer_examples(pred, truth, expected):
    assert metrics.cer(pred, truth) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("pred,truth,expected", [
    ("hola mundo", "hola mundo", 0.0), ("el gato", "el gato negro", 1 / 3), ("hola mundos", "hola mundo", 0.5),
])
def test_wer_examples(pred, truth, expected):
    assert metrics.wer(pred, truth) == pytest.approx(expected, abs=1e-15)
    assert metrics.wer(pred, truth) * len(truth.split()) == pytest.approx(
        levenshtein(pred.split(), truth.split()))


def test_wer_normalization_flags():
    assert metrics.wer("Hola, Mundo", "hola mundo") == 1.0
    assert metrics.wer("Hola, Mundo", "hola mundo", casefold=True) == 0.5
    assert metrics.wer("Hola, Mundo", "hola mundo", casefold=True, strip_punct=True) == 0.0
    assert metrics.wer("¿qué?", "qué", strip_punct=True) == 0.0


def test_cer_counts_unicode_scalars():
    # composed á is one scalar; decomposed a + combining accent is two
    assert metrics.char_edit_counts("á", "á").n == 1
    assert metrics.char_edit_counts("á", "á").n == 2


def test_tie_break_prefers_substitution_then_deletion():
    # "ab" vs truth "ba": minimal cost 2 via two subs, or one del + one ins
    c = metrics.char_edit_counts("ab", "ba")
    assert (c.substitutions, c.deletions, c.insertions) == (2, 0, 0)


@settings(max_examples=300, deadline=None)
@given(tokens, tokens.filter(bool))
def test_counts_match_exhaustive_alignment(pred, truth):
    c = metrics.edit_counts(pred, truth)
    got = (c.substitutions, c.deletions, c.insertions, c.correct)
    assert got in minimal_alignments(pred, truth)
    assert c.n == len(truth)


@settings(max_examples=200, deadline=None)
@given(st.text("abcxyz ", max_size=25), st.text("abcxyz ", min_size=1, max_size=25))
def test_distance_bounds(pred, truth):
    c = metrics.char_edit_counts(pred, truth)
    assert abs(len(pred) - len(truth)) <= c.edits <= max(len(pred), len(truth))
    assert c.n == c.substitutions + c.deletions + c.correct


@given(st.text(min_size=1, max_size=30).filter(lambda s: s.split()))
def test_self_score_is_zero(x):
    assert metrics.cer(x, x) == 0.0
    assert metrics.wer(x, x) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text("ab", max_size=6), st.text("ab", min_size=5, max_size=5)), min_size=1, max_size=8))
def test_mean_equals_weighted_for_equal_lengths(pairs):
    scores = [metrics.score_sample(i, p, t) for i, (p, t) in enumerate(pairs)]
    r = metrics.aggregate(scores)
    assert r.mean_cer == pytest.approx(r.weighted_cer, abs=1e-12)


def test_backends_agree_on_edit_ops():
    rng = random.Random(5)
    for _ in range(300):
        a = [rng.randrange(6) for _ in range(rng.randrange(0, 20))]
        b = [rng.randrange(6) for _ in range(rng.randrange(1, 20))]
        results = set()
        for name in kernels.available_backends():
            with kernels.use_backend(name):
                results.add(kernels.edit_ops(a, b))
        assert len(results) == 1


def test_aggregate_examples():
    zero = [metrics.score_sample(i, "abc", "abc") for i in range(3)]
    r = metrics.aggregate(zero)
    assert (r.mean_cer, r.weighted_cer) == (0.0, 0.0)
    one = [metrics.score_sample(0, "abd", "abcd")]
    r = metrics.aggregate(one, mode="weighted")
    assert r.mean_cer == r.weighted_cer == r.cer == 0.25


def test_aggregate_errors():
    with pytest.raises(MetricError):
        metrics.aggregate([])
    with pytest.raises(MetricError):
        metrics.aggregate([metrics.score_sample(0, "a", "a")], mode="median")


def test_bucket_counting():
    scores = [metrics.score_sample(i, "x" * n, "x" * n) for i, n in enumerate((5, 15, 15))]
    buckets = metrics.bucket_by_length(scores, 10, min_count=2)
    assert [(b.lo, b.hi, b.count, b.under_sampled) for b in buckets] == [(0, 10, 1, True), (10, 20, 2, False)]
    assert [b.lo for b in metrics.headline_curve(buckets)] == [10]


def test_single_bucket_when_lengths_equal():
    scores = [metrics.score_sample(i, "abc", "abd") for i in range(4)]
    (b,) = metrics.bucket_by_length(scores, 10, min_count=1)
    assert b.count == 4 and b.std_cer == 0.0


def test_report_exports():
    scores = [metrics.score_sample(i, "abc", t) for i, t in enumerate(("abc", "abd", "abcdefghij"))]
    r = metrics.aggregate(scores, bucket_width=5, min_count=2)
    doc = json.loads(metrics.report_json(r))
    assert doc["n_samples"] == 3 and len(doc["buckets"]) == 2
    csv_text = r.buckets_csv().splitlines()
    assert csv_text[0].startswith("length_bucket,count,mean_cer,mean_wer")
    assert len(csv_text) == 3
    assert "under-sampled" in r.to_text()
