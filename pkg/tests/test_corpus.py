import collections

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrdforge import corpus
from vrdforge.corpus import FixedWordCount, LengthDistribution, Sentence
from vrdforge.errors import ConfigError, CorpusError, EmptyCorpusError


def test_segmentation_and_cleanup():
    raw = "Hola  mundo. ¿Qué tal?\n\nBien​ gracias!\tAdiós".encode()
    r = corpus.ingest_text(raw)
    assert [s.text for s in r] == ["Hola mundo.", "¿Qué tal?", "Bien gracias!", "Adiós"]
    assert r.segments_seen == 4


def test_nfc_normalization():
    (s,) = corpus.ingest_text("canción".encode())
    assert s.text == "canción" and s.char_count == 7


def test_length_limits_counted():
    raw = ("a" * 121 + "\n" + "uno dos tres\n" + " ".join(["x"] * 16)).encode()
    r = corpus.ingest_text(raw)
    assert [s.text for s in r] == ["uno dos tres"]
    assert (r.dropped_too_long, r.dropped_too_many_words) == (1, 1)


def test_exactly_at_cap_is_kept():
    (s,) = corpus.ingest_text(("b" * 120).encode(), max_words=None)
    assert s.char_count == 120


def test_bad_utf8_reports_offset():
    with pytest.raises(CorpusError, match="offset 4"):
        corpus.ingest_text(b"hola\xff")


def test_empty_input_raises():
    with pytest.raises(EmptyCorpusError):
        corpus.ingest_text(b"  \n\n")


def test_jsonl_round_trip(tmp_path):
    sents = [Sentence.from_text("El sol.", "a:0"), Sentence.from_text("Número 5", "a:1")]
    p = tmp_path / "c.jsonl"
    assert corpus.write_jsonl(sents, p) == 2
    assert corpus.read_jsonl(p) == sents
    assert corpus.load_corpus(p) == sents


def test_jsonl_count_mismatch_rejected(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"text": "uno dos", "wc": 3, "cc": 7}\n', encoding="utf-8")
    with pytest.raises(CorpusError):
        corpus.read_jsonl(p)


def test_bundled_corpus_covers_word_buckets(spanish_pool):
    counts = collections.Counter(s.word_count for s in spanish_pool)
    assert all(counts[k] > 0 for k in range(1, 16))
    assert max(s.char_count for s in spanish_pool) <= 120


@pytest.mark.parametrize("buckets", [
    (((1, 3), 0.5), ((5, 6), 0.5)),   # gap
    (((1, 3), 0.5), ((3, 6), 0.5)),   # overlap
    (((1, 3), 0.6), ((4, 6), 0.6)),   # weights
])
def test_distribution_validation(buckets):
    with pytest.raises(ConfigError):
        LengthDistribution("word_count", buckets)


def test_uniform_sampling_shares(spanish_pool):
    dist = LengthDistribution.uniform("word_count", 1, 10)
    got = [s.word_count for s in corpus_draw(spanish_pool, dist, 20000)]
    counts = collections.Counter(got)
    assert set(counts) == set(range(1, 11))
    # binomial sd is about 42 at n=20000, p=0.1
    assert all(abs(c - 2000) < 250 for c in counts.values())


def corpus_draw(pool, dist, n):
    return corpus.sample_uniform(pool, dist, n, np.random.default_rng(11))


def test_empty_bucket_is_an_error(spanish_pool):
    dist = LengthDistribution.uniform("word_count", 1, 30)
    with pytest.raises(CorpusError, match=r"\[16, 16\]"):
        corpus_draw(spanish_pool, dist, 5)


def test_fixed_word_count(spanish_pool):
    rng = np.random.default_rng(0)
    got = corpus.sample_fixed_word_count(spanish_pool, 4, 50, rng)
    assert all(s.word_count == 4 for s in got)
    with pytest.raises(CorpusError):
        corpus.sample_fixed_word_count([Sentence.from_text("uno dos")], 3, 5, rng)
    (t,) = corpus.sample_fixed_word_count([Sentence.from_text("uno dos tres cuatro", "s")], 2, 1, rng,
                                          allow_truncation=True)
    assert t.text == "uno dos" and t.source_id.endswith("#trunc")
    assert FixedWordCount(3).to_json()["k"] == 3


def test_sample_size_must_be_positive(spanish_pool):
    with pytest.raises(ConfigError):
        corpus.sample_uniform(spanish_pool, LengthDistribution.uniform("word_count", 1, 3), 0,
                              np.random.default_rng(0))


def test_split_keeps_normalized_duplicates_together():
    pool = [Sentence.from_text(t) for t in ["Hola mundo", "hola  MUNDO", "HOLA mundo", "adiós", "otra cosa"] * 3]
    train, test = corpus.split_disjoint(pool, 0.4, np.random.default_rng(2))
    k_train = {corpus.normalize_key(s.text) for s in train}
    k_test = {corpus.normalize_key(s.text) for s in test}
    assert not k_train & k_test
    assert len(k_test) == round(0.4 * 3)
    assert len(train) + len(test) == len(pool)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_domain(frac):
    with pytest.raises(ConfigError):
        corpus.split_disjoint([Sentence.from_text("a")], frac, np.random.default_rng(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text("aAbB ", min_size=1, max_size=4).filter(str.strip), min_size=2, max_size=40),
       st.floats(0.05, 0.95), st.integers(0, 2 ** 32 - 1))
def test_split_never_leaks(texts, frac, seed):
    pool = [Sentence.from_text(" ".join(t.split())) for t in texts]
    train, test = corpus.split_disjoint(pool, frac, np.random.default_rng(seed))
    assert not {corpus.normalize_key(s.text) for s in train} & {corpus.normalize_key(s.text) for s in test}
