import io
import json

import pytest

from vrdforge import pipeline
from vrdforge.corpus import LengthDistribution, Sentence
from vrdforge.errors import ConfigError, DataError, EmptyCorpusError, GenerationError
from vrdforge.pipeline import GenerationJob, SampleStream
from vrdforge.renderer import RasterImage, StyleSpace


@pytest.fixture
def job(fonts, spanish_pool):
    return GenerationJob(7, 12, spanish_pool, fonts, length=LengthDistribution.uniform("word_count", 1, 8))


def _key(sample):
    return sample.header(), sample.png()


def test_pool_filtering(fonts):
    pool = [Sentence.from_text("x" * 121), Sentence.from_text("hola"), Sentence.from_text("ok ")]
    job = GenerationJob(0, 3, pool, fonts)
    assert job.n_dropped == 2 and [s.text for s in job.pool] == ["hola"]
    with pytest.raises(EmptyCorpusError):
        GenerationJob(0, 1, pool[:1], fonts)


@pytest.mark.parametrize("kwargs", [dict(n_samples=0), dict(output_mode="disk")])
def test_job_validation(fonts, spanish_pool, kwargs):
    base = dict(master_seed=0, n_samples=1, pool=spanish_pool, fonts=fonts)
    with pytest.raises(ConfigError):
        GenerationJob(**{**base, **kwargs})


def test_sample_depends_only_on_seed_and_index(job):
    forward = [_key(pipeline.generate_one(job, i)) for i in range(6)]
    backward = [_key(pipeline.generate_one(job, i)) for i in reversed(range(6))][::-1]
    assert forward == backward


def test_seed_changes_output(job, fonts, spanish_pool):
    other = GenerationJob(8, 12, spanish_pool, fonts, length=job.length)
    assert [pipeline.generate_one(job, i).png() for i in range(4)] != \
        [pipeline.generate_one(other, i).png() for i in range(4)]


def test_epoch_offset_shifts_indices(job, fonts, spanish_pool):
    shifted = GenerationJob(7, 12, spanish_pool, fonts, length=job.length, epoch_offset=3)
    a, b = pipeline.generate_one(shifted, 0), pipeline.generate_one(job, 3)
    assert a.png() == b.png() and a.ground_truth == b.ground_truth and a.seed_index == 3


def test_parallel_matches_serial(job):
    serial = [_key(s) for s in SampleStream(job, 1)]
    parallel = [_key(s) for s in SampleStream(job, 3, buffer=2)]
    assert serial == parallel
    assert [h["id"] for h, _ in serial] == list(range(12))


def test_stream_stats(job):
    stream = SampleStream(job, 1)
    n = sum(1 for _ in stream)
    assert stream.stats.n == n == 12 and stream.stats.samples_per_sec > 0
    with pytest.raises(ConfigError):
        SampleStream(job, 0)


def test_generation_errors_carry_index(fonts, spanish_pool):
    impossible = StyleSpace(text_gray_range=(128, 128), background_gray_range=(128, 128))
    bad = GenerationJob(0, 2, spanish_pool, fonts, style=impossible)
    with pytest.raises(GenerationError, match="sample 1"):
        pipeline.generate_one(bad, 1)


def test_neighbor_trace(fonts, spanish_pool):
    from vrdforge.augment import ArtifactConfig, AugmentConfig
    art = ArtifactConfig(box_prob=0.0, line_prob=0.0, neighbor_prob=1.0)
    job = GenerationJob(1, 20, spanish_pool, fonts, artifacts=art, augment=AugmentConfig.disabled())
    seen = 0
    for i in range(20):
        s = pipeline.generate_one(job, i)
        for t in s.trace:
            assert t.name == "neighbor_crop"
            lo, hi = t.params["rows"]
            assert 0 < t.params["frac"] < 1 and hi > lo
            seen += 1
    assert seen >= 20


def test_wire_format_round_trip(job):
    buf = io.BytesIO()
    samples = list(SampleStream(job, 1))
    assert pipeline.write_stream(samples, buf) == 12
    buf.seek(0)
    records = list(pipeline.read_records(buf))
    assert len(records) == 12
    for (header, png), s in zip(records, samples):
        assert header == json.loads(json.dumps(s.header()))
        assert RasterImage.from_png(png) == s.image
    truncated = io.BytesIO(buf.getvalue()[:-10])
    with pytest.raises(DataError, match="truncated"):
        list(pipeline.read_records(truncated))


def test_persist_dataset(job, tmp_path):
    out = tmp_path / "ds"
    manifest = pipeline.persist_dataset(SampleStream(job), out)
    recs = pipeline.read_manifest(manifest)
    assert [r["id"] for r in recs] == list(range(12))
    assert {"id", "text", "image", "w", "h", "seed_index", "style", "trace"} <= set(recs[0])
    assert {r["style"]["font"] for r in recs} <= {f.name for f in job.fonts.faces}
    assert pipeline.verify_dataset(out) == []
    run = json.loads((out / "run.json").read_text())
    assert run["n_samples"] == 12
    assert "finished_at" not in manifest.read_text()

    with pytest.raises(DataError, match="not empty"):
        pipeline.persist_dataset(SampleStream(job), out)
    first = manifest.read_bytes()
    pipeline.persist_dataset(SampleStream(job), out, overwrite=True)
    assert manifest.read_bytes() == first


def test_persist_rejects_unknown_format(job, tmp_path):
    with pytest.raises(ConfigError):
        pipeline.persist_dataset(SampleStream(job), tmp_path / "x", image_format="jpeg")


def test_verify_detects_missing_image(job, tmp_path):
    pipeline.persist_dataset(SampleStream(job), tmp_path)
    (tmp_path / "000003.png").unlink()
    assert pipeline.verify_dataset(tmp_path) == ["3: missing 000003.png"]
