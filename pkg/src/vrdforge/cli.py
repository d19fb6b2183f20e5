"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
Diagnostics go to stderr; data goes to files or stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, config, corpus, evaluate, kernels, pipeline
from .augment import PRESET_NAMES
from .errors import DataError, VrdForgeError

log = logging.getLogger("vrdforge")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _job_args(p, n_default=None):
    p.add_argument("config", help="JSON config file, or 'default' for built-in settings")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--n", type=int, default=n_default, help="number of samples (overrides config)")
    p.add_argument("--workers", type=int, help="worker processes (overrides config)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set style.line_height=64")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vrdforge", description="Synthetic text-line images and OCR scoring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("corpus", help="corpus utilities")
    csub = p.add_subparsers(dest="corpus_command", required=True, parser_class=_Parser)
    prep = csub.add_parser("prep", help="segment and filter raw UTF-8 text into a JSONL corpus")
    prep.add_argument("input")
    prep.add_argument("output")
    prep.add_argument("--max-chars", type=int, default=corpus.DEFAULT_MAX_CHARS)
    prep.add_argument("--max-words", type=int, default=corpus.DEFAULT_MAX_WORDS)

    p = sub.add_parser("generate", help="write a dataset directory (PNG images + manifest.jsonl)")
    _job_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("stream", help="write length-prefixed records to stdout")
    _job_args(p)

    p = sub.add_parser("eval", help="score predictions against truths")
    p.add_argument("truth")
    p.add_argument("pred")
    p.add_argument("--mode", choices=("mean", "weighted"), default="mean")
    p.add_argument("--buckets", type=int, default=10, metavar="W", help="length bucket width in chars")
    p.add_argument("--min-count", type=int, default=100)
    p.add_argument("--casefold", action="store_true")
    p.add_argument("--strip-punct", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--csv", metavar="PATH", help="also write the length-bucket curve as CSV")

    p = sub.add_parser("ingest-xfund", help="crop XFUND regions into an evaluation set")
    p.add_argument("json")
    p.add_argument("pages_dir")
    p.add_argument("out")
    p.add_argument("--format", choices=("xfund", "jsonl"), default="xfund")
    p.add_argument("--flag-multiline", action="store_true")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("ablate", help="generate one dataset per augmentation preset")
    _job_args(p)
    p.add_argument("--presets", default=",".join(PRESET_NAMES))
    p.add_argument("--out", help="directory for per-preset datasets (omit to keep in memory)")

    p = sub.add_parser("bench", help="measure in-memory generation throughput")
    p.add_argument("--config", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--backend", choices=("cython", "python"))
    p.add_argument("--line-height", type=int, default=64)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--headers", metavar="PATH", help="also write each sample's header as JSONL")
    return parser


def _config_for(args) -> dict:
    cfg = config.load_config(args.config)
    config.apply_overrides(cfg, args.set)
    for key, attr in (("seed", "seed"), ("n_samples", "n"), ("workers", "workers")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _cmd_corpus(args):
    raw = Path(args.input).read_bytes()
    result = corpus.ingest_text(raw, args.max_chars, args.max_words, source_id=Path(args.input).name)
    n = corpus.write_jsonl(result.sentences, args.output)
    log.info("kept %d of %d segments (%d too long, %d too many words)", n, result.segments_seen,
            result.dropped_too_long, result.dropped_too_many_words)


def _cmd_generate(args):
    cfg = _config_for(args)
    job = config.build_job(cfg, output_mode="persist")
    stream = pipeline.SampleStream(job, int(cfg["workers"]))
    manifest = pipeline.persist_dataset(stream, args.out, overwrite=args.overwrite)
    log.info("wrote %d samples to %s", stream.stats.n, manifest.parent)


def _cmd_stream(args):
    cfg = _config_for(args)
    job = config.build_job(cfg)
    out = sys.stdout.buffer
    try:
        pipeline.write_stream(pipeline.SampleStream(job, int(cfg["workers"])), out)
    except BrokenPipeError:
        # consumer went away; not an error for a producer
        sys.stdout = None
        return


def _cmd_eval(args):
    report = evaluate.evaluate_predictions(args.pred, args.truth, args.casefold, args.strip_punct,
                                           args.mode, args.buckets, args.min_count)
    if args.format == "json":
        sys.stdout.write(evaluate.metrics.report_json(report))
    else:
        sys.stdout.write(report.to_text())
    if args.csv:
        Path(args.csv).write_text(report.buckets_csv(), encoding="utf-8")
    if report.unmatched_ids:
        log.warning("%d truth ids have no prediction", len(report.unmatched_ids))


def _cmd_ingest(args):
    ann = evaluate.load_annotations(args.json, args.format, args.pages_dir,
                                    flag_multiline_boxes=args.flag_multiline)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.overwrite:
        raise DataError(f"output directory {out} is not empty (pass --overwrite to replace)")
    out.mkdir(parents=True, exist_ok=True)
    crops = evaluate.crop_regions(ann.entries)
    with open(out / pipeline.MANIFEST_NAME, "w", encoding="utf-8") as fh:
        for i, (entry, (img, text)) in enumerate(zip(ann.entries, crops)):
            name = f"{i:06d}.png"
            (out / name).write_bytes(img.to_png())
            rec = {"id": i, "text": text, "image": name, "page": Path(entry.image_ref).name,
                   "box": list(entry.box), "label": entry.label}
            if args.flag_multiline:
                rec["multiline"] = entry.multiline
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    summary = {"n_in": ann.n_in, "n_out": len(ann), "skipped": [vars(s) for s in ann.skipped]}
    (out / "ingest.json").write_text(json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    log.info("cropped %d regions, skipped %d of %d", len(ann), ann.skip_count, ann.n_in)


def _cmd_ablate(args):
    cfg = _config_for(args)
    names = [n.strip() for n in args.presets.split(",") if n.strip()]
    artifacts, augment_cfg = config.base_configs(cfg)
    spec = evaluate.AblationSpec.from_names(names, artifacts, augment_cfg)
    cfg["preset"] = "comprehensive"
    job = config.build_job(cfg)
    result = evaluate.ablation_matrix(spec, job, out_dir=args.out, workers=int(cfg["workers"]))
    sys.stdout.write(result.table_text())
    if args.out:
        Path(args.out, "ablation.json").write_text(json.dumps(result.table(), indent=2) + "\n", encoding="utf-8")


def _cmd_bench(args):
    if args.backend:
        kernels.use_backend(args.backend)
    cfg = config.load_config(args.config)
    config.apply_overrides(cfg, args.set)
    cfg.update(seed=args.seed, n_samples=args.n, workers=args.workers)
    if args.line_height:
        cfg["style"]["line_height"] = args.line_height
    job = config.build_job(cfg)
    stream = pipeline.SampleStream(job, args.workers)
    n_bytes = 0
    headers = open(args.headers, "w", encoding="utf-8") if args.headers else None
    start = time.perf_counter()
    try:
        for sample in stream:
            n_bytes += len(pipeline.encode_record(sample))
            if headers:
                headers.write(json.dumps(sample.header(), ensure_ascii=False) + "\n")
    finally:
        if headers:
            headers.close()
    elapsed = time.perf_counter() - start
    rate = stream.stats.n / elapsed if elapsed > 0 else float("inf")
    print(f"generated {stream.stats.n} samples in {elapsed:.2f}s: {rate:.1f} samples/s "
          f"({kernels.backend()} kernels, {args.workers} workers, line height {args.line_height}, "
          f"{n_bytes / max(stream.stats.n, 1) / 1024:.1f} KiB/record)")


COMMANDS = {
    "corpus": _cmd_corpus,
    "generate": _cmd_generate,
    "stream": _cmd_stream,
    "eval": _cmd_eval,
    "ingest-xfund": _cmd_ingest,
    "ablate": _cmd_ablate,
    "bench": _cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("vrdforge: %(message)s"))
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    log.addHandler(handler)
    log.setLevel(level)
    try:
        COMMANDS[args.command](args)
    except (VrdForgeError, OSError) as exc:
        print(f"vrdforge: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        log.removeHandler(handler)
    return EXIT_OK


def main():
    sys.exit(run())
