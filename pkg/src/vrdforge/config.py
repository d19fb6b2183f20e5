"""JSON run configuration: defaults, file loading, dotted overrides, job assembly."""
from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .augment import ArtifactConfig, AugmentConfig, artifact_config_to_json, preset
from .corpus import (DEFAULT_MAX_CHARS, DEFAULT_MAX_WORDS, FixedWordCount, LengthDistribution,
                     bundled_corpus_path, load_corpus)
from .errors import ConfigError, DataError
from .renderer import FontPool, StyleSpace


def _style_defaults() -> dict:
    s = StyleSpace()
    return {
        "font_size_range": list(s.font_size_range),
        "padding_range": list(s.padding_range),
        "color_mode": s.color_mode,
        "text_gray_range": list(s.text_gray_range),
        "background_gray_range": list(s.background_gray_range),
        "min_contrast": s.min_contrast,
        "line_height": s.line_height,
    }


def _jsonable(obj):
    return json.loads(json.dumps(obj))


DEFAULTS = {
    "seed": 0,
    "n_samples": 1000,
    "workers": 1,
    "epoch_offset": 0,
    "preset": "comprehensive",
    "corpus": {"path": None, "max_chars": DEFAULT_MAX_CHARS, "max_words": DEFAULT_MAX_WORDS},
    "fonts": {"dir": None, "limit": None},
    # mode: uniform (equal-weight buckets), buckets (explicit), fixed (k words), any
    "length": {"mode": "uniform", "key": "word_count", "lo": 1, "hi": 10, "width": 1,
               "buckets": None, "k": None, "allow_truncation": False},
    "style": _style_defaults(),
    "artifacts": _jsonable(artifact_config_to_json(ArtifactConfig())),
    "augment": _jsonable(AugmentConfig().to_json()),
}


def defaults() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, update: dict, prefix: str = ""):
    for key, value in update.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {name!r} must be an object")
            _merge(base[key], value, name + ".")
        else:
            base[key] = value


def load_config(path=None) -> dict:
    """Defaults merged with the JSON file at ``path`` (``None`` or ``"default"`` keeps defaults).

    Relative corpus and font paths are resolved against the file's directory.
    """
    cfg = defaults()
    if path is None or str(path) == "default":
        return cfg
    path = Path(path)
    try:
        user = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    _merge(cfg, user)
    for section, key in (("corpus", "path"), ("fonts", "dir")):
        value = cfg[section][key]
        if value and not Path(value).is_absolute():
            cfg[section][key] = str(path.parent / value)
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` strings; values are parsed as JSON when possible."""
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        node = cfg
        parts = key.split(".")
        for i, part in enumerate(parts):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown config key {key!r}")
            if i == len(parts) - 1:
                if isinstance(node[part], dict):
                    raise ConfigError(f"config key {key!r} is a section; set one of its fields")
                node[part] = _parse_value(raw)
            else:
                node = node[part]
    return cfg


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def length_policy(cfg: dict):
    lc = cfg["length"]
    mode = lc["mode"]
    try:
        if mode == "uniform":
            return LengthDistribution.uniform(lc["key"], int(lc["lo"]), int(lc["hi"]), int(lc["width"]))
        if mode == "buckets":
            if not lc["buckets"]:
                raise ConfigError("length.buckets must list [lo, hi, weight] triples")
            return LengthDistribution(lc["key"], tuple(((int(a), int(b)), float(w)) for a, b, w in lc["buckets"]))
        if mode == "fixed":
            if lc["k"] is None:
                raise ConfigError("length.k is required when length.mode is 'fixed'")
            return FixedWordCount(int(lc["k"]), bool(lc["allow_truncation"]))
        if mode == "any":
            return None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"length: {exc}") from exc
    raise ConfigError(f"length.mode must be uniform, buckets, fixed or any; got {mode!r}")


def style_space(cfg: dict) -> StyleSpace:
    try:
        return StyleSpace(**_tuples(cfg["style"]))
    except TypeError as exc:
        raise ConfigError(f"style: {exc}") from exc


def base_configs(cfg: dict) -> tuple[ArtifactConfig, AugmentConfig]:
    try:
        return ArtifactConfig(**_tuples(cfg["artifacts"])), AugmentConfig(**cfg["augment"])
    except TypeError as exc:
        raise ConfigError(f"artifacts/augment: {exc}") from exc


def font_pool(cfg: dict) -> FontPool:
    """Font pool from ``VRDFORGE_FONTS``, else ``fonts.dir``, else system fonts."""
    directory = os.environ.get("VRDFORGE_FONTS") or cfg["fonts"]["dir"]
    return FontPool.from_directory(directory, limit=cfg["fonts"]["limit"])


def corpus_pool(cfg: dict):
    c = cfg["corpus"]
    return load_corpus(c["path"] or bundled_corpus_path(), int(c["max_chars"]), c["max_words"])


def build_job(cfg: dict, fonts: FontPool | None = None, pool=None, output_mode: str = "stream"):
    from .pipeline import GenerationJob

    artifacts, augment_cfg = preset(cfg["preset"], *base_configs(cfg))
    return GenerationJob(
        master_seed=int(cfg["seed"]),
        n_samples=int(cfg["n_samples"]),
        pool=pool if pool is not None else corpus_pool(cfg),
        fonts=fonts or font_pool(cfg),
        style=style_space(cfg),
        artifacts=artifacts,
        augment=augment_cfg,
        length=length_policy(cfg),
        output_mode=output_mode,
        epoch_offset=int(cfg["epoch_offset"]),
        max_chars=int(cfg["corpus"]["max_chars"]),
    )
