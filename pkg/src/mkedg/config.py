"""Runtime configuration: TOML file loading, defaults, flag precedence.

The resolution order for every field is: command-line flag, then config
file value, then the built-in default.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .corpus import DEFAULT_EMOTIONS
from .errors import ConfigError


@dataclass
class AppConfig:
    # paths
    corpus_train: str | None = None
    corpus_valid: str | None = None
    corpus_test: str | None = None
    vad: str | None = None
    tuples: str | None = None
    embeddings: str | None = None
    stopwords: str | None = None
    concept_cache: str | None = None
    checkpoint: str | None = None
    out: str = "runs"
    # model
    d_model: int = 64
    heads: int = 2
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_dim: int = 256
    max_positions: int = 512
    max_utterances: int = 32
    gamma1: float = 1.0
    gamma2: float = 1.0
    use_knowledge: bool = True
    use_ecatm: bool = True
    # knowledge retrieval
    per_dialogue_cap: int = 10
    per_token_cap: int = 5
    alpha: float = 0.1
    # vocabulary
    vocab_min_count: int = 1
    vocab_max_size: int = 30000
    # training
    batch_size: int = 16
    max_epochs: int = 100
    warmup: int = 8000
    patience: int = 5
    eval_every: int = 100
    seed: int = 0
    target_loss: float | None = None
    # decoding
    max_decode_steps: int = 30
    # emotion label set
    emotions: tuple[str, ...] = DEFAULT_EMOTIONS


_SECTIONS = {
    "paths": ("corpus_train", "corpus_valid", "corpus_test", "vad", "tuples",
              "embeddings", "stopwords", "concept_cache", "checkpoint", "out"),
    "model": ("d_model", "heads", "encoder_layers", "decoder_layers",
              "ffn_dim", "max_positions", "max_utterances", "gamma1",
              "gamma2", "use_knowledge", "use_ecatm"),
    "knowledge": ("per_dialogue_cap", "per_token_cap", "alpha"),
    "vocab": ("min_count", "max_size"),
    "training": ("batch_size", "max_epochs", "warmup", "patience",
                 "eval_every", "seed", "target_loss"),
    "decoding": ("max_steps",),
    "emotions": (),
}

# section-local names that differ from the AppConfig field name
_RENAMES = {
    ("vocab", "min_count"): "vocab_min_count",
    ("vocab", "max_size"): "vocab_max_size",
    ("decoding", "max_steps"): "max_decode_steps",
}

_FIELD_TYPES = {f.name: f for f in fields(AppConfig)}

_INT_FIELDS = {"d_model", "heads", "encoder_layers", "decoder_layers",
               "ffn_dim", "max_positions", "max_utterances",
               "per_dialogue_cap", "per_token_cap", "vocab_min_count",
               "vocab_max_size", "batch_size", "max_epochs", "warmup",
               "patience", "eval_every", "seed", "max_decode_steps"}
_FLOAT_FIELDS = {"gamma1", "gamma2", "alpha", "target_loss"}
_BOOL_FIELDS = {"use_knowledge", "use_ecatm"}
_STR_FIELDS = set(_SECTIONS["paths"])


def _coerce(field_name: str, value):
    if field_name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{field_name} must be an integer, "
                              f"got {value!r}")
        return value
    if field_name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field_name} must be a number, got {value!r}")
        return float(value)
    if field_name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"{field_name} must be a boolean, got {value!r}")
        return value
    if field_name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{field_name} must be a string, got {value!r}")
        return value
    raise ConfigError(f"unknown field {field_name}")


def load_config(path=None) -> AppConfig:
    """Read a TOML config file; with no path, return pure defaults."""
    config = AppConfig()
    if path is None:
        return config
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None

    updates = {}
    for section, content in data.items():
        if section == "emotions":
            labels = content.get("labels") if isinstance(content, dict) \
                else content
            if not (isinstance(labels, list) and labels
                    and all(isinstance(x, str) for x in labels)):
                raise ConfigError(
                    "emotions section needs a non-empty labels string list")
            updates["emotions"] = tuple(labels)
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key, value in content.items():
            field_name = _RENAMES.get((section, key), key)
            if field_name not in _SECTIONS[section] and \
                    (section, key) not in _RENAMES:
                raise ConfigError(
                    f"unknown key {key!r} in config section [{section}]")
            updates[field_name] = _coerce(field_name, value)
    return replace(config, **updates)


def resolve_paths(config: AppConfig, base_dir) -> AppConfig:
    """Anchor relative path fields at ``base_dir`` (the config file's home)."""
    base = Path(base_dir)
    updates = {}
    for name in _SECTIONS["paths"]:
        field_name = _RENAMES.get(("paths", name), name)
        value = getattr(config, field_name)
        if value is not None and not Path(value).is_absolute():
            updates[field_name] = str(base / value)
    return replace(config, **updates) if updates else config


def merge_flags(config: AppConfig, **flag_values) -> AppConfig:
    """Overlay non-None flag values; unknown names are a programming error."""
    updates = {}
    for name, value in flag_values.items():
        if value is None:
            continue
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config field {name}")
        updates[name] = value
    return replace(config, **updates) if updates else config


def config_lines(config: AppConfig) -> list[str]:
    """Stable key=value rendering of the resolved configuration."""
    out = []
    for f in fields(AppConfig):
        value = getattr(config, f.name)
        if f.name == "emotions":
            value = ",".join(value)
        out.append(f"{f.name}={value}")
    return out
