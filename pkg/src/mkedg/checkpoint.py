"""Binary checkpoint format.

Layout: the magic bytes ``MKEDG1`` followed by a flat list of sections,
each ``[u32 name length][name utf-8][u64 payload length][payload]``.
Three section kinds exist: ``config`` (key=value text, one per line),
``vocab`` (newline-separated token list in id order), and one
``param:<name>`` per parameter tensor whose payload is
``[u8 ndim][u32 dim...]`` followed by little-endian float32 data in row
major order.  Loading restores float64 working copies and validates
magic, section completeness, tensor shapes against the config, and the
vocab size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .corpus import RESERVED_TOKENS, Vocab
from .errors import CheckpointError
from .model import ModelConfig, ModelParams, init_params

MAGIC = b"MKEDG1"

_CONFIG_FIELDS = [
    ("vocab_size", int),
    ("num_emotions", int),
    ("d_model", int),
    ("heads", int),
    ("encoder_layers", int),
    ("decoder_layers", int),
    ("ffn_dim", int),
    ("max_positions", int),
    ("max_utterances", int),
    ("gamma1", float),
    ("gamma2", float),
    ("use_knowledge", bool),
    ("use_ecatm", bool),
]


@dataclass
class Checkpoint:
    params: ModelParams
    config: ModelConfig
    vocab: Vocab
    emotions: list[str]


def _encode_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _decode_value(text: str, kind):
    if kind is bool:
        if text not in ("true", "false"):
            raise CheckpointError(f"invalid boolean {text!r} in config section")
        return text == "true"
    try:
        return kind(text)
    except ValueError:
        raise CheckpointError(f"invalid {kind.__name__} {text!r} "
                              "in config section") from None


def _config_text(config: ModelConfig, emotions) -> str:
    lines = [f"{name}={_encode_value(getattr(config, name))}"
             for name, _ in _CONFIG_FIELDS]
    lines.append("emotions=" + ",".join(emotions))
    return "\n".join(lines) + "\n"


def _parse_config(text: str) -> tuple[ModelConfig, list[str]]:
    values = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if "=" not in line:
            raise CheckpointError(f"malformed config line {line!r}")
        key, _, raw = line.partition("=")
        values[key] = raw
    emotions = values.pop("emotions", None)
    if emotions is None:
        raise CheckpointError("config section missing emotions")
    kwargs = {}
    for name, kind in _CONFIG_FIELDS:
        if name not in values:
            raise CheckpointError(f"config section missing {name}")
        kwargs[name] = _decode_value(values[name], kind)
    return ModelConfig(**kwargs), emotions.split(",")


def _pack_tensor(data: np.ndarray) -> bytes:
    out = [struct.pack("<B", data.ndim)]
    for dim in data.shape:
        out.append(struct.pack("<I", dim))
    out.append(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return b"".join(out)


def _unpack_tensor(payload: bytes, name: str) -> np.ndarray:
    if len(payload) < 1:
        raise CheckpointError(f"param section {name!r} truncated")
    ndim = payload[0]
    header = 1 + 4 * ndim
    if len(payload) < header:
        raise CheckpointError(f"param section {name!r} truncated")
    dims = struct.unpack(f"<{ndim}I", payload[1:header])
    count = int(np.prod(dims)) if dims else 1
    body = payload[header:]
    if len(body) != 4 * count:
        raise CheckpointError(
            f"param section {name!r}: expected {4 * count} data bytes, "
            f"found {len(body)}")
    return np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(dims)


def save_checkpoint(path, params: ModelParams, config: ModelConfig,
                    vocab: Vocab, emotions) -> None:
    sections: list[tuple[str, bytes]] = [
        ("config", _config_text(config, emotions).encode("utf-8")),
        ("vocab", "\n".join(vocab.id_to_token).encode("utf-8")),
    ]
    for name, tensor in params.tensors.items():
        sections.append((f"param:{name}", _pack_tensor(tensor.data)))
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        for name, payload in sections:
            encoded = name.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<Q", len(payload)))
            handle.write(payload)


def _read_sections(blob: bytes) -> dict[str, bytes]:
    sections: dict[str, bytes] = {}
    offset = len(MAGIC)
    total = len(blob)
    while offset < total:
        if offset + 4 > total:
            raise CheckpointError("truncated checkpoint: section header cut off")
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + name_len + 8 > total:
            raise CheckpointError("truncated checkpoint: section header cut off")
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (payload_len,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        if offset + payload_len > total:
            raise CheckpointError(
                f"truncated checkpoint: section {name!r} payload cut off")
        sections[name] = blob[offset:offset + payload_len]
        offset += payload_len
    return sections


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        blob = handle.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(
            f'bad checkpoint magic: expected "{MAGIC.decode()}"')
    sections = _read_sections(blob)
    if "config" not in sections:
        raise CheckpointError("checkpoint missing config section")
    if "vocab" not in sections:
        raise CheckpointError("checkpoint missing vocab section")
    config, emotions = _parse_config(sections["config"].decode("utf-8"))
    if len(emotions) != config.num_emotions:
        raise CheckpointError(
            f"config lists {config.num_emotions} emotions but "
            f"{len(emotions)} labels stored")

    tokens = sections["vocab"].decode("utf-8").split("\n")
    if len(tokens) != config.vocab_size:
        raise CheckpointError(
            f"vocab has {len(tokens)} tokens but config says "
            f"{config.vocab_size}")
    if tuple(tokens[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
        raise CheckpointError("vocab section does not start with reserved tokens")
    vocab = Vocab(tokens[len(RESERVED_TOKENS):])

    expected = init_params(config, seed=0)
    tensors: dict[str, Tensor] = {}
    for name, reference in expected.tensors.items():
        key = f"param:{name}"
        if key not in sections:
            raise CheckpointError(f"checkpoint missing param section {name!r}")
        data = _unpack_tensor(sections[key], name)
        if data.shape != reference.data.shape:
            raise CheckpointError(
                f"param {name!r}: shape {data.shape} does not match config "
                f"shape {reference.data.shape}")
        tensors[name] = Tensor(data, requires_grad=True)
    extra = [k for k in sections
             if k.startswith("param:") and k[len("param:"):] not in tensors]
    if extra:
        raise CheckpointError(f"unknown param sections {sorted(extra)}")
    return Checkpoint(ModelParams(tensors), config, vocab, emotions)
