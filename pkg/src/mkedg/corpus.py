"""Dialogue corpus loading, tokenization, vocabulary, stopwords.

The corpus is JSON-lines: one record per dialogue with the utterance
history, the speaker's gold emotion label, and the listener's response.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass

from .errors import ParseError

# The 32 evenly distributed emotion labels of the public empathetic
# dialogue corpus; desk-scale runs may configure a smaller set.
DEFAULT_EMOTIONS = (
    "surprised", "excited", "annoyed", "proud", "angry", "sad", "grateful",
    "lonely", "impressed", "afraid", "disgusted", "confident", "terrified",
    "hopeful", "anxious", "disappointed", "joyful", "prepared", "guilty",
    "furious", "nostalgic", "jealous", "anticipating", "embarrassed",
    "content", "devastated", "sentimental", "caring", "trusting", "ashamed",
    "apprehensive", "faithful",
)

PAD, UNK, BOS, EOS, CLS = 0, 1, 2, 3, 4
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>", "<cls>")

# Punctuation marks split into standalone tokens; everything else splits
# on whitespace after lowercasing.
_TOKEN_RE = re.compile(r"[.,!?'\"]|[^\s.,!?'\"]+")


@dataclass(frozen=True)
class DialogueSample:
    """One dialogue: ordered history turns, gold emotion, gold response."""

    id: str
    history: tuple[str, ...]
    emotion: str
    response: str


def tokenize(text: str) -> list[str]:
    """Lowercase and split; ``.,!?'"`` become standalone tokens."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens) -> str:
    return " ".join(tokens)


def load_corpus(path, emotions=DEFAULT_EMOTIONS) -> list[DialogueSample]:
    """Parse a JSON-lines corpus file, validating every record."""
    label_set = set(emotions)
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError:
                raise ParseError("invalid JSON", path=path, line=lineno) from None
            for field in ("id", "history", "emotion", "response"):
                if field not in record:
                    raise ParseError(f"missing field {field!r}",
                                     path=path, line=lineno)
            history = record["history"]
            if not isinstance(history, list) or not history:
                raise ParseError("history must be a non-empty list",
                                 path=path, line=lineno)
            if not all(isinstance(u, str) for u in history):
                raise ParseError("history entries must be strings",
                                 path=path, line=lineno)
            if not record["response"]:
                raise ParseError("empty response", path=path, line=lineno)
            if record["emotion"] not in label_set:
                raise ParseError(
                    f"unknown emotion label {record['emotion']!r}",
                    path=path, line=lineno,
                )
            samples.append(DialogueSample(
                id=str(record["id"]),
                history=tuple(history),
                emotion=record["emotion"],
                response=record["response"],
            ))
    return samples


def load_stopwords(path) -> set[str]:
    """One lowercase word per line; duplicates collapse."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return words


class Vocab:
    """Token <-> dense id map with reserved ids 0..4 prepended."""

    def __init__(self, tokens):
        """``tokens`` are the non-reserved entries, already ordered."""
        self.id_to_token = list(RESERVED_TOKENS) + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode_sequence(self, tokens) -> list[int]:
        return [self.encode(t) for t in tokens]

    def decode(self, idx: int) -> str:
        return self.id_to_token[idx]

    def decode_sequence(self, ids) -> list[str]:
        return [self.decode(i) for i in ids]

    @property
    def non_reserved(self):
        return self.id_to_token[len(RESERVED_TOKENS):]


def build_vocab(samples, min_count: int = 1, max_size: int = 30000,
                concept_lists=None) -> Vocab:
    """Count tokens from histories, responses, and ranked concepts.

    Tokens appearing at least ``min_count`` times are kept, most
    frequent first (ties lexicographic), truncated so the full vocab
    (reserved ids included) never exceeds ``max_size``.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for sample in samples:
        for utterance in sample.history:
            counts.update(tokenize(utterance))
        counts.update(tokenize(sample.response))
    for tokens in (concept_lists or []):
        counts.update(tokens)
    eligible = [(t, c) for t, c in counts.items()
                if c >= min_count and t not in RESERVED_TOKENS]
    eligible.sort(key=lambda tc: (-tc[1], tc[0]))
    budget = max(0, max_size - len(RESERVED_TOKENS))
    return Vocab([t for t, _ in eligible[:budget]])
