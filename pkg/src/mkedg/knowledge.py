"""Knowledge sources: commonsense tuples, VAD lexicon, word vectors.

Everything here is loaded once from flat files and then treated as
immutable.  The two stores combine into per-token ranked concept lists:
candidate tuples are filtered by relation and confidence, then scored by
emotion intensity + cosine similarity + confidence and truncated.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError

log = logging.getLogger(__name__)

# Raw confidence scores live on a 1..10 scale; min-max rescaled to [0,1].
RAW_CONF_MIN = 1.0
RAW_CONF_MAX = 10.0

# Analytic extremes of ||(Va - 1/2, Ar/2)||_2 over Va, Ar in [0,1]: the
# minimum 0 is attained at (0.5, 0) and the maximum sqrt(2)/2 at (0, 1)
# or (1, 1).  Normalizing by these makes intensity a pure per-word
# function with range [0, 1], reproducible without a reference corpus.
INTENSITY_MAX = math.sqrt(2.0) / 2.0

NEUTRAL_VAD = (0.5, 0.5, 0.5)

DEFAULT_EXCLUDED_RELATIONS = frozenset({"Antonym", "ExternalURL", "DistinctFrom"})


@dataclass(frozen=True)
class VadEntry:
    """One lexicon row: valence/arousal/dominance, each in [0,1].

    Dominance is carried for completeness but does not enter the
    intensity computation.
    """

    word: str
    valence: float
    arousal: float
    dominance: float


@dataclass(frozen=True)
class KnowledgeTuple:
    """One (head, relation, tail) assertion with its confidence.

    ``confidence`` is the min-max normalized form of ``raw_confidence``.
    """

    head: str
    relation: str
    tail: str
    raw_confidence: float
    confidence: float


@dataclass(frozen=True)
class RankedConcept:
    """A tail concept scored for one query token.

    ``score == intensity + cosine + confidence`` (the three ranking
    ingredients: emotion, semantics, source confidence).
    """

    concept: str
    relation: str
    score: float
    intensity: float
    confidence: float
    cosine: float


class EmbeddingTable:
    """Word vectors of a fixed dimension, keyed by lowercase word."""

    def __init__(self, dimension: int, vectors: dict[str, np.ndarray]):
        self.dimension = dimension
        self.vectors = vectors

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def get(self, word: str):
        return self.vectors.get(word)

    def __len__(self) -> int:
        return len(self.vectors)


def normalize_confidence(raw: float) -> float:
    """Min-max rescale a raw confidence from [1,10] to [0,1]."""
    if not (RAW_CONF_MIN <= raw <= RAW_CONF_MAX):
        raise DomainError(
            f"raw confidence {raw!r} outside [{RAW_CONF_MIN:g}, {RAW_CONF_MAX:g}]"
        )
    return (raw - RAW_CONF_MIN) / (RAW_CONF_MAX - RAW_CONF_MIN)


def load_vad_lexicon(path) -> dict[str, VadEntry]:
    """Parse a ``word<TAB>valence<TAB>arousal<TAB>dominance`` file.

    Duplicate words keep the last occurrence; the duplicate count is
    logged.  Malformed lines raise :class:`ParseError` with the line
    number.
    """
    lexicon: dict[str, VadEntry] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 tab-separated columns, got {len(parts)}",
                    path=path, line=lineno,
                )
            word = parts[0].strip().lower()
            if not word:
                raise ParseError("empty word column", path=path, line=lineno)
            values = []
            for name, text in zip(("valence", "arousal", "dominance"), parts[1:]):
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(
                        f"non-numeric {name} {text!r}", path=path, line=lineno
                    ) from None
                if not (0.0 <= value <= 1.0):
                    raise ParseError(
                        f"{name} out of range, line {lineno}", path=path, line=lineno
                    )
                values.append(value)
            if word in lexicon:
                duplicates += 1
            lexicon[word] = VadEntry(word, *values)
    if duplicates:
        log.warning("VAD lexicon %s: %d duplicate words (last occurrence wins)",
                    path, duplicates)
    return lexicon


def load_conceptnet(path) -> dict[str, list[KnowledgeTuple]]:
    """Parse ``head<TAB>relation<TAB>tail<TAB>raw_weight`` tuples.

    Returns a head -> tuples map (lookup key is the lowercase head,
    input order preserved).  ``#``-prefixed lines are comments.
    """
    store: dict[str, list[KnowledgeTuple]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 tab-separated columns, got {len(parts)}",
                    path=path, line=lineno,
                )
            head, relation, tail, weight_text = (p.strip() for p in parts)
            if not head or not tail:
                raise ParseError("empty head or tail concept", path=path, line=lineno)
            try:
                raw = float(weight_text)
            except ValueError:
                raise ParseError(
                    f"non-numeric weight {weight_text!r}", path=path, line=lineno
                ) from None
            try:
                confidence = normalize_confidence(raw)
            except DomainError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
            store.setdefault(head.lower(), []).append(
                KnowledgeTuple(head.lower(), relation, tail.lower(), raw, confidence)
            )
    return store


def load_embeddings(path) -> EmbeddingTable:
    """Parse GloVe-layout text: ``word v1 v2 ... vd``, space-separated."""
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise ParseError("expected a word and vector values",
                                 path=path, line=lineno)
            word = parts[0].lower()
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric vector value", path=path, line=lineno) from None
            if dimension is None:
                dimension = vec.shape[0]
            elif vec.shape[0] != dimension:
                raise ParseError(
                    f"vector length {vec.shape[0]} != {dimension}",
                    path=path, line=lineno,
                )
            vectors[word] = vec
    return EmbeddingTable(dimension or 0, vectors)


def load_excluded_relations(path) -> frozenset[str]:
    """Read one relation name per line into a set."""
    names = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            name = line.strip()
            if name and not name.startswith("#"):
                names.add(name)
    return frozenset(names)


def emotion_intensity(word: str, lexicon: dict[str, VadEntry]) -> float:
    """How emotionally charged a word is, in [0,1].

    L2 norm of (valence - 1/2, arousal / 2), min-max rescaled by the
    analytic bounds.  Out-of-lexicon words fall back to the neutral
    point valence = arousal = 0.5.
    """
    entry = lexicon.get(word.lower())
    if entry is None:
        valence, arousal = NEUTRAL_VAD[0], NEUTRAL_VAD[1]
    else:
        valence, arousal = entry.valence, entry.arousal
    raw = math.hypot(valence - 0.5, arousal / 2.0)
    return raw / INTENSITY_MAX


def relation_excluded(relation: str, excluded: frozenset[str]) -> bool:
    """Negation-prefixed relations are always dropped; the set adds more."""
    return relation.startswith("Not") or relation in excluded


def retrieve_candidates(
    token: str,
    store: dict[str, list[KnowledgeTuple]],
    excluded_relations: frozenset[str] = DEFAULT_EXCLUDED_RELATIONS,
    alpha: float = 0.1,
) -> list[KnowledgeTuple]:
    """Tuples headed by ``token`` after relation and confidence filtering.

    Keeps tuples whose relation is not excluded and whose normalized
    confidence is strictly above ``alpha``; input order preserved.
    """
    if not (0.0 <= alpha < 1.0):
        raise DomainError(f"confidence threshold {alpha!r} outside [0, 1)")
    out = []
    for tup in store.get(token.lower(), []):
        if relation_excluded(tup.relation, excluded_relations):
            continue
        if tup.confidence > alpha:
            out.append(tup)
    return out


def cosine_similarity(a, b) -> float:
    """Plain cosine; 0 when either vector is missing or zero."""
    if a is None or b is None:
        return 0.0
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def rank_concepts(
    token: str,
    candidates: list[KnowledgeTuple],
    lexicon: dict[str, VadEntry],
    embeddings: EmbeddingTable,
    k_prime: int,
) -> list[RankedConcept]:
    """Score candidates by intensity + cosine + confidence; keep top ``k_prime``.

    Sorted descending by score with deterministic tie-breaks (higher
    confidence first, then lexicographic tail).
    """
    if k_prime < 1:
        raise DomainError(f"k_prime must be >= 1, got {k_prime}")
    token_vec = embeddings.get(token.lower())
    scored = []
    for tup in candidates:
        intensity = emotion_intensity(tup.tail, lexicon)
        cosine = cosine_similarity(token_vec, embeddings.get(tup.tail))
        score = intensity + cosine + tup.confidence
        scored.append(
            RankedConcept(tup.tail, tup.relation, score, intensity,
                          tup.confidence, cosine)
        )
    scored.sort(key=lambda c: (-c.score, -c.confidence, c.concept))
    return scored[:k_prime]


class ConceptRanker:
    """Bundles the loaded stores into a token -> ranked concepts lookup."""

    def __init__(self, store, lexicon, embeddings,
                 excluded_relations=DEFAULT_EXCLUDED_RELATIONS,
                 alpha: float = 0.1, k_prime: int = 5):
        self.store = store
        self.lexicon = lexicon
        self.embeddings = embeddings
        self.excluded_relations = excluded_relations
        self.alpha = alpha
        self.k_prime = k_prime

    def ranked(self, token: str) -> list[RankedConcept]:
        candidates = retrieve_candidates(
            token, self.store, self.excluded_relations, self.alpha)
        if not candidates:
            return []
        return rank_concepts(token, candidates, self.lexicon,
                             self.embeddings, self.k_prime)


class ConceptCache:
    """Precomputed token -> ranked concepts map, serializable as JSONL."""

    def __init__(self, table: dict[str, list[RankedConcept]]):
        self.table = table

    def ranked(self, token: str) -> list[RankedConcept]:
        return self.table.get(token.lower(), [])

    @classmethod
    def build(cls, tokens, ranker: ConceptRanker) -> "ConceptCache":
        table = {}
        for token in tokens:
            concepts = ranker.ranked(token)
            if concepts:
                table[token.lower()] = concepts
        return cls(table)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for token in sorted(self.table):
                record = {
                    "token": token,
                    "concepts": [vars(c) for c in self.table[token]],
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path) -> "ConceptCache":
        table: dict[str, list[RankedConcept]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    token = record["token"]
                    concepts = [RankedConcept(**c) for c in record["concepts"]]
                except (ValueError, KeyError, TypeError):
                    raise ParseError("malformed cache record",
                                     path=path, line=lineno) from None
                table[token] = concepts
        return cls(table)
