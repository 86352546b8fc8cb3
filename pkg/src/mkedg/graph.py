"""Emotional context graph: dialogue tokens + concepts + a CLS summary node.

The flattened history supplies TOKEN nodes, ranked concepts supply
CONCEPT nodes anchored at the token that retrieved them, and a single
CLS node summarizes the whole context.  Three directed edge kinds
connect them; self-loops keep every node's attention neighborhood
non-empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import corpus as corpus_mod
from .errors import DomainError
from .knowledge import RankedConcept, emotion_intensity

CLS_KIND = "CLS"
TOKEN_KIND = "TOKEN"
CONCEPT_KIND = "CONCEPT"

SEQUENCE = "SEQUENCE"
EMOTION = "EMOTION"
GLOBALITY = "GLOBALITY"

CLS_SURFACE = corpus_mod.RESERVED_TOKENS[corpus_mod.CLS]


@dataclass(frozen=True)
class TaggedToken:
    """A history token with its utterance index and global position.

    Positions start at 1; position 0 is reserved for CLS.
    """

    token: str
    utterance_index: int
    position: int


@dataclass(frozen=True)
class GraphNode:
    kind: str
    surface: str
    vocab_id: int
    utterance_index: int
    position_index: int
    intensity: float


@dataclass
class EmotionalContextGraph:
    """Nodes ordered CLS, tokens, concepts; 0/1 adjacency with self-loops."""

    nodes: list[GraphNode]
    adjacency: np.ndarray
    edge_kinds: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def n_tokens(self) -> int:
        return sum(1 for n in self.nodes if n.kind == TOKEN_KIND)

    @property
    def n_concepts(self) -> int:
        return sum(1 for n in self.nodes if n.kind == CONCEPT_KIND)

    def intensities(self) -> np.ndarray:
        return np.array([n.intensity for n in self.nodes], dtype=np.float64)

    def neighbor_mask(self) -> np.ndarray:
        """Row i marks the attention neighborhood of node i.

        Information flows along edge direction, so node i attends to its
        in-neighbors (j with an edge j -> i); self-loops put i itself in
        every neighborhood.
        """
        return self.adjacency.T.copy()


def flatten_history(sample, tokenizer=corpus_mod.tokenize) -> list[TaggedToken]:
    """Concatenate tokenized utterances into one tagged sequence."""
    if not sample.history:
        raise DomainError("dialogue history is empty")
    tagged = []
    position = 1
    for utterance_index, utterance in enumerate(sample.history):
        for token in tokenizer(utterance):
            tagged.append(TaggedToken(token, utterance_index, position))
            position += 1
    return tagged


def enrich(
    tagged_tokens: list[TaggedToken],
    provider,
    stopwords: set[str],
    per_token_cap: int = 5,
    per_dialogue_cap: int = 10,
    vocab=None,
) -> dict[int, list[RankedConcept]]:
    """Attach ranked concepts to token positions under both caps.

    Stopword tokens (and out-of-vocabulary tokens, when a vocab is
    given) receive no concepts.  Each token contributes at most
    ``per_token_cap`` of its top-ranked concepts; across the dialogue,
    concepts are admitted in descending score order until
    ``per_dialogue_cap`` is reached (ties: earlier position, then
    lexicographic concept).
    """
    if per_token_cap < 0 or per_dialogue_cap < 0:
        raise DomainError("concept caps must be >= 0")
    pool = []  # (concept, position, rank within its token)
    for tagged in tagged_tokens:
        token = tagged.token
        if token in stopwords:
            continue
        if vocab is not None and vocab.encode(token) == corpus_mod.UNK:
            continue
        for rank, concept in enumerate(provider.ranked(token)[:per_token_cap]):
            pool.append((concept, tagged.position, rank))
    pool.sort(key=lambda item: (-item[0].score, item[1], item[0].concept))
    admitted = pool[:per_dialogue_cap]
    by_position: dict[int, list[tuple[int, RankedConcept]]] = {}
    for concept, position, rank in admitted:
        by_position.setdefault(position, []).append((rank, concept))
    return {
        position: [c for _, c in sorted(entries, key=lambda rc: rc[0])]
        for position, entries in sorted(by_position.items())
    }


def build_graph(
    tagged_tokens: list[TaggedToken],
    concept_map: dict[int, list[RankedConcept]],
    vocab,
    lexicon,
) -> EmotionalContextGraph:
    """Assemble nodes and the typed adjacency from the three edge rules."""
    if not tagged_tokens:
        raise DomainError("cannot build a graph from an empty token list")

    nodes = [GraphNode(CLS_KIND, CLS_SURFACE, corpus_mod.CLS, 0, 0,
                       emotion_intensity(CLS_SURFACE, lexicon))]
    token_index_of_position = {}
    for tagged in tagged_tokens:
        token_index_of_position[tagged.position] = len(nodes)
        nodes.append(GraphNode(
            TOKEN_KIND, tagged.token, vocab.encode(tagged.token),
            tagged.utterance_index, tagged.position,
            emotion_intensity(tagged.token, lexicon),
        ))
    concept_anchor = []  # (node index, anchor node index)
    for tagged in tagged_tokens:
        for concept in concept_map.get(tagged.position, []):
            concept_anchor.append((len(nodes), token_index_of_position[tagged.position]))
            nodes.append(GraphNode(
                CONCEPT_KIND, concept.concept, vocab.encode(concept.concept),
                tagged.utterance_index, tagged.position,
                emotion_intensity(concept.concept, lexicon),
            ))

    m = len(nodes)
    adjacency = np.zeros((m, m), dtype=np.int8)
    edge_kinds: dict[tuple[int, int], str] = {}

    def connect(i, j, kind):
        adjacency[i, j] = 1
        edge_kinds[(i, j)] = kind

    token_indices = [token_index_of_position[t.position] for t in tagged_tokens]
    for a, b in zip(token_indices, token_indices[1:]):
        connect(a, b, SEQUENCE)
    for concept_idx, anchor_idx in concept_anchor:
        connect(concept_idx, anchor_idx, EMOTION)
    for idx in token_indices:
        connect(idx, 0, GLOBALITY)
        connect(0, idx, GLOBALITY)
    for concept_idx, _ in concept_anchor:
        connect(concept_idx, 0, GLOBALITY)
    np.fill_diagonal(adjacency, 1)

    return EmotionalContextGraph(nodes, adjacency, edge_kinds)


def to_dot(graph: EmotionalContextGraph) -> str:
    """Render the graph as DOT text for debugging.

    Nodes are labeled ``kind:surface:intensity``; typed edges carry
    their kind, self-loops are omitted for readability.
    """
    lines = ["digraph context {"]
    for idx, node in enumerate(graph.nodes):
        label = f"{node.kind}:{node.surface}:{node.intensity:.3f}"
        lines.append(f'  n{idx} [label="{label}"];')
    for (i, j), kind in sorted(graph.edge_kinds.items()):
        lines.append(f'  n{i} -> n{j} [label="{kind}"];')
    lines.append("}")
    return "\n".join(lines)
