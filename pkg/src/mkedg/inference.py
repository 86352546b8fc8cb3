"""Interactive inference: history in, annotated response out.

Wraps a trained checkpoint together with the knowledge stores so one
call produces the response text, the predicted emotion with its full
distribution, the concepts that enriched the context graph, and the
copy attention each graph node received during decoding.  The CLI chat
commands and the HTTP service both sit on top of this engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint
from .corpus import EOS, detokenize, load_stopwords
from .errors import DomainError
from .graph import CLS_KIND, build_graph, enrich, flatten_history
from .knowledge import (ConceptCache, ConceptRanker, load_conceptnet,
                        load_embeddings, load_vad_lexicon)
from .model import (copy_scatter_matrix, decoder_forward, distribution_parts,
                    encode)


@dataclass(frozen=True)
class ChatResult:
    """One annotated model reply, JSON-ready via as_dict."""

    response: str
    emotion: str
    emotion_distribution: dict
    concepts: list
    copied_tokens: list

    def as_dict(self) -> dict:
        return {
            "response": self.response,
            "emotion": self.emotion,
            "emotion_distribution": dict(self.emotion_distribution),
            "concepts": [dict(c) for c in self.concepts],
            "copied_tokens": [dict(c) for c in self.copied_tokens],
        }


class InferenceEngine:
    """Immutable model snapshot plus knowledge lookups for decoding."""

    def __init__(self, params, config, vocab, emotions, lexicon=None,
                 provider=None, stopwords=None, per_token_cap: int = 5,
                 per_dialogue_cap: int = 10, max_steps: int = 30):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.emotions = list(emotions)
        self.lexicon = lexicon or {}
        self.provider = provider
        self.stopwords = stopwords or set()
        self.per_token_cap = per_token_cap
        self.per_dialogue_cap = per_dialogue_cap
        self.max_steps = max_steps
        if len(self.emotions) != config.num_emotions:
            raise DomainError(
                f"{len(self.emotions)} emotion labels for a model with "
                f"{config.num_emotions} outputs")

    @classmethod
    def from_checkpoint(cls, checkpoint_path, vad=None, tuples=None,
                        embeddings=None, stopwords=None, concept_cache=None,
                        alpha: float = 0.1, per_token_cap: int = 5,
                        per_dialogue_cap: int = 10,
                        max_steps: int = 30) -> "InferenceEngine":
        """Load a checkpoint and wire up whichever knowledge files exist.

        With no knowledge files the engine still works; graphs are then
        built without concept nodes.
        """
        ckpt = load_checkpoint(checkpoint_path)
        lexicon = load_vad_lexicon(vad) if vad else {}
        if concept_cache:
            provider = ConceptCache.load(concept_cache)
        elif tuples and embeddings:
            provider = ConceptRanker(load_conceptnet(tuples), lexicon,
                                     load_embeddings(embeddings), alpha=alpha)
        else:
            provider = None
        stop_set = load_stopwords(stopwords) if stopwords else set()
        return cls(ckpt.params, ckpt.config, ckpt.vocab, ckpt.emotions,
                   lexicon=lexicon, provider=provider, stopwords=stop_set,
                   per_token_cap=per_token_cap,
                   per_dialogue_cap=per_dialogue_cap, max_steps=max_steps)

    def build_context(self, history):
        """Tokenize the history and assemble its enriched graph."""
        history = list(history)
        if not history:
            raise DomainError("history must contain at least one utterance")
        if not all(isinstance(u, str) for u in history):
            raise DomainError("history utterances must be strings")
        tagged = flatten_history(SimpleNamespace(history=tuple(history)))
        if not tagged:
            raise DomainError("history contains no tokens")
        if self.config.use_knowledge and self.provider is not None:
            concept_map = enrich(tagged, self.provider, self.stopwords,
                                 per_token_cap=self.per_token_cap,
                                 per_dialogue_cap=self.per_dialogue_cap,
                                 vocab=self.vocab)
        else:
            concept_map = {}
        graph = build_graph(tagged, concept_map, self.vocab, self.lexicon)
        return tagged, concept_map, graph

    def respond(self, history) -> ChatResult:
        """Greedy-decode a reply with emotion and attribution annotations."""
        tagged, concept_map, graph = self.build_context(history)
        ctx = encode(graph, self.params, self.config)

        probabilities = ctx.p_e.data[0]
        emotion_distribution = {
            label: float(p) for label, p in zip(self.emotions, probabilities)
        }
        emotion = self.emotions[int(np.argmax(probabilities))]

        scatter = copy_scatter_matrix(graph, self.config.vocab_size)
        ids: list[int] = []
        attentions = []
        for _ in range(min(self.max_steps, self.config.max_positions - 1)):
            y_hat = decoder_forward(ids, ctx, self.params, self.config)
            row = ad.reshape(ad.take_row(y_hat, len(ids)),
                             (1, self.config.d_model))
            parts = distribution_parts(row, ctx, self.params, self.config,
                                       scatter=scatter)
            attentions.append(parts.copy_attention.data[0])
            next_id = int(np.argmax(parts.probabilities.data))
            if next_id == EOS:
                break
            ids.append(next_id)
        response = detokenize(self.vocab.decode_sequence(ids))

        surface_of_position = {t.position: t.token for t in tagged}
        concepts = [
            {"token": surface_of_position[position], "concept": c.concept,
             "score": float(c.score)}
            for position, ranked in concept_map.items()
            for c in ranked
        ]

        # mean over decode steps: each step's attention sums to one
        mean_attention = np.mean(np.stack(attentions), axis=0)
        copied_tokens = [
            {"position": node.position_index, "surface": node.surface,
             "copy_weight": float(mean_attention[i])}
            for i, node in enumerate(graph.nodes)
            if node.kind != CLS_KIND
        ]
        return ChatResult(response, emotion, emotion_distribution,
                          concepts, copied_tokens)
