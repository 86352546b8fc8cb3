"""The knowledge-enriched empathetic dialogue network.

Pipeline per sample: embed graph nodes (word + dialogue-state + position
tables), contextualize locally with multi-head graph attention over the
adjacency neighborhoods, inject global information with stacked
post-norm transformer layers, distill an emotion vector by
intensity-weighted pooling, then decode with an emotion-prefixed
transformer whose cross-attention is augmented with the emotion vector
and whose output mixes a generation softmax with a copy distribution
over graph nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import EOS
from .errors import DomainError, ShapeError
from .graph import CLS_KIND, EmotionalContextGraph

LOG_EPS = 1e-12  # floor inside -log(p) so a zero-probability target cannot produce inf


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    num_emotions: int
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

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise DomainError(
                f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise DomainError("loss weights must be nonnegative")
        for name in ("vocab_size", "num_emotions", "d_model", "heads",
                     "ffn_dim", "max_positions", "max_utterances"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if self.encoder_layers < 0 or self.decoder_layers < 0:
            raise DomainError("layer counts must be nonnegative")

    @property
    def d_head(self) -> int:
        return self.d_model // self.heads


@dataclass
class ModelParams:
    """Named parameter tensors; ordering is fixed by construction."""

    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def as_dict(self) -> dict[str, Tensor]:
        return self.tensors


@dataclass
class EncodedContext:
    """Encoder output consumed by the decoder and the copy mechanism."""

    nodes: Tensor            # (m, d) final node representations
    c_e: Tensor              # (1, d) emotion context vector
    e_p: Tensor              # (1, q) emotion logits
    p_e: Tensor              # (1, q) emotion distribution
    intensities: np.ndarray  # (m,) node emotion intensities
    graph: EmotionalContextGraph = field(repr=False, default=None)


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(config: ModelConfig, seed: int = 0, embedding_table=None,
                vocab=None) -> ModelParams:
    """Build all parameter tensors.

    Word-embedding rows are copied from ``embedding_table`` for vocab
    tokens it covers, provided its dimension matches d_model; everything
    uncovered is uniform(-0.1, 0.1).
    """
    rng = np.random.default_rng(seed)
    d, q, f = config.d_model, config.num_emotions, config.ffn_dim
    dh = config.d_head
    t: dict[str, Tensor] = {}

    def param(name, data):
        t[name] = Tensor(data, requires_grad=True)

    e_w = rng.uniform(-0.1, 0.1, size=(config.vocab_size, d))
    if embedding_table is not None and vocab is not None:
        if embedding_table.dimension == d:
            for token, vector in embedding_table.vectors.items():
                idx = vocab.token_to_id.get(token)
                if idx is not None:
                    e_w[idx] = vector
        else:
            import logging
            logging.getLogger(__name__).warning(
                "pretrained embedding dimension %d != d_model %d; "
                "keeping random initialization", embedding_table.dimension, d)
    param("embed.word", e_w)
    param("embed.position", rng.uniform(-0.1, 0.1, size=(config.max_positions, d)))
    # row 0 is the CLS sentinel; utterance u uses row u + 1
    param("embed.dialogue",
          rng.uniform(-0.1, 0.1, size=(config.max_utterances + 1, d)))

    for n in range(config.heads):
        param(f"graph.q.{n}", _glorot(rng, dh, dh))
        param(f"graph.k.{n}", _glorot(rng, dh, dh))
        param(f"graph.v.{n}", _glorot(rng, dh, dh))

    def attention_block(prefix):
        for name in ("wq", "wk", "wv", "wo"):
            param(f"{prefix}.{name}", _glorot(rng, d, d))

    def ffn_block(prefix):
        param(f"{prefix}.w1", _glorot(rng, d, f))
        param(f"{prefix}.b1", np.zeros(f))
        param(f"{prefix}.w2", _glorot(rng, f, d))
        param(f"{prefix}.b2", np.zeros(d))

    def ln_block(prefix):
        param(f"{prefix}.gain", np.ones(d))
        param(f"{prefix}.bias", np.zeros(d))

    for i in range(config.encoder_layers):
        attention_block(f"enc.{i}.attn")
        ln_block(f"enc.{i}.ln1")
        ffn_block(f"enc.{i}.ffn")
        ln_block(f"enc.{i}.ln2")

    param("emo.w", _glorot(rng, d, q))
    param("emo.b", np.zeros(q))
    param("prefix.w", _glorot(rng, q, d))

    mix_in = 2 * d if config.use_ecatm else d
    for i in range(config.decoder_layers):
        attention_block(f"dec.{i}.self")
        ln_block(f"dec.{i}.ln1")
        attention_block(f"dec.{i}.cross")
        param(f"dec.{i}.mix", _glorot(rng, mix_in, d))
        ln_block(f"dec.{i}.ln2")
        ffn_block(f"dec.{i}.ffn")
        ln_block(f"dec.{i}.ln3")

    param("out.w", _glorot(rng, d, config.vocab_size))
    param("gate.w", _glorot(rng, d, 1))
    param("gate.b", np.zeros(1))
    param("copy.wh", _glorot(rng, d, d))
    param("copy.ws", _glorot(rng, d, d))
    param("copy.b", np.zeros(d))
    param("copy.v", _glorot(rng, d, 1))

    return ModelParams(t)


def embed_nodes(graph: EmotionalContextGraph, params: ModelParams,
                config: ModelConfig) -> Tensor:
    """Sum of word, dialogue-state, and position embeddings per node."""
    word_ids = []
    state_rows = []
    positions = []
    for idx, node in enumerate(graph.nodes):
        if not (0 <= node.vocab_id < config.vocab_size):
            raise ShapeError(
                f"node {idx} ({node.surface!r}): vocab id {node.vocab_id} "
                f"outside table of {config.vocab_size}")
        if not (0 <= node.position_index < config.max_positions):
            raise ShapeError(
                f"node {idx} ({node.surface!r}): position {node.position_index} "
                f"outside table of {config.max_positions}")
        row = 0 if node.kind == CLS_KIND else node.utterance_index + 1
        if not (0 <= row <= config.max_utterances):
            raise ShapeError(
                f"node {idx} ({node.surface!r}): utterance {node.utterance_index} "
                f"outside table of {config.max_utterances}")
        word_ids.append(node.vocab_id)
        state_rows.append(row)
        positions.append(node.position_index)
    word = ad.embedding_lookup(params["embed.word"], word_ids)
    state = ad.embedding_lookup(params["embed.dialogue"], state_rows)
    pos = ad.embedding_lookup(params["embed.position"], positions)
    return ad.add(ad.add(word, state), pos)


def graph_attention(v: Tensor, graph: EmotionalContextGraph,
                    params: ModelParams, config: ModelConfig) -> Tensor:
    """Residual multi-head attention restricted to adjacency neighborhoods.

    Head n sees only its own d_h-wide slice of the node vectors; scores
    are unscaled bilinear products and non-neighbors are masked to exact
    zero weight.
    """
    dh = config.d_head
    blocked = ~graph.neighbor_mask().astype(bool)
    heads = []
    for n in range(config.heads):
        sliced = ad.slice_cols(v, n * dh, (n + 1) * dh)
        q = sliced @ params[f"graph.q.{n}"]
        k = sliced @ params[f"graph.k.{n}"]
        vv = sliced @ params[f"graph.v.{n}"]
        scores = ad.masked_fill(q @ k.T, blocked)
        heads.append(ad.softmax(scores) @ vv)
    return ad.add(v, ad.concat(heads, axis=-1))


def _multi_head_attention(queries: Tensor, context: Tensor, prefix: str,
                          params: ModelParams, config: ModelConfig,
                          blocked=None) -> Tensor:
    """Standard scaled dot-product attention with an output projection."""
    dh = config.d_head
    q_all = queries @ params[f"{prefix}.wq"]
    k_all = context @ params[f"{prefix}.wk"]
    v_all = context @ params[f"{prefix}.wv"]
    heads = []
    for n in range(config.heads):
        q = ad.slice_cols(q_all, n * dh, (n + 1) * dh)
        k = ad.slice_cols(k_all, n * dh, (n + 1) * dh)
        v = ad.slice_cols(v_all, n * dh, (n + 1) * dh)
        scores = ad.scale(q @ k.T, dh ** -0.5)
        if blocked is not None:
            scores = ad.masked_fill(scores, blocked)
        heads.append(ad.softmax(scores) @ v)
    return ad.concat(heads, axis=-1) @ params[f"{prefix}.wo"]


def _ffn(x: Tensor, prefix: str, params: ModelParams) -> Tensor:
    hidden = ad.relu(ad.add(x @ params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    return ad.add(hidden @ params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def _ln(x: Tensor, prefix: str, params: ModelParams) -> Tensor:
    return ad.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"])


def encode_global(v_hat: Tensor, params: ModelParams,
                  config: ModelConfig) -> Tensor:
    """Stacked post-norm transformer layers over all nodes, unmasked."""
    x = v_hat
    for i in range(config.encoder_layers):
        h = _ln(ad.add(x, _multi_head_attention(
            x, x, f"enc.{i}.attn", params, config)), f"enc.{i}.ln1", params)
        x = _ln(ad.add(h, _ffn(h, f"enc.{i}.ffn", params)),
                f"enc.{i}.ln2", params)
    return x


def distill_emotion(context: Tensor, intensities: np.ndarray,
                    params: ModelParams) -> tuple[Tensor, Tensor, Tensor]:
    """Intensity-softmax pooling, then a linear emotion classifier."""
    m = context.shape[0]
    if len(intensities) != m:
        raise ShapeError(f"intensity count {len(intensities)} != node count {m}")
    weights = ad.softmax(Tensor(np.asarray(intensities).reshape(1, m)))
    c_e = weights @ context
    e_p = ad.add(c_e @ params["emo.w"], params["emo.b"])
    return c_e, e_p, ad.softmax(e_p)


def encode(graph: EmotionalContextGraph, params: ModelParams,
           config: ModelConfig) -> EncodedContext:
    v = embed_nodes(graph, params, config)
    if config.use_knowledge:
        v = graph_attention(v, graph, params, config)
    context = encode_global(v, params, config)
    intensities = graph.intensities()
    c_e, e_p, p_e = distill_emotion(context, intensities, params)
    return EncodedContext(nodes=context, c_e=c_e, e_p=e_p, p_e=p_e,
                          intensities=intensities, graph=graph)


def decoder_forward(prefix_ids, ctx: EncodedContext, params: ModelParams,
                    config: ModelConfig) -> Tensor:
    """Run the decoder stack over [emotion prefix, embedded tokens].

    Returns one row per input position; row t scores the token at step
    t + 1.  The emotion prefix occupies position 0 and is built from the
    encoder's emotion logits by a bias-free linear map.
    """
    prefix_ids = list(prefix_ids)
    j = len(prefix_ids) + 1
    if j > config.max_positions:
        raise ShapeError(
            f"decoder length {j} exceeds position table {config.max_positions}")
    for token_id in prefix_ids:
        if not (0 <= token_id < config.vocab_size):
            raise ShapeError(f"decoder prefix id {token_id} out of vocab")

    e_prime = ctx.e_p @ params["prefix.w"]
    rows = [ad.add(e_prime, ad.reshape(
        ad.take_row(params["embed.position"], 0), (1, config.d_model)))]
    if prefix_ids:
        tok = ad.embedding_lookup(params["embed.word"], prefix_ids)
        pos = ad.embedding_lookup(params["embed.position"], list(range(1, j)))
        rows.append(ad.add(tok, pos))
    x = ad.concat(rows, axis=0) if len(rows) > 1 else rows[0]

    causal = np.triu(np.ones((j, j), dtype=bool), k=1)
    for i in range(config.decoder_layers):
        y = _ln(ad.add(x, _multi_head_attention(
            x, x, f"dec.{i}.self", params, config, blocked=causal)),
            f"dec.{i}.ln1", params)
        cross = _multi_head_attention(y, ctx.nodes, f"dec.{i}.cross",
                                      params, config)
        if config.use_ecatm:
            cross = ad.concat([cross, ad.repeat_rows(ctx.c_e, j)], axis=-1)
        d = ad.add(y, cross @ params[f"dec.{i}.mix"])
        d_hat = _ln(d, f"dec.{i}.ln2", params)
        x = _ln(ad.add(d_hat, _ffn(d_hat, f"dec.{i}.ffn", params)),
                f"dec.{i}.ln3", params)
    return x


def copy_scatter_matrix(graph: EmotionalContextGraph,
                        vocab_size: int) -> np.ndarray:
    """Binary (m, vocab) map sending node copy weights to their vocab ids."""
    matrix = np.zeros((graph.size, vocab_size))
    for i, node in enumerate(graph.nodes):
        matrix[i, node.vocab_id] = 1.0
    return matrix


class DistributionParts(NamedTuple):
    """Output mixture plus the pieces it was mixed from."""

    probabilities: Tensor   # (vocab,) final mixture
    generation: Tensor      # (1, vocab) softmax over the vocabulary
    copy_attention: Tensor  # (1, m) attention over graph nodes
    copied: Tensor          # (1, vocab) copy mass scattered to vocab ids
    gate: Tensor            # (1, 1) generation-vs-copy gate


def distribution_parts(y_hat: Tensor, ctx: EncodedContext,
                       params: ModelParams, config: ModelConfig,
                       scatter: np.ndarray | None = None) -> DistributionParts:
    """Mix the generation softmax with the scattered copy distribution.

    ``y_hat`` is a single decoder output row shaped (1, d).  The final
    probability vector is p = (1 - p_g) * copy + p_g * generate.
    """
    if scatter is None:
        scatter = copy_scatter_matrix(ctx.graph, config.vocab_size)
    alpha_g = ad.softmax(y_hat @ params["out.w"])
    p_g = ad.sigmoid(ad.add(y_hat @ params["gate.w"], params["gate.b"]))

    keys = ctx.nodes @ params["copy.wh"]
    query = ad.add(y_hat @ params["copy.ws"], params["copy.b"])
    scores = ad.tanh(ad.add(keys, query)) @ params["copy.v"]
    alpha_c = ad.softmax(ad.reshape(scores, (1, ctx.nodes.shape[0])))
    copied = alpha_c @ Tensor(scatter)

    one_minus = ad.add(ad.scale(p_g, -1.0), Tensor(np.ones((1, 1))))
    mixture = ad.add(ad.mul(copied, one_minus), ad.mul(alpha_g, p_g))
    return DistributionParts(ad.take_row(mixture, 0), alpha_g, alpha_c,
                             copied, p_g)


def generate_distribution(y_hat: Tensor, ctx: EncodedContext,
                          params: ModelParams, config: ModelConfig,
                          scatter: np.ndarray | None = None) -> Tensor:
    """Final (vocab,) mixture; see distribution_parts for the pieces."""
    return distribution_parts(y_hat, ctx, params, config,
                              scatter=scatter).probabilities


def sequence_nll(ctx: EncodedContext, target_ids, params: ModelParams,
                 config: ModelConfig) -> tuple[Tensor, int]:
    """Teacher-forced -log p summed over a target sequence (EOS included)."""
    target_ids = list(target_ids)
    if not target_ids:
        raise DomainError("empty target sequence")
    y_hat = decoder_forward(target_ids[:-1], ctx, params, config)
    scatter = copy_scatter_matrix(ctx.graph, config.vocab_size)
    terms = []
    for t, token_id in enumerate(target_ids):
        row = ad.reshape(ad.take_row(y_hat, t), (1, config.d_model))
        dist = generate_distribution(row, ctx, params, config, scatter=scatter)
        terms.append(ad.scale(ad.log(ad.pick(dist, token_id), eps=LOG_EPS), -1.0))
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    return total, len(target_ids)


def compute_loss(items, params: ModelParams,
                 config: ModelConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Joint loss over (graph, target ids incl. EOS, emotion id) items.

    The generation term is averaged per token across the whole batch so
    exp(L_gen) is exactly the teacher-forced perplexity.
    """
    items = list(items)
    if not items:
        raise DomainError("empty batch")
    emo_total = None
    gen_total = None
    token_count = 0
    for graph, target_ids, emotion_id in items:
        ctx = encode(graph, params, config)
        emo = ad.cross_entropy(ad.take_row(ctx.e_p, 0), emotion_id)
        emo_total = emo if emo_total is None else ad.add(emo_total, emo)
        nll, count = sequence_nll(ctx, target_ids, params, config)
        gen_total = nll if gen_total is None else ad.add(gen_total, nll)
        token_count += count
    loss_emo = ad.scale(emo_total, 1.0 / len(items))
    loss_gen = ad.scale(gen_total, 1.0 / token_count)
    loss = ad.add(ad.scale(loss_emo, config.gamma1),
                  ad.scale(loss_gen, config.gamma2))
    return loss, loss_emo, loss_gen


def greedy_decode(graph: EmotionalContextGraph, params: ModelParams,
                  config: ModelConfig, max_steps: int = 30) -> list[int]:
    """Argmax decoding; ties resolve to the smaller id; EOS is dropped."""
    ctx = encode(graph, params, config)
    scatter = copy_scatter_matrix(graph, config.vocab_size)
    ids: list[int] = []
    # the emotion prefix occupies one slot, so at most max_positions - 1 tokens
    for _ in range(min(max_steps, config.max_positions - 1)):
        y_hat = decoder_forward(ids, ctx, params, config)
        row = ad.reshape(ad.take_row(y_hat, len(ids)), (1, config.d_model))
        dist = generate_distribution(row, ctx, params, config, scatter=scatter)
        next_id = int(np.argmax(dist.data))
        if next_id == EOS:
            break
        ids.append(next_id)
    return ids
