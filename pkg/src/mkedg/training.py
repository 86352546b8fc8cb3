"""Batching, the optimization loop, early stopping, checkpoint selection.

Graphs are encoded per sample (node counts vary), so a batch carries the
graphs themselves plus a padded target matrix and mask for bookkeeping.
The loop follows warmup scheduling with Adam, clips gradients at global
norm 1.0, evaluates on the validation split every ``eval_every`` steps,
and keeps the best-validation checkpoint.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import corpus as corpus_mod
from .checkpoint import save_checkpoint
from .corpus import EOS, PAD, Vocab
from .errors import DomainError
from .graph import EmotionalContextGraph, build_graph, enrich, flatten_history
from .model import ModelConfig, ModelParams, compute_loss
from .optim import Adam, clip_global_norm, lr_schedule


@dataclass
class TrainConfig:
    max_epochs: int
    batch_size: int = 16
    warmup: int = 8000
    patience: int = 5
    eval_every: int = 100
    seed: int = 0
    # stop as soon as training loss drops below this, if set
    target_loss: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.patience < 1:
            raise DomainError("patience must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")


@dataclass(frozen=True)
class TrainItem:
    """One prepared sample: its graph, target ids (EOS appended), emotion."""

    sample_id: str
    graph: EmotionalContextGraph
    target_ids: tuple[int, ...]
    emotion_id: int


@dataclass
class Batch:
    graphs: list[EmotionalContextGraph]
    targets: np.ndarray     # (B, T) padded with PAD
    mask: np.ndarray        # (B, T) 1 on real positions, 0 on padding
    emotions: np.ndarray    # (B,)

    def items(self):
        out = []
        for i, graph in enumerate(self.graphs):
            length = int(self.mask[i].sum())
            out.append((graph, self.targets[i, :length].tolist(),
                        int(self.emotions[i])))
        return out

    @property
    def size(self) -> int:
        return len(self.graphs)

    @property
    def token_count(self) -> int:
        return int(self.mask.sum())


def build_training_items(samples, vocab: Vocab, lexicon, provider, stopwords,
                         emotions, per_token_cap: int = 5,
                         per_dialogue_cap: int = 10,
                         use_knowledge: bool = True) -> list[TrainItem]:
    """Turn corpus samples into graphs plus encoded targets."""
    emotion_index = {label: i for i, label in enumerate(emotions)}
    items = []
    for sample in samples:
        if sample.emotion not in emotion_index:
            raise DomainError(
                f"sample {sample.id}: unknown emotion {sample.emotion!r}")
        tagged = flatten_history(sample)
        if use_knowledge and provider is not None:
            concept_map = enrich(tagged, provider, stopwords,
                                 per_token_cap=per_token_cap,
                                 per_dialogue_cap=per_dialogue_cap,
                                 vocab=vocab)
        else:
            concept_map = {}
        graph = build_graph(tagged, concept_map, vocab, lexicon)
        target = vocab.encode_sequence(corpus_mod.tokenize(sample.response))
        target.append(EOS)
        items.append(TrainItem(sample.id, graph, tuple(target),
                               emotion_index[sample.emotion]))
    return items


def make_batches(items, batch_size: int, seed: int) -> list[Batch]:
    """Seeded shuffle, then fixed-size chunks; the tail batch is kept."""
    items = list(items)
    order = np.random.default_rng(seed).permutation(len(items))
    batches = []
    for start in range(0, len(items), batch_size):
        chunk = [items[i] for i in order[start:start + batch_size]]
        width = max(len(it.target_ids) for it in chunk)
        targets = np.full((len(chunk), width), PAD, dtype=np.int64)
        mask = np.zeros((len(chunk), width), dtype=np.int64)
        for row, item in enumerate(chunk):
            targets[row, :len(item.target_ids)] = item.target_ids
            mask[row, :len(item.target_ids)] = 1
        batches.append(Batch([it.graph for it in chunk], targets, mask,
                             np.array([it.emotion_id for it in chunk],
                                      dtype=np.int64)))
    return batches


def dataset_loss(items, params: ModelParams, config: ModelConfig,
                 batch_size: int = 16) -> tuple[float, float, float]:
    """Whole-dataset loss with the same weighting as one giant batch."""
    emo_sum = 0.0
    nll_sum = 0.0
    samples = 0
    tokens = 0
    for batch in make_batches(items, batch_size, seed=0):
        _, loss_emo, loss_gen = compute_loss(batch.items(), params, config)
        emo_sum += loss_emo.item() * batch.size
        nll_sum += loss_gen.item() * batch.token_count
        samples += batch.size
        tokens += batch.token_count
    loss_emo = emo_sum / samples
    loss_gen = nll_sum / tokens
    return (config.gamma1 * loss_emo + config.gamma2 * loss_gen,
            loss_emo, loss_gen)


class EarlyStopper:
    """Stop when validation loss fails to improve ``patience`` times."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.stale = 0

    def update(self, value: float) -> bool:
        """Record one evaluation; returns True when the value improved."""
        if value < self.best:
            self.best = value
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    steps: int
    final_loss: float
    final_loss_emo: float
    final_loss_gen: float
    best_val_loss: float | None
    stop_reason: str
    log_rows: list[dict] = field(default_factory=list)


def train_model(train_items, val_items, params: ModelParams,
                config: ModelConfig, train_config: TrainConfig,
                checkpoint_path, log_path, vocab: Vocab,
                emotions) -> TrainResult:
    """Run the optimization loop and leave the best checkpoint on disk.

    With no validation items the final parameters are saved instead and
    early stopping is disabled.
    """
    train_items = list(train_items)
    if not train_items:
        raise DomainError("no training samples")
    optimizer = Adam(params.as_dict())
    stopper = EarlyStopper(train_config.patience)
    step = 0
    saved = False
    stop_reason = "max_epochs"
    last = (float("nan"),) * 3
    log_rows: list[dict] = []

    with open(log_path, "w", newline="", encoding="utf-8") as log_file:
        writer = csv.writer(log_file)
        writer.writerow(["step", "lr", "loss", "loss_emo", "loss_gen",
                         "val_loss"])
        stop = False
        for epoch in range(train_config.max_epochs):
            if stop:
                break
            batches = make_batches(train_items, train_config.batch_size,
                                   seed=train_config.seed + epoch)
            for batch_index, batch in enumerate(batches):
                step += 1
                lr = lr_schedule(step, config.d_model,
                                 warmup=train_config.warmup)
                optimizer.zero_grad()
                loss, loss_emo, loss_gen = compute_loss(
                    batch.items(), params, config)
                if not np.isfinite(loss.data):
                    raise DomainError(
                        f"non-finite training loss at step {step}, "
                        f"epoch {epoch}, batch {batch_index}")
                loss.backward()
                clip_global_norm(params.as_dict(), max_norm=1.0)
                optimizer.step(lr)
                last = (loss.item(), loss_emo.item(), loss_gen.item())

                val_text = ""
                if val_items and step % train_config.eval_every == 0:
                    val_loss, _, _ = dataset_loss(
                        val_items, params, config, train_config.batch_size)
                    val_text = repr(val_loss)
                    if stopper.update(val_loss):
                        save_checkpoint(checkpoint_path, params, config,
                                        vocab, emotions)
                        saved = True
                    if stopper.should_stop:
                        stop_reason = "early_stopping"
                        stop = True
                row = {"step": step, "lr": lr, "loss": last[0],
                       "loss_emo": last[1], "loss_gen": last[2],
                       "val_loss": val_text}
                log_rows.append(row)
                writer.writerow([step, repr(lr), repr(last[0]),
                                 repr(last[1]), repr(last[2]), val_text])
                if (train_config.target_loss is not None
                        and last[0] < train_config.target_loss):
                    stop_reason = "target_loss"
                    stop = True
                if stop:
                    break

    if not saved:
        save_checkpoint(checkpoint_path, params, config, vocab, emotions)
    best = stopper.best if stopper.best != float("inf") else None
    return TrainResult(str(checkpoint_path), str(log_path), step,
                       last[0], last[1], last[2], best, stop_reason, log_rows)
