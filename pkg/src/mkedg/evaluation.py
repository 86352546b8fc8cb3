"""Automatic metrics and the analysis harnesses built on them.

Metrics: emotion accuracy (argmax of the encoder's emotion
distribution), teacher-forced corpus perplexity, and corpus-level
distinct n-gram ratios.  Harnesses: a whole-split evaluation report, an
accuracy-vs-concept-budget sweep that retrains per budget, and the
component ablation runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Vocab
from .errors import DomainError
from .model import ModelConfig, ModelParams, encode, greedy_decode, init_params
from .training import (TrainConfig, build_training_items, dataset_loss,
                       train_model)

REPORT_KEYS = ("accuracy", "perplexity", "distinct1", "distinct2",
               "distinct1_x100", "distinct2_x100", "n_samples")

VARIANTS = ("full", "no_mkce", "no_ecatm")


def emotion_accuracy(predicted, gold) -> float:
    """Fraction of exact label matches."""
    predicted, gold = list(predicted), list(gold)
    if len(predicted) != len(gold):
        raise DomainError(
            f"length mismatch: {len(predicted)} predictions vs "
            f"{len(gold)} gold labels")
    if not predicted:
        raise DomainError("cannot score an empty label list")
    return sum(p == g for p, g in zip(predicted, gold)) / len(predicted)


def predict_emotions(items, params: ModelParams,
                     config: ModelConfig) -> list[int]:
    """Argmax emotion id per item; gold labels are never consulted."""
    out = []
    for item in items:
        ctx = encode(item.graph, params, config)
        out.append(int(np.argmax(ctx.p_e.data)))
    return out


def perplexity(items, params: ModelParams, config: ModelConfig,
               batch_size: int = 16) -> float:
    """exp of the per-token teacher-forced negative log likelihood."""
    items = list(items)
    if not items:
        raise DomainError("cannot compute perplexity on an empty dataset")
    _, _, loss_gen = dataset_loss(items, params, config, batch_size)
    return float(np.exp(loss_gen))


def distinct_n(responses, n: int) -> float:
    """Unique n-grams over total n-grams across the whole corpus; 0/0 -> 0."""
    if n < 1:
        raise DomainError("n must be >= 1")
    seen = set()
    total = 0
    for response in responses:
        response = list(response)
        for i in range(len(response) - n + 1):
            seen.add(tuple(response[i:i + n]))
            total += 1
    return len(seen) / total if total else 0.0


@dataclass
class Generation:
    sample_id: str
    text: str
    predicted_emotion: str
    gold_emotion: str


def evaluate(items, params: ModelParams, config: ModelConfig, vocab: Vocab,
             emotions, batch_size: int = 16,
             max_steps: int = 30) -> tuple[dict, list[Generation]]:
    """Metrics report over a split, plus the greedy generations."""
    items = list(items)
    if not items:
        raise DomainError("cannot evaluate an empty split")
    predictions = predict_emotions(items, params, config)
    accuracy = emotion_accuracy(predictions,
                                [item.emotion_id for item in items])
    ppl = perplexity(items, params, config, batch_size)
    decoded = [greedy_decode(item.graph, params, config, max_steps=max_steps)
               for item in items]
    d1 = distinct_n(decoded, 1)
    d2 = distinct_n(decoded, 2)
    report = {
        "accuracy": accuracy,
        "perplexity": ppl,
        "distinct1": d1,
        "distinct2": d2,
        "distinct1_x100": d1 * 100.0,
        "distinct2_x100": d2 * 100.0,
        "n_samples": len(items),
    }
    generations = [
        Generation(item.sample_id,
                   " ".join(vocab.decode_sequence(ids)),
                   emotions[pred], emotions[item.emotion_id])
        for item, ids, pred in zip(items, decoded, predictions)
    ]
    return report, generations


@dataclass
class ExperimentWorld:
    """Everything needed to train and score a model from scratch."""

    train_samples: list
    val_samples: list
    test_samples: list
    vocab: Vocab
    lexicon: dict
    provider: object
    stopwords: set
    emotions: list[str]
    base_config: ModelConfig
    per_token_cap: int = 5
    per_dialogue_cap: int = 10

    def items(self, samples, config: ModelConfig,
              per_dialogue_cap: int | None = None):
        cap = (self.per_dialogue_cap if per_dialogue_cap is None
               else per_dialogue_cap)
        return build_training_items(
            samples, self.vocab, self.lexicon, self.provider, self.stopwords,
            self.emotions, per_token_cap=self.per_token_cap,
            per_dialogue_cap=cap, use_knowledge=config.use_knowledge)


def train_and_evaluate(world: ExperimentWorld, config: ModelConfig,
                       train_config: TrainConfig, workdir, tag: str,
                       per_dialogue_cap: int | None = None,
                       max_steps: int = 30):
    """Train from a seeded init, then score the test split."""
    train_items = world.items(world.train_samples, config, per_dialogue_cap)
    val_items = world.items(world.val_samples, config, per_dialogue_cap) \
        if world.val_samples else []
    test_items = world.items(world.test_samples, config, per_dialogue_cap)
    params = init_params(config, seed=train_config.seed)
    checkpoint_path = f"{workdir}/{tag}.ckpt"
    log_path = f"{workdir}/{tag}.log.csv"
    result = train_model(train_items, val_items, params, config, train_config,
                         checkpoint_path, log_path, world.vocab,
                         world.emotions)
    report, generations = evaluate(
        test_items, params, config, world.vocab, world.emotions,
        batch_size=train_config.batch_size, max_steps=max_steps)
    return report, generations, result


def concept_sweep(world: ExperimentWorld, train_config: TrainConfig, caps,
                  workdir) -> list[tuple[int, float]]:
    """Retrain per concept budget; a budget of 0 disables knowledge entirely
    so the row matches the no_mkce ablation."""
    rows = []
    for cap in caps:
        if cap < 0:
            raise DomainError("concept caps must be >= 0")
        config = (replace(world.base_config, use_knowledge=False)
                  if cap == 0 else world.base_config)
        report, _, _ = train_and_evaluate(
            world, config, train_config, workdir, f"sweep_cap{cap}",
            per_dialogue_cap=cap)
        rows.append((cap, report["accuracy"]))
    return rows


def ablation_run(world: ExperimentWorld, train_config: TrainConfig,
                 variant: str, workdir):
    """Train and score one of the full / no_mkce / no_ecatm variants."""
    if variant not in VARIANTS:
        raise DomainError(
            f"unknown ablation variant {variant!r}; expected one of "
            f"{', '.join(VARIANTS)}")
    config = world.base_config
    if variant == "no_mkce":
        config = replace(config, use_knowledge=False)
    elif variant == "no_ecatm":
        config = replace(config, use_ecatm=False)
    report, generations, result = train_and_evaluate(
        world, config, train_config, workdir, f"ablation_{variant}")
    return report, generations, result
