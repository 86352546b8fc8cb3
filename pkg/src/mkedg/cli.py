"""Command-line entry point binding all pipelines.

Every command resolves its settings the same way: command-line flag,
then config file value, then built-in default.  Paths written in a
config file are taken relative to that file.  Data or checkpoint
problems exit with code 1 and a one-line ``error: ...`` message on
stderr; usage mistakes exit with code 2 via the argument parser.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .checkpoint import load_checkpoint
from .config import (AppConfig, config_lines, load_config, merge_flags,
                     resolve_paths)
from .corpus import build_vocab, load_corpus, load_stopwords, tokenize
from .errors import ConfigError, MkedgError
from .evaluation import (VARIANTS, ExperimentWorld, ablation_run,
                         concept_sweep, evaluate)
from .graph import build_graph, enrich, flatten_history, to_dot
from .inference import InferenceEngine
from .knowledge import (ConceptCache, ConceptRanker, load_conceptnet,
                        load_embeddings, load_vad_lexicon)
from .model import ModelConfig, init_params
from .plots import (save_emotion_confusion, save_sweep_curve,
                    save_training_curves)
from .toy import write_toy_workspace
from .training import TrainConfig, build_training_items, train_model


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


_CONFIG_OPTS = [
    click.option("--config", "config_path", default=None, metavar="FILE",
                 help="TOML config file; flags override its values."),
    click.option("--seed", type=int, default=None,
                 help="Seed controlling all randomness."),
]

_KNOWLEDGE_OPTS = [
    click.option("--vad", default=None, metavar="FILE",
                 help="Valence/arousal/dominance lexicon (TSV)."),
    click.option("--tuples", default=None, metavar="FILE",
                 help="Assertion tuple store (TSV)."),
    click.option("--embeddings", default=None, metavar="FILE",
                 help="Pretrained word vectors (text format)."),
    click.option("--stopwords", default=None, metavar="FILE",
                 help="One stopword per line."),
    click.option("--caps-dialogue", "per_dialogue_cap", type=int,
                 default=None, help="Concept budget per dialogue."),
    click.option("--caps-token", "per_token_cap", type=int, default=None,
                 help="Concept budget per token."),
    click.option("--alpha", type=float, default=None,
                 help="Minimum normalized tuple confidence."),
]

_OUT_OPT = click.option("--out", default=None, metavar="DIR",
                        help="Directory for artifacts.")
_CORPUS_OPT = click.option("--corpus", default=None, metavar="FILE",
                           help="Dialogue corpus (JSONL).")
_CKPT_OPT = click.option("--checkpoint", default=None, metavar="FILE",
                         help="Model checkpoint file.")


def _guarded(fn):
    """Map package and I/O errors onto exit code 1 with one stderr line."""
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (MkedgError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return inner


def _resolve(config_path, **flags) -> AppConfig:
    config = load_config(config_path)
    if config_path is not None:
        config = resolve_paths(config, Path(config_path).resolve().parent)
    return merge_flags(config, **flags)


def _require(config: AppConfig, *names) -> None:
    for name in names:
        if getattr(config, name) in (None, ""):
            raise ConfigError(
                f"{name} must be set via a flag or the config file")


def _load_lexicon(config):
    return load_vad_lexicon(config.vad) if config.vad else {}


def _load_provider(config, lexicon):
    if config.concept_cache and Path(config.concept_cache).exists():
        return ConceptCache.load(config.concept_cache)
    if config.tuples and config.embeddings:
        return ConceptRanker(load_conceptnet(config.tuples), lexicon,
                             load_embeddings(config.embeddings),
                             alpha=config.alpha,
                             k_prime=config.per_token_cap)
    return None


def _load_stopword_set(config):
    return load_stopwords(config.stopwords) if config.stopwords else set()


def _model_config(config: AppConfig, vocab_size: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size, num_emotions=len(config.emotions),
        d_model=config.d_model, heads=config.heads,
        encoder_layers=config.encoder_layers,
        decoder_layers=config.decoder_layers, ffn_dim=config.ffn_dim,
        max_positions=config.max_positions,
        max_utterances=config.max_utterances, gamma1=config.gamma1,
        gamma2=config.gamma2, use_knowledge=config.use_knowledge,
        use_ecatm=config.use_ecatm)


def _train_config(config: AppConfig) -> TrainConfig:
    return TrainConfig(max_epochs=config.max_epochs,
                       batch_size=config.batch_size, warmup=config.warmup,
                       patience=config.patience,
                       eval_every=config.eval_every, seed=config.seed,
                       target_loss=config.target_loss)


def _history_tokens(samples, stopword_set) -> list[str]:
    tokens = {token for sample in samples for utterance in sample.history
              for token in tokenize(utterance)}
    return sorted(tokens - stopword_set)


def _build_world(config: AppConfig, need_test: bool) -> ExperimentWorld:
    _require(config, "corpus_train")
    if need_test:
        _require(config, "corpus_test")
    emotions = list(config.emotions)
    train_samples = load_corpus(config.corpus_train, emotions)
    val_samples = load_corpus(config.corpus_valid, emotions) \
        if config.corpus_valid else []
    test_samples = load_corpus(config.corpus_test, emotions) \
        if config.corpus_test else []
    lexicon = _load_lexicon(config)
    provider = _load_provider(config, lexicon)
    stopword_set = _load_stopword_set(config)
    concept_lists = None
    if provider is not None:
        concept_lists = [
            [c.concept for c in provider.ranked(token)]
            for token in _history_tokens(train_samples, stopword_set)]
    vocab = build_vocab(train_samples, min_count=config.vocab_min_count,
                        max_size=config.vocab_max_size,
                        concept_lists=concept_lists)
    return ExperimentWorld(
        train_samples, val_samples, test_samples, vocab, lexicon, provider,
        stopword_set, emotions, _model_config(config, len(vocab)),
        per_token_cap=config.per_token_cap,
        per_dialogue_cap=config.per_dialogue_cap)


def _engine_from_config(config: AppConfig) -> InferenceEngine:
    _require(config, "checkpoint")
    cache = config.concept_cache \
        if config.concept_cache and Path(config.concept_cache).exists() \
        else None
    return InferenceEngine.from_checkpoint(
        config.checkpoint, vad=config.vad, tuples=config.tuples,
        embeddings=config.embeddings, stopwords=config.stopwords,
        concept_cache=cache, alpha=config.alpha,
        per_token_cap=config.per_token_cap,
        per_dialogue_cap=config.per_dialogue_cap,
        max_steps=config.max_decode_steps)


def _out_dir(config: AppConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.version_option(package_name="mkedg", prog_name="mkedg")
def main():
    """Knowledge-enriched empathetic dialogue: train, evaluate, serve."""


@main.command("config-dump")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT,
                                                _CKPT_OPT])
@_guarded
def config_dump(config_path, seed, corpus, checkpoint, out, **flags):
    """Print the fully resolved configuration, one key=value per line."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus,
                      checkpoint=checkpoint, out=out, **flags)
    for line in config_lines(config):
        click.echo(line)


@main.command("make-toy")
@click.option("--out", default="toy", metavar="DIR",
              help="Where to write the workspace.")
@click.option("--seed", type=int, default=7)
@_guarded
def make_toy(out, seed):
    """Generate a small self-contained demo workspace."""
    paths = write_toy_workspace(out, seed=seed)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
    click.echo(f'next: mkedg train --config {paths["config"]}')


@main.command("build-knowledge")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT])
@_guarded
def build_knowledge(config_path, seed, corpus, out, **flags):
    """Precompute ranked concepts for every corpus token into a cache."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus, out=out,
                      **flags)
    _require(config, "corpus_train", "vad", "tuples", "embeddings")
    lexicon = _load_lexicon(config)
    ranker = ConceptRanker(load_conceptnet(config.tuples), lexicon,
                           load_embeddings(config.embeddings),
                           alpha=config.alpha, k_prime=config.per_token_cap)
    samples = load_corpus(config.corpus_train, list(config.emotions))
    tokens = _history_tokens(samples, _load_stopword_set(config))
    cache = ConceptCache.build(tokens, ranker)
    path = config.concept_cache or str(_out_dir(config) / "concepts.jsonl")
    cache.save(path)
    click.echo(f"tokens_queried: {len(tokens)}")
    click.echo(f"tokens_with_concepts: {len(cache.table)}")
    click.echo(f"cache: {path}")


@main.command("graph-dump")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_CORPUS_OPT])
@click.option("--index", type=int, default=0,
              help="Which sample of the corpus to draw.")
@click.option("--out", "out_file", default=None, metavar="FILE",
              help="Write DOT here instead of stdout.")
@_guarded
def graph_dump(config_path, seed, corpus, index, out_file, **flags):
    """Emit one sample's context graph in DOT format."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus, **flags)
    _require(config, "corpus_train")
    samples = load_corpus(config.corpus_train, list(config.emotions))
    if not 0 <= index < len(samples):
        raise ConfigError(f"sample index {index} outside corpus of "
                          f"{len(samples)}")
    sample = samples[index]
    lexicon = _load_lexicon(config)
    provider = _load_provider(config, lexicon)
    stopword_set = _load_stopword_set(config)
    vocab = build_vocab(samples, min_count=config.vocab_min_count,
                        max_size=config.vocab_max_size)
    tagged = flatten_history(sample)
    concept_map = {}
    if config.use_knowledge and provider is not None:
        concept_map = enrich(tagged, provider, stopword_set,
                             per_token_cap=config.per_token_cap,
                             per_dialogue_cap=config.per_dialogue_cap,
                             vocab=vocab)
    dot = to_dot(build_graph(tagged, concept_map, vocab, lexicon))
    if out_file:
        Path(out_file).write_text(dot, encoding="utf-8")
        click.echo(f"dot: {out_file}")
    else:
        click.echo(dot)


@main.command("train")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT,
                                                _CKPT_OPT])
@_guarded
def train(config_path, seed, corpus, checkpoint, out, **flags):
    """Train a model; writes checkpoint, CSV log, and loss curves."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus,
                      checkpoint=checkpoint, out=out, **flags)
    world = _build_world(config, need_test=False)
    out_path = _out_dir(config)
    checkpoint_path = config.checkpoint or str(out_path / "model.ckpt")
    log_path = out_path / "train.log.csv"

    table = load_embeddings(config.embeddings) if config.embeddings else None
    params = init_params(world.base_config, seed=config.seed,
                         embedding_table=table, vocab=world.vocab)
    train_items = world.items(world.train_samples, world.base_config)
    val_items = world.items(world.val_samples, world.base_config) \
        if world.val_samples else []
    result = train_model(train_items, val_items, params, world.base_config,
                         _train_config(config), checkpoint_path, log_path,
                         world.vocab, world.emotions)
    figure = save_training_curves(result.log_rows, out_path / "train.png")
    click.echo(f"steps: {result.steps}")
    click.echo(f"stop_reason: {result.stop_reason}")
    click.echo(f"final_loss: {result.final_loss!r}")
    click.echo(f"final_loss_emo: {result.final_loss_emo!r}")
    click.echo(f"final_loss_gen: {result.final_loss_gen!r}")
    if result.best_val_loss is not None:
        click.echo(f"best_val_loss: {result.best_val_loss!r}")
    click.echo(f"checkpoint: {result.checkpoint_path}")
    click.echo(f"log: {result.log_path}")
    click.echo(f"figure: {figure}")


@main.command("evaluate")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT,
                                                _CKPT_OPT])
@_guarded
def evaluate_cmd(config_path, seed, corpus, checkpoint, out, **flags):
    """Score a checkpoint; writes report.json, generations, confusion."""
    config = _resolve(config_path, seed=seed, corpus_test=corpus,
                      checkpoint=checkpoint, out=out, **flags)
    _require(config, "checkpoint", "corpus_test")
    ckpt = load_checkpoint(config.checkpoint)
    samples = load_corpus(config.corpus_test, ckpt.emotions)
    lexicon = _load_lexicon(config)
    provider = _load_provider(config, lexicon)
    items = build_training_items(
        samples, ckpt.vocab, lexicon, provider, _load_stopword_set(config),
        ckpt.emotions, per_token_cap=config.per_token_cap,
        per_dialogue_cap=config.per_dialogue_cap,
        use_knowledge=ckpt.config.use_knowledge)
    report, generations = evaluate(items, ckpt.params, ckpt.config,
                                   ckpt.vocab, ckpt.emotions,
                                   batch_size=config.batch_size,
                                   max_steps=config.max_decode_steps)
    out_path = _out_dir(config)
    report_path = out_path / "report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n",
                           encoding="utf-8")
    generations_path = out_path / "generations.jsonl"
    with open(generations_path, "w", encoding="utf-8") as fh:
        for g in generations:
            fh.write(json.dumps({
                "id": g.sample_id, "response": g.text,
                "predicted_emotion": g.predicted_emotion,
                "gold_emotion": g.gold_emotion}, ensure_ascii=False) + "\n")
    label_index = {label: i for i, label in enumerate(ckpt.emotions)}
    figure = save_emotion_confusion(
        [label_index[g.predicted_emotion] for g in generations],
        [label_index[g.gold_emotion] for g in generations],
        ckpt.emotions, out_path / "confusion.png")
    click.echo(json.dumps(report, indent=2))
    click.echo(f"report: {report_path}")
    click.echo(f"generations: {generations_path}")
    click.echo(f"figure: {figure}")


@main.command("sweep")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT])
@click.option("--caps", default="0,1,5,10", metavar="LIST",
              help="Comma-separated per-dialogue concept budgets.")
@_guarded
def sweep(config_path, seed, corpus, out, caps, **flags):
    """Retrain per concept budget and chart emotion accuracy."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus, out=out,
                      **flags)
    try:
        cap_values = [int(c) for c in caps.split(",") if c.strip() != ""]
    except ValueError:
        raise ConfigError(f"--caps must be comma-separated integers, "
                          f"got {caps!r}") from None
    if not cap_values:
        raise ConfigError("--caps must name at least one budget")
    world = _build_world(config, need_test=True)
    out_path = _out_dir(config)
    workdir = out_path / "sweep"
    workdir.mkdir(exist_ok=True)
    rows = concept_sweep(world, _train_config(config), cap_values, workdir)
    csv_path = out_path / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("cap,accuracy\n")
        for cap, accuracy in rows:
            fh.write(f"{cap},{accuracy!r}\n")
    figure = save_sweep_curve(rows, out_path / "sweep.png")
    for cap, accuracy in rows:
        click.echo(f"cap {cap}: accuracy {accuracy!r}")
    click.echo(f"csv: {csv_path}")
    click.echo(f"figure: {figure}")


@main.command("ablate")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_OUT_OPT, _CORPUS_OPT])
@click.option("--variant", "variants", multiple=True,
              type=click.Choice(VARIANTS),
              help="Subset of variants; default runs all three.")
@_guarded
def ablate(config_path, seed, corpus, out, variants, **flags):
    """Train and score the full model against its two reduced variants."""
    config = _resolve(config_path, seed=seed, corpus_train=corpus, out=out,
                      **flags)
    world = _build_world(config, need_test=True)
    out_path = _out_dir(config)
    workdir = out_path / "ablation"
    workdir.mkdir(exist_ok=True)
    chosen = list(variants) or list(VARIANTS)
    results = {}
    for variant in chosen:
        report, _, _ = ablation_run(world, _train_config(config), variant,
                                    workdir)
        results[variant] = report
        click.echo(f"{variant}: accuracy {report['accuracy']!r} "
                   f"perplexity {report['perplexity']!r}")
    path = out_path / "ablation.json"
    path.write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")
    click.echo(f"report: {path}")


@main.command("generate")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_CKPT_OPT])
@click.option("--history", "history", multiple=True, metavar="TEXT",
              help="Dialogue turns, oldest first; repeatable.")
@_guarded
def generate(config_path, seed, checkpoint, history, **flags):
    """One-shot reply: history in, response plus emotion out."""
    config = _resolve(config_path, seed=seed, checkpoint=checkpoint, **flags)
    if not history:
        raise ConfigError("provide at least one --history utterance")
    engine = _engine_from_config(config)
    result = engine.respond(list(history))
    click.echo(result.response)
    click.echo(f"emotion: {result.emotion}")


@main.command("chat")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_CKPT_OPT])
@_guarded
def chat(config_path, seed, checkpoint, **flags):
    """Interactive REPL; the model's replies join the rolling history."""
    config = _resolve(config_path, seed=seed, checkpoint=checkpoint, **flags)
    engine = _engine_from_config(config)
    click.echo("type a message; /quit to leave")
    history: list[str] = []
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ")
        except click.Abort:
            break
        if line.strip() in {"/quit", "/exit"}:
            break
        if not line.strip():
            continue
        history.append(line)
        result = engine.respond(history)
        click.echo(f"bot> {result.response}")
        click.echo(f"     emotion: {result.emotion}")
        history.append(result.response)


@main.command("serve")
@_add_options(_CONFIG_OPTS + _KNOWLEDGE_OPTS + [_CKPT_OPT])
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--static-dir", default=None, metavar="DIR",
              help="Chat UI build to serve at /.")
@_guarded
def serve(config_path, seed, checkpoint, port, host, static_dir, **flags):
    """Start the HTTP inference service."""
    from .service import run_server

    config = _resolve(config_path, seed=seed, checkpoint=checkpoint, **flags)
    engine = _engine_from_config(config)
    click.echo(f"serving on http://{host}:{port}")
    run_server(engine, port, host=host, static_dir=static_dir)


if __name__ == "__main__":
    main()
