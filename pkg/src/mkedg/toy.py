"""Deterministic synthetic workspace for demos and capacity tests.

Generates a small dialogue corpus (8 emotions, 25 topics, cue words with
strong affect), matching knowledge files (tuple store, VAD-style
lexicon, embeddings, stopwords), and a ready-to-run TOML config.  Every
artifact is a pure function of the seed.  Histories always contain a cue
word of the gold emotion, and responses repeat the topic word so the
copy mechanism has something visible to do.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

TOY_EMOTIONS = ["joyful", "sad", "angry", "afraid", "surprised",
                "disgusted", "proud", "grateful"]

TOPICS = ["garden", "puppy", "exam", "storm", "wedding", "journey",
          "painting", "concert", "harvest", "castle", "river", "market",
          "letter", "engine", "forest", "island", "recipe", "trophy",
          "lantern", "bridge", "orchard", "meadow", "workshop", "festival",
          "harbor"]

CUES = {
    "joyful": ["wonderful", "delighted"],
    "sad": ["miserable", "gloomy"],
    "angry": ["outraged", "bitter"],
    "afraid": ["frightened", "uneasy"],
    "surprised": ["astonished", "stunned"],
    "disgusted": ["revolted", "queasy"],
    "proud": ["accomplished", "triumphant"],
    "grateful": ["thankful", "blessed"],
}

_SUPPORT = ["i", "felt", "because", "the", "seemed", "it", "was", "and",
            "near", "that", "sounds", "must", "feel", "hearing", "about",
            "your", "leaves", "me", "what", "a", "story", "my", "heart",
            "finds", "when", "again", "truly"]

_RESPONSE_TEMPLATES = [
    "that {topic} sounds {cue}",
    "the {topic} must feel {cue}",
    "hearing about your {topic} leaves me {cue}",
    "what a {cue} {topic} story",
    "my heart finds your {topic} {cue}",
]

_FILLER_STEMS = [
    "amber", "ancient", "aqua", "arbor", "ashen", "autumn", "bales",
    "basalt", "beacon", "birch", "bloom", "bluff", "bramble", "brass",
    "breeze", "brick", "brook", "burrow", "cedar", "chalk", "cinder",
    "clay", "cliff", "cloud", "clover", "cobble", "copper", "coral",
    "crag", "creek", "crest", "crystal", "dale", "dawn", "dew", "drift",
    "dune", "dusk", "ember", "fable", "fern", "field", "flint", "frost",
    "gale", "glade", "glen", "gravel", "grove", "gust", "hail", "haze",
    "heath", "hollow", "ice", "ivory", "ivy", "jade", "knoll", "lagoon",
    "lake", "larch", "ledge", "lilac", "lime", "loam", "marsh", "mist",
    "moss", "night", "oak", "ocean", "olive", "onyx", "opal", "pebble",
    "pine", "plain", "pond", "quartz", "rain", "reed", "ridge", "rock",
    "rose", "rust", "sage", "sand", "shade", "shale", "shore", "silver",
    "sky", "slate", "sleet", "smoke", "snow", "spruce", "steam", "stone",
    "summit", "thicket", "thorn", "tide", "timber", "trail", "tundra",
    "vale", "vapor", "willow", "wind", "zenith",
]


def _filler_bank() -> list[str]:
    bank = list(_FILLER_STEMS)
    for stem in _FILLER_STEMS:
        bank.append(stem + "y" if not stem.endswith("y") else stem + "ish")
    for stem in _FILLER_STEMS:
        bank.append(stem + "like")
    return bank  # ~330 distinct filler words


def _all_words() -> list[str]:
    words = set(_filler_bank()) | set(TOPICS) | set(_SUPPORT)
    for cues in CUES.values():
        words.update(cues)
    return sorted(words)


def _make_samples(prefix: str, count: int, rng, offset: int) -> list[dict]:
    bank = _filler_bank()
    samples = []
    for i in range(count):
        emotion = TOY_EMOTIONS[(offset + i) % len(TOY_EMOTIONS)]
        topic = TOPICS[int(rng.integers(0, len(TOPICS)))]
        cue, cue2 = CUES[emotion]
        if rng.integers(0, 2):
            cue, cue2 = cue2, cue
        # rotating filler slots guarantee broad vocabulary coverage
        base = 5 * (offset + i)
        f = [bank[(base + k) % len(bank)] for k in range(5)]
        history = [f"i felt {cue} because the {topic} seemed {f[0]} and {f[1]}",
                   f"it was {f[2]} and {f[3]} near the {f[4]}"]
        if rng.integers(0, 4) == 0:
            history = history[:1]
        template = _RESPONSE_TEMPLATES[int(rng.integers(
            0, len(_RESPONSE_TEMPLATES)))]
        samples.append({
            "id": f"{prefix}-{i:04d}",
            "history": history,
            "emotion": emotion,
            "response": template.format(topic=topic, cue=cue2),
        })
    return samples


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _write_vad(path: Path, rng) -> None:
    rows = []
    for cues in CUES.values():
        for cue in cues:
            valence = float(rng.choice([rng.uniform(0.02, 0.10),
                                        rng.uniform(0.90, 0.98)]))
            arousal = float(rng.uniform(0.80, 0.97))
            rows.append((cue, valence, arousal, float(rng.uniform(0.3, 0.7))))
    for topic in TOPICS:
        rows.append((topic, float(rng.uniform(0.30, 0.70)),
                     float(rng.uniform(0.35, 0.65)),
                     float(rng.uniform(0.3, 0.7))))
    bank = _filler_bank()
    for word in bank[::2]:  # half the fillers stay out-of-lexicon
        rows.append((word, float(rng.uniform(0.42, 0.58)),
                     float(rng.uniform(0.40, 0.60)),
                     float(rng.uniform(0.4, 0.6))))
    with open(path, "w", encoding="utf-8") as fh:
        for word, v, a, d in rows:
            fh.write(f"{word}\t{v:.4f}\t{a:.4f}\t{d:.4f}\n")


def _write_tuples(path: Path, rng) -> None:
    bank = _filler_bank()
    all_cues = [cue for cues in CUES.values() for cue in cues]
    lines = ["# synthetic assertion store"]
    for topic in TOPICS:
        for _ in range(3):
            tail = all_cues[int(rng.integers(0, len(all_cues)))]
            conf = float(rng.uniform(5.5, 9.8))
            lines.append(f"{topic}\tRelatedTo\t{tail}\t{conf:.2f}")
        tail = bank[int(rng.integers(0, len(bank)))]
        lines.append(f"{topic}\tHasProperty\t{tail}"
                     f"\t{float(rng.uniform(4.5, 8.0)):.2f}")
        # rows the retrieval stage must reject
        lines.append(f"{topic}\tNotDesires"
                     f"\t{bank[int(rng.integers(0, len(bank)))]}\t8.00")
        lines.append(f"{topic}\tUsedFor"
                     f"\t{bank[int(rng.integers(0, len(bank)))]}\t1.20")
    for cue in all_cues:
        tail = all_cues[int(rng.integers(0, len(all_cues)))]
        lines.append(f"{cue}\tSimilarTo\t{tail}"
                     f"\t{float(rng.uniform(6.0, 9.5)):.2f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_embeddings(path: Path, rng, dimension: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in _all_words():
            vector = rng.standard_normal(dimension) * 0.3
            values = " ".join(f"{x:.4f}" for x in vector)
            fh.write(f"{word} {values}\n")


_STOPWORDS = ["the", "a", "i", "it", "was", "and", "me", "my", "your",
              "about", "that", "when", "because", "near", "what"]

_TOML_TEMPLATE = """\
[paths]
corpus_train = "train.jsonl"
corpus_valid = "valid.jsonl"
corpus_test = "test.jsonl"
vad = "vad.tsv"
tuples = "tuples.tsv"
embeddings = "embeddings.txt"
stopwords = "stopwords.txt"
checkpoint = "toy.ckpt"
out = "."

[model]
d_model = 32
heads = 2
encoder_layers = 1
decoder_layers = 1
ffn_dim = 64
max_positions = 64
max_utterances = 8

[knowledge]
per_dialogue_cap = 10
per_token_cap = 5
alpha = 0.1

[vocab]
min_count = 1
max_size = 2000

[training]
batch_size = 16
max_epochs = 300
warmup = 150
patience = 50
eval_every = 50
seed = 7
target_loss = 0.01

[decoding]
max_steps = 30

[emotions]
labels = [{labels}]
"""


def write_toy_workspace(root, n_train: int = 50, n_val: int = 8,
                        n_test: int = 8, seed: int = 7,
                        embedding_dim: int = 32) -> dict[str, Path]:
    """Create the full toy workspace under ``root``; returns file paths."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {
        "train": root / "train.jsonl",
        "valid": root / "valid.jsonl",
        "test": root / "test.jsonl",
        "vad": root / "vad.tsv",
        "tuples": root / "tuples.tsv",
        "embeddings": root / "embeddings.txt",
        "stopwords": root / "stopwords.txt",
        "config": root / "toy.toml",
    }
    _write_jsonl(paths["train"], _make_samples("toy-train", n_train, rng, 0))
    _write_jsonl(paths["valid"],
                 _make_samples("toy-valid", n_val, rng, n_train))
    _write_jsonl(paths["test"],
                 _make_samples("toy-test", n_test, rng, n_train + n_val))
    _write_vad(paths["vad"], rng)
    _write_tuples(paths["tuples"], rng)
    _write_embeddings(paths["embeddings"], rng, embedding_dim)
    paths["stopwords"].write_text("\n".join(_STOPWORDS) + "\n",
                                  encoding="utf-8")
    labels = ", ".join(f'"{label}"' for label in TOY_EMOTIONS)
    paths["config"].write_text(_TOML_TEMPLATE.format(labels=labels),
                               encoding="utf-8")
    return paths
