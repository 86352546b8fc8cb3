"""Checkpoint serialization round trips and corruption handling."""

import numpy as np
import pytest

from mkedg.checkpoint import (MAGIC, Checkpoint, load_checkpoint,
                              save_checkpoint)
from mkedg.corpus import Vocab
from mkedg.errors import CheckpointError
from mkedg.model import ModelConfig, greedy_decode, init_params
from tests.model_helpers import WORDS, make_graph

EMOTIONS = ["joy", "anger", "fear"]


def small_setup():
    vocab = Vocab(WORDS)
    config = ModelConfig(vocab_size=len(vocab), num_emotions=3, d_model=8,
                         heads=2, encoder_layers=1, decoder_layers=1,
                         ffn_dim=16, max_positions=16, max_utterances=4)
    params = init_params(config, seed=5)
    return vocab, config, params


class TestRoundTrip:

    def test_values_survive_as_float32(self, tmp_path):
        vocab, config, params = small_setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        loaded = load_checkpoint(path)
        assert loaded.config == config
        assert loaded.emotions == EMOTIONS
        assert loaded.vocab.id_to_token == vocab.id_to_token
        for name, tensor in params.tensors.items():
            expected = tensor.data.astype(np.float32).astype(np.float64)
            assert np.array_equal(loaded.params[name].data, expected), name

    def test_second_round_trip_bit_exact(self, tmp_path):
        vocab, config, params = small_setup()
        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        save_checkpoint(p1, params, config, vocab, EMOTIONS)
        first = load_checkpoint(p1)
        save_checkpoint(p2, first.params, first.config, first.vocab,
                        first.emotions)
        assert p1.read_bytes() == p2.read_bytes()
        second = load_checkpoint(p2)
        for name in params.tensors:
            assert np.array_equal(first.params[name].data,
                                  second.params[name].data)

    def test_greedy_decode_preserved(self, tmp_path):
        vocab, config, params = small_setup()
        graph, _ = make_graph()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        first = load_checkpoint(path)
        out1 = greedy_decode(graph, first.params, first.config, max_steps=6)
        save_checkpoint(path, first.params, first.config, first.vocab,
                        first.emotions)
        second = load_checkpoint(path)
        out2 = greedy_decode(graph, second.params, second.config, max_steps=6)
        assert out1 == out2

    def test_loaded_tensors_trainable_float64(self, tmp_path):
        vocab, config, params = small_setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        loaded = load_checkpoint(path)
        for tensor in loaded.params.tensors.values():
            assert tensor.requires_grad
            assert tensor.data.dtype == np.float64

    def test_ablation_flags_survive(self, tmp_path):
        vocab = Vocab(WORDS)
        config = ModelConfig(vocab_size=len(vocab), num_emotions=3, d_model=8,
                             heads=2, encoder_layers=1, decoder_layers=1,
                             ffn_dim=16, max_positions=16, max_utterances=4,
                             use_knowledge=False, use_ecatm=False)
        params = init_params(config, seed=6)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        loaded = load_checkpoint(path)
        assert loaded.config.use_knowledge is False
        assert loaded.config.use_ecatm is False
        assert loaded.params["dec.0.mix"].shape == (8, 8)


class TestCorruption:

    def test_wrong_magic_names_expected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTCKP" + b"\x00" * 40)
        with pytest.raises(CheckpointError, match="MKEDG1"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        vocab, config, params = small_setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(CheckpointError, match="truncated|cut off"):
            load_checkpoint(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_magic_only_missing_sections(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(MAGIC)
        with pytest.raises(CheckpointError, match="config"):
            load_checkpoint(path)

    def test_vocab_size_mismatch(self, tmp_path):
        vocab, config, params = small_setup()
        bigger = Vocab(WORDS + ["zulu"])
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, bigger, EMOTIONS)
        with pytest.raises(CheckpointError, match="vocab"):
            load_checkpoint(path)

    def test_emotion_count_mismatch(self, tmp_path):
        vocab, config, params = small_setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, ["joy", "anger"])
        with pytest.raises(CheckpointError, match="emotion"):
            load_checkpoint(path)

    def test_shape_mismatch_detected(self, tmp_path):
        vocab, config, params = small_setup()
        params.tensors["emo.b"].data = np.zeros(7)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        with pytest.raises(CheckpointError, match="emo.b"):
            load_checkpoint(path)

    def test_missing_param_section(self, tmp_path):
        vocab, config, params = small_setup()
        del params.tensors["copy.v"]
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, config, vocab, EMOTIONS)
        with pytest.raises(CheckpointError, match="copy.v"):
            load_checkpoint(path)
