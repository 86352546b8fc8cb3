"""Command-line interface: precedence, exit codes, artifacts, parity."""

import json
import re
from pathlib import Path

import pytest
from click.testing import CliRunner

from mkedg.checkpoint import load_checkpoint, save_checkpoint
from mkedg.cli import main
from mkedg.corpus import Vocab
from mkedg.inference import InferenceEngine
from mkedg.model import init_params

from conftest import write
from model_helpers import WORDS, make_config

RUNNER = CliRunner()


def run(*args, **kwargs):
    return RUNNER.invoke(main, list(args), **kwargs)


@pytest.fixture(scope="module")
def toyspace(tmp_path_factory):
    """One toy workspace with a quick-training config variant."""
    root = tmp_path_factory.mktemp("cli-toy")
    from mkedg.toy import write_toy_workspace
    paths = write_toy_workspace(root)
    quick = (paths["config"].read_text()
             .replace("max_epochs = 300", "max_epochs = 2")
             .replace("target_loss = 0.01", "")
             .replace("eval_every = 50", "eval_every = 4")
             .replace('checkpoint = "toy.ckpt"\n', ""))
    write(root / "quick.toml", quick)
    return root


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-ckpt")
    config = make_config()
    params = init_params(config, seed=3)
    path = root / "tiny.ckpt"
    save_checkpoint(path, params, config, Vocab(WORDS),
                    ["calm", "tense", "bright"])
    return path


class TestUsage:
    def test_no_args_shows_usage(self):
        result = run()
        assert result.exit_code in (0, 2)
        assert "Usage" in result.output

    def test_unknown_subcommand_exit_2(self):
        result = run("frobnicate")
        assert result.exit_code == 2

    def test_unknown_flag_exit_2(self):
        result = run("train", "--bogus")
        assert result.exit_code == 2

    def test_help_lists_subcommands(self):
        result = run("--help")
        for name in ("build-knowledge", "graph-dump", "train", "evaluate",
                     "sweep", "ablate", "generate", "chat", "serve"):
            assert name in result.output


class TestErrorsExitOne:
    def test_missing_config_file(self):
        result = run("config-dump", "--config", "/nope/absent.toml")
        assert result.exit_code == 1
        assert result.stderr.startswith("error: ")
        assert result.stderr.count("\n") == 1

    def test_train_without_corpus(self):
        result = run("train")
        assert result.exit_code == 1
        assert "corpus_train" in result.stderr

    def test_generate_with_bad_checkpoint(self, tmp_path):
        bad = write(tmp_path / "bad.ckpt", "junk that is not a checkpoint")
        result = run("generate", "--checkpoint", str(bad),
                     "--history", "hello")
        assert result.exit_code == 1
        assert result.stderr.startswith("error: ")

    def test_evaluate_without_checkpoint(self):
        result = run("evaluate")
        assert result.exit_code == 1
        assert "checkpoint" in result.stderr


class TestConfigDump:
    def parse(self, output):
        return dict(line.split("=", 1)
                    for line in output.strip().splitlines())

    def test_defaults(self):
        values = self.parse(run("config-dump").output)
        assert values["d_model"] == "64"
        assert values["per_dialogue_cap"] == "10"
        assert values["alpha"] == "0.1"

    def test_file_overrides_default(self, tmp_path):
        cfg = write(tmp_path / "a.toml", "[model]\nd_model = 48\n")
        values = self.parse(run("config-dump", "--config", str(cfg)).output)
        assert values["d_model"] == "48"

    def test_flag_overrides_file(self, tmp_path):
        cfg = write(tmp_path / "a.toml",
                    "[training]\nseed = 5\n[knowledge]\nalpha = 0.3\n")
        values = self.parse(run("config-dump", "--config", str(cfg),
                                "--seed", "9").output)
        assert values["seed"] == "9"      # flag wins
        assert values["alpha"] == "0.3"   # file survives
        assert values["heads"] == "2"     # default survives

    @pytest.mark.parametrize("flag,field,value,rendered", [
        ("--seed", "seed", "3", "3"),
        ("--caps-dialogue", "per_dialogue_cap", "7", "7"),
        ("--caps-token", "per_token_cap", "2", "2"),
        ("--alpha", "alpha", "0.4", "0.4"),
        ("--vad", "vad", "x.tsv", "x.tsv"),
        ("--tuples", "tuples", "t.tsv", "t.tsv"),
        ("--embeddings", "embeddings", "e.txt", "e.txt"),
        ("--stopwords", "stopwords", "s.txt", "s.txt"),
        ("--checkpoint", "checkpoint", "c.bin", "c.bin"),
        ("--corpus", "corpus_train", "d.jsonl", "d.jsonl"),
        ("--out", "out", "артefacts", "артefacts"),
    ])
    def test_each_flag_lands_on_its_field(self, flag, field, value, rendered):
        values = self.parse(run("config-dump", flag, value).output)
        assert values[field] == rendered

    def test_relative_config_paths_anchored_to_file(self, tmp_path):
        (tmp_path / "sub").mkdir()
        cfg = write(tmp_path / "sub" / "a.toml",
                    "[paths]\nvad = \"lex.tsv\"\n")
        values = self.parse(run("config-dump", "--config", str(cfg)).output)
        assert values["vad"] == str(tmp_path / "sub" / "lex.tsv")

    def test_flag_paths_not_rebased(self, tmp_path):
        cfg = write(tmp_path / "a.toml", "[model]\nd_model = 48\n")
        values = self.parse(run("config-dump", "--config", str(cfg),
                                "--vad", "local.tsv").output)
        assert values["vad"] == "local.tsv"


class TestMakeToy:
    def test_writes_workspace(self, tmp_path):
        result = run("make-toy", "--out", str(tmp_path / "toy"))
        assert result.exit_code == 0
        assert (tmp_path / "toy" / "train.jsonl").exists()
        assert (tmp_path / "toy" / "toy.toml").exists()


class TestBuildKnowledge:
    def test_writes_cache(self, toyspace, tmp_path):
        result = run("build-knowledge", "--config",
                     str(toyspace / "toy.toml"), "--out", str(tmp_path))
        assert result.exit_code == 0, result.stderr
        cache = tmp_path / "concepts.jsonl"
        assert cache.exists()
        first = json.loads(cache.read_text().splitlines()[0])
        assert set(first) == {"token", "concepts"}

    def test_missing_inputs_exit_1(self, toyspace, tmp_path):
        result = run("build-knowledge",
                     "--corpus", str(toyspace / "train.jsonl"),
                     "--out", str(tmp_path))
        assert result.exit_code == 1
        assert "must be set" in result.stderr


class TestGraphDump:
    def test_dot_on_stdout(self, toyspace):
        result = run("graph-dump", "--config", str(toyspace / "toy.toml"))
        assert result.exit_code == 0
        assert result.output.startswith("digraph")
        assert "CLS" in result.output

    def test_dot_to_file(self, toyspace, tmp_path):
        out = tmp_path / "g.dot"
        result = run("graph-dump", "--config", str(toyspace / "toy.toml"),
                     "--index", "3", "--out", str(out))
        assert result.exit_code == 0
        assert out.read_text().startswith("digraph")

    def test_bad_index(self, toyspace):
        result = run("graph-dump", "--config", str(toyspace / "toy.toml"),
                     "--index", "999")
        assert result.exit_code == 1
        assert "index" in result.stderr


@pytest.fixture(scope="module")
def trained(toyspace, tmp_path_factory):
    out = tmp_path_factory.mktemp("train-out")
    result = run("train", "--config", str(toyspace / "quick.toml"),
                 "--out", str(out))
    return result, out


class TestTrain:
    def test_exit_zero(self, trained):
        result, _ = trained
        assert result.exit_code == 0, result.stderr

    def test_artifacts_exist(self, trained):
        _, out = trained
        assert (out / "train.log.csv").exists()
        assert (out / "train.png").exists()
        ckpt = load_checkpoint(out / "model.ckpt")
        assert ckpt.config.d_model == 32

    def test_summary_lines(self, trained):
        result, _ = trained
        assert re.search(r"^steps: \d+$", result.output, re.M)
        assert re.search(r"^stop_reason: \w+$", result.output, re.M)
        assert re.search(r"^final_loss: [\d.]+$", result.output, re.M)

    def test_deterministic_logs(self, trained, toyspace, tmp_path):
        _, first_out = trained
        result = run("train", "--config", str(toyspace / "quick.toml"),
                     "--out", str(tmp_path))
        assert result.exit_code == 0, result.stderr
        assert (tmp_path / "train.log.csv").read_bytes() == \
            (first_out / "train.log.csv").read_bytes()


@pytest.fixture(scope="module")
def flash_config(toyspace):
    """One-epoch variant for the expensive multi-train commands."""
    flash = (toyspace / "quick.toml").read_text() \
        .replace("max_epochs = 2", "max_epochs = 1")
    return write(toyspace / "flash.toml", flash)


class TestSweep:
    def test_artifacts_and_rows(self, flash_config, tmp_path):
        result = run("sweep", "--config", str(flash_config),
                     "--caps", "0,2", "--out", str(tmp_path))
        assert result.exit_code == 0, result.stderr
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "cap,accuracy"
        assert [line.split(",")[0] for line in lines[1:]] == ["0", "2"]
        assert (tmp_path / "sweep.png").exists()

    def test_malformed_caps(self, flash_config, tmp_path):
        result = run("sweep", "--config", str(flash_config),
                     "--caps", "3,x", "--out", str(tmp_path))
        assert result.exit_code == 1
        assert "caps" in result.stderr

    def test_empty_caps(self, flash_config, tmp_path):
        result = run("sweep", "--config", str(flash_config),
                     "--caps", ",", "--out", str(tmp_path))
        assert result.exit_code == 1


class TestAblate:
    def test_selected_variants(self, flash_config, tmp_path):
        result = run("ablate", "--config", str(flash_config),
                     "--variant", "full", "--variant", "no_ecatm",
                     "--out", str(tmp_path))
        assert result.exit_code == 0, result.stderr
        report = json.loads((tmp_path / "ablation.json").read_text())
        assert set(report) == {"full", "no_ecatm"}
        for body in report.values():
            assert "accuracy" in body and "perplexity" in body

    def test_unknown_variant_exit_2(self, flash_config):
        result = run("ablate", "--config", str(flash_config),
                     "--variant", "nonsense")
        assert result.exit_code == 2


class TestGenerate:
    def test_reply_and_emotion(self, tiny_checkpoint):
        result = run("generate", "--checkpoint", str(tiny_checkpoint),
                     "--history", "alpha bravo",
                     "--history", "charlie delta")
        assert result.exit_code == 0, result.stderr
        lines = result.output.strip().splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("emotion: ")
        assert lines[1].split(": ")[1] in {"calm", "tense", "bright"}

    def test_matches_engine(self, tiny_checkpoint):
        result = run("generate", "--checkpoint", str(tiny_checkpoint),
                     "--history", "alpha bravo")
        engine = InferenceEngine.from_checkpoint(tiny_checkpoint)
        expected = engine.respond(["alpha bravo"])
        lines = result.output.strip().splitlines()
        assert lines[0] == expected.response or \
            (lines[0] == "emotion: " + expected.emotion and
             expected.response == "")
        assert f"emotion: {expected.emotion}" in result.output

    def test_history_required(self, tiny_checkpoint):
        result = run("generate", "--checkpoint", str(tiny_checkpoint))
        assert result.exit_code == 1
        assert "history" in result.stderr


class TestChat:
    def test_scripted_session(self, tiny_checkpoint):
        result = run("chat", "--checkpoint", str(tiny_checkpoint),
                     input="alpha bravo\n/quit\n")
        assert result.exit_code == 0
        assert "bot>" in result.output
        assert "emotion:" in result.output

    def test_eof_ends_cleanly(self, tiny_checkpoint):
        result = run("chat", "--checkpoint", str(tiny_checkpoint),
                     input="alpha\n")
        assert result.exit_code == 0


class TestServe:
    def test_wires_engine_and_port(self, tiny_checkpoint, monkeypatch):
        seen = {}

        def fake_run_server(engine, port, host="127.0.0.1", static_dir=None):
            seen["port"] = port
            seen["host"] = host
            seen["engine"] = engine

        import mkedg.service as service_mod
        monkeypatch.setattr(service_mod, "run_server", fake_run_server)
        result = run("serve", "--checkpoint", str(tiny_checkpoint),
                     "--port", "9123")
        assert result.exit_code == 0, result.stderr
        assert seen["port"] == 9123
        assert isinstance(seen["engine"], InferenceEngine)
