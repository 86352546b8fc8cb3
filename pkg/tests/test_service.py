"""HTTP API: endpoint contracts, error codes, CORS, static serving."""

import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from mkedg.corpus import Vocab
from mkedg.inference import InferenceEngine
from mkedg.model import init_params
from mkedg.service import create_app

from conftest import write
from model_helpers import LEXICON, WORDS, make_config

EMOTIONS = ["calm", "tense", "bright"]
HISTORY = ["alpha bravo", "charlie delta"]


def make_engine():
    config = make_config()
    return InferenceEngine(init_params(config, seed=3), config, Vocab(WORDS),
                           EMOTIONS, lexicon=LEXICON)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(make_engine()))


class TestHealth:
    def test_exact_body(self, client):
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "model": "MKEDG1"}


class TestChat:
    def test_happy_path(self, client):
        response = client.post("/api/chat", json={"history": HISTORY})
        assert response.status_code == 200
        body = response.json()
        assert set(body) == {"response", "emotion", "emotion_distribution",
                             "concepts", "copied_tokens"}
        assert isinstance(body["response"], str)
        assert body["emotion"] in EMOTIONS

    def test_distribution_invariants(self, client):
        body = client.post("/api/chat", json={"history": HISTORY}).json()
        total = sum(body["emotion_distribution"].values())
        assert total == pytest.approx(1.0, abs=1e-4)
        best = max(body["emotion_distribution"],
                   key=body["emotion_distribution"].get)
        assert body["emotion"] == best

    def test_matches_engine_directly(self, client):
        body = client.post("/api/chat", json={"history": HISTORY}).json()
        assert body == make_engine().respond(HISTORY).as_dict()

    def test_byte_identical_repeats(self, client):
        first = client.post("/api/chat", json={"history": HISTORY})
        second = client.post("/api/chat", json={"history": HISTORY})
        assert first.content == second.content

    def test_concurrent_requests_agree(self, client):
        def call(_):
            return client.post("/api/chat",
                               json={"history": HISTORY}).content
        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(call, range(8)))
        assert len(set(results)) == 1

    def test_stateless_across_histories(self, client):
        one = client.post("/api/chat", json={"history": ["alpha"]}).content
        client.post("/api/chat", json={"history": HISTORY})
        two = client.post("/api/chat", json={"history": ["alpha"]}).content
        assert one == two


class TestClientErrors:
    def test_invalid_json(self, client):
        response = client.post("/api/chat", content=b"{nope",
                               headers={"content-type": "application/json"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_missing_history(self, client):
        response = client.post("/api/chat", json={})
        assert response.status_code == 400
        assert "history" in response.json()["error"]

    def test_history_not_a_list(self, client):
        response = client.post("/api/chat", json={"history": "alpha"})
        assert response.status_code == 400

    def test_empty_history(self, client):
        response = client.post("/api/chat", json={"history": []})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_non_string_utterance(self, client):
        response = client.post("/api/chat", json={"history": ["alpha", 3]})
        assert response.status_code == 400

    def test_blank_history_rejected(self, client):
        response = client.post("/api/chat", json={"history": ["   "]})
        assert response.status_code == 400

    def test_oversized_utterance(self, client):
        response = client.post(
            "/api/chat", json={"history": ["x" * 513]})
        assert response.status_code == 413
        assert "error" in response.json()

    def test_limit_is_exactly_512(self):
        # needs a position table wide enough for the 86 tokens involved
        config = make_config(max_positions=128)
        engine = InferenceEngine(init_params(config, seed=3), config,
                                 Vocab(WORDS), EMOTIONS, lexicon=LEXICON)
        client = TestClient(create_app(engine))
        response = client.post(
            "/api/chat", json={"history": ["alpha " * 85 + "ab"]})
        assert len("alpha " * 85 + "ab") == 512
        assert response.status_code == 200


class TestInternalErrors:
    def test_engine_failure_is_500(self):
        class BrokenEngine:
            def respond(self, history):
                raise RuntimeError("exploded mid-decode")

        client = TestClient(create_app(BrokenEngine()))
        response = client.post("/api/chat", json={"history": ["alpha"]})
        assert response.status_code == 500
        assert "error" in response.json()


class TestCors:
    @pytest.mark.parametrize("origin", ["http://localhost:5173",
                                        "http://127.0.0.1:8000",
                                        "https://localhost"])
    def test_local_origins_allowed(self, client, origin):
        response = client.options(
            "/api/chat",
            headers={"Origin": origin,
                     "Access-Control-Request-Method": "POST"})
        assert response.headers.get("access-control-allow-origin") == origin

    def test_foreign_origin_not_allowed(self, client):
        response = client.options(
            "/api/chat",
            headers={"Origin": "https://example.com",
                     "Access-Control-Request-Method": "POST"})
        assert "access-control-allow-origin" not in response.headers


class TestStatic:
    def test_serves_ui_when_present(self, tmp_path):
        write(tmp_path / "index.html", "<!doctype html><title>chat</title>")
        client = TestClient(create_app(make_engine(), static_dir=tmp_path))
        response = client.get("/")
        assert response.status_code == 200
        assert "chat" in response.text

    def test_api_wins_over_static(self, tmp_path):
        write(tmp_path / "index.html", "<!doctype html>")
        client = TestClient(create_app(make_engine(), static_dir=tmp_path))
        assert client.get("/api/health").json()["model"] == "MKEDG1"

    def test_missing_ui_404(self, tmp_path, monkeypatch):
        import mkedg.service as service_mod
        monkeypatch.setattr(service_mod, "BUNDLED_UI",
                            tmp_path / "never-built")
        client = TestClient(create_app(make_engine()))
        assert client.get("/").status_code == 404

    def test_bundled_ui_served_by_default(self):
        import mkedg.service as service_mod
        if not (service_mod.BUNDLED_UI / "index.html").exists():
            pytest.skip("web client bundle not built")
        client = TestClient(create_app(make_engine()))
        response = client.get("/")
        assert response.status_code == 200
        assert 'id="app"' in response.text
        assert client.get("/main.js").status_code == 200
