import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgen.errors import (
    ConfigError,
    ExtractionError,
    FixtureMissError,
    JudgeParseError,
    ReplayExhaustedError,
    TransportError,
)
from dualgen.llm import (
    EXTRACT_INSTRUCTION,
    BackendConfig,
    ChatParams,
    ChatRequest,
    HttpBackend,
    ReplayBackend,
    TableBackend,
    complete,
    extract_location_keyword,
    generate_viewpoint_intro,
    judge_prompt,
    judge_score,
    make_backend,
    parse_judge_reply,
)
from tests.conftest import write_json


def table(mapping, **kw):
    return TableBackend(BackendConfig("mock_table", fixture_path="<inline>", **kw), mapping)


def http_backend(handler, **kw):
    cfg = BackendConfig("http", endpoint="https://llm.test/v1/chat/completions", backoff_s=0, **kw)
    return HttpBackend(cfg, httpx.Client(transport=httpx.MockTransport(handler)))


def chat_reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class TestConfig:
    def test_http_needs_endpoint(self):
        with pytest.raises(ConfigError):
            BackendConfig("http")

    @pytest.mark.parametrize("kind", ["mock_table", "replay"])
    def test_fixture_kinds_need_path(self, kind):
        with pytest.raises(ConfigError):
            BackendConfig(kind)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            BackendConfig("carrier_pigeon")

    def test_request_needs_content(self):
        with pytest.raises(ValueError):
            ChatRequest("sys", "")


class TestMockBackends:
    def test_echo(self):
        resp = complete(ChatRequest("", "hello"), BackendConfig("mock_echo"))
        assert resp.text == "hello" and resp.backend_id == "mock_echo:-" and resp.latency_ms >= 0

    def test_table(self, tmp_path):
        path = write_json(tmp_path / "t.json", {"Q": "A"})
        backend = make_backend(BackendConfig("mock_table", fixture_path=str(path)))
        assert backend.complete(ChatRequest("", "Q")).text == "A"
        with pytest.raises(FixtureMissError):
            backend.complete(ChatRequest("", "R"))

    def test_replay_sequence_and_exhaustion(self, tmp_path):
        req = ChatRequest("sys", "hi")
        path = write_json(tmp_path / "r.json", [{"hash": req.digest(), "text": "one"},
                                                 {"system": "sys", "user": "hi", "text": "two"}])
        backend = make_backend(BackendConfig("replay", fixture_path=str(path)))
        assert [backend.complete(req).text for _ in range(2)] == ["one", "two"]
        with pytest.raises(ReplayExhaustedError):
            backend.complete(req)

    def test_replay_deterministic(self):
        recs = [{"user": "a", "text": "1"}, {"user": "b", "text": "2"}, {"user": "a", "text": "3"}]
        seq = [ChatRequest("", u) for u in "aba"]
        runs = []
        for _ in range(2):
            backend = ReplayBackend(BackendConfig("replay", fixture_path="-"), recs)
            runs.append([backend.complete(r).text for r in seq])
        assert runs[0] == runs[1] == ["1", "2", "3"]

    def test_digest_stable_and_param_sensitive(self):
        a = ChatRequest("s", "u", ChatParams(10, 0.0))
        assert a.digest() == ChatRequest("s", "u", ChatParams(10, 0.0)).digest()
        assert a.digest() != ChatRequest("s", "u", ChatParams(11, 0.0)).digest()
        # frozen value: the hash must not drift between releases
        assert a.digest() == "af061c965de31e5cfdd5cd6f075446269c9f16ccb65cd2ddddb9552c94b16277"


class TestHttp:
    def test_body_and_auth(self, monkeypatch):
        monkeypatch.setenv("LLM_API_KEY", "tok")
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return chat_reply("ok")

        backend = http_backend(handler, model="m1")
        assert backend.complete(ChatRequest("sys", "user", ChatParams(32, 0.5))).text == "ok"
        assert seen["auth"] == "Bearer tok"
        assert seen["body"] == {
            "model": "m1",
            "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "user"}],
            "max_tokens": 32,
            "temperature": 0.5,
        }

    def test_retries_then_succeeds(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 3:
                raise httpx.ReadTimeout("slow", request=request)
            return chat_reply("finally")

        assert http_backend(handler, max_retries=3).complete(ChatRequest("", "x")).text == "finally"
        assert len(calls) == 3

    def test_gives_up(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(503)

        with pytest.raises(TransportError):
            http_backend(handler, max_retries=2).complete(ChatRequest("", "x"))
        assert len(calls) == 3

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, text="bad key")

        with pytest.raises(TransportError):
            http_backend(handler).complete(ChatRequest("", "x"))
        assert len(calls) == 1

    def test_malformed(self):
        with pytest.raises(TransportError):
            http_backend(lambda r: httpx.Response(200, json={"nope": 1})).complete(ChatRequest("", "x"))


class TestRoles:
    PROMPT = "Please recommend me viewpoints near St. Regis Lhasa"

    def test_extract(self):
        backend = table({self.PROMPT: "St. Regis Lhasa"})
        assert extract_location_keyword(self.PROMPT, backend) == "St. Regis Lhasa"

    def test_extract_uses_instruction(self):
        seen = []

        class Spy(TableBackend):
            def _complete(self, request):
                seen.append(request)
                return super()._complete(request)

        backend = Spy(BackendConfig("mock_table", fixture_path="-"), {self.PROMPT: "x"})
        extract_location_keyword(self.PROMPT, backend)
        assert seen[0].system_instruction == EXTRACT_INSTRUCTION
        assert seen[0].params.temperature == 0

    def test_extract_trims(self):
        assert extract_location_keyword("p", table({"p": ' "X" '})) == "X"
        assert extract_location_keyword("p", table({"p": "“布达拉宫”\n"})) == "布达拉宫"

    def test_extract_empty(self):
        with pytest.raises(ExtractionError):
            extract_location_keyword("p", table({"p": ""}))
        with pytest.raises(ValueError):
            extract_location_keyword("  ", table({}))

    def test_generate(self, fixtures_dir):
        intros = json.loads((fixtures_dir / "generator_table.json").read_text())
        backend = make_backend(BackendConfig("mock_table", fixture_path=str(fixtures_dir / "generator_table.json")))
        assert generate_viewpoint_intro("Potala Palace", backend) == intros["Potala Palace"]
        with pytest.raises(FixtureMissError):
            generate_viewpoint_intro("Atlantis", backend)
        assert generate_viewpoint_intro("Potala Palace", make_backend(BackendConfig("mock_echo"))) == "Potala Palace"

    @pytest.mark.parametrize("reply,score", [("87", 0.87), ("score: 100/100", 1.0), ("250", 1.0), ("-3", 0.0),
                                             ("I'd say 42.5.", 0.425)])
    def test_judge_parse(self, reply, score):
        assert parse_judge_reply(reply) == pytest.approx(score)

    def test_judge_score(self):
        prompt = judge_prompt("fluency", "some text")
        assert judge_score("some text", None, "fluency", table({prompt: "87"})) == pytest.approx(0.87)

    def test_judge_unparseable(self):
        prompt = judge_prompt("fluency", "t")
        with pytest.raises(JudgeParseError):
            judge_score("t", None, "fluency", table({prompt: "excellent"}, max_retries=2))

    def test_relevance_needs_reference(self):
        with pytest.raises(ValueError):
            judge_prompt("relevance", "t")

    @given(st.text())
    def test_judge_always_in_unit_interval(self, reply):
        try:
            s = parse_judge_reply(reply)
        except JudgeParseError:
            return
        assert 0.0 <= s <= 1.0
