from __future__ import annotations

import json

import httpx
import pytest

from guiprop.oracle import (
    FixtureError,
    MalformedOracleOutput,
    OracleRequest,
    ReplayOracle,
    ScriptedOracle,
    Transcript,
    TranscriptMiss,
    make_oracle,
    record,
    resolve_fixture,
)
from guiprop.oracle.client import parse_json_reply
from guiprop.oracle.http import TOKEN_ENV, HttpOracle, HttpSettings, OracleTransportError
from guiprop.oracle.prompts import load_prompt, prompt_version
from guiprop.oracle.schemas import TASK_KINDS
from guiprop.oracle.scripted import match_doc, render

DIAG = {"property": {"description": "attach a photo"}, "evidence": {"steps": []}, "report": {"failed_atom": "Q"}}
BUG = {"verdict": "likely_bug", "rationale": "effect missing"}


def diag_request(**extra) -> OracleRequest:
    return OracleRequest("diagnose_violation", DIAG | extra)


# -- requests ---------------------------------------------------------------------


def test_request_payload_validated():
    with pytest.raises(ValueError):
        OracleRequest("diagnose_violation", {"property": {}})
    with pytest.raises(ValueError):
        OracleRequest("write_poem", {})


def test_digest_is_canonical():
    a = OracleRequest("diagnose_violation", {"report": {"x": 1, "y": 2}, "property": {}, "evidence": {}})
    b = OracleRequest("diagnose_violation", {"evidence": {}, "property": {}, "report": {"y": 2, "x": 1}})
    assert a.digest == b.digest
    assert a.digest != OracleRequest("diagnose_violation", dict(a.payload), (b"img",)).digest


def test_parse_json_reply():
    assert parse_json_reply('```json\n{"a": 1}\n```') == {"a": 1}
    assert parse_json_reply('Sure! {"a": {"b": 2}} hope that helps') == {"a": {"b": 2}}
    with pytest.raises(ValueError):
        parse_json_reply("no json here")


def test_prompts_exist_and_are_versioned():
    for kind in TASK_KINDS:
        assert load_prompt(kind).strip()
        assert prompt_version(kind) == "1"


# -- scripted -------------------------------------------------------------------


@pytest.mark.parametrize(
    "match, ok",
    [
        ({"a.b": 1}, True),
        ({"a.b": {"$gt": 0, "$le": 1}}, True),
        ({"a.c": {"$exists": False}}, True),
        ({"l": {"$some": {"k": "y"}}}, True),
        ({"l": {"$none": {"k": "z"}}}, True),
        ({"l": {"$all": {"k": {"$in": ["x", "y"]}}}}, True),
        ({"l": {"$len": {"$ge": 3}}}, False),
        ({"l.1.k": "y"}, True),
        ({"s": {"$regex": "^he"}}, True),
        ({"s": {"$contains": "ll", "$not_contains": "z"}}, True),
        ({"s": {"$not": {"$eq": "hello"}}}, False),
        ({"match_any": [{"a.b": 2}, {"s": "hello"}]}, True),
        ({"match_all": [{"a.b": 1}, {"s": "nope"}]}, False),
        ({"missing.path": {"$ne": 3}}, True),
    ],
)
def test_match_language(match, ok):
    doc = {"a": {"b": 1}, "l": [{"k": "x"}, {"k": "y"}], "s": "hello"}
    assert match_doc(doc, match) is ok


def test_render_directives():
    payload = {"p": {"q": [1, 2]}, "flag": True, "state": {"widgets": [{"label": 4, "resource_id": "ok"}]}}
    out = render(
        {"copy": {"$ref": "p.q"}, "lab": {"$label": {"resource_id": "ok"}}, "l": [1, {"$if": {"flag": False}, "value": 2}, 3]},
        payload,
    )
    assert out == {"copy": [1, 2], "lab": 4, "l": [1, 3]}
    with pytest.raises(MalformedOracleOutput):
        render({"$ref": "p.nope"}, payload)


def test_scripted_first_rule_wins_and_unmatched_is_malformed():
    o = ScriptedOracle(
        {"rules": {"diagnose_violation": [
            {"id": "photo", "match": {"property.description": {"$regex": "photo"}}, "response": BUG},
            {"id": "other", "match": {}, "response": {"verdict": "automation_failure", "rationale": "x"}},
        ]}}
    )
    assert o.complete(diag_request()).result == BUG
    assert o.hits == [("diagnose_violation", "photo")]
    with pytest.raises(MalformedOracleOutput):
        o.complete(OracleRequest("refine_property", {"property": {}, "diagnosis": {}, "evidence": {}, "report": {}, "vocab": []}))


def test_scripted_response_is_schema_checked():
    o = ScriptedOracle({"rules": {"diagnose_violation": [{"match": {}, "response": {"verdict": "maybe", "rationale": "r"}}]}})
    with pytest.raises(MalformedOracleOutput):
        o.complete(diag_request())


def test_fixture_errors(tmp_path):
    with pytest.raises(FixtureError):
        ScriptedOracle({"rules": {"dream": []}})
    with pytest.raises(FixtureError):
        ScriptedOracle({})
    with pytest.raises(FixtureError):
        ScriptedOracle.from_path(tmp_path / "none.json")
    with pytest.raises(FixtureError):
        resolve_fixture("fixtures/does_not_exist")


def test_shipped_fixture_resolves():
    assert resolve_fixture("fixtures/notes").joinpath("oracle.json").is_file()


# -- record / replay ----------------------------------------------------------------


def test_record_replay_round_trip(tmp_path):
    inner = ScriptedOracle({"rules": {"diagnose_violation": [{"match": {"report.failed_atom": "Q"}, "response": BUG}]}})
    rec = record(inner, {"seed": 1})
    assert rec.complete(diag_request()).result == BUG
    with pytest.raises(MalformedOracleOutput):
        rec.complete(OracleRequest("diagnose_violation", DIAG | {"report": {"failed_atom": "other"}}))
    path = tmp_path / "t.jsonl"
    rec.transcript.save(path)
    t = Transcript.load(path)
    assert t.metadata["seed"] == 1 and len(t.records) == 2
    rep = ReplayOracle(t)
    assert rep.complete(diag_request()).result == BUG
    with pytest.raises(MalformedOracleOutput):
        rep.complete(OracleRequest("diagnose_violation", DIAG | {"report": {"failed_atom": "other"}}))
    with pytest.raises(TranscriptMiss):
        rep.complete(OracleRequest("diagnose_violation", DIAG | {"report": {"failed_atom": "new"}}))


def test_make_oracle_specs(tmp_path):
    assert isinstance(make_oracle("scripted:fixtures/notes"), ScriptedOracle)
    for bad in ("scripted", "nope:x", "http:http://localhost"):
        with pytest.raises(ValueError):
            make_oracle(bad)
    with pytest.raises(ValueError):
        make_oracle(f"replay:{tmp_path / 'missing.jsonl'}")
    o = make_oracle("http:http://localhost:1/v1#m", max_retries=0)
    assert o.describe() == "http:http://localhost:1/v1#m"


# -- http ---------------------------------------------------------------------------------


def completion(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def http_oracle(handler, **settings) -> tuple[HttpOracle, list[float]]:
    sleeps: list[float] = []
    o = HttpOracle(
        HttpSettings("http://oracle.test/v1", "m", **settings),
        token="secret",
        transport=httpx.MockTransport(handler),
        sleep=sleeps.append,
    )
    return o, sleeps


def test_http_success_sends_schema_and_token():
    seen = []

    def handler(req: httpx.Request) -> httpx.Response:
        seen.append(req)
        return httpx.Response(200, json=completion(json.dumps(BUG)))

    o, _ = http_oracle(handler, temperature=0.0)
    assert o.complete(diag_request()).result == BUG
    req = seen[0]
    assert req.url.path == "/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer secret"
    body = json.loads(req.content)
    assert body["model"] == "m" and body["temperature"] == 0.0
    assert body["messages"][0]["role"] == "system"
    assert '"verdict"' in body["messages"][1]["content"]


def test_http_token_from_environment(monkeypatch):
    monkeypatch.setenv(TOKEN_ENV, "from-env")
    seen = []

    def handler(req):
        seen.append(req.headers.get("authorization"))
        return httpx.Response(200, json=completion(json.dumps(BUG)))

    o = HttpOracle(HttpSettings("http://oracle.test", "m"), transport=httpx.MockTransport(handler))
    o.complete(diag_request())
    assert seen == ["Bearer from-env"]


def test_http_retries_transient_failures_with_backoff():
    codes = iter([429, 503])

    def handler(req):
        code = next(codes, 200)
        return httpx.Response(code, json=completion(json.dumps(BUG)) if code == 200 else {})

    o, sleeps = http_oracle(handler, backoff_s=0.5)
    assert o.complete(diag_request()).result == BUG
    assert sleeps == [0.5, 1.0]


def test_http_gives_up_after_retries():
    def handler(req):
        raise httpx.ConnectError("refused")

    o, sleeps = http_oracle(handler, max_retries=2)
    with pytest.raises(OracleTransportError):
        o.complete(diag_request())
    assert len(sleeps) == 2


def test_http_client_error_is_not_retried():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401, text="bad token")

    o, _ = http_oracle(handler)
    with pytest.raises(OracleTransportError):
        o.complete(diag_request())
    assert len(calls) == 1


def test_http_repairs_one_invalid_reply():
    replies = iter(["I think it is a bug.", "```json\n" + json.dumps(BUG) + "\n```"])
    bodies = []

    def handler(req):
        bodies.append(json.loads(req.content))
        return httpx.Response(200, json=completion(next(replies)))

    o, _ = http_oracle(handler)
    assert o.complete(diag_request()).result == BUG
    assert len(bodies[1]["messages"]) == 4
    assert bodies[1]["messages"][2] == {"role": "assistant", "content": "I think it is a bug."}


def test_http_persistently_invalid_reply_is_malformed():
    def handler(req):
        return httpx.Response(200, json=completion(json.dumps({"verdict": "shrug", "rationale": "?"})))

    o, _ = http_oracle(handler)
    with pytest.raises(MalformedOracleOutput):
        o.complete(diag_request())


def test_http_attachments_become_image_parts():
    seen = []

    def handler(req):
        seen.append(json.loads(req.content))
        return httpx.Response(200, json=completion(json.dumps(BUG)))

    o, _ = http_oracle(handler)
    o.complete(OracleRequest("diagnose_violation", DIAG, (b"\x89PNG",)))
    parts = seen[0]["messages"][1]["content"]
    assert parts[0]["type"] == "text"
    assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")
