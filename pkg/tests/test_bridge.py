import io
import json
import sys
import textwrap

import pytest

from nbestfix.bridge import (
    PluginClient,
    ScoreRequest,
    conformance_check,
    request_for_record,
    score_records,
    serve_lm,
)
from nbestfix.errors import ScorerProtocolError, ScorerTimeoutError, ScorerTransportError
from nbestfix.lm import train
from nbestfix.lm import score as lm_score
from nbestfix.textnorm import normalize

from conftest import make_sentences, simple_record

ECHO_PLUGIN = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        if req["task"] == "score":
            cands = req.get("candidates")
            if not cands:
                resp = {"utt_id": req["utt_id"], "scores": None, "corrected": None,
                        "error": "empty candidates"}
            else:
                resp = {"utt_id": req["utt_id"], "scores": [0.0] * len(cands), "corrected": None}
        else:
            texts = req.get("n_best_texts") or [""]
            resp = {"utt_id": req["utt_id"], "scores": None, "corrected": texts[0] or "fixed"}
        sys.stdout.write(json.dumps(resp) + "\\n")
        sys.stdout.flush()
    """
)

SHORT_LIST_PLUGIN = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        resp = {"utt_id": req["utt_id"], "scores": [0.0], "corrected": None}
        sys.stdout.write(json.dumps(resp) + "\\n")
        sys.stdout.flush()
    """
)

# Answers each burst of requests in reverse order: correct content, wrong order.
# Reads the raw fd so a multi-line write arrives as one batch.
REVERSING_PLUGIN = textwrap.dedent(
    """
    import json, os, sys
    pending = b""
    while True:
        chunk = os.read(0, 1 << 16)
        if not chunk:
            break
        pending += chunk
        if b"\\n" not in pending:
            continue
        complete, _, pending = pending.rpartition(b"\\n")
        batch = [json.loads(l) for l in complete.split(b"\\n") if l.strip()]
        for req in reversed(batch):
            cands = req.get("candidates")
            if req["task"] == "generate":
                resp = {"utt_id": req["utt_id"], "scores": None, "corrected": "x"}
            elif not cands:
                resp = {"utt_id": req["utt_id"], "scores": None, "corrected": None, "error": "no"}
            else:
                resp = {"utt_id": req["utt_id"], "scores": [0.0] * len(cands), "corrected": None}
            sys.stdout.write(json.dumps(resp) + "\\n")
        sys.stdout.flush()
    """
)

NONFINITE_PLUGIN = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        cands = req.get("candidates") or [""]
        sys.stdout.write(json.dumps({"utt_id": req["utt_id"],
                                     "scores": [1e999] * len(cands),
                                     "corrected": "x"}) + "\\n")
        sys.stdout.flush()
    """
)

GARBAGE_PLUGIN = 'import sys; print("not json"); sys.stdout.flush(); sys.stdin.read()'

DYING_PLUGIN = "import sys; sys.exit(3)"


def _client(code: str, timeout: float = 10.0) -> PluginClient:
    return PluginClient([sys.executable, "-c", code], timeout=timeout)


def _score_request(utt_id: str, candidates):
    return ScoreRequest(
        utt_id=utt_id,
        task="score",
        candidates=tuple(candidates),
        context="<ctx>",
        n_best_texts=tuple(candidates),
    )


def test_echo_plugin_scores_zero_vectors():
    requests = [_score_request("u1", ["a", "b"]), _score_request("u2", ["c", "d", "e"])]
    with _client(ECHO_PLUGIN) as client:
        responses = client.score_batch(requests)
    assert [r.utt_id for r in responses] == ["u1", "u2"]
    assert responses[0].scores == (0.0, 0.0)
    assert responses[1].scores == (0.0, 0.0, 0.0)


def test_request_response_bijection():
    requests = [_score_request(f"u{i}", ["x"]) for i in range(20)]
    with _client(ECHO_PLUGIN) as client:
        responses = client.score_batch(requests)
    assert [r.utt_id for r in responses] == [f"u{i}" for i in range(20)]


def test_short_score_list_is_protocol_error():
    with _client(SHORT_LIST_PLUGIN) as client:
        with pytest.raises(ScorerProtocolError, match="scores"):
            client.score_batch([_score_request("u1", ["a", "b"])])


def test_nonfinite_score_is_protocol_error():
    with _client(NONFINITE_PLUGIN) as client:
        with pytest.raises(ScorerProtocolError, match="non-finite"):
            client.score_batch([_score_request("u1", ["a"])])


def test_garbage_line_is_protocol_error():
    with _client(GARBAGE_PLUGIN) as client:
        with pytest.raises(ScorerProtocolError, match="not json"):
            client.score_batch([_score_request("u1", ["a"])])


def test_dead_plugin_is_transport_error():
    with _client(DYING_PLUGIN) as client:
        with pytest.raises(ScorerTransportError, match="status 3"):
            client.score_batch([_score_request("u1", ["a"])])


def test_timeout_names_utt_id():
    silent = "import time, sys; time.sleep(60)"
    with _client(silent, timeout=0.3) as client:
        with pytest.raises(ScorerTimeoutError, match="slow-utt"):
            client.score_batch([_score_request("slow-utt", ["a"])])


def test_empty_candidates_rejected_by_bridge():
    with _client(ECHO_PLUGIN) as client:
        with pytest.raises(ValueError, match="without candidates"):
            client.score_batch(
                [ScoreRequest(utt_id="u", task="score", candidates=(), context="", n_best_texts=())]
            )


def test_request_for_record_carries_features():
    rec = simple_record(
        "u",
        ["a b", "a c"],
        reference="a b",
        token_probs=[(("a", 0.9), (" b", 0.8)), (("a", 0.9), (" c", 0.4))],
    )
    req = request_for_record(rec)
    assert req.candidates == ("a b", "a c")
    assert req.context == "a b<sep>a c"
    assert req.n_best_texts == ("a b", "a c")
    assert req.word_confidences == ((0.9, 0.8), (0.9, 0.4))
    assert req.phones is None
    line = json.loads(req.to_line())
    assert set(line) == {
        "utt_id", "task", "candidates", "context", "n_best_texts", "phones", "word_confidences",
    }


# --- conformance ---------------------------------------------------------------


def test_conformance_echo_plugin_passes_core_cases():
    with _client(ECHO_PLUGIN) as client:
        report = conformance_check(client)
    assert len(report.cases) == 12
    assert report.all_passed, report.format_text()


def test_conformance_reversing_plugin_fails_ordering():
    with _client(REVERSING_PLUGIN, timeout=2.0) as client:
        report = conformance_check(client)
    by_name = {c.name: c for c in report.cases}
    assert not by_name["ordering"].passed
    assert not report.all_passed


def test_conformance_nonfinite_plugin_fails_finiteness():
    with _client(NONFINITE_PLUGIN, timeout=2.0) as client:
        report = conformance_check(client)
    by_name = {c.name: c for c in report.cases}
    assert not by_name["finite_scores"].passed
    assert not by_name["score_basic"].passed


# --- the in-repo LM behind the bridge -------------------------------------------


@pytest.fixture(scope="module")
def lm_model():
    return train([normalize(s) for s in make_sentences(40, seed=21)], order=2)


def test_serve_lm_scores_bit_identical_to_direct_calls(lm_model):
    candidates = ["the cat sat on the mat", "ZZZ unknowable words", "The Cat, sat!"]
    request = {
        "utt_id": "u1",
        "task": "score",
        "candidates": candidates,
        "context": "",
        "n_best_texts": candidates,
        "phones": None,
        "word_confidences": None,
    }
    stdin = io.StringIO(json.dumps(request) + "\n")
    stdout = io.StringIO()
    assert serve_lm(lm_model, stdin=stdin, stdout=stdout) == 0
    resp = json.loads(stdout.getvalue())
    direct = [lm_score(lm_model, normalize(c)) for c in candidates]
    assert resp["scores"] == direct  # bit-identical through JSON round-trip


def test_serve_lm_generate_picks_lm_argmax(lm_model):
    texts = ["the cat sat", "zzq qqz zqz", "the dog ran"]
    request = {
        "utt_id": "u1",
        "task": "generate",
        "candidates": None,
        "context": "",
        "n_best_texts": texts,
        "phones": None,
        "word_confidences": None,
    }
    stdin = io.StringIO(json.dumps(request) + "\n")
    stdout = io.StringIO()
    serve_lm(lm_model, stdin=stdin, stdout=stdout)
    resp = json.loads(stdout.getvalue())
    expected = max(texts, key=lambda t: lm_score(lm_model, normalize(t)))
    assert resp["corrected"] == expected


def test_serve_lm_unparseable_input_exits_2(lm_model):
    stdin = io.StringIO("this is not json\n")
    assert serve_lm(lm_model, stdin=stdin, stdout=io.StringIO()) == 2


def test_serve_lm_error_response_for_empty_candidates(lm_model):
    request = {"utt_id": "u1", "task": "score", "candidates": [], "n_best_texts": []}
    stdin = io.StringIO(json.dumps(request) + "\n")
    stdout = io.StringIO()
    assert serve_lm(lm_model, stdin=stdin, stdout=stdout) == 0
    resp = json.loads(stdout.getvalue())
    assert resp["scores"] is None and resp["corrected"] is None
    assert "error" in resp


def test_lm_through_subprocess_bridge_matches_direct(lm_model, tmp_path):
    model_path = tmp_path / "m.nglm"
    lm_model.save(model_path)
    records = [
        simple_record("u1", ["the cat sat", "the bat sat"], reference="the cat sat"),
        simple_record("u2", ["a dog ran", "a dog run"], reference="a dog ran"),
    ]
    cmd = [sys.executable, "-m", "nbestfix", "plugin", "serve-lm", "--model", str(model_path)]
    with PluginClient(cmd) as client:
        vectors = score_records(client, records, scorer_id="ngram-lm")
    for rec in records:
        direct = tuple(lm_score(lm_model, normalize(t)) for t in rec.nbest.texts)
        assert vectors[rec.utt_id].scores == direct


def test_conformance_lm_adapter_all_cases_pass(lm_model, tmp_path):
    model_path = tmp_path / "m.nglm"
    lm_model.save(model_path)
    cmd = [sys.executable, "-m", "nbestfix", "plugin", "serve-lm", "--model", str(model_path)]
    with PluginClient(cmd) as client:
        report = conformance_check(client)
    assert report.all_passed, report.format_text()
