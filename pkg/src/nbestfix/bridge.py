"""Line-delimited stdio boundary to external scorer/corrector plugins.

A plugin is any command that reads one JSON request per line on stdin and
writes one JSON response per line on stdout, in request order:

    request:  {"utt_id": str, "task": "score"|"generate",
               "candidates": [str]|null, "context": str,
               "n_best_texts": [str], "phones": [str]|null,
               "word_confidences": [[float]]|null}
    response: {"utt_id": str, "scores": [float]|null, "corrected": str|null}

A plugin that cannot serve a request answers with both ``scores`` and
``corrected`` null plus an optional ``"error"`` message, keeping the stream
aligned.  The bridge validates every response (id echo, score count,
finiteness) and turns violations into typed errors.  The in-repo n-gram LM
is exposed through the same interface by :func:`serve_lm`, so every consumer
of external scores has exactly one code path.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import sys
import threading
from dataclasses import dataclass
from typing import IO, Sequence

from . import lm as lm_mod
from .datamodel import ScoreVector, UtteranceRecord
from .errors import ScorerProtocolError, ScorerTimeoutError, ScorerTransportError
from .rerank import DEFAULT_SEPARATOR, encode_nbest_input
from .textnorm import NormRules, DEFAULT_RULES, normalize

TASK_SCORE = "score"
TASK_GENERATE = "generate"

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class ScoreRequest:
    utt_id: str
    task: str
    candidates: tuple[str, ...] | None
    context: str
    n_best_texts: tuple[str, ...]
    phones: tuple[str, ...] | None = None
    word_confidences: tuple[tuple[float, ...], ...] | None = None

    def to_line(self) -> str:
        obj = {
            "utt_id": self.utt_id,
            "task": self.task,
            "candidates": list(self.candidates) if self.candidates is not None else None,
            "context": self.context,
            "n_best_texts": list(self.n_best_texts),
            "phones": list(self.phones) if self.phones is not None else None,
            "word_confidences": [list(w) for w in self.word_confidences]
            if self.word_confidences is not None
            else None,
        }
        return json.dumps(obj, ensure_ascii=False, allow_nan=False, separators=(",", ":"))


@dataclass(frozen=True)
class ScoreResponse:
    utt_id: str
    scores: tuple[float, ...] | None
    corrected: str | None
    error: str | None = None


def request_for_record(
    record: UtteranceRecord,
    task: str = TASK_SCORE,
    n: int | None = None,
    separator: str = DEFAULT_SEPARATOR,
) -> ScoreRequest:
    """Build the wire request for one utterance.

    Candidates are the raw hypothesis texts; the context is the first ``n``
    of them joined by the separator token.  Phones and word confidences ride
    along when present so feature-aware plugins can use them.
    """
    texts = tuple(record.nbest.texts)
    limit = len(texts) if n is None else n
    phones = tuple(h.phones or "" for h in record.nbest)
    has_phones = any(h.phones for h in record.nbest)
    confidences = None
    if all(h.token_probs for h in record.nbest):
        confidences = tuple(tuple(p for _, p in h.token_probs) for h in record.nbest)
    return ScoreRequest(
        utt_id=record.utt_id,
        task=task,
        candidates=texts if task == TASK_SCORE else None,
        context=encode_nbest_input(record.nbest, limit, separator),
        n_best_texts=texts,
        phones=phones if has_phones else None,
        word_confidences=confidences,
    )


def parse_response_line(line: str) -> ScoreResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ScorerProtocolError(f"unparseable response line: {line!r} ({exc.msg})") from exc
    if not isinstance(obj, dict) or "utt_id" not in obj:
        raise ScorerProtocolError(f"response missing utt_id: {line!r}")
    utt_id = obj["utt_id"]
    if not isinstance(utt_id, str):
        raise ScorerProtocolError(f"utt_id must be a string: {line!r}")
    raw_scores = obj.get("scores")
    scores = None
    if raw_scores is not None:
        if not isinstance(raw_scores, list) or any(
            isinstance(s, bool) or not isinstance(s, (int, float)) for s in raw_scores
        ):
            raise ScorerProtocolError(f"scores must be a list of numbers: {line!r}")
        scores = tuple(float(s) for s in raw_scores)
    corrected = obj.get("corrected")
    if corrected is not None and not isinstance(corrected, str):
        raise ScorerProtocolError(f"corrected must be a string: {line!r}")
    error = obj.get("error")
    if error is not None and not isinstance(error, str):
        raise ScorerProtocolError(f"error must be a string: {line!r}")
    return ScoreResponse(utt_id=utt_id, scores=scores, corrected=corrected, error=error)


class PluginClient:
    """Owns one plugin process: spawn, serialized request/response, kill.

    One writer and one reader per process; calls are serialized by an
    internal lock, so a client may be shared across threads but requests from
    different threads never interleave mid-batch.
    """

    def __init__(self, cmd: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ScorerTransportError(f"cannot launch plugin {self.cmd!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()
        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._reader.start()

    def _pump_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def __enter__(self) -> "PluginClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5.0)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def _send_lines(self, lines: list[str]) -> None:
        assert self._proc.stdin is not None
        try:
            for line in lines:
                self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            # The reader side will surface the exit status.
            pass

    def _recv_line(self, utt_id: str) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeoutError(utt_id, self.timeout) from None
        if line is None:
            self._lines.put(None)  # keep EOF visible to later reads
            code = self._proc.wait()
            raise ScorerTransportError(
                f"plugin exited with status {code} before answering utt_id {utt_id!r}"
            )
        return line.rstrip("\n")

    def exchange_raw(self, request_lines: list[str], utt_ids: list[str]) -> list[ScoreResponse]:
        """Send raw request lines and parse one response per request.

        Requests are streamed from a writer thread so a buffering plugin
        cannot deadlock the pipe; responses are read in order.
        """
        with self._lock:
            writer = threading.Thread(target=self._send_lines, args=(request_lines,), daemon=True)
            writer.start()
            responses = [parse_response_line(self._recv_line(uid)) for uid in utt_ids]
            writer.join()
            return responses

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        """Run validated requests through the plugin, preserving order.

        Every response is checked against its request: id echo, score count
        equal to candidate count, finite scores, non-null payload for the
        task.  Violations raise :class:`ScorerProtocolError` naming the
        offending content.
        """
        for req in requests:
            if req.task not in (TASK_SCORE, TASK_GENERATE):
                raise ValueError(f"unknown task {req.task!r}")
            if req.task == TASK_SCORE and not req.candidates:
                raise ValueError(f"utt {req.utt_id!r}: score request without candidates")
        responses = self.exchange_raw(
            [req.to_line() for req in requests], [req.utt_id for req in requests]
        )
        for req, resp in zip(requests, responses):
            if resp.utt_id != req.utt_id:
                raise ScorerProtocolError(
                    f"response id {resp.utt_id!r} does not echo request id {req.utt_id!r}"
                )
            if resp.error is not None or (resp.scores is None and resp.corrected is None):
                raise ScorerProtocolError(
                    f"utt {req.utt_id!r}: plugin error: {resp.error or 'empty response'}"
                )
            if req.task == TASK_SCORE:
                if resp.scores is None:
                    raise ScorerProtocolError(f"utt {req.utt_id!r}: score task got no scores")
                if len(resp.scores) != len(req.candidates or ()):
                    raise ScorerProtocolError(
                        f"utt {req.utt_id!r}: {len(resp.scores)} scores for "
                        f"{len(req.candidates or ())} candidates"
                    )
                if any(not math.isfinite(s) for s in resp.scores):
                    raise ScorerProtocolError(f"utt {req.utt_id!r}: non-finite score")
            else:
                if resp.corrected is None:
                    raise ScorerProtocolError(f"utt {req.utt_id!r}: generate task got no text")
        return responses


def score_records(
    client: PluginClient,
    records: Sequence[UtteranceRecord],
    scorer_id: str = "plugin",
    n: int | None = None,
) -> dict[str, ScoreVector]:
    """Score every record's candidates through the plugin."""
    requests = [request_for_record(rec, TASK_SCORE, n=n) for rec in records]
    responses = client.score_batch(requests)
    return {
        resp.utt_id: ScoreVector(utt_id=resp.utt_id, scorer_id=scorer_id, scores=resp.scores or ())
        for resp in responses
    }


# --- conformance -------------------------------------------------------------


@dataclass(frozen=True)
class ConformanceCase:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ConformanceReport:
    cases: tuple[ConformanceCase, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def format_text(self) -> str:
        lines = []
        for c in self.cases:
            status = "PASS" if c.passed else "FAIL"
            suffix = f"  ({c.detail})" if c.detail else ""
            lines.append(f"{status}  {c.name}{suffix}")
        verdict = "all cases passed" if self.all_passed else "conformance FAILED"
        lines.append(verdict)
        return "\n".join(lines) + "\n"


def _simple_request(utt_id: str, task: str, candidates, context: str, n_best, **extra) -> str:
    obj = {
        "utt_id": utt_id,
        "task": task,
        "candidates": candidates,
        "context": context,
        "n_best_texts": n_best,
        "phones": extra.get("phones"),
        "word_confidences": extra.get("word_confidences"),
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def conformance_check(client: PluginClient) -> ConformanceReport:
    """Run the fixed 12-case protocol handshake against a plugin.

    Failures are report content, never exceptions; a dead plugin fails the
    remaining cases with the transport detail.
    """
    cases: list[ConformanceCase] = []

    def run(name: str, fn) -> None:
        try:
            ok, detail = fn()
        except (ScorerProtocolError, ScorerTimeoutError, ScorerTransportError) as exc:
            ok, detail = False, str(exc)
        cases.append(ConformanceCase(name=name, passed=ok, detail="" if ok else detail))

    def one(line: str, utt_id: str) -> ScoreResponse:
        return client.exchange_raw([line], [utt_id])[0]

    def case_score_basic():
        resp = one(_simple_request("c01", "score", ["a b", "a c"], "a b<sep>a c", ["a b", "a c"]), "c01")
        ok = resp.scores is not None and len(resp.scores) == 2 and all(
            math.isfinite(s) for s in resp.scores
        )
        return ok, f"got {resp!r}"

    def case_id_echo():
        uid = "utt/π 7 — id"
        resp = one(_simple_request(uid, "score", ["x"], "x", ["x"]), uid)
        return resp.utt_id == uid, f"echoed {resp.utt_id!r}"

    def case_ordering():
        ids = [f"ord{i}" for i in range(4)]
        lines = [_simple_request(uid, "score", ["w"], "w", ["w"]) for uid in ids]
        resps = client.exchange_raw(lines, ids)
        got = [r.utt_id for r in resps]
        return got == ids, f"order {got!r}"

    def case_many_candidates():
        cands = [f"cand {i}" for i in range(8)]
        resp = one(_simple_request("c04", "score", cands, "<ctx>", cands), "c04")
        ok = resp.scores is not None and len(resp.scores) == 8
        return ok, f"got {0 if resp.scores is None else len(resp.scores)} scores"

    def case_single_candidate():
        resp = one(_simple_request("c05", "score", ["only one"], "only one", ["only one"]), "c05")
        ok = resp.scores is not None and len(resp.scores) == 1
        return ok, f"got {resp!r}"

    def case_unicode():
        cands = ["naïve café", "東京 タワー", "мир труд май"]
        resp = one(_simple_request("c06", "score", cands, "<sep>".join(cands), cands), "c06")
        ok = resp.scores is not None and len(resp.scores) == 3 and all(
            math.isfinite(s) for s in resp.scores
        )
        return ok, f"got {resp!r}"

    def case_long_input():
        long_text = " ".join(f"word{i}" for i in range(600))
        resp = one(
            _simple_request("c07", "score", [long_text, "short"], long_text, [long_text]), "c07"
        )
        ok = resp.scores is not None and len(resp.scores) == 2
        return ok, f"got {resp!r}"

    def case_empty_candidates_rejected():
        resp = one(_simple_request("c08", "score", [], "ctx", ["ctx"]), "c08")
        ok = resp.utt_id == "c08" and resp.scores is None
        return ok, f"expected error response, got {resp!r}"

    def case_generate_basic():
        resp = one(_simple_request("c09", "generate", None, "the cat sat", ["the cat sat"]), "c09")
        ok = isinstance(resp.corrected, str) and resp.corrected != ""
        return ok, f"got {resp!r}"

    def case_generate_with_list():
        nbest = ["the cat sat", "the bat sat", "the cat sag"]
        resp = one(_simple_request("c10", "generate", None, "<sep>".join(nbest), nbest), "c10")
        ok = isinstance(resp.corrected, str) and resp.corrected != ""
        return ok, f"got {resp!r}"

    def case_finite_scores():
        cands = ["", "   ", "a"]
        resp = one(_simple_request("c11", "score", cands, "a", ["a"]), "c11")
        ok = resp.scores is not None and len(resp.scores) == 3 and all(
            math.isfinite(s) for s in resp.scores
        )
        return ok, f"got {resp!r}"

    def case_optional_fields():
        resp = one(
            _simple_request(
                "c12",
                "score",
                ["a b", "a c"],
                "a b<sep>a c",
                ["a b", "a c"],
                phones=["AH B", "AH K"],
                word_confidences=[[0.9, 0.8], [0.9, 0.4]],
            ),
            "c12",
        )
        ok = resp.scores is not None and len(resp.scores) == 2
        return ok, f"got {resp!r}"

    run("score_basic", case_score_basic)
    run("id_echo", case_id_echo)
    run("ordering", case_ordering)
    run("many_candidates", case_many_candidates)
    run("single_candidate", case_single_candidate)
    run("unicode_text", case_unicode)
    run("long_input", case_long_input)
    run("empty_candidates_rejected", case_empty_candidates_rejected)
    run("generate_basic", case_generate_basic)
    run("generate_with_list", case_generate_with_list)
    run("finite_scores", case_finite_scores)
    run("optional_fields", case_optional_fields)
    return ConformanceReport(cases=tuple(cases))


# --- in-repo LM behind the same interface ------------------------------------


def serve_lm(
    model: lm_mod.NgramModel,
    rules: NormRules = DEFAULT_RULES,
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
) -> int:
    """Serve the n-gram LM over the plugin protocol until stdin closes.

    Score requests return ``lm.score`` of each normalized candidate, so
    bridge-mediated scores are bit-identical to direct calls.  Generate
    requests return the highest-scoring list member.  Unparseable input
    ends the loop with exit status 2; per-request problems produce error
    responses and keep the stream aligned.
    """
    fin = stdin if stdin is not None else sys.stdin
    fout = stdout if stdout is not None else sys.stdout
    for raw in fin:
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            utt_id = obj["utt_id"]
            task = obj["task"]
        except (json.JSONDecodeError, KeyError, TypeError):
            return 2
        scores = None
        corrected = None
        error = None
        if task == TASK_SCORE:
            candidates = obj.get("candidates")
            if not candidates or not isinstance(candidates, list):
                error = "score task requires non-empty candidates"
            else:
                scores = [lm_mod.score(model, normalize(str(c), rules)) for c in candidates]
        elif task == TASK_GENERATE:
            texts = obj.get("n_best_texts") or []
            if not texts:
                error = "generate task requires n_best_texts"
            else:
                best = max(texts, key=lambda t: lm_mod.score(model, normalize(str(t), rules)))
                corrected = str(best)
        else:
            error = f"unknown task {task!r}"
        resp = {"utt_id": utt_id, "scores": scores, "corrected": corrected}
        if error is not None:
            resp["error"] = error
        fout.write(json.dumps(resp, ensure_ascii=False, allow_nan=False, separators=(",", ":")))
        fout.write("\n")
        fout.flush()
    return 0
