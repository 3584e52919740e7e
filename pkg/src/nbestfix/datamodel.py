"""Domain types, the line-delimited dump format, and validation.

A *dump* is the toolkit's unit of exchange: one JSON object per line, UTF-8,
LF line endings, no BOM.  Schema per record:

    {"utt_id": str, "reference": str|null, "source_tag": str,
     "nbest": [{"text": str, "asr_logprob": float,
                "token_probs": [[str, float], ...]|null,
                "phones": str|null}, ...],
     "order_tag": "sorted"|"randomized"|"reversed"|"unknown"}

All log quantities are natural log.  Writing then loading a dump reproduces
records field-for-field (floats are emitted via ``repr`` shortest-round-trip,
which preserves well over 12 significant digits), and re-writing a loaded
dump is byte-identical.

Types are immutable after construction: constructors coerce sequences to
tuples but do not enforce semantic invariants, so damaged data can still be
represented and reported by :func:`validate`.
"""

from __future__ import annotations

import json
import math
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import DumpFormatError

ORDER_TAGS = ("sorted", "randomized", "reversed", "unknown")


@dataclass(frozen=True)
class Hypothesis:
    """One decoded candidate with its sequence-level ASR score.

    ``token_probs`` holds the ASR tokenizer's (token, softmax probability)
    pairs when the upstream system exposes them; ``phones`` an optional
    precomputed phone string.  Both default to absent.
    """

    text: str
    asr_logprob: float
    token_probs: tuple[tuple[str, float], ...] | None = None
    phones: str | None = None

    def __post_init__(self) -> None:
        if self.token_probs is not None:
            object.__setattr__(
                self, "token_probs", tuple((t, float(p)) for t, p in self.token_probs)
            )
        object.__setattr__(self, "asr_logprob", float(self.asr_logprob))


@dataclass(frozen=True)
class NBestList:
    """Ordered candidate list for one utterance.

    ``order_tag`` records how the list relates to ASR-score order; a
    ``sorted`` tag promises non-increasing ``asr_logprob``.
    """

    hypotheses: tuple[Hypothesis, ...]
    order_tag: str = "unknown"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self) -> Iterator[Hypothesis]:
        return iter(self.hypotheses)

    def __getitem__(self, i: int) -> Hypothesis:
        return self.hypotheses[i]

    @property
    def texts(self) -> list[str]:
        return [h.text for h in self.hypotheses]


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: id, candidate list, optional reference, provenance."""

    utt_id: str
    nbest: NBestList
    reference: str | None = None
    source_tag: str = ""


@dataclass(frozen=True)
class ScoreVector:
    """External scores for one utterance, aligned with its n-best order."""

    utt_id: str
    scorer_id: str
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))


@dataclass(frozen=True)
class Violation:
    utt_id: str
    field: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, utt_id: str, field_name: str, message: str) -> None:
        self.violations.append(Violation(utt_id, field_name, message))

    def format_text(self) -> str:
        if self.ok:
            return "ok: no invariant violations"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v.utt_id}\t{v.field}\t{v.message}" for v in self.violations]
        return "\n".join(lines)


def validate(records: Iterable[UtteranceRecord], *, allow_empty_text: bool = False) -> ValidationReport:
    """Check every type invariant and report violations as data.

    Empty hypothesis text is a violation unless explicitly allowed via
    ``allow_empty_text``.
    """
    report = ValidationReport()
    seen: set[str] = set()
    for rec in records:
        uid = rec.utt_id
        if not uid:
            report.add(uid, "utt_id", "empty utt_id")
        if uid in seen:
            report.add(uid, "utt_id", f"duplicate utt_id {uid!r}")
        seen.add(uid)
        if rec.nbest.order_tag not in ORDER_TAGS:
            report.add(uid, "order_tag", f"unknown order_tag {rec.nbest.order_tag!r}")
        if len(rec.nbest) < 1:
            report.add(uid, "nbest", "empty n-best list")
        prev = math.inf
        for rank, hyp in enumerate(rec.nbest, start=1):
            if not hyp.text and not allow_empty_text:
                report.add(uid, "text", f"rank {rank}: empty hypothesis text")
            if not math.isfinite(hyp.asr_logprob):
                report.add(uid, "asr_logprob", f"rank {rank}: non-finite score")
            if hyp.token_probs is not None:
                for t, p in hyp.token_probs:
                    if not (0.0 <= p <= 1.0) or not math.isfinite(p):
                        report.add(
                            uid, "token_probs", f"rank {rank}: probability {p!r} outside [0, 1]"
                        )
            if rec.nbest.order_tag == "sorted" and hyp.asr_logprob > prev:
                report.add(
                    uid, "order", f"rank {rank}: asr_logprob increases in a sorted-tagged list"
                )
            prev = hyp.asr_logprob
    return report


# --- dump serialization ----------------------------------------------------


def _hyp_to_obj(hyp: Hypothesis) -> dict:
    return {
        "text": hyp.text,
        "asr_logprob": hyp.asr_logprob,
        "token_probs": [[t, p] for t, p in hyp.token_probs] if hyp.token_probs is not None else None,
        "phones": hyp.phones,
    }


def record_to_line(rec: UtteranceRecord) -> str:
    """Serialize one record to its canonical single-line JSON form."""
    obj = {
        "utt_id": rec.utt_id,
        "reference": rec.reference,
        "source_tag": rec.source_tag,
        "nbest": [_hyp_to_obj(h) for h in rec.nbest],
        "order_tag": rec.nbest.order_tag,
    }
    return json.dumps(obj, ensure_ascii=False, allow_nan=False, separators=(",", ":"))


def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise DumpFormatError("missing key", line=line_no, field=key)
    return obj[key]


def _as_str(value, key: str, line_no: int) -> str:
    if not isinstance(value, str):
        raise DumpFormatError(f"expected string, got {type(value).__name__}", line=line_no, field=key)
    return value


def _as_float(value, key: str, line_no: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DumpFormatError(f"expected number, got {type(value).__name__}", line=line_no, field=key)
    return float(value)


def _parse_hypothesis(obj, line_no: int) -> Hypothesis:
    if not isinstance(obj, dict):
        raise DumpFormatError("hypothesis must be an object", line=line_no, field="nbest")
    unknown = set(obj) - {"text", "asr_logprob", "token_probs", "phones"}
    if unknown:
        raise DumpFormatError(f"unknown keys {sorted(unknown)}", line=line_no, field="nbest")
    text = _as_str(_require(obj, "text", line_no), "text", line_no)
    logprob = _as_float(_require(obj, "asr_logprob", line_no), "asr_logprob", line_no)
    raw_tp = _require(obj, "token_probs", line_no)
    token_probs = None
    if raw_tp is not None:
        if not isinstance(raw_tp, list):
            raise DumpFormatError("token_probs must be a list or null", line=line_no, field="token_probs")
        pairs = []
        for entry in raw_tp:
            if not isinstance(entry, list) or len(entry) != 2:
                raise DumpFormatError(
                    "token_probs entries must be [token, probability] pairs",
                    line=line_no,
                    field="token_probs",
                )
            tok = _as_str(entry[0], "token_probs", line_no)
            pairs.append((tok, _as_float(entry[1], "token_probs", line_no)))
        token_probs = tuple(pairs)
    raw_phones = _require(obj, "phones", line_no)
    phones = None if raw_phones is None else _as_str(raw_phones, "phones", line_no)
    return Hypothesis(text=text, asr_logprob=logprob, token_probs=token_probs, phones=phones)


def parse_record_line(line: str, line_no: int = 0) -> UtteranceRecord:
    """Parse one dump line into a structurally validated record."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DumpFormatError(f"invalid JSON: {exc.msg}", line=line_no) from exc
    if not isinstance(obj, dict):
        raise DumpFormatError("record must be a JSON object", line=line_no)
    unknown = set(obj) - {"utt_id", "reference", "source_tag", "nbest", "order_tag"}
    if unknown:
        raise DumpFormatError(f"unknown keys {sorted(unknown)}", line=line_no)
    utt_id = _as_str(_require(obj, "utt_id", line_no), "utt_id", line_no)
    raw_ref = _require(obj, "reference", line_no)
    reference = None if raw_ref is None else _as_str(raw_ref, "reference", line_no)
    source_tag = _as_str(_require(obj, "source_tag", line_no), "source_tag", line_no)
    order_tag = _as_str(_require(obj, "order_tag", line_no), "order_tag", line_no)
    if order_tag not in ORDER_TAGS:
        raise DumpFormatError(f"order_tag must be one of {ORDER_TAGS}", line=line_no, field="order_tag")
    raw_nbest = _require(obj, "nbest", line_no)
    if not isinstance(raw_nbest, list) or not raw_nbest:
        raise DumpFormatError("nbest must be a non-empty list", line=line_no, field="nbest")
    hyps = tuple(_parse_hypothesis(h, line_no) for h in raw_nbest)
    return UtteranceRecord(
        utt_id=utt_id,
        nbest=NBestList(hypotheses=hyps, order_tag=order_tag),
        reference=reference,
        source_tag=source_tag,
    )


def _read_source_text(source: str | Path) -> str:
    text = str(source)
    if text.startswith(("http://", "https://")):
        with urllib.request.urlopen(text) as resp:
            return resp.read().decode("utf-8")
    return Path(source).read_text(encoding="utf-8")


def _dump_lines(content: str) -> list[str]:
    # LF is the record delimiter; splitlines() would also split on NEL and
    # friends, which may legitimately occur inside JSON strings.
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_dump(source: str | Path) -> list[UtteranceRecord]:
    """Load a dump from a local path or an HTTP(S) URL.

    Input order is preserved. Malformed lines raise :class:`DumpFormatError`
    carrying the line number; duplicate ids raise naming the id.
    """
    content = _read_source_text(source)
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(_dump_lines(content), start=1):
        if not line.strip():
            raise DumpFormatError("blank line in dump", line=line_no)
        rec = parse_record_line(line, line_no)
        if rec.utt_id in seen:
            raise DumpFormatError(f"duplicate utt_id {rec.utt_id!r}", line=line_no, field="utt_id")
        seen.add(rec.utt_id)
        records.append(rec)
    return records


def write_dump(records: Iterable[UtteranceRecord], dest: str | Path) -> None:
    """Write records to ``dest`` in canonical dump form (UTF-8, LF, no BOM)."""
    with open(dest, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(record_to_line(rec))
            f.write("\n")


def dump_to_string(records: Iterable[UtteranceRecord]) -> str:
    return "".join(record_to_line(rec) + "\n" for rec in records)


# --- score vector files ----------------------------------------------------


def score_vector_to_line(vec: ScoreVector) -> str:
    obj = {"utt_id": vec.utt_id, "scorer_id": vec.scorer_id, "scores": list(vec.scores)}
    return json.dumps(obj, ensure_ascii=False, allow_nan=False, separators=(",", ":"))


def load_scores(source: str | Path) -> dict[str, ScoreVector]:
    """Load a score-vector file (one JSON object per line) keyed by utt_id."""
    content = _read_source_text(source)
    out: dict[str, ScoreVector] = {}
    for line_no, line in enumerate(_dump_lines(content), start=1):
        if not line.strip():
            raise DumpFormatError("blank line in scores file", line=line_no)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DumpFormatError(f"invalid JSON: {exc.msg}", line=line_no) from exc
        if not isinstance(obj, dict):
            raise DumpFormatError("score entry must be a JSON object", line=line_no)
        utt_id = _as_str(_require(obj, "utt_id", line_no), "utt_id", line_no)
        scorer_id = _as_str(_require(obj, "scorer_id", line_no), "scorer_id", line_no)
        raw_scores = _require(obj, "scores", line_no)
        if not isinstance(raw_scores, list):
            raise DumpFormatError("scores must be a list", line=line_no, field="scores")
        scores = tuple(_as_float(s, "scores", line_no) for s in raw_scores)
        for s in scores:
            if not math.isfinite(s):
                raise DumpFormatError("scores must be finite", line=line_no, field="scores")
        if utt_id in out:
            raise DumpFormatError(f"duplicate utt_id {utt_id!r}", line=line_no, field="utt_id")
        out[utt_id] = ScoreVector(utt_id=utt_id, scorer_id=scorer_id, scores=scores)
    return out


def write_scores(vectors: Iterable[ScoreVector], dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="\n") as f:
        for vec in vectors:
            f.write(score_vector_to_line(vec))
            f.write("\n")


# --- token grouping convention ---------------------------------------------


def group_tokens_into_words(
    token_probs: Sequence[tuple[str, float]],
) -> list[tuple[str, list[float]]]:
    """Group word-piece tokens into words by whitespace reconstruction.

    A token starts a new word when it carries a leading space marker or
    follows a token that ended with one; otherwise it extends the current
    word.  Tokens that are empty or all-space contribute no characters (an
    all-space token still closes the current word).  Each word keeps the
    probabilities of every token that contributed to it.
    """
    grouped: list[tuple[str, list[float]]] = []
    open_word = False
    for tok, prob in token_probs:
        if tok == "":
            continue
        parts = tok.split()
        if not parts:
            open_word = False
            continue
        leading = tok[0].isspace()
        for i, part in enumerate(parts):
            if i == 0 and not leading and open_word and grouped:
                word, probs = grouped[-1]
                grouped[-1] = (word + part, probs + [prob])
            else:
                grouped.append((part, [prob]))
        open_word = not tok[-1].isspace()
    return grouped
