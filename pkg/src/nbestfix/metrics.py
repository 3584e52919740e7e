"""Word-level edit alignment, WER/SER aggregation, and oracle N-best curves.

Alignment uses uniform edit costs (1 per substitution/insertion/deletion)
and a deterministic backtrace: at equal cost, match beats substitution beats
deletion beats insertion, resolved while scanning from the start of the
sequences.  Corpus WER pools error counts over utterances (sum of errors over
sum of reference lengths), never a mean of per-utterance rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .datamodel import UtteranceRecord
from .errors import MissingReferenceError
from .textnorm import DEFAULT_RULES, NormRules, normalize

MATCH = "match"
SUB = "sub"
INS = "ins"
DEL = "del"


@dataclass(frozen=True)
class AlignStep:
    """One alignment op; ``ref`` is None for insertions, ``hyp`` for deletions."""

    op: str
    ref: str | None
    hyp: str | None


@dataclass(frozen=True)
class Alignment:
    steps: tuple[AlignStep, ...]

    @property
    def cost(self) -> int:
        return sum(1 for s in self.steps if s.op != MATCH)

    def counts(self) -> tuple[int, int, int]:
        """(substitutions, insertions, deletions)."""
        subs = sum(1 for s in self.steps if s.op == SUB)
        ins = sum(1 for s in self.steps if s.op == INS)
        dels = sum(1 for s in self.steps if s.op == DEL)
        return subs, ins, dels

    def ref_words(self) -> list[str]:
        return [s.ref for s in self.steps if s.ref is not None]

    def hyp_words(self) -> list[str]:
        return [s.hyp for s in self.steps if s.hyp is not None]


def align(ref_words: Sequence[str], hyp_words: Sequence[str]) -> Alignment:
    """Minimal-cost word alignment with the fixed tie policy.

    ``dist[i][j]`` holds the edit distance between the suffixes
    ``ref_words[i:]`` and ``hyp_words[j:]``; the alignment is then read off
    front-to-back so ties resolve from the sequence start.
    """
    m, n = len(ref_words), len(hyp_words)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for j in range(n + 1):
        dist[m][j] = n - j
    for i in range(m, -1, -1):
        dist[i][n] = m - i
    for i in range(m - 1, -1, -1):
        row, below = dist[i], dist[i + 1]
        for j in range(n - 1, -1, -1):
            if ref_words[i] == hyp_words[j]:
                row[j] = below[j + 1]
            else:
                row[j] = 1 + min(below[j + 1], below[j], row[j + 1])

    steps: list[AlignStep] = []
    i = j = 0
    while i < m or j < n:
        if i < m and j < n and ref_words[i] == hyp_words[j] and dist[i][j] == dist[i + 1][j + 1]:
            steps.append(AlignStep(MATCH, ref_words[i], hyp_words[j]))
            i, j = i + 1, j + 1
        elif i < m and j < n and dist[i][j] == 1 + dist[i + 1][j + 1]:
            steps.append(AlignStep(SUB, ref_words[i], hyp_words[j]))
            i, j = i + 1, j + 1
        elif i < m and dist[i][j] == 1 + dist[i + 1][j]:
            steps.append(AlignStep(DEL, ref_words[i], None))
            i += 1
        else:
            steps.append(AlignStep(INS, None, hyp_words[j]))
            j += 1
    return Alignment(steps=tuple(steps))


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            # No reference words: perfect if nothing was hypothesized,
            # otherwise every hyp word is an insertion against nothing.
            return 0.0 if self.errors == 0 else math.inf
        return self.errors / self.ref_len


def wer(reference: str, hypothesis: str, rules: NormRules = DEFAULT_RULES) -> WerBreakdown:
    """Normalize both sides, align at word level, and count errors."""
    ref_words = normalize(reference, rules).split()
    hyp_words = normalize(hypothesis, rules).split()
    alignment = align(ref_words, hyp_words)
    subs, ins, dels = alignment.counts()
    return WerBreakdown(substitutions=subs, insertions=ins, deletions=dels, ref_len=len(ref_words))


def word_error_labels(alignment: Alignment) -> list[bool]:
    """Per-hypothesis-word correctness flags, in hypothesis order.

    A hypothesis word is correct iff it participates in a match op; words
    from substitutions and insertions are incorrect.  Deletions carry no
    hypothesis word and produce no label.
    """
    return [s.op == MATCH for s in alignment.steps if s.hyp is not None]


# --- corpus aggregation ------------------------------------------------------

HypothesisSelector = Callable[[UtteranceRecord], str]


def top_hypothesis(record: UtteranceRecord) -> str:
    """Selector for the rank-1 hypothesis."""
    return record.nbest[0].text


def rank_selector(rank: int) -> HypothesisSelector:
    """Selector for a fixed 1-based rank (clamped to the list length)."""

    def select(record: UtteranceRecord) -> str:
        idx = min(rank, len(record.nbest)) - 1
        return record.nbest[idx].text

    return select


def oracle_selector(rules: NormRules = DEFAULT_RULES) -> HypothesisSelector:
    """Selector picking the in-list hypothesis with fewest errors.

    Ties go to the lowest original rank, so the oracle is deterministic.
    """

    def select(record: UtteranceRecord) -> str:
        if record.reference is None:
            raise MissingReferenceError(record.utt_id)
        best_text = record.nbest[0].text
        best_errors: int | None = None
        for hyp in record.nbest:
            errors = wer(record.reference, hyp.text, rules).errors
            if best_errors is None or errors < best_errors:
                best_errors = errors
                best_text = hyp.text
        return best_text

    return select


@dataclass(frozen=True)
class CorpusWer:
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int
    utterances: int
    skipped: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_len if self.ref_len else 0.0


def corpus_breakdown(
    records: Iterable[UtteranceRecord],
    selector: HypothesisSelector = top_hypothesis,
    rules: NormRules = DEFAULT_RULES,
    breakdowns: Iterable[WerBreakdown] | None = None,
) -> CorpusWer:
    """Pool per-utterance error counts into a corpus-level breakdown.

    Utterances whose normalized reference is empty are excluded from the
    pooled counts and tallied under ``skipped``.  ``breakdowns`` lets callers
    supply precomputed per-utterance results (e.g. from a thread pool); order
    must match ``records``.
    """
    subs = ins = dels = ref_len = used = skipped = 0
    records = list(records)
    if breakdowns is None:
        breakdowns = [_utterance_breakdown(rec, selector, rules) for rec in records]
    else:
        breakdowns = list(breakdowns)
        if len(breakdowns) != len(records):
            raise ValueError("breakdowns and records length mismatch")
    for rec, bd in zip(records, breakdowns):
        if bd.ref_len == 0:
            skipped += 1
            continue
        subs += bd.substitutions
        ins += bd.insertions
        dels += bd.deletions
        ref_len += bd.ref_len
        used += 1
    return CorpusWer(
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        ref_len=ref_len,
        utterances=used,
        skipped=skipped,
    )


def _utterance_breakdown(
    record: UtteranceRecord, selector: HypothesisSelector, rules: NormRules
) -> WerBreakdown:
    if record.reference is None:
        raise MissingReferenceError(record.utt_id)
    return wer(record.reference, selector(record), rules)


def utterance_breakdown(
    record: UtteranceRecord,
    selector: HypothesisSelector = top_hypothesis,
    rules: NormRules = DEFAULT_RULES,
) -> WerBreakdown:
    """Per-utterance breakdown for the selected hypothesis."""
    return _utterance_breakdown(record, selector, rules)


def corpus_wer(
    records: Iterable[UtteranceRecord],
    selector: HypothesisSelector = top_hypothesis,
    rules: NormRules = DEFAULT_RULES,
) -> float:
    """Pooled corpus WER: sum of errors over sum of reference lengths."""
    return corpus_breakdown(records, selector, rules).wer


# --- oracle curves -----------------------------------------------------------


@dataclass(frozen=True)
class OracleCurve:
    """Rank-wise reference-match statistics over a corpus.

    ``match_at_rank[n-1]`` is the fraction of utterances whose n-th
    hypothesis equals the reference, among utterances that have an n-th
    hypothesis (``rank_support[n-1]`` of them).  ``contains_in_top[n-1]`` is
    the fraction of all utterances whose top-n (clipped to list length)
    contains the reference; it is non-decreasing in n by construction.
    """

    max_n: int
    match_at_rank: tuple[float, ...]
    contains_in_top: tuple[float, ...]
    rank_support: tuple[int, ...]
    total: int


def oracle_curves(
    records: Iterable[UtteranceRecord],
    max_n: int,
    rules: NormRules = DEFAULT_RULES,
) -> OracleCurve:
    """Compute both curve families on normalized text equality."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    match_num = [0] * max_n
    support = [0] * max_n
    contains_num = [0] * max_n
    total = 0
    for rec in records:
        if rec.reference is None:
            raise MissingReferenceError(rec.utt_id)
        total += 1
        ref_norm = normalize(rec.reference, rules)
        first_hit: int | None = None  # 0-based rank of first matching hypothesis
        for idx, hyp in enumerate(rec.nbest.hypotheses[:max_n]):
            equal = normalize(hyp.text, rules) == ref_norm
            match_num[idx] += 1 if equal else 0
            support[idx] += 1
            if equal and first_hit is None:
                first_hit = idx
        for n in range(max_n):
            if first_hit is not None and first_hit <= n:
                contains_num[n] += 1
    match_at_rank = tuple(
        match_num[n] / support[n] if support[n] else 0.0 for n in range(max_n)
    )
    contains_in_top = tuple(contains_num[n] / total if total else 0.0 for n in range(max_n))
    return OracleCurve(
        max_n=max_n,
        match_at_rank=match_at_rank,
        contains_in_top=contains_in_top,
        rank_support=tuple(support),
        total=total,
    )
