"""Word-level confidence estimation, quantization into bins, and calibration.

A word's confidence is the arithmetic mean of its tokens' softmax
probabilities.  Scores are quantized into equal-width bins on [0, 1]; a
calibration report compares each bin's mean confidence with the empirical
accuracy of its words, where accuracy comes from the word-level alignment
against the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .datamodel import UtteranceRecord, group_tokens_into_words
from .metrics import align, word_error_labels
from .textnorm import DEFAULT_RULES, NormRules, normalize


@dataclass(frozen=True)
class WordConfidence:
    word: str
    score: float


def word_confidence(token_probs_for_word: Sequence[float]) -> float:
    """Mean token probability for one word; the per-word confidence estimate."""
    if not token_probs_for_word:
        raise ValueError("word has no token probabilities")
    for p in token_probs_for_word:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"token probability {p!r} outside [0, 1]")
    return math.fsum(token_probs_for_word) / len(token_probs_for_word)


def bin_index(score: float, num_bins: int) -> int:
    """Equal-width bin index on [0, 1]: ``min(floor(score * B), B - 1)``."""
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"score {score!r} outside [0, 1]")
    return min(int(score * num_bins), num_bins - 1)


@dataclass(frozen=True)
class CalibrationBin:
    index: int
    lo: float
    hi: float
    word_count: int
    mean_confidence: float
    empirical_accuracy: float


@dataclass(frozen=True)
class CalibrationTable:
    bins: tuple[CalibrationBin, ...]
    total_words: int
    skipped_utterances: int

    def format_csv(self) -> str:
        lines = ["bin,lo,hi,count,mean_conf,accuracy"]
        for b in self.bins:
            lines.append(
                f"{b.index},{b.lo:.6f},{b.hi:.6f},{b.word_count},"
                f"{b.mean_confidence:.6f},{b.empirical_accuracy:.6f}"
            )
        return "\n".join(lines) + "\n"


def scored_words(hyp_token_probs: Sequence[tuple[str, float]]) -> list[WordConfidence]:
    """Word confidences for one hypothesis via the token-grouping convention."""
    return [
        WordConfidence(word=w, score=word_confidence(probs))
        for w, probs in group_tokens_into_words(hyp_token_probs)
    ]


def calibration_report(
    records: Iterable[UtteranceRecord],
    rules: NormRules = DEFAULT_RULES,
    num_bins: int = 5,
) -> CalibrationTable:
    """Aggregate 1-best word confidences against alignment correctness.

    Utterances are skipped (and tallied) when they lack a reference or
    token probabilities, or when the token-derived words do not line up with
    the normalized hypothesis text, since confidences could not be paired
    with correctness labels in that case.
    """
    counts = [0] * num_bins
    conf_sums = [[] for _ in range(num_bins)]  # kept as lists for exact fsum
    correct = [0] * num_bins
    skipped = 0
    for rec in records:
        top = rec.nbest[0]
        if rec.reference is None or top.token_probs is None:
            skipped += 1
            continue
        grouped = group_tokens_into_words(top.token_probs)
        norm_words: list[tuple[str, float]] = []
        for word, probs in grouped:
            norm = normalize(word, rules)
            if norm:
                norm_words.append((norm, word_confidence(probs)))
        hyp_words = normalize(top.text, rules).split()
        if [w for w, _ in norm_words] != hyp_words:
            skipped += 1
            continue
        ref_words = normalize(rec.reference, rules).split()
        labels = word_error_labels(align(ref_words, hyp_words))
        for (_, conf), label in zip(norm_words, labels):
            b = bin_index(conf, num_bins)
            counts[b] += 1
            conf_sums[b].append(conf)
            correct[b] += 1 if label else 0
    bins = []
    for b in range(num_bins):
        mean_conf = math.fsum(conf_sums[b]) / counts[b] if counts[b] else 0.0
        accuracy = correct[b] / counts[b] if counts[b] else 0.0
        bins.append(
            CalibrationBin(
                index=b,
                lo=b / num_bins,
                hi=(b + 1) / num_bins,
                word_count=counts[b],
                mean_confidence=mean_conf,
                empirical_accuracy=accuracy,
            )
        )
    return CalibrationTable(
        bins=tuple(bins), total_words=sum(counts), skipped_utterances=skipped
    )
