"""N-best selection: interpolated constrained reranking, unconstrained
pass-through, list ablations, and the concatenated list encoding fed to
corrector plugins.

The constrained criterion interpolates the ASR sequence score with an
external corrector/LM score per candidate:

    combined = (1 - lambda) * asr_logprob + lambda * external_logprob

and picks the in-list argmax, so the output is always a list member.  Ties
go to the lowest original ASR rank.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .datamodel import Hypothesis, NBestList, ScoreVector
from .textnorm import DEFAULT_RULES, NormRules, normalize

DEFAULT_SEPARATOR = "<sep>"

CONSTRAINED = "constrained"
UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class RerankConfig:
    """Interpolation weight, decoding mode, and length handling.

    ``length_norm`` divides each log-score (both sides) by the hypothesis
    token count before combining; off by default since the criterion is
    defined over raw sequence log-probabilities.
    """

    lambda_weight: float
    mode: str = CONSTRAINED
    length_norm: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.lambda_weight <= 1.0):
            raise ValueError(f"lambda_weight {self.lambda_weight!r} outside [0, 1]")
        if self.mode not in (CONSTRAINED, UNCONSTRAINED):
            raise ValueError(f"mode must be {CONSTRAINED!r} or {UNCONSTRAINED!r}")


@dataclass(frozen=True)
class Selection:
    """The chosen hypothesis for one utterance, with audit scores.

    ``chosen_rank`` is the 1-based original ASR rank, or None when an
    unconstrained output is not in the list.  ``combined_scores`` is empty
    for unconstrained selections.
    """

    utt_id: str
    chosen_text: str
    chosen_rank: int | None
    combined_scores: tuple[float, ...]
    in_list: bool


def combine(asr_logprob: float, ec_logprob: float, lambda_weight: float) -> float:
    """Interpolated score: ``(1 - lambda) * asr + lambda * external``."""
    return (1.0 - lambda_weight) * asr_logprob + lambda_weight * ec_logprob


def _token_count(hyp: Hypothesis) -> int:
    if hyp.token_probs:
        return len(hyp.token_probs)
    return max(1, len(hyp.text.split()))


def rerank_constrained(nbest: NBestList, scores: ScoreVector, config: RerankConfig) -> Selection:
    """Pick the in-list argmax of the interpolated score.

    ``scores`` must be aligned with the list order.  At equal combined score
    the lowest original rank wins.
    """
    if len(scores.scores) != len(nbest):
        raise ValueError(
            f"utt {scores.utt_id!r}: {len(scores.scores)} scores for {len(nbest)} hypotheses"
        )
    combined: list[float] = []
    for hyp, ec in zip(nbest, scores.scores):
        asr = hyp.asr_logprob
        if config.length_norm:
            count = _token_count(hyp)
            asr = asr / count
            ec = ec / count
        combined.append(combine(asr, ec, config.lambda_weight))
    best = 0
    for idx in range(1, len(combined)):
        if combined[idx] > combined[best]:
            best = idx
    return Selection(
        utt_id=scores.utt_id,
        chosen_text=nbest[best].text,
        chosen_rank=best + 1,
        combined_scores=tuple(combined),
        in_list=True,
    )


def select_unconstrained(
    nbest: NBestList,
    corrected_text: str,
    *,
    utt_id: str,
    rules: NormRules = DEFAULT_RULES,
) -> Selection:
    """Adopt a generator plugin's output verbatim.

    Membership is decided on normalized text; when the correction matches a
    list entry, the first matching rank is recorded.
    """
    target = normalize(corrected_text, rules)
    chosen_rank = None
    for idx, hyp in enumerate(nbest):
        if normalize(hyp.text, rules) == target:
            chosen_rank = idx + 1
            break
    return Selection(
        utt_id=utt_id,
        chosen_text=corrected_text,
        chosen_rank=chosen_rank,
        combined_scores=(),
        in_list=chosen_rank is not None,
    )


def ablate(
    nbest: NBestList,
    mode: str,
    seed: int | None = None,
    k: int | None = None,
) -> NBestList:
    """List disturbance transforms: sorted, randomized, reversed, truncate.

    The hypothesis multiset is unchanged except for ``truncate``, which
    keeps the top ``k`` (the whole list when ``k`` exceeds its length).
    ``order_tag`` follows the transform; reversing twice restores both the
    order and the tag.
    """
    hyps = list(nbest.hypotheses)
    if mode == "sorted":
        hyps.sort(key=lambda h: -h.asr_logprob)
        return NBestList(hypotheses=tuple(hyps), order_tag="sorted")
    if mode == "randomized":
        random.Random(seed).shuffle(hyps)
        return NBestList(hypotheses=tuple(hyps), order_tag="randomized")
    if mode == "reversed":
        flip = {"sorted": "reversed", "reversed": "sorted"}
        tag = flip.get(nbest.order_tag, nbest.order_tag)
        return NBestList(hypotheses=tuple(reversed(hyps)), order_tag=tag)
    if mode == "truncate":
        if k is None or k < 1:
            raise ValueError("truncate requires k >= 1")
        return NBestList(hypotheses=tuple(hyps[:k]), order_tag=nbest.order_tag)
    raise ValueError(f"unknown ablation mode {mode!r}")


def encode_nbest_input(nbest: NBestList, n: int, separator: str = DEFAULT_SEPARATOR) -> str:
    """Concatenate the first ``n`` hypothesis texts with the separator token.

    Lists shorter than ``n`` contribute everything they have, unpadded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return separator.join(nbest.texts[:n])
