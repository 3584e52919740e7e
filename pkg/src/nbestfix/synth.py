"""Synthetic recognition channel: turns clean sentences into scored N-best
dumps so the whole pipeline can be exercised without a real recognizer.

Each hypothesis is drawn by perturbing the sentence character by character
(substitute / delete / keep, plus an optional insertion after every kept or
substituted slot).  The stored score is the log-likelihood of the sampled
derivation divided by ``temperature``, plus standard Gumbel noise.  The noise
models scorer miscalibration: without it the clean sentence would rank first
whenever it is drawn at all (an identity derivation is the per-slot mode for
any rate setting below one half), and rank-1 accuracy would equal top-N
containment, which is not how recognizer lists behave.  Larger temperatures
compress the likelihood term relative to the noise and so spread the ranking.

Word confidences are synthesized from the channel itself: every surviving
hypothesis word carries one token whose probability is the chance its source
word came through unperturbed, which makes the confidences calibrated
against word correctness by construction.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .datamodel import Hypothesis, NBestList, UtteranceRecord

ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class SynthChannelConfig:
    seed: int = 0
    char_sub_rate: float = 0.05
    char_del_rate: float = 0.02
    char_ins_rate: float = 0.02
    n_best_size: int = 10
    temperature: float = 5.0

    def __post_init__(self) -> None:
        for name in ("char_sub_rate", "char_del_rate", "char_ins_rate"):
            rate = getattr(self, name)
            if not (0.0 <= rate <= 0.5):
                raise ValueError(f"{name} {rate!r} outside [0, 0.5]")
        if self.char_sub_rate + self.char_del_rate + self.char_ins_rate >= 1.0:
            raise ValueError("perturbation rates must sum to less than 1")
        if self.n_best_size < 1:
            raise ValueError("n_best_size must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


def _gumbel(rng: random.Random) -> float:
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return -math.log(-math.log1p(-u))


def _perturb_word(word: str, cfg: SynthChannelConfig, rng: random.Random) -> tuple[str, float]:
    """One noisy copy of ``word`` and the log-likelihood of the derivation."""
    p_del, p_sub, p_ins = cfg.char_del_rate, cfg.char_sub_rate, cfg.char_ins_rate
    p_keep = 1.0 - p_del - p_sub
    out: list[str] = []
    loglik = 0.0
    for ch in word:
        r = rng.random()
        if r < p_del:
            loglik += math.log(p_del)
        elif r < p_del + p_sub:
            repl = rng.choice([c for c in ALPHABET if c != ch] or [ch])
            out.append(repl)
            loglik += math.log(p_sub / max(1, len(ALPHABET) - 1))
        else:
            out.append(ch)
            loglik += math.log(p_keep)
        if p_ins and rng.random() < p_ins:
            out.append(rng.choice(ALPHABET))
            loglik += math.log(p_ins / len(ALPHABET))
        else:
            loglik += math.log(1.0 - p_ins) if p_ins else 0.0
    return "".join(out), loglik


def _word_survival_prob(length: int, cfg: SynthChannelConfig) -> float:
    p_clean_slot = (1.0 - cfg.char_del_rate - cfg.char_sub_rate) * (1.0 - cfg.char_ins_rate)
    return p_clean_slot**length


def _sample_hypothesis(
    words: list[str], cfg: SynthChannelConfig, rng: random.Random
) -> Hypothesis | None:
    out_words: list[str] = []
    confs: list[float] = []
    loglik = 0.0
    for word in words:
        noisy, lp = _perturb_word(word, cfg, rng)
        loglik += lp
        if noisy:
            out_words.append(noisy)
            confs.append(_word_survival_prob(len(word), cfg))
    if not out_words:
        return None
    score = loglik / cfg.temperature + _gumbel(rng)
    token_probs = tuple(
        (w if i == 0 else " " + w, c) for i, (w, c) in enumerate(zip(out_words, confs))
    )
    return Hypothesis(text=" ".join(out_words), asr_logprob=score, token_probs=token_probs)


def synth(
    corpus: list[str],
    config: SynthChannelConfig,
    source_tag: str = "synth",
    id_prefix: str = "synth",
) -> list[UtteranceRecord]:
    """Sample an N-best dump for every sentence in ``corpus``.

    Deterministic for a fixed config (one RNG drives everything).  Variants
    that lose every character are resampled so hypothesis text is never
    empty; after 100 futile draws the clean sentence is used.
    """
    if not corpus:
        raise ValueError("synth needs a non-empty corpus")
    rng = random.Random(config.seed)
    records: list[UtteranceRecord] = []
    for idx, sentence in enumerate(corpus):
        words = sentence.split()
        if not words:
            raise ValueError(f"corpus sentence {idx} is empty")
        hyps: list[Hypothesis] = []
        for _ in range(config.n_best_size):
            hyp = None
            for _attempt in range(100):
                hyp = _sample_hypothesis(words, config, rng)
                if hyp is not None:
                    break
            if hyp is None:
                token_probs = tuple(
                    (w if i == 0 else " " + w, _word_survival_prob(len(w), config))
                    for i, w in enumerate(words)
                )
                hyp = Hypothesis(text=" ".join(words), asr_logprob=_gumbel(rng), token_probs=token_probs)
            hyps.append(hyp)
        hyps.sort(key=lambda h: -h.asr_logprob)
        records.append(
            UtteranceRecord(
                utt_id=f"{id_prefix}-{idx:06d}",
                nbest=NBestList(hypotheses=tuple(hyps), order_tag="sorted"),
                reference=sentence,
                source_tag=source_tag,
            )
        )
    return records
