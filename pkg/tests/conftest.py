import random

import pytest

from nbestfix.datamodel import Hypothesis, NBestList, UtteranceRecord

# Vocabulary for synthetic corpora: simple, normalization-stable words.
WORDS = [
    "the", "a", "cat", "dog", "sat", "ran", "on", "under", "mat", "tree",
    "house", "bird", "flew", "over", "river", "quick", "brown", "fox",
    "jumped", "lazy", "green", "hill", "morning", "light", "rain", "fell",
    "softly", "children", "played", "garden", "old", "man", "walked",
    "slowly", "road", "long", "small", "boat", "sailed", "wind",
]


def make_sentences(count: int, seed: int, min_len: int = 4, max_len: int = 9) -> list[str]:
    rng = random.Random(seed)
    return [
        " ".join(rng.choice(WORDS) for _ in range(rng.randint(min_len, max_len)))
        for _ in range(count)
    ]


def brute_force_edit_cost(ref: list[str], hyp: list[str]) -> int:
    """Independent oracle: exhaustive recursion over edit scripts.

    No memoization, so it shares nothing with the DP implementation; prefix
    skipping keeps it tractable for the short sequences used in tests.
    """
    i = j = 0
    while i < len(ref) and j < len(hyp) and ref[i] == hyp[j]:
        i += 1
        j += 1
    if i == len(ref):
        return len(hyp) - j
    if j == len(hyp):
        return len(ref) - i
    sub = brute_force_edit_cost(ref[i + 1 :], hyp[j + 1 :])
    dele = brute_force_edit_cost(ref[i + 1 :], hyp[j:])
    ins = brute_force_edit_cost(ref[i:], hyp[j + 1 :])
    return 1 + min(sub, dele, ins)


def simple_record(utt_id: str, texts, scores=None, reference=None, order_tag="sorted", token_probs=None):
    scores = scores if scores is not None else [-float(i) for i in range(len(texts))]
    tps = token_probs if token_probs is not None else [None] * len(texts)
    hyps = tuple(
        Hypothesis(text=t, asr_logprob=s, token_probs=tp) for t, s, tp in zip(texts, scores, tps)
    )
    return UtteranceRecord(
        utt_id=utt_id,
        nbest=NBestList(hypotheses=hyps, order_tag=order_tag),
        reference=reference,
        source_tag="test",
    )


@pytest.fixture
def sentences_200():
    return make_sentences(200, seed=11)
