"""Acceptance gate: every criterion as one test, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.  Criteria 1-9 need only this package; the plugin package has its
own acceptance module for the external-corrector criterion.
"""

import math
import random
import subprocess
import sys
import time

import pytest

from nbestfix.confidence import calibration_report
from nbestfix.datamodel import Hypothesis, NBestList, ScoreVector, UtteranceRecord, write_dump
from nbestfix.lm import train, perplexity
from nbestfix.metrics import (
    align,
    corpus_breakdown,
    oracle_curves,
    oracle_selector,
    top_hypothesis,
)
from nbestfix.pipeline import (
    best_lambda,
    corpus_wer_of_selections,
    rerank_corpus,
    split_dev_test,
    sweep_lambda,
)
from nbestfix.rerank import RerankConfig, ablate
from nbestfix.synth import SynthChannelConfig, synth
from nbestfix.textnorm import normalize
from nbestfix import lm as lm_mod

from conftest import brute_force_edit_cost, make_sentences

ACCEPTANCE_CHANNEL = dict(char_sub_rate=0.05, char_del_rate=0.02, char_ins_rate=0.02, n_best_size=10)


def _report(number: int, name: str, detail: str = "") -> None:
    suffix = f"  [{detail}]" if detail else ""
    print(f"ACCEPTANCE {number} {name}: PASS{suffix}")


def test_criterion_1_wer_oracle_equivalence():
    rng = random.Random(1234)
    start = time.perf_counter()
    checked = 0
    for _ in range(2000):
        ref = [rng.choice("abcde") for _ in range(rng.randint(0, 8))]
        hyp = [rng.choice("abcde") for _ in range(rng.randint(0, 8))]
        assert align(ref, hyp).cost == brute_force_edit_cost(ref, hyp)
        checked += 1
    elapsed = time.perf_counter() - start
    assert checked >= 2000
    assert elapsed < 60.0
    _report(1, "wer-oracle-equivalence", f"{checked} pairs, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def synthetic_500():
    records = synth(
        make_sentences(500, seed=42), SynthChannelConfig(seed=1, **ACCEPTANCE_CHANNEL)
    )
    rng = random.Random(9)
    ec_scores = {
        rec.utt_id: ScoreVector(
            utt_id=rec.utt_id,
            scorer_id="external",
            scores=tuple(-8.0 * rng.random() for _ in rec.nbest.texts),
        )
        for rec in records
    }
    return records, ec_scores


def test_criterion_2_interpolation_boundary_identities(synthetic_500):
    records, ec_scores = synthetic_500
    assert len(records) == 500

    selections = rerank_corpus(records, ec_scores, RerankConfig(lambda_weight=0.0))
    assert all(sel.chosen_rank == 1 for sel in selections)

    selections = rerank_corpus(records, ec_scores, RerankConfig(lambda_weight=1.0))
    for rec, sel in zip(records, selections):
        vec = ec_scores[rec.utt_id].scores
        expected = max(range(len(vec)), key=lambda i: (vec[i], -i)) + 1
        assert sel.chosen_rank == expected

    for lam in (0.0, 0.3, 0.5, 0.7, 1.0):
        config = RerankConfig(lambda_weight=lam)
        baseline = rerank_corpus(records, ec_scores, config)
        assert all(sel.chosen_text in rec.nbest.texts for rec, sel in zip(records, baseline))
        shifted_scores = {
            uid: ScoreVector(uid, vec.scorer_id, tuple(s + 7.3 for s in vec.scores))
            for uid, vec in ec_scores.items()
        }
        shifted = rerank_corpus(records, shifted_scores, config)
        assert all(a.chosen_rank == b.chosen_rank for a, b in zip(baseline, shifted))

    _report(2, "interpolation-boundary-identities", "500 utterances, 5 lambdas")


def test_criterion_3_contains_in_top_monotone():
    configs = [
        SynthChannelConfig(seed=s, **ACCEPTANCE_CHANNEL) for s in (1, 2, 3)
    ] + [
        SynthChannelConfig(seed=4, char_sub_rate=0.12, char_del_rate=0.05, char_ins_rate=0.05, n_best_size=10),
        SynthChannelConfig(seed=5, char_sub_rate=0.0, char_del_rate=0.0, char_ins_rate=0.0, n_best_size=10),
    ]
    for i, cfg in enumerate(configs):
        records = synth(make_sentences(200, seed=60 + i), cfg)
        curve = oracle_curves(records, 10)
        for n in range(1, 10):
            assert curve.contains_in_top[n] >= curve.contains_in_top[n - 1]
    _report(3, "oracle-curve-monotone", f"{len(configs)} generated dumps, n=1..10")


def test_criterion_4_calibration_diagonal():
    start = time.perf_counter()
    rng = random.Random(77)
    records = []
    words_per_utt = 25
    total_words = 75_000  # ~15k words per bin in expectation
    for utt in range(total_words // words_per_utt):
        ref_words, hyp_words, token_probs = [], [], []
        for i in range(words_per_utt):
            conf = rng.random()
            correct = rng.random() < conf
            ref_words.append(f"w{i}")
            hyp_words.append(f"w{i}" if correct else f"bad{i}")
            token_probs.append((hyp_words[-1] if i == 0 else " " + hyp_words[-1], conf))
        records.append(
            UtteranceRecord(
                utt_id=f"cal{utt}",
                nbest=NBestList(
                    hypotheses=(
                        Hypothesis(
                            text=" ".join(hyp_words),
                            asr_logprob=-1.0,
                            token_probs=tuple(token_probs),
                        ),
                    ),
                    order_tag="sorted",
                ),
                reference=" ".join(ref_words),
                source_tag="bernoulli",
            )
        )
    table = calibration_report(records, num_bins=5)
    for b in table.bins:
        assert b.word_count >= 10_000
        assert abs(b.mean_confidence - b.empirical_accuracy) < 0.05
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    gaps = ", ".join(f"{abs(b.mean_confidence - b.empirical_accuracy):.4f}" for b in table.bins)
    _report(4, "calibration-diagonal", f"gaps {gaps}, {elapsed:.1f}s")


def test_criterion_5_directional_adaptation(synthetic_500):
    start = time.perf_counter()
    records, _ = synthetic_500
    train_sentences = make_sentences(800, seed=777)
    model = train([normalize(s) for s in train_sentences], order=3)
    scores = {
        rec.utt_id: ScoreVector(
            utt_id=rec.utt_id,
            scorer_id="ngram-lm",
            scores=tuple(lm_mod.score(model, normalize(t)) for t in rec.nbest.texts),
        )
        for rec in records
    }
    dev, test = split_dev_test(records)
    sweep = sweep_lambda(dev, scores)
    lam = best_lambda(sweep)
    selections = rerank_corpus(test, scores, RerankConfig(lambda_weight=lam))
    rescored = corpus_wer_of_selections(test, selections)
    baseline = corpus_breakdown(test, top_hypothesis)
    oracle = corpus_breakdown(test, oracle_selector())

    assert rescored.wer < baseline.wer  # strictly below
    reduction = 1.0 - rescored.wer / baseline.wer
    assert reduction >= 0.10
    assert rescored.wer >= oracle.wer
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _report(
        5,
        "directional-adaptation",
        f"lambda* {lam:.1f}, baseline {baseline.wer:.4f} -> rescored {rescored.wer:.4f} "
        f"(-{reduction:.1%}), oracle {oracle.wer:.4f}, {elapsed:.1f}s",
    )


def test_criterion_6_lm_identities():
    # every predictable symbol observed exactly twice -> exactly uniform
    corpus = ["a b c d q1", "a b c d q2"]
    model = train(corpus, order=1)
    assert model.vocab_size == 6
    ppl = perplexity(model, ["b a", "c d q3"])
    assert ppl == pytest.approx(6.0, rel=1e-12)

    sentences = make_sentences(80, seed=90)
    model3 = train(sentences, order=3)
    rng = random.Random(91)
    vocab = sorted(model3.vocab)
    seen_contexts = [ctx for level in model3._counts[1:] for ctx in level]
    contexts = [seen_contexts[rng.randrange(len(seen_contexts))] for _ in range(100)]
    worst = 0.0
    for ctx in contexts:
        total = math.fsum(model3.prob(w, ctx) for w in vocab)
        worst = max(worst, abs(total - 1.0))
    assert worst < 1e-9
    _report(6, "lm-identities", f"uniform ppl {ppl:.12f}, worst |sum-1| {worst:.2e}")


def test_criterion_7_ablation_invariants():
    records = synth(make_sentences(50, seed=95), SynthChannelConfig(seed=95, **ACCEPTANCE_CHANNEL))
    import collections

    for rec in records:
        assert ablate(ablate(rec.nbest, "reversed"), "reversed") == rec.nbest
        shuffled = ablate(rec.nbest, "randomized", seed=13)
        assert shuffled == ablate(rec.nbest, "randomized", seed=13)
        assert collections.Counter(shuffled.texts) == collections.Counter(rec.nbest.texts)
        assert collections.Counter(h.asr_logprob for h in shuffled) == collections.Counter(
            h.asr_logprob for h in rec.nbest
        )
        top1 = ablate(rec.nbest, "truncate", k=1)
        assert top1.texts == [rec.nbest[0].text]
    _report(7, "ablation-invariants", f"{len(records)} lists")


def test_criterion_8_normalization_idempotence_100k():
    rng = random.Random(314159)
    violations = 0
    checked = 0
    for _ in range(100_000):
        length = rng.randint(0, 24)
        chars = []
        while len(chars) < length:
            cp = rng.randrange(0x110000)
            if 0xD800 <= cp <= 0xDFFF:  # surrogates cannot round-trip
                continue
            chars.append(chr(cp))
        text = "".join(chars)
        once = normalize(text)
        if normalize(once) != once:
            violations += 1
        checked += 1
    assert checked == 100_000
    assert violations == 0
    _report(8, "normalization-idempotence", f"{checked} strings, {violations} violations")


def test_criterion_9_demo_determinism(tmp_path):
    corpus_path = tmp_path / "train.txt"
    corpus_path.write_text("\n".join(make_sentences(150, seed=55)) + "\n", encoding="utf-8")
    dump_path = tmp_path / "test.dump"
    records = synth(make_sentences(120, seed=56), SynthChannelConfig(seed=2, **ACCEPTANCE_CHANNEL))
    write_dump(records, dump_path)

    outputs = []
    for threads in (1, 4, 8):
        for repeat in (0, 1):
            report = tmp_path / f"report-{threads}-{repeat}.txt"
            csv = tmp_path / f"report-{threads}-{repeat}.csv"
            proc = subprocess.run(
                [
                    sys.executable, "-m", "nbestfix", "--threads", str(threads), "--seed", "7",
                    "demo", "--train", str(corpus_path), "--test", str(dump_path),
                    "--grid", "0.0,0.2,0.4,0.6,0.8,1.0",
                    "--out", str(report), "--csv", str(csv),
                ],
                capture_output=True,
                timeout=300,
            )
            assert proc.returncode == 0, proc.stderr.decode()
            outputs.append(report.read_bytes() + b"--" + csv.read_bytes())
    assert all(o == outputs[0] for o in outputs[1:])
    _report(9, "demo-determinism", "byte-identical across 2 runs x threads 1/4/8")
