"""End-to-end orchestration: corpus scoring through a plugin, lambda sweeps,
and the adaptation demo (baseline vs LM-rescored vs oracle).

The demo is the desk-scale analog of the adaptation workflow: train an
n-gram LM on in-domain text, obtain external scores for every hypothesis
through the plugin bridge, sweep the interpolation weight on a deterministic
dev split, and report dev/test WER for the 1-best baseline, the reranked
output at the chosen weight, and the in-list oracle.  Reports are plain
text plus CSV and are byte-identical across reruns and thread counts.
"""

from __future__ import annotations

import hashlib
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from . import lm as lm_mod
from .bridge import PluginClient, score_records
from .datamodel import ScoreVector, UtteranceRecord
from .errors import StageError
from .metrics import (
    CorpusWer,
    corpus_breakdown,
    oracle_selector,
    top_hypothesis,
    utterance_breakdown,
)
from .rerank import CONSTRAINED, RerankConfig, Selection, rerank_constrained
from .textnorm import DEFAULT_RULES, NormRules, normalize

T = TypeVar("T")
U = TypeVar("U")

DEFAULT_LAMBDA_GRID = tuple(i / 10 for i in range(11))


def map_records(fn: Callable[[T], U], items: Sequence[T], threads: int = 1) -> list[U]:
    """Order-preserving map, optionally on a thread pool.

    Results are reduced in input order afterwards, so aggregates do not
    depend on scheduling.
    """
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def split_dev_test(
    records: Sequence[UtteranceRecord],
) -> tuple[list[UtteranceRecord], list[UtteranceRecord]]:
    """Deterministic 50/50 split on a stable hash of the utterance id."""
    dev: list[UtteranceRecord] = []
    test: list[UtteranceRecord] = []
    for rec in records:
        digest = hashlib.sha1(rec.utt_id.encode("utf-8")).digest()
        (dev if digest[0] % 2 == 0 else test).append(rec)
    return dev, test


def rerank_corpus(
    records: Sequence[UtteranceRecord],
    scores_by_id: dict[str, ScoreVector],
    config: RerankConfig,
    threads: int = 1,
) -> list[Selection]:
    """Constrained selection for every record; missing scores are an error."""
    missing = [rec.utt_id for rec in records if rec.utt_id not in scores_by_id]
    if missing:
        raise StageError("rerank", f"no scores for utt_id {missing[0]!r} (+{len(missing) - 1} more)")

    def one(rec: UtteranceRecord) -> Selection:
        return rerank_constrained(rec.nbest, scores_by_id[rec.utt_id], config)

    return map_records(one, records, threads)


def corpus_wer_of_selections(
    records: Sequence[UtteranceRecord],
    selections: Sequence[Selection],
    rules: NormRules = DEFAULT_RULES,
    threads: int = 1,
) -> CorpusWer:
    chosen = {sel.utt_id: sel.chosen_text for sel in selections}

    def one(rec: UtteranceRecord):
        return utterance_breakdown(rec, lambda r: chosen[r.utt_id], rules)

    breakdowns = map_records(one, records, threads)
    return corpus_breakdown(records, breakdowns=breakdowns, rules=rules)


def sweep_lambda(
    records: Sequence[UtteranceRecord],
    scores_by_id: dict[str, ScoreVector],
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    rules: NormRules = DEFAULT_RULES,
    length_norm: bool = False,
    threads: int = 1,
) -> list[tuple[float, float]]:
    """Corpus WER of constrained selection at every grid weight."""
    if not grid:
        raise ValueError("empty lambda grid")
    out: list[tuple[float, float]] = []
    for lam in grid:
        config = RerankConfig(lambda_weight=lam, mode=CONSTRAINED, length_norm=length_norm)
        selections = rerank_corpus(records, scores_by_id, config, threads)
        out.append((lam, corpus_wer_of_selections(records, selections, rules, threads).wer))
    return out


def best_lambda(sweep: Sequence[tuple[float, float]]) -> float:
    """Grid weight minimizing WER; first entry wins ties."""
    best_lam, best_wer = sweep[0]
    for lam, wer_value in sweep[1:]:
        if wer_value < best_wer:
            best_lam, best_wer = lam, wer_value
    return best_lam


@dataclass(frozen=True)
class SplitResult:
    name: str
    utterances: int
    baseline_wer: float
    rescored_wer: float
    oracle_wer: float


@dataclass(frozen=True)
class DemoReport:
    lm_order: int
    scorer_id: str
    chosen_lambda: float
    sweep: tuple[tuple[float, float], ...]
    dev: SplitResult
    test: SplitResult

    @property
    def ordering_ok(self) -> bool:
        """oracle <= rescored <= baseline on both splits."""
        return all(
            s.oracle_wer <= s.rescored_wer <= s.baseline_wer for s in (self.dev, self.test)
        )

    @property
    def test_relative_reduction(self) -> float:
        if self.test.baseline_wer == 0.0:
            return 0.0
        return 1.0 - self.test.rescored_wer / self.test.baseline_wer

    def format_text(self) -> str:
        lines = [
            f"adaptation demo  (lm order {self.lm_order}, scorer {self.scorer_id}, "
            f"lambda* {self.chosen_lambda:.2f})",
            "",
            f"{'method':<12}{'dev':>10}{'test':>10}",
        ]
        rows = [
            ("baseline", self.dev.baseline_wer, self.test.baseline_wer),
            ("rescored", self.dev.rescored_wer, self.test.rescored_wer),
            ("oracle", self.dev.oracle_wer, self.test.oracle_wer),
        ]
        for name, dev_val, test_val in rows:
            lines.append(f"{name:<12}{dev_val:>10.6f}{test_val:>10.6f}")
        lines.append("")
        lines.append(f"utterances: dev {self.dev.utterances}, test {self.test.utterances}")
        lines.append("lambda sweep (dev):")
        for lam, wer_value in self.sweep:
            lines.append(f"  lambda {lam:.2f}  wer {wer_value:.6f}")
        lines.append(f"ordering oracle<=rescored<=baseline: {'ok' if self.ordering_ok else 'VIOLATED'}")
        lines.append(f"test relative reduction vs baseline: {self.test_relative_reduction:.4f}")
        return "\n".join(lines) + "\n"

    def format_csv(self) -> str:
        lines = ["split,method,wer"]
        for split in (self.dev, self.test):
            lines.append(f"{split.name},baseline,{split.baseline_wer:.6f}")
            lines.append(f"{split.name},rescored,{split.rescored_wer:.6f}")
            lines.append(f"{split.name},oracle,{split.oracle_wer:.6f}")
        for lam, wer_value in self.sweep:
            lines.append(f"dev,sweep@{lam:.2f},{wer_value:.6f}")
        return "\n".join(lines) + "\n"


def lm_plugin_command(model_path: str | Path) -> list[str]:
    """Command line that serves a saved LM over the plugin protocol."""
    return [sys.executable, "-m", "nbestfix", "plugin", "serve-lm", "--model", str(model_path)]


def run_adaptation_demo(
    train_corpus: Sequence[str],
    test_records: Sequence[UtteranceRecord],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    *,
    order: int = 3,
    scorer_cmd: str | Sequence[str] | None = None,
    rules: NormRules = DEFAULT_RULES,
    threads: int = 1,
) -> DemoReport:
    """Train, score, sweep, and evaluate; see the module docstring.

    With no ``scorer_cmd`` the in-repo LM is served as a subprocess plugin,
    so the demo exercises the full external-scorer path by default.  Any
    sub-step failure propagates as :class:`StageError` with the stage name.
    The in-list oracle can never be beaten by a constrained selection; that
    invariant is checked here and a violation reported as a hard error.
    """
    try:
        model = lm_mod.train([normalize(s, rules) for s in train_corpus], order=order)
    except ValueError as exc:
        raise StageError("train-lm", str(exc)) from exc

    scorer_id = "ngram-lm"
    with tempfile.TemporaryDirectory(prefix="nbestfix-demo-") as tmp:
        if scorer_cmd is None:
            model_path = Path(tmp) / "demo.nglm"
            model.save(model_path)
            cmd: str | Sequence[str] = lm_plugin_command(model_path)
        else:
            cmd = scorer_cmd
            scorer_id = "custom"
        try:
            with PluginClient(cmd) as client:
                scores_by_id = score_records(client, list(test_records), scorer_id=scorer_id)
        except Exception as exc:
            raise StageError("score", str(exc)) from exc

    dev, test = split_dev_test(test_records)
    if not dev or not test:
        raise StageError("split", "dev/test split left an empty side; need more utterances")

    try:
        sweep = sweep_lambda(dev, scores_by_id, lambda_grid, rules, threads=threads)
    except Exception as exc:
        raise StageError("sweep", str(exc)) from exc
    lam = best_lambda(sweep)

    def evaluate(name: str, records: Sequence[UtteranceRecord]) -> SplitResult:
        baseline = corpus_breakdown(
            records,
            breakdowns=map_records(
                lambda r: utterance_breakdown(r, top_hypothesis, rules), records, threads
            ),
            rules=rules,
        )
        config = RerankConfig(lambda_weight=lam, mode=CONSTRAINED)
        selections = rerank_corpus(records, scores_by_id, config, threads)
        rescored = corpus_wer_of_selections(records, selections, rules, threads)
        oracle = corpus_breakdown(
            records,
            breakdowns=map_records(
                lambda r: utterance_breakdown(r, oracle_selector(rules), rules), records, threads
            ),
            rules=rules,
        )
        if oracle.wer > rescored.wer:
            raise StageError("evaluate", f"{name}: oracle WER above reranked WER (bug)")
        return SplitResult(
            name=name,
            utterances=len(records),
            baseline_wer=baseline.wer,
            rescored_wer=rescored.wer,
            oracle_wer=oracle.wer,
        )

    try:
        dev_result = evaluate("dev", dev)
        test_result = evaluate("test", test)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("evaluate", str(exc)) from exc

    return DemoReport(
        lm_order=order,
        scorer_id=scorer_id,
        chosen_lambda=lam,
        sweep=tuple(sweep),
        dev=dev_result,
        test=test_result,
    )
