"""Command-line surface wiring all modules together.

Commands: eval, rerank, rescore, oracle, calibrate, ablate, lm train|ppl,
synth, demo, plugin check|serve-lm.  Every command exits 0 on success and
nonzero on any validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bridge, confidence, lm as lm_mod, metrics, pipeline, rerank, synth as synth_mod
from .datamodel import (
    Hypothesis,
    NBestList,
    ScoreVector,
    UtteranceRecord,
    load_dump,
    load_scores,
    record_to_line,
    validate,
    write_dump,
    write_scores,
)
from .errors import NbestfixError
from .textnorm import DEFAULT_RULES, RAW_RULES, NormRules, load_rules, normalize

SCORER_CMD_ENV = "NBF_SCORER_CMD"


def _rules_from_args(args: argparse.Namespace) -> NormRules:
    if getattr(args, "no_norm", False):
        return RAW_RULES
    if getattr(args, "norm_rules", None):
        return load_rules(args.norm_rules)
    return DEFAULT_RULES


def _scorer_cmd(args: argparse.Namespace) -> str | None:
    return getattr(args, "scorer_cmd", None) or os.environ.get(SCORER_CMD_ENV)


def _read_sentences(path: str) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(row):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
    return "\n".join([fmt(headers)] + [fmt(r) for r in rows]) + "\n"


def cmd_eval(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    records = load_dump(args.dump)
    report = validate(records)
    if not report.ok:
        sys.stderr.write(report.format_text() + "\n")
        return 1
    selector = metrics.rank_selector(args.rank)
    groups: dict[str, list[UtteranceRecord]] = {}
    for rec in records:
        groups.setdefault(rec.source_tag, []).append(rec)
    rows = []
    csv_lines = ["source,utts,ref_words,sub,ins,del,wer,skipped"]
    ordered = sorted(groups) + (["(all)"] if len(groups) > 1 else [])
    for tag in ordered:
        recs = records if tag == "(all)" else groups[tag]
        breakdowns = pipeline.map_records(
            lambda r: metrics.utterance_breakdown(r, selector, rules), recs, args.threads
        )
        cw = metrics.corpus_breakdown(recs, breakdowns=breakdowns, rules=rules)
        label = tag if tag else "(untagged)"
        rows.append(
            [
                label,
                str(cw.utterances),
                str(cw.ref_len),
                str(cw.substitutions),
                str(cw.insertions),
                str(cw.deletions),
                f"{cw.wer:.6f}",
                str(cw.skipped),
            ]
        )
        csv_lines.append(
            f"{label},{cw.utterances},{cw.ref_len},{cw.substitutions},"
            f"{cw.insertions},{cw.deletions},{cw.wer:.6f},{cw.skipped}"
        )
    sys.stdout.write(
        _format_table(["source", "utts", "ref_words", "sub", "ins", "del", "wer", "skipped"], rows)
    )
    if args.csv:
        sys.stdout.write("\n".join(csv_lines) + "\n")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    records = load_dump(args.dump)
    curve = metrics.oracle_curves(records, args.max_n, rules)
    lines = ["n,match_at_rank,contains_in_top"]
    for n in range(curve.max_n):
        lines.append(f"{n + 1},{curve.match_at_rank[n]:.6f},{curve.contains_in_top[n]:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    records = load_dump(args.dump)
    table = confidence.calibration_report(records, rules, args.bins)
    sys.stdout.write(table.format_csv())
    if table.skipped_utterances:
        sys.stderr.write(f"skipped {table.skipped_utterances} utterance(s) without usable confidences\n")
    return 0


def _selection_record(rec: UtteranceRecord, sel: rerank.Selection) -> UtteranceRecord:
    if sel.chosen_rank is not None:
        hyp = rec.nbest[sel.chosen_rank - 1]
    else:
        # Out-of-list correction: no ASR score exists for this text.
        hyp = Hypothesis(text=sel.chosen_text, asr_logprob=0.0)
    return UtteranceRecord(
        utt_id=rec.utt_id,
        nbest=NBestList(hypotheses=(hyp,), order_tag="unknown"),
        reference=rec.reference,
        source_tag=rec.source_tag,
    )


def _emit_selections(
    records: list[UtteranceRecord],
    selections: list[rerank.Selection],
    rules: NormRules,
    out_path: str | None,
    threads: int,
) -> None:
    out_records = [_selection_record(rec, sel) for rec, sel in zip(records, selections)]
    if out_path:
        write_dump(out_records, out_path)
    else:
        for rec in out_records:
            sys.stdout.write(record_to_line(rec) + "\n")
    with_refs = [rec for rec in records if rec.reference is not None]
    if len(with_refs) == len(records) and records:
        cw = pipeline.corpus_wer_of_selections(records, selections, rules, threads)
        in_list = sum(1 for sel in selections if sel.in_list)
        sys.stderr.write(
            f"selected {len(selections)} utterances  wer {cw.wer:.6f}  "
            f"in-list {in_list}/{len(selections)}\n"
        )


def cmd_rerank(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    records = load_dump(args.dump)
    scorer_cmd = _scorer_cmd(args)
    mode = "constrained" if args.mode == "constrained" else "unconstrained"

    if mode == "unconstrained":
        if not scorer_cmd:
            sys.stderr.write("unconstrained mode needs --scorer-cmd (or NBF_SCORER_CMD)\n")
            return 2
        with bridge.PluginClient(scorer_cmd) as client:
            requests = [bridge.request_for_record(rec, bridge.TASK_GENERATE) for rec in records]
            responses = client.score_batch(requests)
        selections = [
            rerank.select_unconstrained(rec.nbest, resp.corrected or "", utt_id=rec.utt_id, rules=rules)
            for rec, resp in zip(records, responses)
        ]
        _emit_selections(records, selections, rules, args.out, args.threads)
        return 0

    if args.scores:
        scores_by_id = load_scores(args.scores)
    elif scorer_cmd:
        with bridge.PluginClient(scorer_cmd) as client:
            scores_by_id = bridge.score_records(client, records)
    else:
        sys.stderr.write("constrained mode needs --scores or --scorer-cmd\n")
        return 2

    if args.sweep:
        sweep = pipeline.sweep_lambda(
            records, scores_by_id, rules=rules, length_norm=args.length_norm, threads=args.threads
        )
        for lam, wer_value in sweep:
            sys.stdout.write(f"lambda {lam:.2f}  wer {wer_value:.6f}\n")
        lam = pipeline.best_lambda(sweep)
        sys.stdout.write(f"best lambda {lam:.2f}\n")
    else:
        lam = args.lambda_weight

    config = rerank.RerankConfig(lambda_weight=lam, mode="constrained", length_norm=args.length_norm)
    selections = pipeline.rerank_corpus(records, scores_by_id, config, args.threads)
    _emit_selections(records, selections, rules, args.out, args.threads)
    return 0


def cmd_rescore(args: argparse.Namespace) -> int:
    """Constrained rerank with the in-repo LM scored in-process."""
    rules = _rules_from_args(args)
    records = load_dump(args.dump)
    model = lm_mod.NgramModel.load(args.lm)
    scores_by_id = {
        rec.utt_id: ScoreVector(
            utt_id=rec.utt_id,
            scorer_id="ngram-lm",
            scores=tuple(lm_mod.score(model, normalize(t, rules)) for t in rec.nbest.texts),
        )
        for rec in records
    }
    if args.scores_out:
        write_scores(list(scores_by_id.values()), args.scores_out)
    if args.sweep:
        sweep = pipeline.sweep_lambda(
            records, scores_by_id, rules=rules, length_norm=args.length_norm, threads=args.threads
        )
        for lam, wer_value in sweep:
            sys.stdout.write(f"lambda {lam:.2f}  wer {wer_value:.6f}\n")
        lam = pipeline.best_lambda(sweep)
        sys.stdout.write(f"best lambda {lam:.2f}\n")
    else:
        lam = args.lambda_weight
    config = rerank.RerankConfig(lambda_weight=lam, mode="constrained", length_norm=args.length_norm)
    selections = pipeline.rerank_corpus(records, scores_by_id, config, args.threads)
    _emit_selections(records, selections, rules, args.out, args.threads)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    records = load_dump(args.dump)
    out = [
        UtteranceRecord(
            utt_id=rec.utt_id,
            nbest=rerank.ablate(rec.nbest, args.mode, seed=args.seed, k=args.k),
            reference=rec.reference,
            source_tag=rec.source_tag,
        )
        for rec in records
    ]
    write_dump(out, args.out)
    return 0


def cmd_lm_train(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    sentences = [normalize(s, rules) for s in _read_sentences(args.infile)]
    model = lm_mod.train(sentences, order=args.order, min_count=args.min_count)
    model.save(args.out)
    sys.stdout.write(
        f"trained order-{model.order} model: vocab {model.vocab_size} "
        f"(incl unk/eos), saved to {args.out}\n"
    )
    return 0


def cmd_lm_ppl(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    model = lm_mod.NgramModel.load(args.model)
    sentences = [normalize(s, rules) for s in _read_sentences(args.infile)]
    ppl = lm_mod.perplexity(model, sentences)
    sys.stdout.write(f"perplexity {ppl:.6f} over {len(sentences)} sentence(s)\n")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    sentences = [normalize(s, rules) for s in _read_sentences(args.infile)]
    config = synth_mod.SynthChannelConfig(
        seed=args.seed if args.seed is not None else 0,
        char_sub_rate=args.sub_rate,
        char_del_rate=args.del_rate,
        char_ins_rate=args.ins_rate,
        n_best_size=args.n_best,
        temperature=args.temperature,
    )
    records = synth_mod.synth(sentences, config)
    write_dump(records, args.out)
    sys.stdout.write(f"wrote {len(records)} records to {args.out}\n")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    rules = _rules_from_args(args)
    train_sentences = _read_sentences(args.train)
    records = load_dump(args.test)
    grid = pipeline.DEFAULT_LAMBDA_GRID
    if args.grid:
        grid = tuple(float(x) for x in args.grid.split(","))
    report = pipeline.run_adaptation_demo(
        train_sentences,
        records,
        grid,
        order=args.order,
        scorer_cmd=_scorer_cmd(args),
        rules=rules,
        threads=args.threads,
    )
    text = report.format_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(report.format_csv(), encoding="utf-8")
    return 0


def cmd_plugin_check(args: argparse.Namespace) -> int:
    scorer_cmd = _scorer_cmd(args)
    if not scorer_cmd:
        sys.stderr.write("plugin check needs --scorer-cmd (or NBF_SCORER_CMD)\n")
        return 2
    with bridge.PluginClient(scorer_cmd, timeout=args.timeout) as client:
        report = bridge.conformance_check(client)
    sys.stdout.write(report.format_text())
    return 0 if report.all_passed else 1


def cmd_plugin_serve_lm(args: argparse.Namespace) -> int:
    rules = RAW_RULES if args.no_norm else DEFAULT_RULES
    model = lm_mod.NgramModel.load(args.model)
    return bridge.serve_lm(model, rules)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbestfix",
        description="Evaluate, calibrate, rescore and rerank ASR N-best lists.",
    )
    parser.add_argument("--norm-rules", metavar="PATH", help="JSON normalization ruleset")
    parser.add_argument("--no-norm", action="store_true", help="compare text verbatim")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for corpus loops")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized operations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="corpus WER breakdown by source tag")
    p.add_argument("--dump", required=True)
    p.add_argument("--rank", type=int, default=1, help="hypothesis rank to evaluate (1-based)")
    p.add_argument("--csv", action="store_true", help="also print machine-readable lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="rank-match and top-n containment curves")
    p.add_argument("--dump", required=True)
    p.add_argument("--max-n", type=int, default=10, dest="max_n")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("calibrate", help="confidence calibration table")
    p.add_argument("--dump", required=True)
    p.add_argument("--bins", type=int, default=5)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rerank", help="select hypotheses by interpolated score")
    p.add_argument("--dump", required=True)
    p.add_argument("--lambda", type=float, default=0.5, dest="lambda_weight")
    p.add_argument("--mode", choices=["constrained", "uncon"], default="constrained")
    p.add_argument("--scores", help="score-vector file (constrained mode)")
    p.add_argument("--scorer-cmd", dest="scorer_cmd", help="plugin command")
    p.add_argument("--sweep", action="store_true", help="sweep the lambda grid, keep the best")
    p.add_argument("--length-norm", action="store_true", dest="length_norm")
    p.add_argument("--out", help="write selections as a dump here instead of stdout")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("rescore", help="constrained rerank with the in-repo n-gram LM")
    p.add_argument("--dump", required=True)
    p.add_argument("--lm", required=True, help="trained model file")
    p.add_argument("--lambda", type=float, default=0.5, dest="lambda_weight")
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--length-norm", action="store_true", dest="length_norm")
    p.add_argument("--scores-out", dest="scores_out", help="also write the LM score vectors here")
    p.add_argument("--out", help="write selections as a dump here instead of stdout")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("ablate", help="disturb n-best lists (Table-5 style)")
    p.add_argument("--dump", required=True)
    p.add_argument("--mode", choices=["sorted", "randomized", "reversed", "truncate"], required=True)
    p.add_argument("--k", type=int, help="kept list size for truncate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p_lm = sub.add_parser("lm", help="n-gram language model")
    lm_sub = p_lm.add_subparsers(dest="lm_command", required=True)
    p = lm_sub.add_parser("train", help="train and save a model")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--min-count", type=int, default=2, dest="min_count")
    p.add_argument("--in", required=True, dest="infile", help="one sentence per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_train)
    p = lm_sub.add_parser("ppl", help="perplexity of a text file under a model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", required=True, dest="infile")
    p.set_defaults(func=cmd_lm_ppl)

    p = sub.add_parser("synth", help="generate a synthetic-channel dump")
    p.add_argument("--in", required=True, dest="infile", help="clean sentences, one per line")
    p.add_argument("--out", required=True)
    p.add_argument("--n-best", type=int, default=10, dest="n_best")
    p.add_argument("--sub-rate", type=float, default=0.05, dest="sub_rate")
    p.add_argument("--del-rate", type=float, default=0.02, dest="del_rate")
    p.add_argument("--ins-rate", type=float, default=0.02, dest="ins_rate")
    p.add_argument("--temperature", type=float, default=5.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("demo", help="baseline vs rescored vs oracle, end to end")
    p.add_argument("--train", required=True, help="in-domain text, one sentence per line")
    p.add_argument("--test", required=True, help="dump to adapt on")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--grid", help="comma-separated lambda grid")
    p.add_argument("--scorer-cmd", dest="scorer_cmd")
    p.add_argument("--out", help="write the text report here as well")
    p.add_argument("--csv", help="write the CSV report here")
    p.set_defaults(func=cmd_demo)

    p_plugin = sub.add_parser("plugin", help="scorer plugin utilities")
    plug_sub = p_plugin.add_subparsers(dest="plugin_command", required=True)
    p = plug_sub.add_parser("check", help="run the 12-case conformance handshake")
    p.add_argument("--scorer-cmd", dest="scorer_cmd")
    p.add_argument("--timeout", type=float, default=bridge.DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_plugin_check)
    p = plug_sub.add_parser("serve-lm", help="serve a saved n-gram LM over the plugin protocol")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_plugin_serve_lm)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NbestfixError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
