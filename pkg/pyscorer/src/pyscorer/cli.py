"""pyscorer command line: fit a corrector from dump files, serve it as a plugin."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .model import ToyCorrectorModel, fit
from .serve import serve


def read_training_pairs(paths: list[str]) -> list[tuple[str, str]]:
    """Extract (1-best hypothesis, reference) pairs from dump-format files.

    One JSON object per line with ``reference`` and ``nbest`` keys; records
    without a reference or hypotheses are skipped.
    """
    pairs: list[tuple[str, str]] = []
    for path in paths:
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                reference = obj.get("reference")
                nbest = obj.get("nbest") or []
            except (json.JSONDecodeError, AttributeError) as exc:
                raise ValueError(f"{path}:{line_no}: not a dump record: {exc}") from exc
            if not reference or not nbest:
                continue
            pairs.append((str(nbest[0].get("text", "")), str(reference)))
    return pairs


def cmd_fit(args: argparse.Namespace) -> int:
    pairs = read_training_pairs(args.dumps)
    if not pairs:
        sys.stderr.write("no usable (hypothesis, reference) pairs in the given dumps\n")
        return 2
    model = fit(pairs)
    model.save(args.out)
    sys.stdout.write(
        f"fit on {len(pairs)} pairs: {len(model.prior)} prior words, "
        f"{len(model.confusion)} confusion rows, char_err {model.char_err:.4f}\n"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    model = ToyCorrectorModel.load(args.model)
    return serve(model)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyscorer",
        description="Toy noisy-channel corrector speaking the nbestfix plugin protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="learn a corrector from dump-format training files")
    p.add_argument("--dump", action="append", required=True, dest="dumps", metavar="PATH")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("serve", help="answer protocol requests on stdin until it closes")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
