"""Protocol loop: line-delimited JSON requests on stdin, responses on stdout.

Wire format (one object per line):

    request:  {"utt_id": str, "task": "score"|"generate",
               "candidates": [str]|null, "context": str,
               "n_best_texts": [str], "phones": [str]|null,
               "word_confidences": [[float]]|null}
    response: {"utt_id": str, "scores": [float]|null, "corrected": str|null}

Responses are emitted in request order.  A request the model cannot serve
(empty candidates, missing texts, unknown task) gets an error response with
both payload fields null and an ``error`` message, keeping the stream
aligned.  Input that cannot be parsed at all ends the process with exit
status 2.  Phones and word confidences are accepted and ignored.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from .model import ToyCorrectorModel


def handle_request(model: ToyCorrectorModel, obj: dict) -> dict:
    utt_id = obj["utt_id"]
    task = obj["task"]
    scores = None
    corrected = None
    error = None
    if task == "score":
        candidates = obj.get("candidates")
        texts = obj.get("n_best_texts") or []
        if not candidates or not isinstance(candidates, list):
            error = "score task requires non-empty candidates"
        else:
            observed = str(texts[0]) if texts else str(candidates[0])
            scores = [model.score_sentence(str(c), observed) for c in candidates]
    elif task == "generate":
        texts = obj.get("n_best_texts") or []
        source = str(texts[0]) if texts else str(obj.get("context") or "")
        if not source:
            error = "generate task requires n_best_texts or context"
        else:
            corrected = model.correct_sentence(source) or source
    else:
        error = f"unknown task {task!r}"
    resp = {"utt_id": utt_id, "scores": scores, "corrected": corrected}
    if error is not None:
        resp["error"] = error
    return resp


def serve(model: ToyCorrectorModel, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    fin = stdin if stdin is not None else sys.stdin
    fout = stdout if stdout is not None else sys.stdout
    for raw in fin:
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                return 2
            resp = handle_request(model, obj)
        except (json.JSONDecodeError, KeyError, TypeError):
            return 2
        fout.write(json.dumps(resp, ensure_ascii=False, allow_nan=False, separators=(",", ":")))
        fout.write("\n")
        fout.flush()
    return 0
