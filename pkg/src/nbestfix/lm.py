"""Count-based n-gram language model with Witten-Bell interpolation.

The model is the toolkit's self-contained rescoring LM: proper probabilities
(every conditional distribution sums to 1 and has full support over the
predictable vocabulary), deterministic training, and a versioned on-disk
format.  Rare words (raw count below ``min_count``) are mapped to an unknown
marker at training time so held-out text always scores finite.

Witten-Bell interpolation, for a context ``c`` of order k-1:

    P(w | c) = (count(c, w) + T(c) * P(w | c')) / (count(c) + T(c))

where ``T(c)`` is the number of distinct types seen after ``c`` and ``c'``
drops the oldest context word.  The unigram base case interpolates with the
uniform distribution over the predictable vocabulary (words + unk + eos).
Contexts never seen in training fall through to the next lower order.
"""

from __future__ import annotations

import json
import math
import zlib
from pathlib import Path
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
_MARKERS = (BOS, EOS, UNK)

MAGIC = b"NGLM1"
FORMAT_VERSION = 1


class NgramModel:
    """Immutable after training; safe for concurrent scoring."""

    def __init__(
        self,
        order: int,
        min_count: int,
        lexicon: frozenset[str],
        counts: list[dict[tuple[str, ...], dict[str, int]]],
    ):
        self.order = order
        self.min_count = min_count
        self.lexicon = lexicon  # in-vocabulary surface words (markers excluded)
        self._counts = counts  # counts[k-1]: context (len k-1) -> {word: count}
        self._totals = [
            {ctx: sum(row.values()) for ctx, row in level.items()} for level in counts
        ]

    @property
    def vocab(self) -> frozenset[str]:
        """Predictable vocabulary: lexicon plus unk and eos (bos excluded)."""
        return self.lexicon | {UNK, EOS}

    @property
    def vocab_size(self) -> int:
        return len(self.lexicon) + 2

    def map_token(self, word: str) -> str:
        """Map a surface word to its in-vocabulary form (unk when unseen)."""
        return word if word in self.lexicon else UNK

    def prob(self, word: str, context: Sequence[str] = ()) -> float:
        """Smoothed P(word | context); context words must be mapped already."""
        ctx = tuple(context)[max(0, len(context) - (self.order - 1)):]
        return self._wb(word, ctx)

    def _wb(self, word: str, ctx: tuple[str, ...]) -> float:
        if not ctx:
            row = self._counts[0][()]
            total = self._totals[0][()]
            types = len(row)
            uniform = 1.0 / self.vocab_size
            return (row.get(word, 0) + types * uniform) / (total + types)
        level = self._counts[len(ctx)]
        lower = self._wb(word, ctx[1:])
        row = level.get(ctx)
        if not row:
            return lower
        total = self._totals[len(ctx)][ctx]
        types = len(row)
        return (row.get(word, 0) + types * lower) / (total + types)

    def save(self, path: str | Path) -> None:
        """Write the model as magic header + zlib-compressed JSON payload.

        Contexts and words are sorted so identical models produce
        byte-identical files.
        """
        levels = []
        for level in self._counts:
            entries = []
            for ctx in sorted(level):
                row = level[ctx]
                entries.append([list(ctx), [[w, row[w]] for w in sorted(row)]])
            levels.append(entries)
        payload = {
            "format_version": FORMAT_VERSION,
            "order": self.order,
            "min_count": self.min_count,
            "lexicon": sorted(self.lexicon),
            "counts": levels,
        }
        blob = zlib.compress(json.dumps(payload, separators=(",", ":")).encode("utf-8"))
        with open(path, "wb") as f:
            f.write(MAGIC + b"\n")
            f.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        data = Path(path).read_bytes()
        header = MAGIC + b"\n"
        if not data.startswith(header):
            raise ValueError(f"{path}: not an n-gram model file (bad magic)")
        payload = json.loads(zlib.decompress(data[len(header):]).decode("utf-8"))
        if payload.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format version")
        counts: list[dict[tuple[str, ...], dict[str, int]]] = []
        for level in payload["counts"]:
            counts.append({tuple(ctx): dict(row) for ctx, row in ((e[0], e[1]) for e in level)})
        return cls(
            order=payload["order"],
            min_count=payload["min_count"],
            lexicon=frozenset(payload["lexicon"]),
            counts=counts,
        )


def train(corpus: Iterable[str], order: int, min_count: int = 2) -> NgramModel:
    """Train a Witten-Bell model on normalized sentences.

    Counting is order-independent, so shuffling the corpus yields an
    identical model.  Sentences containing literal marker tokens are
    rejected rather than silently merged into model internals.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    sentences = [s.split() for s in corpus]
    if not sentences:
        raise ValueError("training corpus is empty")
    raw_counts: dict[str, int] = {}
    for words in sentences:
        for w in words:
            if w in _MARKERS:
                raise ValueError(f"corpus contains reserved marker token {w!r}")
            raw_counts[w] = raw_counts.get(w, 0) + 1
    lexicon = frozenset(w for w, c in raw_counts.items() if c >= min_count)

    counts: list[dict[tuple[str, ...], dict[str, int]]] = [{} for _ in range(order)]
    for words in sentences:
        toks = [w if w in lexicon else UNK for w in words] + [EOS]
        padded = [BOS] * (order - 1) + toks
        for i in range(order - 1, len(padded)):
            word = padded[i]
            for k in range(1, order + 1):
                ctx = tuple(padded[i - k + 1 : i])
                row = counts[k - 1].setdefault(ctx, {})
                row[word] = row.get(word, 0) + 1
    return NgramModel(order=order, min_count=min_count, lexicon=lexicon, counts=counts)


def score(model: NgramModel, sentence: str) -> float:
    """Natural-log probability of the sentence, eos step included."""
    words = [model.map_token(w) for w in sentence.split()]
    context = (BOS,) * (model.order - 1)
    total = 0.0
    for w in words + [EOS]:
        total += math.log(model.prob(w, context))
        if model.order > 1:
            context = context[1:] + (w,)
    return total


def perplexity(model: NgramModel, corpus: Iterable[str]) -> float:
    """exp(-total logprob / total word count), eos counted per sentence."""
    total_lp = []
    total_words = 0
    for sentence in corpus:
        total_lp.append(score(model, sentence))
        total_words += len(sentence.split()) + 1
    if total_words == 0:
        raise ValueError("perplexity needs a non-empty corpus")
    return math.exp(-math.fsum(total_lp) / total_words)
