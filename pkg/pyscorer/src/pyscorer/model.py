"""Noisy-channel word corrector learned from (hypothesis, reference) pairs.

The model is deliberately small: a word-level confusion table (how often an
intended word came out as a given observed word), a unigram prior over
reference words, and a character error rate for backing off to an edit
channel when a word pair was never seen.  It scores candidate sentences
against an observed transcription and proposes word-by-word corrections.

Scores are log joint probabilities under the channel view: the candidate is
the intended text, the observed transcription is its noisy rendering.
Unalignable words pay a large fixed gap penalty, so corrections can never
win by simply dropping material.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

FORMAT_TAG = "pyscorer-toycorrector-v1"

# One gap outweighs any per-word score; keeps different-length candidates honest.
GAP_LOGPROB = -1.0e4

# Bounds for the estimated character error rate.
MIN_CHAR_ERR = 1e-4
MAX_CHAR_ERR = 0.4

# Prior smoothing mass. Deliberately below add-one: a word never seen in the
# reference text should look unlikely, otherwise keeping a garbled word
# always beats correcting it to a known one.
PRIOR_SMOOTHING = 0.1

_PUNCT = '.,!?;:"()[]–—'


def normalize_text(text: str) -> str:
    """Minimal normalization matching the toolkit default: case fold, drop
    common punctuation, collapse whitespace."""
    text = text.casefold().translate({ord(c): None for c in _PUNCT})
    return " ".join(text.split())


def edit_distance(a: str, b: str) -> int:
    """Plain character Levenshtein distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def align_words(ref: list[str], hyp: list[str]) -> list[tuple[str | None, str | None]]:
    """Minimal-edit word alignment as (ref_word, hyp_word) pairs.

    Gaps are None on the missing side; ties prefer match, then substitution,
    then deletion, scanning from the front.
    """
    m, n = len(ref), len(hyp)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for j in range(n + 1):
        dist[m][j] = n - j
    for i in range(m, -1, -1):
        dist[i][n] = m - i
    for i in range(m - 1, -1, -1):
        for j in range(n - 1, -1, -1):
            if ref[i] == hyp[j]:
                dist[i][j] = dist[i + 1][j + 1]
            else:
                dist[i][j] = 1 + min(dist[i + 1][j + 1], dist[i + 1][j], dist[i][j + 1])
    pairs: list[tuple[str | None, str | None]] = []
    i = j = 0
    while i < m or j < n:
        if i < m and j < n and ref[i] == hyp[j] and dist[i][j] == dist[i + 1][j + 1]:
            pairs.append((ref[i], hyp[j]))
            i, j = i + 1, j + 1
        elif i < m and j < n and dist[i][j] == 1 + dist[i + 1][j + 1]:
            pairs.append((ref[i], hyp[j]))
            i, j = i + 1, j + 1
        elif i < m and dist[i][j] == 1 + dist[i + 1][j]:
            pairs.append((ref[i], None))
            i += 1
        else:
            pairs.append((None, hyp[j]))
            j += 1
    return pairs


@dataclass
class ToyCorrectorModel:
    """Confusion counts, word prior, and a character error rate."""

    confusion: dict[str, dict[str, int]] = field(default_factory=dict)
    prior: dict[str, int] = field(default_factory=dict)
    char_err: float = 0.02

    def __post_init__(self) -> None:
        self._rebuild_derived()

    def _rebuild_derived(self) -> None:
        self._prior_total = sum(self.prior.values())
        self._vocab = sorted(self.prior)
        self._obs_vocab_size = len({o for row in self.confusion.values() for o in row}) + 1
        self._reverse: dict[str, set[str]] = {}
        for intended, row in self.confusion.items():
            for observed in row:
                self._reverse.setdefault(observed, set()).add(intended)
        self._correct_word_cached = lru_cache(maxsize=65536)(self._correct_word)

    # --- probabilities ------------------------------------------------------

    def prior_logprob(self, word: str) -> float:
        a = PRIOR_SMOOTHING
        v = len(self.prior) + 1
        return math.log((self.prior.get(word, 0) + a) / (self._prior_total + a * v))

    def table_logprob(self, observed: str, intended: str) -> float:
        """Add-one smoothed confusion probability P(observed | intended)."""
        row = self.confusion.get(intended, {})
        total = sum(row.values())
        return math.log((row.get(observed, 0) + 1) / (total + self._obs_vocab_size))

    def char_channel_logprob(self, observed: str, intended: str) -> float:
        d = edit_distance(observed, intended)
        m = max(len(observed), len(intended), 1)
        return d * math.log(self.char_err) + (m - d) * math.log(1.0 - self.char_err)

    def channel_logprob(self, observed: str, intended: str) -> float:
        """Best available explanation of the observed word."""
        return max(
            self.table_logprob(observed, intended),
            self.char_channel_logprob(observed, intended),
        )

    def word_logprob(self, observed: str, intended: str) -> float:
        return self.channel_logprob(observed, intended) + self.prior_logprob(intended)

    # --- sentence operations --------------------------------------------------

    def score_sentence(self, candidate: str, observed: str) -> float:
        """Log joint score of ``candidate`` explaining ``observed``."""
        cand_words = normalize_text(candidate).split()
        obs_words = normalize_text(observed).split()
        score = 0.0
        for cand_w, obs_w in align_words(cand_words, obs_words):
            if cand_w is None or obs_w is None:
                score += GAP_LOGPROB
            else:
                score += self.word_logprob(obs_w, cand_w)
        return score

    def _fuzzy_candidates(self, word: str) -> list[str]:
        max_d = 2 if len(word) > 3 else 1
        out = []
        for vocab_word in self._vocab:
            if abs(len(vocab_word) - len(word)) <= max_d:
                if edit_distance(vocab_word, word) <= max_d:
                    out.append(vocab_word)
        return out

    def _correct_word(self, word: str) -> str:
        candidates = {word}
        candidates.update(self._reverse.get(word, ()))
        candidates.update(self._fuzzy_candidates(word))
        return max(sorted(candidates), key=lambda c: self.word_logprob(word, c))

    def correct_sentence(self, observed: str) -> str:
        """Word-by-word noisy-channel correction of the observed text."""
        words = normalize_text(observed).split()
        return " ".join(self._correct_word_cached(w) for w in words)

    # --- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        payload = {
            "format": FORMAT_TAG,
            "confusion": {k: dict(sorted(v.items())) for k, v in sorted(self.confusion.items())},
            "prior": dict(sorted(self.prior.items())),
            "char_err": self.char_err,
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "ToyCorrectorModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} model file")
        return cls(
            confusion={k: dict(v) for k, v in payload["confusion"].items()},
            prior=dict(payload["prior"]),
            char_err=float(payload["char_err"]),
        )


def fit(pairs: list[tuple[str, str]]) -> ToyCorrectorModel:
    """Learn confusions and priors from (hypothesis, reference) pairs."""
    if not pairs:
        raise ValueError("fit needs at least one (hypothesis, reference) pair")
    confusion: dict[str, dict[str, int]] = {}
    prior: dict[str, int] = {}
    char_edits = 0
    char_total = 0
    for hyp_text, ref_text in pairs:
        ref_words = normalize_text(ref_text).split()
        hyp_words = normalize_text(hyp_text).split()
        for word in ref_words:
            prior[word] = prior.get(word, 0) + 1
        for ref_w, hyp_w in align_words(ref_words, hyp_words):
            if ref_w is None or hyp_w is None:
                continue
            row = confusion.setdefault(ref_w, {})
            row[hyp_w] = row.get(hyp_w, 0) + 1
            char_edits += edit_distance(ref_w, hyp_w)
            char_total += max(len(ref_w), len(hyp_w))
    char_err = char_edits / char_total if char_total else MIN_CHAR_ERR
    char_err = min(MAX_CHAR_ERR, max(MIN_CHAR_ERR, char_err))
    return ToyCorrectorModel(confusion=confusion, prior=prior, char_err=char_err)
