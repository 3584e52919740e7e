"""Deterministic text normalization for references and hypotheses.

Every comparison in the toolkit (WER, oracle curves, list membership checks)
runs both sides through the same ruleset first, so punctuation and casing
differences never show up as word errors.  The default ruleset lowercases,
deletes a fixed set of punctuation while keeping intra-word apostrophes and
hyphens, and collapses whitespace.  Number and abbreviation expansion are
deliberately out of scope; callers that need them can add mapping rules.

Rules are applied in a fixed order: case folding, mappings, punctuation
deletion, whitespace collapsing.  The default ruleset is idempotent; custom
mapping rules are responsible for their own idempotence.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

# Common sentence punctuation plus en/em dashes. Apostrophes and ASCII
# hyphens stay so contractions and compounds survive normalization.
DEFAULT_STRIP_CHARS = '.,!?;:"()[]–—'


@dataclass(frozen=True)
class NormRules:
    """A normalization ruleset.

    ``lowercase`` uses ``str.casefold`` rather than ``str.lower`` so that
    normalization is idempotent and case-invariant over the full Unicode
    range (final sigma, sharp s, ligatures).  ``strip_punct`` characters are
    deleted outright.  ``mappings`` are regex (pattern, replacement) pairs
    applied in order, after case folding and before punctuation deletion.
    """

    lowercase: bool = True
    strip_punct: str = DEFAULT_STRIP_CHARS
    collapse_ws: bool = True
    mappings: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mappings", tuple((p, r) for p, r in self.mappings))


DEFAULT_RULES = NormRules()

# Identity ruleset used by --no-norm: text is compared verbatim.
RAW_RULES = NormRules(lowercase=False, strip_punct="", collapse_ws=False)


def normalize(text: str, rules: NormRules = DEFAULT_RULES) -> str:
    """Apply ``rules`` to ``text`` and return the normalized string."""
    if rules.lowercase:
        text = text.casefold()
    for pattern, replacement in rules.mappings:
        text = re.sub(pattern, replacement, text)
    if rules.strip_punct:
        text = text.translate({ord(ch): None for ch in rules.strip_punct})
    if rules.collapse_ws:
        text = " ".join(text.split())
    return text


def words(text: str, rules: NormRules = DEFAULT_RULES) -> list[str]:
    """Normalize ``text`` and split it into words."""
    return normalize(text, rules).split()


def load_rules(path: str | Path) -> NormRules:
    """Load a ruleset from a JSON object file.

    Recognized keys: ``lowercase``, ``strip_punct``, ``collapse_ws``,
    ``mappings`` (a list of [pattern, replacement] pairs).  Unknown keys are
    rejected so typos do not silently fall back to defaults.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: rules file must contain a JSON object")
    known = {"lowercase", "strip_punct", "collapse_ws", "mappings"}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"{path}: unknown rule keys: {sorted(unknown)}")
    mappings = tuple((str(p), str(r)) for p, r in obj.get("mappings", ()))
    return NormRules(
        lowercase=bool(obj.get("lowercase", True)),
        strip_punct=str(obj.get("strip_punct", DEFAULT_STRIP_CHARS)),
        collapse_ws=bool(obj.get("collapse_ws", True)),
        mappings=mappings,
    )
