"""nbestfix: black-box ASR adaptation from decoded outputs alone.

Evaluates, calibrates, rescores and reranks N-best hypothesis lists, with
external corrector models attached through a line-delimited subprocess
protocol.  See README.md for the command-line surface.
"""

from .datamodel import (
    Hypothesis,
    NBestList,
    ScoreVector,
    UtteranceRecord,
    load_dump,
    load_scores,
    validate,
    write_dump,
    write_scores,
)
from .errors import NbestfixError
from .metrics import Alignment, CorpusWer, OracleCurve, WerBreakdown, align, corpus_wer, oracle_curves, wer
from .rerank import RerankConfig, Selection, combine, encode_nbest_input, rerank_constrained, select_unconstrained
from .textnorm import DEFAULT_RULES, NormRules, normalize

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "CorpusWer",
    "DEFAULT_RULES",
    "Hypothesis",
    "NBestList",
    "NbestfixError",
    "NormRules",
    "OracleCurve",
    "RerankConfig",
    "ScoreVector",
    "Selection",
    "UtteranceRecord",
    "WerBreakdown",
    "align",
    "combine",
    "corpus_wer",
    "encode_nbest_input",
    "load_dump",
    "load_scores",
    "normalize",
    "oracle_curves",
    "rerank_constrained",
    "select_unconstrained",
    "validate",
    "wer",
    "write_dump",
    "write_scores",
    "__version__",
]
