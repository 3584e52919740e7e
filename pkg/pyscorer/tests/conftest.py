import json
import random
import subprocess
import sys

import pytest

# The toolkit this plugin serves; only its public CLI and file formats are
# used, never its Python API.
PRIMARY = [sys.executable, "-m", "nbestfix"]

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


def run_primary(*argv: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        PRIMARY + [str(a) for a in argv], capture_output=True, text=True, timeout=300
    )


def synth_dump(tmp_path, name: str, sentences: list[str], seed: int, n_best: int = 10) -> str:
    corpus = tmp_path / f"{name}.txt"
    corpus.write_text("\n".join(sentences) + "\n", encoding="utf-8")
    dump = tmp_path / f"{name}.dump"
    proc = run_primary(
        "--seed", seed, "synth", "--in", corpus, "--out", dump, "--n-best", n_best
    )
    assert proc.returncode == 0, proc.stderr
    return str(dump)


def load_dump_records(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    return records


def pairs_from_dump(path: str) -> list[tuple[str, str]]:
    return [
        (rec["nbest"][0]["text"], rec["reference"])
        for rec in load_dump_records(path)
        if rec.get("reference") and rec.get("nbest")
    ]


@pytest.fixture(scope="session")
def session_tmp(tmp_path_factory):
    return tmp_path_factory.mktemp("fixtures")


@pytest.fixture(scope="session")
def train_dump(session_tmp):
    return synth_dump(session_tmp, "train", make_sentences(200, seed=501), seed=11)


@pytest.fixture(scope="session")
def heldout_dump(session_tmp):
    return synth_dump(session_tmp, "heldout", make_sentences(150, seed=502), seed=12)
