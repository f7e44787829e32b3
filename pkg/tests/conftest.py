import numpy as np
import pytest

from latefuse.label_space import ProductRecord

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion outcome for the terminal summary."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS.append((name, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def marker_corpus(n=200, n_labels=6, length=20, seed=0):
    """Token lists where label i is present iff token ``marker_i`` appears."""
    rng = np.random.default_rng(seed)
    filler = [f"w{i}" for i in range(50)]
    docs, truth = [], np.zeros((n, n_labels), dtype=np.int8)
    for r in range(n):
        y = rng.random(n_labels) < 0.3
        if not y.any():
            y[rng.integers(n_labels)] = True
        tokens = list(rng.choice(filler, size=length - int(y.sum())))
        for i in np.flatnonzero(y):
            tokens.insert(int(rng.integers(len(tokens) + 1)), f"marker_{i}")
        docs.append(tokens)
        truth[r] = y
    return docs, truth


def _letters(i: int) -> str:
    return chr(97 + i // 26) + chr(97 + i % 26)


def _as_text(tokens: list[str]) -> str:
    # digits and underscores do not survive text cleaning, so spell indices in letters
    words = []
    for t in tokens:
        stem, idx = t.rsplit("_", 1) if t.startswith("marker_") else ("filler", t[1:])
        words.append(stem + _letters(int(idx)))
    return " ".join(words)


def marker_records(n=200, n_labels=6, seed=0):
    """Product records whose title and description carry the marker tokens."""
    docs, truth = marker_corpus(n, n_labels, seed=seed)
    return [
        ProductRecord(
            id=f"p{i:04d}",
            title=_as_text(d),
            description=_as_text(d),
            labels=frozenset(f"cat_{j}" for j in np.flatnonzero(truth[i])),
        )
        for i, d in enumerate(docs)
    ]
