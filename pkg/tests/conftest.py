import numpy as np
import pytest

from psoartm.corpus import build_transaction_db, build_vocabulary

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def record(criterion: str, ok: bool, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] {criterion}" + (f" -- {detail}" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def db_from_token_lists(docs):
    vocab = build_vocabulary(docs, 10_000)
    return build_transaction_db(docs, vocab)


def random_token_docs(rng, n_docs, n_terms, density=0.4):
    """Documents over terms t0..t{n_terms-1}; every term appears at least once."""
    while True:
        docs = []
        for _ in range(n_docs):
            doc = []
            for j in range(n_terms):
                if rng.random() < density:
                    doc.extend([f"t{j}"] * int(rng.integers(1, 4)))
            if not doc:
                doc = [f"t{int(rng.integers(n_terms))}"]
            docs.append(doc)
        if len({t for d in docs for t in d}) == n_terms:
            return docs


def planted_token_docs(seed=0, n_docs=30, n_noise=8, noise_rate=0.2):
    """``alpha`` and ``beta`` in every document plus sparse noise terms."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        doc = ["alpha", "beta"]
        for j in range(n_noise):
            if rng.random() < noise_rate or i == j:
                doc.append(f"noise{j}")
        docs.append(doc)
    return docs
