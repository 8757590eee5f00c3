"""Text preprocessing and TF-ITF transaction database construction.

Raw documents are tokenized, stripped of stop words and turned into a
document-by-term matrix of TF-ITF weights over a capped vocabulary.  The
database also remembers, per term, the set of documents the term occurs in,
so that terms whose weight vanishes (they occur in every document) still
count as present when rules are scored.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

DEFAULT_VMAX = 1000
DB_FORMAT = "psoartm-transactions"
DB_VERSION = 1

# Runs of Unicode letters/digits; everything else (including "_") separates.
_TOKEN_RE = re.compile(r"[^\W_]+")


class EmptyCorpusError(ValueError):
    """No document has any token left after preprocessing."""


class DatabaseFormatError(ValueError):
    """A serialized transaction database could not be parsed."""


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    metadata: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# Tokens and stop words
# ---------------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Split ``text`` on every non-alphanumeric character and lowercase it.

    >>> tokenize("10km run-bike")
    ['10km', 'run', 'bike']
    """
    return _TOKEN_RE.findall(text.lower())


def remove_stop_words(tokens: Sequence[str], stops: Iterable[str]) -> list[str]:
    stops = stops if isinstance(stops, (set, frozenset)) else frozenset(stops)
    return [t for t in tokens if t not in stops]


def parse_stop_words(lines: Iterable[str]) -> frozenset[str]:
    """Parse a stop-word listing: one word per line, ``#`` starts a comment."""
    words = set()
    for lineno, raw in enumerate(lines, 1):
        word = raw.split("#", 1)[0].strip()
        if not word:
            continue
        if word != word.lower() or any(ch.isspace() for ch in word):
            raise ValueError(f"line {lineno}: invalid stop word {word!r}")
        words.add(word)
    return frozenset(words)


def load_stop_words(path: str | Path | None = None) -> frozenset[str]:
    """Load a stop-word file, or the bundled English list when ``path`` is None."""
    if path is None:
        text = resources.files("psoartm").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_stop_words(text.splitlines())


def preprocess(text: str, stops: Iterable[str]) -> list[str]:
    return remove_stop_words(tokenize(text), stops)


# ---------------------------------------------------------------------------
# Vocabulary and weighting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list; column ``j`` of the database is ``terms[j]``.

    Terms are sorted by descending total occurrence count, ties broken
    lexicographically.  ``doc_frequency[j]`` is the number of documents that
    contain ``terms[j]``.
    """

    terms: tuple[str, ...]
    occurrences: tuple[int, ...]
    doc_frequency: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.terms) == len(self.occurrences) == len(self.doc_frequency)):
            raise ValueError("vocabulary fields differ in length")
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate vocabulary terms")

    def __len__(self) -> int:
        return len(self.terms)

    @cached_property
    def index(self) -> dict[str, int]:
        return {t: j for j, t in enumerate(self.terms)}


def build_vocabulary(docs: Sequence[Sequence[str]], v_max: int = DEFAULT_VMAX) -> Vocabulary:
    """Keep the ``v_max`` most frequent terms of a tokenized corpus."""
    if v_max < 1:
        raise ValueError(f"v_max must be positive, got {v_max}")
    occurrences: Counter[str] = Counter()
    doc_frequency: Counter[str] = Counter()
    for doc in docs:
        occurrences.update(doc)
        doc_frequency.update(set(doc))
    if not occurrences:
        raise EmptyCorpusError("every document is empty after preprocessing")
    ranked = sorted(occurrences, key=lambda t: (-occurrences[t], t))[:v_max]
    return Vocabulary(
        terms=tuple(ranked),
        occurrences=tuple(occurrences[t] for t in ranked),
        doc_frequency=tuple(doc_frequency[t] for t in ranked),
    )


def term_frequency(doc: Sequence[str], term: str) -> float:
    if not doc:
        raise ValueError("term frequency of an empty document is undefined")
    return doc.count(term) / len(doc)


def inverse_term_frequency(n_docs_with_term: int, n_docs: int) -> float:
    """Absolute natural log of the fraction of documents containing the term."""
    if not 1 <= n_docs_with_term <= n_docs:
        raise ValueError(f"need 1 <= n_docs_with_term <= n_docs, got {n_docs_with_term}, {n_docs}")
    return abs(math.log(n_docs_with_term / n_docs))


def top_terms(vocab: Vocabulary, k: int) -> list[tuple[str, int]]:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return list(zip(vocab.terms[:k], vocab.occurrences[:k]))


# ---------------------------------------------------------------------------
# Transaction database
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransactionDatabase:
    """N x M matrix of TF-ITF weights plus per-term occurrence bitsets.

    ``term_docs[j]`` is an integer whose bit ``i`` is set when term ``j``
    occurs in document ``i``; it is independent of the weight, which is zero
    for terms present in every document.
    """

    weights: sparse.csr_array
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]
    term_docs: tuple[int, ...]
    dropped: tuple[str, ...] = ()

    @classmethod
    def from_entries(
        cls,
        n_docs: int,
        vocabulary: Vocabulary,
        entries: Iterable[tuple[int, int, float]],
        doc_ids: Sequence[str] | None = None,
        dropped: Sequence[str] = (),
    ) -> "TransactionDatabase":
        """Assemble a database from ``(doc, term, weight)`` occurrence triplets.

        Every occurrence must be listed, including those with weight 0.
        """
        m = len(vocabulary)
        bits = [0] * m
        rows, cols, data = [], [], []
        for i, j, w in sorted(entries, key=lambda e: (e[0], e[1])):
            if not (0 <= i < n_docs and 0 <= j < m):
                raise ValueError(f"entry ({i}, {j}) out of range for {n_docs}x{m}")
            if w < 0:
                raise ValueError(f"negative weight at ({i}, {j})")
            bits[j] |= 1 << i
            if w > 0:
                rows.append(i)
                cols.append(j)
                data.append(float(w))
        weights = sparse.csr_array(
            (np.asarray(data, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(n_docs, m),
        )
        if doc_ids is None:
            doc_ids = [str(i) for i in range(n_docs)]
        if len(doc_ids) != n_docs:
            raise ValueError("doc_ids length differs from n_docs")
        return cls(weights, vocabulary, tuple(doc_ids), tuple(bits), tuple(dropped))

    @property
    def n_docs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_terms(self) -> int:
        return self.weights.shape[1]

    @cached_property
    def column_sums(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=0), dtype=np.float64).ravel()

    @cached_property
    def _sorted_column_sums(self) -> np.ndarray:
        return np.sort(self.column_sums)[::-1]

    def top_column_mass(self, k: int) -> float:
        """Sum of the ``k`` largest column sums."""
        return float(self._sorted_column_sums[:k].sum())

    def entries(self) -> list[tuple[int, int, float]]:
        """All occurrence triplets ``(doc, term, weight)`` in row-major order."""
        coo = self.weights.tocoo()
        nonzero = {(i, j): w for i, j, w in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())}
        pairs = []
        for j, mask in enumerate(self.term_docs):
            while mask:
                low = mask & -mask
                pairs.append((low.bit_length() - 1, j))
                mask ^= low
        pairs.sort()
        return [(i, j, nonzero.get((i, j), 0.0)) for i, j in pairs]


def build_transaction_db(
    docs: Sequence[Sequence[str]],
    vocab: Vocabulary,
    doc_ids: Sequence[str] | None = None,
) -> TransactionDatabase:
    """Weight every document against ``vocab`` with TF-ITF.

    The TF denominator is the document's full token count, including terms
    that did not make it into the vocabulary.  Empty documents are dropped.
    """
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(docs))]
    if len(doc_ids) != len(docs):
        raise ValueError("doc_ids length differs from docs")

    kept = [(doc_id, doc) for doc_id, doc in zip(doc_ids, docs) if doc]
    dropped = [doc_id for doc_id, doc in zip(doc_ids, docs) if not doc]
    for doc_id in dropped:
        logger.warning("dropping document %r: empty after preprocessing", doc_id)
    if not kept:
        raise EmptyCorpusError("no documents left after preprocessing")

    n = len(kept)
    index = vocab.index
    itf = [inverse_term_frequency(df, n) for df in vocab.doc_frequency]
    entries = []
    for i, (_, doc) in enumerate(kept):
        length = len(doc)
        counts = Counter(doc)
        for j in sorted(index[t] for t in counts if t in index):
            entries.append((i, j, counts[vocab.terms[j]] / length * itf[j]))
    return TransactionDatabase.from_entries(n, vocab, entries, [d for d, _ in kept], dropped)


# ---------------------------------------------------------------------------
# Corpus input
# ---------------------------------------------------------------------------


def read_text_dir(path: str | Path) -> list[RawDocument]:
    """One document per ``*.txt`` file, id = file name, sorted by name."""
    files = sorted(p for p in Path(path).iterdir() if p.is_file() and p.suffix == ".txt")
    return [RawDocument(p.name, p.read_text(encoding="utf-8")) for p in files]


FEED_TEXT_FIELDS = ("title", "description", "content")
FEED_META_FIELDS = ("link", "date")


def read_feed_jsonl(path: str | Path) -> list[RawDocument]:
    """Read feed items from a JSON-lines file.

    The text of an item is its title, description and content joined by
    spaces; link and date are kept as metadata.  Items without an ``id``
    field are numbered by line.
    """
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            doc_id = str(record.get("id", f"line-{lineno}"))
            if doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            text = " ".join(str(record.get(k) or "") for k in FEED_TEXT_FIELDS)
            meta = {k: record[k] for k in FEED_META_FIELDS if k in record}
            docs.append(RawDocument(doc_id, text, meta))
    return docs


def read_corpus(path: str | Path) -> list[RawDocument]:
    path = Path(path)
    if path.is_dir():
        return read_text_dir(path)
    if path.is_file():
        return read_feed_jsonl(path)
    raise FileNotFoundError(f"corpus not found: {path}")


def database_from_documents(
    documents: Sequence[RawDocument],
    stops: Iterable[str],
    v_max: int = DEFAULT_VMAX,
) -> TransactionDatabase:
    """Run the whole preprocessing pipeline over raw documents."""
    stops = frozenset(stops)
    tokenized = [preprocess(d.text, stops) for d in documents]
    vocab = build_vocabulary(tokenized, v_max)
    return build_transaction_db(tokenized, vocab, [d.id for d in documents])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def database_to_json(db: TransactionDatabase) -> dict:
    """JSON document for ``db``.

    ``entries`` lists every ``[doc, term, weight]`` occurrence, zero-weight
    ones included, so presence survives the round trip.  Floats are written
    with ``repr`` precision and read back bit-identically.
    """
    vocab = db.vocabulary
    return {
        "format": DB_FORMAT,
        "version": DB_VERSION,
        "n_docs": db.n_docs,
        "doc_ids": list(db.doc_ids),
        "dropped": list(db.dropped),
        "vocabulary": {
            "terms": list(vocab.terms),
            "occurrences": list(vocab.occurrences),
            "doc_frequency": list(vocab.doc_frequency),
        },
        "entries": [[i, j, w] for i, j, w in db.entries()],
    }


def database_from_json(obj: dict) -> TransactionDatabase:
    try:
        if obj.get("format") != DB_FORMAT:
            raise DatabaseFormatError(f"not a {DB_FORMAT} file")
        if obj.get("version") != DB_VERSION:
            raise DatabaseFormatError(f"unsupported version {obj.get('version')!r}")
        v = obj["vocabulary"]
        vocab = Vocabulary(tuple(v["terms"]), tuple(v["occurrences"]), tuple(v["doc_frequency"]))
        entries = [(int(i), int(j), float(w)) for i, j, w in obj["entries"]]
        return TransactionDatabase.from_entries(
            int(obj["n_docs"]), vocab, entries, obj["doc_ids"], obj.get("dropped", ())
        )
    except DatabaseFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DatabaseFormatError(f"malformed transaction database: {exc}") from exc


def save_database(db: TransactionDatabase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(database_to_json(db), fh, ensure_ascii=False)
        fh.write("\n")


def load_database(path: str | Path) -> TransactionDatabase:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatabaseFormatError(f"{path}: {exc}") from None
    if not isinstance(obj, dict):
        raise DatabaseFormatError(f"{path}: expected a JSON object")
    return database_from_json(obj)
