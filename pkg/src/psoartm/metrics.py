"""Association rules and their quality measures.

Support and confidence count transactions exactly through the per-term
occurrence bitsets of a :class:`~psoartm.corpus.TransactionDatabase`; AWS is
the total TF-ITF mass of a rule's terms.  :func:`enumerate_rules` is a plain
exhaustive search kept around as a correctness oracle for the swarm miner.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, TextIO

from psoartm.corpus import TransactionDatabase, Vocabulary

AWS_NORMALIZED = "normalized"
AWS_RAW = "raw"
AWS_MODES = (AWS_NORMALIZED, AWS_RAW)

ENUMERATION_MAX_TERMS = 15
TERM_JOINER = " ∧ "
CSV_COLUMNS = ("antecedent", "consequent", "support", "confidence", "aws_raw", "aws_norm", "fitness")


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    s_min: float = 0.0
    c_min: float = 0.0

    def __post_init__(self):
        for name in ("s_min", "c_min"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def admits(self, support: float, confidence: float) -> bool:
        return support >= self.s_min and confidence >= self.c_min


@dataclass(frozen=True)
class Rule:
    """Implication ``antecedent => consequent`` between disjoint term-index sets."""

    antecedent: frozenset[int]
    consequent: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "antecedent", frozenset(self.antecedent))
        object.__setattr__(self, "consequent", frozenset(self.consequent))
        if not self.antecedent or not self.consequent:
            raise ValueError("both sides of a rule must be non-empty")
        if self.antecedent & self.consequent:
            raise ValueError("antecedent and consequent overlap")
        if min(self.antecedent | self.consequent) < 0:
            raise ValueError("term indices must be non-negative")

    @property
    def terms(self) -> frozenset[int]:
        return self.antecedent | self.consequent

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Canonical, sortable identity of the rule."""
        return tuple(sorted(self.antecedent)), tuple(sorted(self.consequent))

    def __len__(self) -> int:
        return len(self.antecedent) + len(self.consequent)


class RuleMetrics(NamedTuple):
    support: float
    confidence: float
    aws_raw: float
    aws_norm: float
    fitness: float


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------


def presence(db: TransactionDatabase, doc: int, term: int) -> bool:
    if not 0 <= doc < db.n_docs:
        raise IndexError(f"document index {doc} out of range")
    return bool(db.term_docs[term] >> doc & 1)


def count_containing(db: TransactionDatabase, terms: Iterable[int]) -> int:
    """Number of documents in which every term of ``terms`` occurs."""
    mask = (1 << db.n_docs) - 1
    for j in terms:
        mask &= db.term_docs[j]
        if not mask:
            return 0
    return mask.bit_count()


def support(db: TransactionDatabase, rule: Rule) -> float:
    return count_containing(db, rule.terms) / db.n_docs


def confidence(db: TransactionDatabase, rule: Rule) -> float:
    """Share of documents containing the antecedent that also hold the consequent.

    Defined as 0 when the antecedent occurs nowhere.
    """
    n_x = count_containing(db, rule.antecedent)
    if n_x == 0:
        return 0.0
    return count_containing(db, rule.terms) / n_x


def aws(db: TransactionDatabase, terms: Iterable[int], k: int) -> tuple[float, float]:
    """Raw and normalized aggregate weight sum of ``terms``.

    The raw value sums whole columns of the weight matrix.  The normalizer is
    the mass of the ``k`` heaviest columns, so any set of at most ``k`` terms
    maps into [0, 1]; an all-zero matrix normalizes to 0.
    """
    sums = db.column_sums
    raw = 0.0
    for j in sorted(terms):
        raw += float(sums[j])
    top = db.top_column_mass(k)
    norm = min(raw / top, 1.0) if top > 0 else 0.0
    return raw, norm


def weighted_fitness(
    supp: float, conf: float, aws_value: float, weights: Sequence[float] = (1.0, 1.0, 1.0)
) -> float:
    alpha, beta, gamma = weights
    return (alpha * supp + beta * conf + gamma * aws_value) / (alpha + beta + gamma)


def score(
    db: TransactionDatabase,
    rule: Rule,
    k: int,
    weights: Sequence[float] = (1.0, 1.0, 1.0),
    aws_mode: str = AWS_NORMALIZED,
) -> RuleMetrics:
    if aws_mode not in AWS_MODES:
        raise ValueError(f"unknown aws_mode {aws_mode!r}")
    n_xy = count_containing(db, rule.terms)
    n_x = count_containing(db, rule.antecedent) if n_xy else 0
    supp = n_xy / db.n_docs
    conf = n_xy / n_x if n_x else 0.0
    raw, norm = aws(db, rule.terms, k)
    fit = weighted_fitness(supp, conf, norm if aws_mode == AWS_NORMALIZED else raw, weights)
    return RuleMetrics(supp, conf, raw, norm, fit)


def enumerate_rules(
    db: TransactionDatabase,
    k_max: int,
    thresholds: Thresholds = Thresholds(),
    *,
    weights: Sequence[float] = (1.0, 1.0, 1.0),
    aws_mode: str = AWS_NORMALIZED,
    force: bool = False,
) -> list[tuple[Rule, RuleMetrics]]:
    """Score every rule of 2..``k_max`` terms; keep those passing ``thresholds``.

    Output is sorted by canonical key (antecedent first).  Refuses databases
    with more than ``ENUMERATION_MAX_TERMS`` terms unless ``force`` is set.
    """
    m = db.n_terms
    if m > ENUMERATION_MAX_TERMS and not force:
        raise EnumerationTooLarge(
            f"{m} terms exceed ENUMERATION_MAX_TERMS={ENUMERATION_MAX_TERMS}; pass force=True"
        )
    found = []
    for size in range(2, min(k_max, m) + 1):
        for itemset in combinations(range(m), size):
            for n_ant in range(1, size):
                for ant in combinations(itemset, n_ant):
                    rule = Rule(frozenset(ant), frozenset(itemset) - frozenset(ant))
                    metrics = score(db, rule, k_max, weights, aws_mode)
                    if thresholds.admits(metrics.support, metrics.confidence):
                        found.append((rule, metrics))
    found.sort(key=lambda rm: rm[0].key)
    return found


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


class RuleRecord(NamedTuple):
    """A rule as written to disk: terms as strings plus its metrics."""

    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]
    support: float
    confidence: float
    aws_raw: float
    aws_norm: float
    fitness: float


def to_records(
    rules: Iterable[tuple[Rule, RuleMetrics]], vocab: Vocabulary
) -> list[RuleRecord]:
    terms = vocab.terms
    return [
        RuleRecord(
            tuple(terms[j] for j in sorted(rule.antecedent)),
            tuple(terms[j] for j in sorted(rule.consequent)),
            *metrics,
        )
        for rule, metrics in rules
    ]


def write_rules_csv(records: Iterable[RuleRecord], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [TERM_JOINER.join(r.antecedent), TERM_JOINER.join(r.consequent)]
            + [repr(float(v)) for v in r[2:]]
        )


def write_rules_json(records: Iterable[RuleRecord], fh: TextIO) -> None:
    payload = {"rules": [{**r._asdict(), "antecedent": list(r.antecedent), "consequent": list(r.consequent)} for r in records]}
    json.dump(payload, fh, ensure_ascii=False, indent=1)
    fh.write("\n")


def _split_terms(cell: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in cell.split("∧") if t.strip())


def parse_rules(text: str) -> list[RuleRecord]:
    """Parse a rule file written by :func:`write_rules_csv` or :func:`write_rules_json`."""
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        return [
            RuleRecord(
                tuple(d["antecedent"]),
                tuple(d["consequent"]),
                *(float(d[c]) for c in CSV_COLUMNS[2:]),
            )
            for d in payload["rules"]
        ]
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise ValueError(f"unexpected rule CSV header {reader.fieldnames!r}")
    return [
        RuleRecord(
            _split_terms(row["antecedent"]),
            _split_terms(row["consequent"]),
            *(float(row[c]) for c in CSV_COLUMNS[2:]),
        )
        for row in reader
    ]


def read_rules(path: str | Path) -> list[RuleRecord]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))
