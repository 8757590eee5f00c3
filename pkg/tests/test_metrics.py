import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psoartm import metrics
from psoartm.metrics import (
    EnumerationTooLarge,
    Rule,
    RuleMetrics,
    Thresholds,
    aws,
    confidence,
    enumerate_rules,
    presence,
    support,
)

from conftest import db_from_token_lists, random_token_docs


def _recount(docs, terms_in_order, k_max, s_min=0.0, c_min=0.0):
    """Independent oracle: bitmask enumeration over a dense 0/1 matrix."""
    m = len(terms_in_order)
    present = np.array([[t in set(doc) for t in terms_in_order] for doc in docs])
    n = len(docs)
    out = {}
    for mask in range(1 << m):
        members = [j for j in range(m) if mask >> j & 1]
        if not 2 <= len(members) <= k_max:
            continue
        n_xy = int(present[:, members].all(axis=1).sum())
        sub = (mask - 1) & mask
        while sub:
            ant = [j for j in members if sub >> j & 1]
            cons = [j for j in members if not sub >> j & 1]
            n_x = int(present[:, ant].all(axis=1).sum())
            s = n_xy / n
            c = n_xy / n_x if n_x else 0.0
            if s >= s_min and c >= c_min:
                out[(tuple(ant), tuple(cons))] = (s, c)
            sub = (sub - 1) & mask
    return out


@pytest.fixture
def toy():
    # term order after vocabulary sort: a(3) b(2) c(1) d(1)
    docs = [["a", "b"], ["a", "b", "c"], ["a", "d"]]
    return docs, db_from_token_lists(docs)


def test_rule_validation():
    with pytest.raises(ValueError):
        Rule(frozenset(), frozenset({1}))
    with pytest.raises(ValueError):
        Rule({1, 2}, {2, 3})
    r = Rule({3, 1}, {2})
    assert r.key == ((1, 3), (2,)) and len(r) == 3


def test_presence(toy):
    docs, db = toy
    idx = db.vocabulary.index
    assert presence(db, 1, idx["c"])
    assert not presence(db, 0, idx["c"])
    # "a" occurs everywhere: zero weight, still present
    assert db.weights.toarray()[:, idx["a"]].sum() == 0
    assert all(presence(db, i, idx["a"]) for i in range(3))


def test_support_examples(toy):
    docs, db = toy
    idx = db.vocabulary.index
    a, b, c, d = idx["a"], idx["b"], idx["c"], idx["d"]
    assert support(db, Rule({a}, {b})) == 2 / 3
    assert support(db, Rule({b}, {a})) == 2 / 3
    docs_all = db_from_token_lists([["x", "y"], ["x", "y", "z"]])
    assert support(docs_all, Rule({0}, {1})) == 1.0
    assert support(db, Rule({c}, {d})) == 0.0


def test_confidence_examples():
    # X = {p} in 4 docs, X and Y = {q} together in 3
    db = db_from_token_lists([["p", "q"], ["p", "q"], ["p", "q"], ["p"], ["q"]])
    p, q = db.vocabulary.index["p"], db.vocabulary.index["q"]
    assert confidence(db, Rule({p}, {q})) == 0.75
    db2 = db_from_token_lists([["p", "q"], ["q"], ["r"]])
    idx = db2.vocabulary.index
    assert confidence(db2, Rule({idx["p"]}, {idx["q"]})) == 1.0
    assert confidence(db2, Rule({idx["r"], idx["p"]}, {idx["q"]})) == 0.0


def test_aws_examples(toy):
    _, db = toy
    w = db.weights.toarray()
    raw, _ = aws(db, range(db.n_terms), 4)
    assert raw == pytest.approx(w.sum(), abs=1e-15)
    assert aws(db, {db.vocabulary.index["a"]}, 4)[0] == 0.0
    raw, norm = aws(db, {0, 3}, 2)
    assert raw == w[:, 0].sum() + w[:, 3].sum()
    top2 = sorted(w.sum(axis=0))[-2:]
    assert norm == pytest.approx(raw / sum(top2))


def test_aws_additive_and_bounded():
    rng = np.random.default_rng(11)
    for _ in range(30):
        db = db_from_token_lists(random_token_docs(rng, 10, 7))
        for a in range(7):
            for b in range(a + 1, 7):
                assert aws(db, {a, b}, 3)[0] == aws(db, {a}, 3)[0] + aws(db, {b}, 3)[0]
        for _ in range(20):
            k = int(rng.integers(1, 8))
            terms = set(rng.choice(7, size=int(rng.integers(1, k + 1)), replace=False).tolist())
            assert 0.0 <= aws(db, terms, k)[1] <= 1.0


def test_aws_zero_matrix_normalizes_to_zero():
    db = db_from_token_lists([["a", "b"]])
    assert aws(db, {0, 1}, 2) == (0.0, 0.0)


def test_weighted_fitness_arithmetic():
    assert metrics.weighted_fitness(0.5, 1.0, 0.25) == pytest.approx(0.5833333333333334, abs=1e-15)
    assert metrics.weighted_fitness(1.0, 1.0, 1.0, (0.3, 2.0, 5.0)) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_support_confidence_properties(seed):
    rng = np.random.default_rng(seed)
    db = db_from_token_lists(random_token_docs(rng, int(rng.integers(1, 12)), 5))
    for ant in range(5):
        for cons in range(5):
            if ant == cons:
                continue
            rule, flipped = Rule({ant}, {cons}), Rule({cons}, {ant})
            s, c = support(db, rule), confidence(db, rule)
            assert 0.0 <= s <= c <= 1.0
            assert s == support(db, flipped)


def test_enumerate_counts_bipartitions():
    db = db_from_token_lists([["a", "b", "c"], ["a", "b", "c"]])
    rules = enumerate_rules(db, 2)
    assert len(rules) == 6
    assert [r.key for r, _ in rules] == sorted(r.key for r, _ in rules)


def test_enumerate_zero_support_terms():
    # "b" occurs in a single doc with "a"; rule {a}=>{b} has support 1/2
    db = db_from_token_lists([["a"], ["a", "b"], ["a"]])
    assert len(enumerate_rules(db, 2, Thresholds(0.0, 0.0))) == 2
    db = db_from_token_lists([["a", "x"], ["b"], ["a"]])
    zero = [r for r, m in enumerate_rules(db, 2) if m.support == 0]
    assert zero
    assert all(m.support > 0 for _, m in enumerate_rules(db, 2, Thresholds(1e-9, 0.0)))


def test_enumerate_guard():
    db = db_from_token_lists([[f"w{j}" for j in range(16)], ["w0"]])
    with pytest.raises(EnumerationTooLarge):
        enumerate_rules(db, 2)
    assert enumerate_rules(db, 2, force=True)


@pytest.mark.parametrize("seed", range(6))
def test_enumerate_matches_independent_recount(seed):
    rng = np.random.default_rng(seed)
    docs = random_token_docs(rng, int(rng.integers(3, 20)), 4)
    db = db_from_token_lists(docs)
    k_max = int(rng.integers(2, 5))
    th = Thresholds(float(rng.choice([0.0, 0.2])), float(rng.choice([0.0, 0.5])))
    got = {r.key: (m.support, m.confidence) for r, m in enumerate_rules(db, k_max, th)}
    assert got == _recount(docs, db.vocabulary.terms, k_max, th.s_min, th.c_min)


def test_enumerate_rescoring_is_stable():
    rng = np.random.default_rng(9)
    db = db_from_token_lists(random_token_docs(rng, 15, 6))
    for rule, m in enumerate_rules(db, 4):
        assert m == metrics.score(db, rule, 4)
        assert m.support == support(db, rule) and m.confidence == confidence(db, rule)


def test_score_modes(toy):
    _, db = toy
    rule = Rule({1}, {2, 3})
    norm = metrics.score(db, rule, 3)
    raw = metrics.score(db, rule, 3, aws_mode=metrics.AWS_RAW)
    assert norm.fitness == pytest.approx((norm.support + norm.confidence + norm.aws_norm) / 3)
    assert raw.fitness == pytest.approx((raw.support + raw.confidence + raw.aws_raw) / 3)
    with pytest.raises(ValueError):
        metrics.score(db, rule, 3, aws_mode="bogus")


def test_rule_csv_and_json_round_trip():
    from psoartm.corpus import Vocabulary

    vocab = Vocabulary(("race", "championship", "skills", "technical"), (4, 3, 2, 1), (1, 1, 1, 1))
    rules = [(Rule({1, 2}, {0, 3}), RuleMetrics(0.1, 0.2, 0.30000000000000004, 0.4, 1 / 3))]
    records = metrics.to_records(rules, vocab)
    assert records[0].antecedent == ("championship", "skills")
    for writer in (metrics.write_rules_csv, metrics.write_rules_json):
        buf = io.StringIO()
        writer(records, buf)
        assert metrics.parse_rules(buf.getvalue()) == records
    buf = io.StringIO()
    metrics.write_rules_csv(records, buf)
    assert buf.getvalue().splitlines()[1].startswith("championship ∧ skills,race ∧ technical,0.1,")
