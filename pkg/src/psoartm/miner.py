"""Rule search over a transaction database with the swarm optimizer.

A particle of dimension ``k + 1`` encodes one rule.  The first ``k``
coordinates each pick a term by bucketing [0, 1] into the vocabulary
(several coordinates may pick the same term, so rules can be shorter than
``k``); the last coordinate places the cut between antecedent and
consequent.  Every evaluated particle is decoded and, if it passes the
thresholds, stored in a deduplicating archive.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from psoartm import pso
from psoartm.corpus import TransactionDatabase
from psoartm.metrics import (
    AWS_MODES,
    AWS_NORMALIZED,
    Rule,
    RuleMetrics,
    Thresholds,
    score,
)
from psoartm.pso import PsoParams

logger = logging.getLogger(__name__)

RuleKey = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass(frozen=True)
class MinerConfig:
    k: int = 5
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    thresholds: Thresholds = Thresholds()
    num_runs: int = 5
    aws_mode: str = AWS_NORMALIZED
    pso: Optional[PsoParams] = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("fitness weights must be non-negative")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("fitness weights must not all be zero")
        if self.num_runs < 1:
            raise ValueError(f"num_runs must be >= 1, got {self.num_runs}")
        if self.aws_mode not in AWS_MODES:
            raise ValueError(f"aws_mode must be one of {AWS_MODES}, got {self.aws_mode!r}")
        if self.pso is None:
            object.__setattr__(self, "pso", PsoParams(dim=self.k + 1))
        elif self.pso.dim != self.k + 1:
            raise ValueError(f"pso.dim must be k + 1 = {self.k + 1}, got {self.pso.dim}")

    @property
    def weights(self) -> tuple[float, float, float]:
        return self.alpha, self.beta, self.gamma

    def with_k(self, k: int) -> "MinerConfig":
        return dataclasses.replace(self, k=k, pso=dataclasses.replace(self.pso, dim=k + 1))


class DecodedRule(NamedTuple):
    rule: Optional[Rule]
    distinct_terms: tuple[int, ...]
    cut_point: int

    @property
    def feasible(self) -> bool:
        return self.rule is not None


def decode(position: Sequence[float], k: int, m: int) -> DecodedRule:
    """Map a position in [0, 1]^(k+1) to a rule over ``m`` terms.

    Coordinate ``j < k`` selects term ``min(floor(x_j * m), m - 1)``.
    Repeated terms collapse, keeping first occurrences in order.  With ``n``
    distinct terms the last coordinate chooses one of the ``n - 1`` cuts.
    Fewer than two distinct terms is infeasible (``rule`` is None).
    """
    if len(position) != k + 1:
        raise ValueError(f"position has length {len(position)}, expected {k + 1}")
    if m < 2:
        raise ValueError(f"need at least 2 terms, got {m}")
    values = position.tolist() if isinstance(position, np.ndarray) else list(position)
    distinct: list[int] = []
    for x in values[:k]:
        t = min(int(x * m), m - 1)
        if t not in distinct:
            distinct.append(t)
    n = len(distinct)
    if n < 2:
        return DecodedRule(None, tuple(distinct), 0)
    cut = 1 + min(int(values[k] * (n - 1)), n - 2)
    rule = Rule(frozenset(distinct[:cut]), frozenset(distinct[cut:]))
    return DecodedRule(rule, tuple(distinct), cut)


def fitness(db: TransactionDatabase, decoded: DecodedRule, config: MinerConfig) -> float:
    if decoded.rule is None:
        return 0.0
    return score(db, decoded.rule, config.k, config.weights, config.aws_mode).fitness


class RuleArchive:
    """Distinct rules keyed canonically; the first insertion of a key wins."""

    def __init__(self):
        self.entries: dict[RuleKey, RuleMetrics] = {}
        self.insertions = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: RuleKey) -> bool:
        return key in self.entries

    def add(self, key: RuleKey, metrics: RuleMetrics) -> bool:
        self.insertions += 1
        if key in self.entries:
            return False
        self.entries[key] = metrics
        return True

    def merge(self, other: "RuleArchive") -> None:
        for key, metrics in other.entries.items():
            self.add(key, metrics)

    def rules(self) -> Iterator[tuple[Rule, RuleMetrics]]:
        for (ant, cons), metrics in self.entries.items():
            yield Rule(frozenset(ant), frozenset(cons)), metrics

    def ranked(self) -> list[tuple[Rule, RuleMetrics]]:
        """Rules by fitness descending, then support descending, then key."""
        order = sorted(self.entries.items(), key=lambda kv: (-kv[1].fitness, -kv[1].support, kv[0]))
        return [(Rule(frozenset(a), frozenset(c)), m) for (a, c), m in order]


class RuleStats(NamedTuple):
    rule_count: int
    avg_antecedent: float
    avg_consequent: float


@dataclass
class MiningResult:
    archive: RuleArchive
    run_archives: list[RuleArchive] = field(default_factory=list)
    histories: list[list[float]] = field(default_factory=list)
    best_fitness: list[float] = field(default_factory=list)

    @property
    def stats(self) -> RuleStats:
        return statistics(self)


class _RuleSearch:
    """Objective plus harvest callback for one run.

    ``harvest`` relies on being called right after ``__call__`` for the same
    position, which is the optimizer's contract.
    """

    def __init__(self, db: TransactionDatabase, config: MinerConfig, archive: RuleArchive):
        self.db = db
        self.config = config
        self.archive = archive
        self.cache: dict[RuleKey, RuleMetrics] = {}
        self._last: Optional[tuple[RuleKey, RuleMetrics]] = None

    def __call__(self, position: np.ndarray) -> float:
        decoded = decode(position, self.config.k, self.db.n_terms)
        if decoded.rule is None:
            self._last = None
            return 0.0
        key = decoded.rule.key
        metrics = self.cache.get(key)
        if metrics is None:
            metrics = score(self.db, decoded.rule, self.config.k, self.config.weights, self.config.aws_mode)
            self.cache[key] = metrics
        self._last = (key, metrics)
        return metrics.fitness

    def harvest(self, position: np.ndarray, value: float) -> None:
        if self._last is None:
            return
        key, metrics = self._last
        if metrics.support > 0 and self.config.thresholds.admits(metrics.support, metrics.confidence):
            self.archive.add(key, metrics)


def _run_seed(config: MinerConfig, run_index: int) -> Optional[int]:
    seed = config.pso.seed
    return None if seed is None else seed + run_index


def mine_once(db: TransactionDatabase, config: MinerConfig, run_index: int = 0) -> tuple[RuleArchive, pso.RunResult]:
    """One independent optimizer run, seeded with ``seed + run_index``."""
    archive = RuleArchive()
    search = _RuleSearch(db, config, archive)
    params = dataclasses.replace(config.pso, seed=_run_seed(config, run_index))
    result = pso.run(params, search, search.harvest)
    return archive, result


def _mine_once_star(args):
    return mine_once(*args)


def mine(db: TransactionDatabase, config: MinerConfig, workers: int = 1) -> MiningResult:
    """Run ``config.num_runs`` independent searches and pool their rules.

    With ``workers > 1`` runs execute in separate processes; the pooled
    archive is merged in run order either way, so results do not depend on
    ``workers``.
    """
    if db.n_terms < 2:
        raise ValueError(f"need at least 2 terms to mine rules, got {db.n_terms}")
    jobs = [(db, config, i) for i in range(config.num_runs)]
    if workers > 1 and config.num_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_mine_once_star, jobs))
    else:
        outcomes = [mine_once(*job) for job in jobs]

    pooled = RuleArchive()
    result = MiningResult(pooled)
    for run_index, (archive, run_result) in enumerate(outcomes):
        pooled.merge(archive)
        result.run_archives.append(archive)
        result.histories.append(run_result.history)
        result.best_fitness.append(run_result.best_fitness)
        logger.info(
            "run %d: best fitness %.6f, %d rules (%d pooled)",
            run_index, run_result.best_fitness, len(archive), len(pooled),
        )
    return result


def statistics(result: MiningResult | RuleArchive) -> RuleStats:
    archive = result.archive if isinstance(result, MiningResult) else result
    n = len(archive)
    if n == 0:
        return RuleStats(0, 0.0, 0.0)
    ant = sum(len(a) for a, _ in archive.entries)
    cons = sum(len(c) for _, c in archive.entries)
    return RuleStats(n, ant / n, cons / n)


def sweep(
    db: TransactionDatabase,
    base_config: MinerConfig,
    k_values: Iterable[int],
    workers: int = 1,
) -> list[tuple[int, MiningResult]]:
    """Mine once per rule-length cap ``k``."""
    configs = [(k, base_config.with_k(k)) for k in k_values]
    return [(k, mine(db, cfg, workers)) for k, cfg in configs]


STAT_ROWS = ("No. Rules", "Avg Ant.", "Avg Cons.")


def format_statistics_table(columns: Sequence[tuple[int, RuleStats]]) -> str:
    """Rule statistics with one column per ``k``; averages to 3 decimals."""
    if not columns:
        return ""
    header = ["K"] + [str(k) for k, _ in columns]
    rows = [
        header,
        [STAT_ROWS[0]] + [str(s.rule_count) for _, s in columns],
        [STAT_ROWS[1]] + [f"{s.avg_antecedent:.3f}" for _, s in columns],
        [STAT_ROWS[2]] + [f"{s.avg_consequent:.3f}" for _, s in columns],
    ]
    label_width = max(len(r[0]) for r in rows)
    col_width = max(len(cell) for r in rows for cell in r[1:])
    lines = [r[0].ljust(label_width) + "".join("  " + c.rjust(col_width) for c in r[1:]) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Configuration file
# ---------------------------------------------------------------------------

# key -> converter; keys match the long command-line flags
CONFIG_KEYS = {
    "k": int,
    "np": int,
    "c1": float,
    "c2": float,
    "inertia": float,
    "nfes": int,
    "runs": int,
    "seed": int,
    "alpha": float,
    "beta": float,
    "gamma": float,
    "smin": float,
    "cmin": float,
    "aws_mode": str,
    "literal_update": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path: str | Path) -> dict:
    """Read a ``key = value`` mining configuration.

    The file may carry a ``[mine]`` section header; keys outside
    ``CONFIG_KEYS`` are rejected.  ``#`` and ``;`` start comments.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[mine]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    if not parser.has_section("mine"):
        raise ValueError(f"{path}: missing [mine] section")
    out = {}
    for key, raw in parser.items("mine"):
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}: unknown key {key!r}")
        out[key] = CONFIG_KEYS[key](raw)
    return out


def config_from_mapping(values: dict) -> MinerConfig:
    """Build a MinerConfig from flag-style keys; missing keys take defaults."""
    k = values.get("k")
    if k is None:
        k = 5
    pso_kwargs = {
        name: values[key]
        for key, name in (
            ("np", "pop_size"),
            ("c1", "c1"),
            ("c2", "c2"),
            ("inertia", "inertia"),
            ("nfes", "n_fes"),
            ("seed", "seed"),
            ("literal_update", "literal_position_update"),
        )
        if values.get(key) is not None
    }
    thresholds = Thresholds(values.get("smin", 0.0), values.get("cmin", 0.0))
    miner_kwargs = {
        name: values[key]
        for key, name in (("alpha", "alpha"), ("beta", "beta"), ("gamma", "gamma"), ("runs", "num_runs"), ("aws_mode", "aws_mode"))
        if values.get(key) is not None
    }
    return MinerConfig(k=k, thresholds=thresholds, pso=PsoParams(dim=k + 1, **pso_kwargs), **miner_kwargs)
