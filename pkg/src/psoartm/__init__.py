"""Association rule text mining with particle swarm optimization."""

from psoartm.corpus import (
    TransactionDatabase,
    Vocabulary,
    build_transaction_db,
    build_vocabulary,
    preprocess,
    tokenize,
)
from psoartm.metrics import Rule, RuleMetrics, Thresholds, enumerate_rules
from psoartm.miner import MinerConfig, MiningResult, decode, mine, statistics, sweep
from psoartm.pso import PsoParams, run

__version__ = "0.1.0"

__all__ = [
    "MinerConfig",
    "MiningResult",
    "PsoParams",
    "Rule",
    "RuleMetrics",
    "Thresholds",
    "TransactionDatabase",
    "Vocabulary",
    "build_transaction_db",
    "build_vocabulary",
    "decode",
    "enumerate_rules",
    "mine",
    "preprocess",
    "run",
    "statistics",
    "sweep",
    "tokenize",
]
