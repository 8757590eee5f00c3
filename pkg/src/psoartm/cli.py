"""Command-line interface: ``psoartm {ingest,mine,sweep,top-terms,show}``.

Exit codes: 0 success, 1 unreadable input, 2 empty corpus, 3 invalid
parameters.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

from psoartm import corpus, metrics, miner

EXIT_OK = 0
EXIT_IO = 1
EXIT_EMPTY = 2
EXIT_CONFIG = 3

DEFAULT_SEED = 0
DEFAULT_TOP_TERMS = 15
DEFAULT_SHOW = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _error(message: str) -> None:
    print(f"psoartm: {message}", file=sys.stderr)


@contextmanager
def _output(path: Optional[str]):
    """Yield a UTF-8 text stream for ``path``, or stdout when ``path`` is None or '-'."""
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None
    with fh:
        yield fh


def _load_db(path: str) -> corpus.TransactionDatabase:
    try:
        return corpus.load_database(path)
    except (OSError, corpus.DatabaseFormatError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read database {path}: {exc}", EXIT_IO) from None


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def _add_mining_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("mining parameters (override --config)")
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--np", type=int, help="population size (default 200)")
    g.add_argument("--c1", type=float, help="global-best (social) weight (default 2.0)")
    g.add_argument("--c2", type=float, help="personal-best (cognitive) weight (default 2.0)")
    g.add_argument("--inertia", type=float, help="inertia weight (default 0.7)")
    g.add_argument("--nfes", type=int, help="fitness evaluations per run (default 10000)")
    g.add_argument("--runs", type=int, help="independent runs (default 5)")
    g.add_argument("--seed", type=int, help=f"base seed; run i uses seed+i (default {DEFAULT_SEED})")
    g.add_argument("--alpha", type=float, help="support weight (default 1)")
    g.add_argument("--beta", type=float, help="confidence weight (default 1)")
    g.add_argument("--gamma", type=float, help="AWS weight (default 1)")
    g.add_argument("--smin", type=float, help="minimum support (default 0)")
    g.add_argument("--cmin", type=float, help="minimum confidence (default 0)")
    g.add_argument("--aws-mode", choices=metrics.AWS_MODES, help="AWS term of the fitness (default normalized)")
    g.add_argument(
        "--literal-update",
        action="store_true",
        default=None,
        help="move particles by the pre-update velocity",
    )
    g.add_argument("--workers", type=int, default=1, help="processes for independent runs")


def _mining_values(args: argparse.Namespace) -> dict:
    values = {"seed": DEFAULT_SEED}
    if args.config:
        try:
            values.update(miner.read_config_file(args.config))
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_IO) from None
        except ValueError as exc:
            raise CliError(f"bad config: {exc}", EXIT_CONFIG) from None
    for key in miner.CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return values


def _config(values: dict) -> miner.MinerConfig:
    try:
        return miner.config_from_mapping(values)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid parameters: {exc}", EXIT_CONFIG) from None


def parse_k_range(text: str) -> list[int]:
    """``"5:8"`` -> [5, 6, 7, 8]; a single integer gives one value."""
    try:
        if ":" in text:
            lo, hi = (int(part) for part in text.split(":"))
        else:
            lo = hi = int(text)
    except ValueError:
        raise ValueError(f"malformed k range {text!r}; expected LO:HI") from None
    if lo > hi:
        raise ValueError(f"empty k range {text!r}")
    return list(range(lo, hi + 1))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _write_rules(records: Sequence[metrics.RuleRecord], fmt: str, fh) -> None:
    if fmt == "json":
        metrics.write_rules_json(records, fh)
    elif fmt == "table":
        fh.write(render_rule_table(records))
    else:
        metrics.write_rules_csv(records, fh)


def render_rule_table(records: Sequence[metrics.RuleRecord], top_n: Optional[int] = None) -> str:
    """Rank | antecedent terms | consequent terms, one rule per line."""
    rows = records if top_n is None else records[:top_n]
    lines = ["Rule | Antecedent | Consequence"]
    for rank, r in enumerate(rows, 1):
        lines.append(f"{rank} | {metrics.TERM_JOINER.join(r.antecedent)} | {metrics.TERM_JOINER.join(r.consequent)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.vmax is not None and args.vmax < 1:
        raise CliError("--vmax must be positive", EXIT_CONFIG)
    try:
        stops = corpus.load_stop_words(args.stopwords)
    except OSError as exc:
        raise CliError(f"cannot read stop words: {exc}", EXIT_IO) from None
    except ValueError as exc:
        raise CliError(f"bad stop-word file: {exc}", EXIT_CONFIG) from None
    try:
        documents = corpus.read_corpus(args.corpus)
    except (OSError, ValueError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read corpus: {exc}", EXIT_IO) from None
    try:
        db = corpus.database_from_documents(documents, stops, args.vmax or corpus.DEFAULT_VMAX)
    except corpus.EmptyCorpusError as exc:
        raise CliError(f"{args.corpus}: {exc}", EXIT_EMPTY) from None
    try:
        corpus.save_database(db, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    print(f"N={db.n_docs} M={db.n_terms} dropped={len(db.dropped)}", file=sys.stderr)
    return EXIT_OK


def cmd_mine(args: argparse.Namespace) -> int:
    config = _config(_mining_values(args))
    db = _load_db(args.db)
    try:
        result = miner.mine(db, config, workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    records = metrics.to_records(result.archive.ranked(), db.vocabulary)
    if not records:
        _error("warning: no rules found")
    with _output(args.out) as fh:
        _write_rules(records, args.format, fh)
    if args.history:
        with _output(args.history) as fh:
            fh.write("run,generation,best_fitness\n")
            for run_index, history in enumerate(result.histories):
                fh.writelines(f"{run_index},{gen},{value!r}\n" for gen, value in enumerate(history))
    sys.stderr.write(miner.format_statistics_table([(config.k, result.stats)]))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        k_values = parse_k_range(args.k_range)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    base = _config(_mining_values(args))
    try:
        configs = [base.with_k(k) for k in k_values]
    except ValueError as exc:
        raise CliError(f"invalid parameters: {exc}", EXIT_CONFIG) from None
    db = _load_db(args.db)
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    columns = []
    for cfg in configs:
        try:
            result = miner.mine(db, cfg, workers=args.workers)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None
        columns.append((cfg.k, result.stats))
        if args.out_dir:
            ext = "json" if args.format == "json" else "csv"
            path = Path(args.out_dir) / f"rules_k{cfg.k}.{ext}"
            records = metrics.to_records(result.archive.ranked(), db.vocabulary)
            with _output(str(path)) as fh:
                _write_rules(records, ext, fh)
    sys.stdout.write(miner.format_statistics_table(columns))
    return EXIT_OK


def cmd_top_terms(args: argparse.Namespace) -> int:
    if args.top < 1:
        raise CliError("the number of terms must be positive", EXIT_CONFIG)
    db = _load_db(args.db)
    rows = corpus.top_terms(db.vocabulary, args.top)
    with _output(args.out) as fh:
        if args.format == "csv":
            fh.write("term,count\n")
            fh.writelines(f"{term},{count}\n" for term, count in rows)
        else:
            width = max((len(t) for t, _ in rows), default=4)
            fh.writelines(f"{term.ljust(width)}  {count}\n" for term, count in rows)
    return EXIT_OK


def cmd_show(args: argparse.Namespace) -> int:
    if args.top < 0:
        raise CliError("--top must be >= 0", EXIT_CONFIG)
    try:
        records = metrics.read_rules(args.rules)
    except (OSError, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read rules {args.rules}: {exc}", EXIT_IO) from None
    sys.stdout.write(render_rule_table(records, args.top))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psoartm", description="Association rule text mining with PSO.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a TF-ITF transaction database from a corpus")
    p.add_argument("corpus", help="directory of .txt files or a JSON-lines feed file")
    p.add_argument("--out", required=True, help="database JSON to write")
    p.add_argument("--stopwords", help="stop-word file (default: bundled English list)")
    p.add_argument("--vmax", type=int, help=f"vocabulary cap (default {corpus.DEFAULT_VMAX})")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine", help="mine rules for one K")
    p.add_argument("db", help="transaction database JSON")
    p.add_argument("--k", type=int, help="maximum terms per rule (default 5)")
    _add_mining_flags(p)
    p.add_argument("--format", choices=("csv", "json", "table"), default="csv")
    p.add_argument("--out", help="rule file to write (default stdout)")
    p.add_argument("--history", help="write per-run convergence CSV here")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("sweep", help="mine for a range of K and tabulate rule statistics")
    p.add_argument("db", help="transaction database JSON")
    p.add_argument("--k-range", default="5:8", help="inclusive LO:HI (default 5:8)")
    _add_mining_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="format of per-K rule dumps")
    p.add_argument("--out-dir", help="directory for per-K rule dumps rules_k<K>.<ext>")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("top-terms", help="most frequent vocabulary terms")
    p.add_argument("db", help="transaction database JSON")
    p.add_argument("--k", "-n", "--top", dest="top", type=int, default=DEFAULT_TOP_TERMS)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", help="file to write (default stdout)")
    p.set_defaults(func=cmd_top_terms)

    p = sub.add_parser("show", help="print rules as a table")
    p.add_argument("rules", help="rule file (CSV or JSON)")
    p.add_argument("--top", "-n", type=int, default=DEFAULT_SHOW)
    p.set_defaults(func=cmd_show)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 means "empty corpus" here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        _error(str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
