"""Command-line entry point: build-corpus, run, drift, report.

Configuration comes from an optional TOML file layered under flag overrides
(flags win); the fully resolved configuration is echoed next to the outputs.
The TEMPSTANCE_THREADS environment variable caps grid workers (default 1 so
runs stay bit-reproducible).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from . import corpus as corpus_mod
from .alignment import StrategyKind
from .classifier import ClassifierConfig
from .embedding import EmbeddingConfig
from .errors import TempStanceError
from .experiment import (
    ExperimentData,
    ExperimentSpec,
    aggregate_by_gap,
    emit_report,
    grid_pairs,
    render_from_pairs,
    run_grid,
)
from .synthetic import SyntheticDriftConfig, generate_synthetic_corpus


def _parse_years(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def _parse_strategies(text: str) -> tuple:
    if text.strip().lower() == "all":
        return tuple(StrategyKind)
    return tuple(StrategyKind(part.strip().lower()) for part in text.split(","))


def _parse_seeds(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


@dataclass
class RunConfig:
    """Fully resolved run configuration, serialized alongside outputs."""

    corpus_dir: str
    out_dir: str
    years: tuple
    strategies: tuple
    seeds: tuple
    embedding: EmbeddingConfig
    classifier: ClassifierConfig
    ite_mode: str = "update"
    align_repr: str = "target"
    threads: int = 1

    def to_toml(self) -> str:
        def value(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, str):
                return json.dumps(v)
            if isinstance(v, (list, tuple)):
                return "[" + ", ".join(value(x) for x in v) + "]"
            return repr(v)

        lines = ["[run]"]
        lines.append(f"corpus_dir = {value(self.corpus_dir)}")
        lines.append(f"out_dir = {value(self.out_dir)}")
        lines.append(f"years = {value(list(self.years))}")
        lines.append(f"strategies = {value([s.value for s in self.strategies])}")
        lines.append(f"seeds = {value(list(self.seeds))}")
        lines.append(f"ite_mode = {value(self.ite_mode)}")
        lines.append(f"align_repr = {value(self.align_repr)}")
        lines.append(f"threads = {self.threads}")
        lines.append("")
        lines.append("[embedding]")
        for f in fields(EmbeddingConfig):
            lines.append(f"{f.name} = {value(getattr(self.embedding, f.name))}")
        lines.append("")
        lines.append("[classifier]")
        for f in fields(ClassifierConfig):
            lines.append(f"{f.name} = {value(getattr(self.classifier, f.name))}")
        return "\n".join(lines) + "\n"


def _require_file(path, what: str):
    if not Path(path).exists():
        print(f"error: {what} not found: {path}", file=sys.stderr)
        raise SystemExit(2)


def _section(config_file: dict, name: str) -> dict:
    return dict(config_file.get(name, {}))


def _resolve_run_config(args) -> RunConfig:
    file_cfg = {}
    if args.config:
        _require_file(args.config, "config file")
        with open(args.config, "rb") as fh:
            file_cfg = tomllib.load(fh)
    run_sec = _section(file_cfg, "run")

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        if key in run_sec:
            return run_sec[key]
        return default

    corpus_dir = pick(args.corpus, "corpus_dir", None)
    if corpus_dir is None:
        print("error: --corpus (or corpus_dir in the config file) is required", file=sys.stderr)
        raise SystemExit(2)
    out_dir = pick(args.out, "out_dir", "out")

    years_raw = pick(args.years, "years", None)
    if years_raw is None:
        slices, _ = corpus_mod.load_corpus_dir(corpus_dir)
        years = tuple(sorted(slices))
    elif isinstance(years_raw, str):
        years = _parse_years(years_raw)
    else:
        years = tuple(int(y) for y in years_raw)

    strategies_raw = pick(args.strategies, "strategies", "all")
    if isinstance(strategies_raw, str):
        strategies = _parse_strategies(strategies_raw)
    else:
        strategies = tuple(StrategyKind(s) for s in strategies_raw)

    seeds_raw = pick(args.seeds, "seeds", (1,))
    if isinstance(seeds_raw, str):
        seeds = _parse_seeds(seeds_raw)
    else:
        seeds = tuple(int(s) for s in seeds_raw)

    embedding = EmbeddingConfig(**_section(file_cfg, "embedding"))
    classifier = ClassifierConfig(**_section(file_cfg, "classifier"))
    emb_overrides = {
        "dim": args.dim,
        "window": args.window,
        "negatives": args.negatives,
        "epochs": args.emb_epochs,
        "min_count": args.min_count,
    }
    embedding = replace(embedding, **{k: v for k, v in emb_overrides.items() if v is not None})
    clf_overrides = {
        "lr": args.clf_lr,
        "epochs": args.clf_epochs,
        "batch_size": args.batch_size,
        "max_len": args.max_len,
        "num_filters": args.filters,
        "kernel_width": args.kernel_width,
    }
    classifier = replace(classifier, **{k: v for k, v in clf_overrides.items() if v is not None})

    threads = int(os.environ.get("TEMPSTANCE_THREADS", "1"))
    return RunConfig(
        corpus_dir=str(corpus_dir),
        out_dir=str(out_dir),
        years=years,
        strategies=strategies,
        seeds=seeds,
        embedding=embedding,
        classifier=classifier,
        ite_mode=pick(args.ite_mode, "ite_mode", "update"),
        align_repr=pick(args.align_repr, "align_repr", "target"),
        threads=max(1, threads),
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_corpus(args) -> int:
    out = Path(args.out)
    if args.synthetic:
        config = SyntheticDriftConfig(
            num_years=args.years if args.years is not None else 6,
            docs_per_year=args.docs_per_year,
            base_vocab_size=args.vocab_size,
            lexical_drift_rate=args.drift,
            association_drift_rate=args.assoc_drift,
            stance_marker_count=args.markers,
            seed=args.seed,
        )
        slices, dataset = generate_synthetic_corpus(config)
        corpus_mod.save_corpus_dir(out, {sl.year: sl for sl in slices}, dataset)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "corpus_meta.json", "w", encoding="utf-8") as fh:
            json.dump({"synthetic": asdict(config)}, fh, indent=2, sort_keys=True)
        print(f"wrote synthetic corpus ({config.num_years} years) to {out}")
        return 0

    if not args.input:
        print("error: --input is required unless --synthetic is set", file=sys.stderr)
        return 2
    _require_file(args.input, "input posts file")
    _require_file(args.lexicon, "lexicon file")
    lexicon = corpus_mod.HashtagLexicon.from_file(args.lexicon)
    posts = corpus_mod.read_posts_jsonl(args.input)
    result = corpus_mod.ingest(posts, lexicon)
    dataset = corpus_mod.balance_and_split(
        result.labelled_by_year,
        train_frac=args.train_frac,
        eval_frac=args.eval_frac,
        seed=args.seed,
        balance=not args.no_balance,
    )
    corpus_mod.save_corpus_dir(out, result.slices, dataset)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ingest_stats.json").write_text(result.stats.to_json() + "\n", encoding="utf-8")
    print(f"wrote corpus for {len(result.slices)} years to {out}")
    return 0


def cmd_run(args) -> int:
    config = _resolve_run_config(args)
    _require_file(config.corpus_dir, "corpus directory")
    spec = ExperimentSpec(
        years=config.years,
        strategies=config.strategies,
        seeds=config.seeds,
        embedding=config.embedding,
        classifier=config.classifier,
        ite_mode=config.ite_mode,
        align_repr=config.align_repr,
        corpus_dir=config.corpus_dir,
    )
    spec.validate()
    if args.dry_run:
        pairs = grid_pairs(config.years)
        print(f"{len(pairs)} (source, target) pairs per strategy")
        print(f"{len(config.strategies)} strategies x {len(config.seeds)} seeds "
              f"= {len(pairs) * len(config.strategies) * len(config.seeds)} runs")
        return 0
    slices, labelled = corpus_mod.load_corpus_dir(config.corpus_dir)
    data = ExperimentData(slices=slices, labelled=labelled)
    results = run_grid(spec, data, threads=config.threads)
    aggregates = aggregate_by_gap(results)
    out = Path(config.out_dir)
    written = emit_report(aggregates, results, out)
    (out / "run_config.toml").write_text(config.to_toml(), encoding="utf-8")
    for path in written:
        print(f"wrote {path}")
    print(f"wrote {out / 'run_config.toml'}")
    return 0


def cmd_drift(args) -> int:
    _require_file(args.corpus, "corpus directory")
    slices, labelled = corpus_mod.load_corpus_dir(args.corpus)
    vocabs = {}
    if args.vocab_source == "slices" or not labelled.splits:
        for year, sl in slices.items():
            vocabs[year] = {tok for doc in sl.documents for tok in doc}
    else:
        for year in labelled.years:
            vocabs[year] = {tok for post in labelled.year(year).test for tok in post.tokens}
    years, matrix = corpus_mod.jaccard_matrix(vocabs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("year," + ",".join(str(y) for y in years) + "\n")
        for i, year in enumerate(years):
            fh.write(str(year) + "," + ",".join(f"{v:.6g}" for v in matrix[i]) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    _require_file(args.pairs, "pairs.csv file")
    written = render_from_pairs(args.pairs, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempstance",
        description="Temporally adaptive stance classification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build-corpus", help="ingest posts or generate a synthetic corpus")
    p_build.add_argument("--input", help="JSONL posts file ({'text','year',optional 'label'})")
    p_build.add_argument("--lexicon", help="JSON hashtag lexicon {'support': [...], 'oppose': [...]}")
    p_build.add_argument("--out", required=True, help="output corpus directory")
    p_build.add_argument("--train-frac", type=float, default=corpus_mod.DEFAULT_TRAIN_FRAC)
    p_build.add_argument("--eval-frac", type=float, default=corpus_mod.DEFAULT_EVAL_FRAC)
    p_build.add_argument("--no-balance", action="store_true", help="skip label downsampling")
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--synthetic", action="store_true", help="generate a drifting synthetic corpus")
    p_build.add_argument("--years", type=int, help="synthetic: number of years")
    p_build.add_argument("--docs-per-year", type=int, default=2000)
    p_build.add_argument("--vocab-size", type=int, default=600)
    p_build.add_argument("--markers", type=int, default=20)
    p_build.add_argument("--drift", type=float, default=0.1, help="lexical drift rate per year")
    p_build.add_argument("--assoc-drift", type=float, default=0.0, help="stance flip rate per year")
    p_build.set_defaults(func=cmd_build_corpus)

    p_run = sub.add_parser("run", help="run the temporal persistence grid and emit reports")
    p_run.add_argument("--config", help="TOML config file; flags override it")
    p_run.add_argument("--corpus", help="corpus directory from build-corpus")
    p_run.add_argument("--out", help="output directory (default: out)")
    p_run.add_argument("--years", help="'2014..2019' or comma list (default: all corpus years)")
    p_run.add_argument("--strategies", help="comma list of dte,ite,2te,ita,2ta or 'all'")
    p_run.add_argument("--seeds", help="comma list of seeds (default: 1)")
    p_run.add_argument("--dim", type=int)
    p_run.add_argument("--window", type=int)
    p_run.add_argument("--negatives", type=int)
    p_run.add_argument("--emb-epochs", type=int)
    p_run.add_argument("--min-count", type=int)
    p_run.add_argument("--clf-lr", type=float)
    p_run.add_argument("--clf-epochs", type=int)
    p_run.add_argument("--batch-size", type=int)
    p_run.add_argument("--max-len", type=int)
    p_run.add_argument("--filters", type=int)
    p_run.add_argument("--kernel-width", type=int)
    p_run.add_argument("--ite-mode", choices=("update", "retrain"))
    p_run.add_argument("--align-repr", choices=("target", "dual"))
    p_run.add_argument("--dry-run", action="store_true", help="print the planned grid and exit")
    p_run.set_defaults(func=cmd_run)

    p_drift = sub.add_parser("drift", help="emit the year-by-year vocabulary Jaccard matrix")
    p_drift.add_argument("--corpus", required=True)
    p_drift.add_argument("--out", required=True, help="output CSV path")
    p_drift.add_argument("--vocab-source", choices=("test", "slices"), default="test")
    p_drift.set_defaults(func=cmd_drift)

    p_report = sub.add_parser("report", help="re-render reports from an existing pairs.csv")
    p_report.add_argument("--pairs", required=True)
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TempStanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
