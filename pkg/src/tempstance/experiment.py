"""Temporal persistence protocol: pair grid, gap aggregation, RPD, reports.

Every (source <= target) year pair is run for every strategy and seed: build
the strategy's embedding, encode source-year train/eval and target-year test
text through it, train the CNN, score test macro-F1. Pair scores are averaged
by temporal gap and each strategy's drop is reported relative to its own gap-0
mean.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .alignment import StrategyKind, StrategyPlan, align_slice, build_embedding, make_plan, train_compass
from .classifier import ClassifierConfig, encode_posts, macro_f1, predict, train_classifier
from .corpus import LabelledDataset, TemporalSlice
from .embedding import EmbeddingConfig, EmbeddingLookup
from .errors import ConfigInvalid, MissingBaseline, MissingYear, ZeroBaseline

_STRATEGY_ORDER = {kind: i for i, kind in enumerate(StrategyKind)}


@dataclass
class ExperimentData:
    """Loaded corpus: per-year unlabelled slices plus labelled splits."""

    slices: Mapping[int, TemporalSlice]
    labelled: LabelledDataset


@dataclass
class ExperimentSpec:
    years: tuple
    strategies: tuple
    seeds: tuple
    embedding: EmbeddingConfig
    classifier: ClassifierConfig
    ite_mode: str = "update"
    align_repr: str = "target"
    corpus_dir: Optional[str] = None

    def validate(self):
        if len(self.years) < 2:
            raise ConfigInvalid("need at least 2 years")
        if not self.seeds:
            raise ConfigInvalid("need at least 1 seed")
        if not self.strategies:
            raise ConfigInvalid("need at least 1 strategy")
        if self.align_repr not in ("target", "dual"):
            raise ConfigInvalid(f"align_repr must be 'target' or 'dual', got {self.align_repr!r}")


@dataclass
class PairResult:
    strategy: StrategyKind
    source_year: int
    target_year: int
    f1_by_seed: dict

    @property
    def gap(self) -> int:
        return self.target_year - self.source_year

    @property
    def mean_f1(self) -> float:
        return float(np.mean(list(self.f1_by_seed.values())))


@dataclass
class GapAggregate:
    strategy: StrategyKind
    gap: int
    mean_f1: float
    rpd: float
    n_pairs: int = 0


def grid_pairs(years: Sequence[int]) -> list:
    """All (source, target) combinations with source <= target."""
    years = sorted(years)
    return [(s, t) for i, s in enumerate(years) for t in years[i:]]


def rpd(f_t0: float, f_tj: float) -> float:
    """Relative performance drop against the gap-0 score; negative = worse."""
    if f_t0 <= 0:
        raise ZeroBaseline(f"gap-0 score must be positive, got {f_t0}")
    return (f_tj - f_t0) / f_t0


# ---------------------------------------------------------------------------
# running pairs


def _lookup_pairs_for_plan(plan, slices, emb_cfg, ite_mode, align_repr):
    """Build (train, test) (vocab, matrix) pairs for one plan."""
    if align_repr == "dual" and plan.kind in (StrategyKind.ITA, StrategyKind.TWO_TA):
        compass = train_compass([slices[y] for y in plan.data_years], emb_cfg)
        source_aligned = align_slice(compass, slices[plan.source_year], emb_cfg)
        target_aligned = align_slice(compass, slices[plan.target_year], emb_cfg)
        return (
            (compass.vocab, source_aligned.input_matrix),
            (compass.vocab, target_aligned.input_matrix),
        )
    look = build_embedding(plan, slices, emb_cfg, ite_mode=ite_mode)
    pair = (look.vocab, look.matrix)
    return pair, pair


def _run_pair_with_lookups(strategy, source, target, data, clf_cfg, seed, train_pair, test_pair):
    train_lookup = EmbeddingLookup(*train_pair)
    test_lookup = EmbeddingLookup(*test_pair)
    source_splits = data.labelled.year(source)
    target_splits = data.labelled.year(target)
    clf_cfg = replace(clf_cfg, seed=seed)
    train_enc = encode_posts(source_splits.train, train_lookup, clf_cfg.max_len)
    eval_enc = encode_posts(source_splits.eval, train_lookup, clf_cfg.max_len)
    test_enc = encode_posts(target_splits.test, test_lookup, clf_cfg.max_len)
    cnn = train_classifier(train_enc, eval_enc, clf_cfg)
    score = macro_f1(predict(cnn, test_enc), [p.label for p in target_splits.test])
    return PairResult(strategy=strategy, source_year=source, target_year=target, f1_by_seed={seed: score})


def run_pair(
    strategy: StrategyKind,
    source: int,
    target: int,
    data: ExperimentData,
    emb_cfg: EmbeddingConfig,
    clf_cfg: ClassifierConfig,
    seed: int,
    years: Optional[Sequence[int]] = None,
    ite_mode: str = "update",
    align_repr: str = "target",
) -> PairResult:
    """Train and score one (strategy, source, target) experiment for one seed."""
    years = sorted(years) if years is not None else sorted(data.slices)
    for year in (source, target):
        if year not in data.slices or year not in data.labelled.splits:
            raise MissingYear(f"year {year} missing from slices or labelled data")
    plan = make_plan(strategy, source, target, years)
    emb_seeded = replace(emb_cfg, seed=seed)
    train_pair, test_pair = _lookup_pairs_for_plan(plan, data.slices, emb_seeded, ite_mode, align_repr)
    return _run_pair_with_lookups(strategy, source, target, data, clf_cfg, seed, train_pair, test_pair)


def run_grid(spec: ExperimentSpec, data: ExperimentData, threads: int = 1) -> list:
    """Every (source, target) pair for every strategy and seed, merged by pair.

    Embeddings are cached per (strategy, data regime, seed) because many pairs
    share one: DTE depends only on the source year, ITE/ITA only on the target.
    Results are deterministically sorted, so thread count cannot change them.
    """
    spec.validate()
    years = sorted(spec.years)
    for year in years:
        if year not in data.slices:
            raise MissingYear(f"year {year} has no temporal slice")
        if year not in data.labelled.splits:
            raise MissingYear(f"year {year} has no labelled splits")
    pairs = grid_pairs(years)

    jobs = []
    plan_keys = {}
    for strategy in spec.strategies:
        for source, target in pairs:
            plan = make_plan(strategy, source, target, years)
            for seed in spec.seeds:
                key = (strategy.value, plan.data_years, seed)
                plan_keys[key] = plan
                jobs.append((strategy, source, target, seed, key, plan))

    cache = {}

    def build(key):
        plan = plan_keys[key]
        if spec.align_repr == "dual" and plan.kind in (StrategyKind.ITA, StrategyKind.TWO_TA):
            # dual train lookups depend on the pair's source year, which the
            # cache key does not capture; score() builds these per pair
            cache[key] = None
            return
        seed = key[2]
        emb_seeded = replace(spec.embedding, seed=seed)
        cache[key] = _lookup_pairs_for_plan(
            plan, data.slices, emb_seeded, spec.ite_mode, spec.align_repr
        )

    unique_keys = sorted(plan_keys)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(build, unique_keys))
    else:
        for key in unique_keys:
            build(key)

    def score(job):
        strategy, source, target, seed, key, plan = job
        if cache[key] is None:
            emb_seeded = replace(spec.embedding, seed=seed)
            train_pair, test_pair = _lookup_pairs_for_plan(
                plan, data.slices, emb_seeded, spec.ite_mode, spec.align_repr
            )
        else:
            train_pair, test_pair = cache[key]
        return _run_pair_with_lookups(
            strategy, source, target, data, spec.classifier, seed, train_pair, test_pair
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            singles = list(pool.map(score, jobs))
    else:
        singles = [score(job) for job in jobs]

    merged = {}
    for res in singles:
        key = (res.strategy, res.source_year, res.target_year)
        if key in merged:
            merged[key].f1_by_seed.update(res.f1_by_seed)
        else:
            merged[key] = res
    results = sorted(
        merged.values(),
        key=lambda r: (_STRATEGY_ORDER[r.strategy], r.source_year, r.target_year),
    )
    for res in results:
        res.f1_by_seed = dict(sorted(res.f1_by_seed.items()))
    return results


# ---------------------------------------------------------------------------
# aggregation


def aggregate_by_gap(results: Sequence[PairResult]) -> list:
    """Mean pair-level F1 per (strategy, gap) with RPD against gap 0."""
    by_strategy = {}
    for res in results:
        by_strategy.setdefault(res.strategy, {}).setdefault(res.gap, []).append(res.mean_f1)
    aggregates = []
    for strategy in sorted(by_strategy, key=_STRATEGY_ORDER.get):
        gaps = by_strategy[strategy]
        if 0 not in gaps:
            raise MissingBaseline(f"strategy {strategy.value} has no gap-0 results")
        base = float(np.mean(gaps[0]))
        for gap in sorted(gaps):
            mean = float(np.mean(gaps[gap]))
            aggregates.append(
                GapAggregate(
                    strategy=strategy,
                    gap=gap,
                    mean_f1=mean,
                    rpd=rpd(base, mean),
                    n_pairs=len(gaps[gap]),
                )
            )
    return aggregates


def format_rpd_percent(value: float) -> str:
    """Half-up rounding of 100*rpd to one decimal, with explicit sign."""
    pct = Decimal(repr(value * 100.0)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{pct:+}"


# ---------------------------------------------------------------------------
# report emission


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _write_pairs_csv(path: Path, results: Sequence[PairResult]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("strategy,source,target,gap,seed,f1\n")
        for res in sorted(
            results, key=lambda r: (_STRATEGY_ORDER[r.strategy], r.source_year, r.target_year)
        ):
            for seed in sorted(res.f1_by_seed):
                fh.write(
                    f"{res.strategy.value},{res.source_year},{res.target_year},"
                    f"{res.gap},{seed},{_fmt(res.f1_by_seed[seed])}\n"
                )


def _write_gaps_csv(path: Path, aggregates: Sequence[GapAggregate]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("strategy,gap,mean_f1,rpd\n")
        for agg in aggregates:
            fh.write(f"{agg.strategy.value},{agg.gap},{_fmt(agg.mean_f1)},{_fmt(agg.rpd)}\n")


def _write_table_md(path: Path, aggregates: Sequence[GapAggregate]):
    gaps = sorted({agg.gap for agg in aggregates})
    by_strategy = {}
    for agg in aggregates:
        by_strategy.setdefault(agg.strategy, {})[agg.gap] = agg
    lines = ["| Time gap | " + " | ".join(str(g) for g in gaps) + " |"]
    lines.append("|" + "---|" * (len(gaps) + 1))
    for strategy in sorted(by_strategy, key=_STRATEGY_ORDER.get):
        cells = []
        for gap in gaps:
            agg = by_strategy[strategy].get(gap)
            if agg is None:
                cells.append("")
            elif gap == 0:
                cells.append(f"{agg.mean_f1:.3f}")
            else:
                cells.append(f"{agg.mean_f1:.3f} ({format_rpd_percent(agg.rpd)}%)")
        lines.append(f"| {strategy.value.upper()} | " + " | ".join(cells) + " |")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


_SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _svg_line_chart(title: str, x_label: str, y_label: str, series: list) -> str:
    """Minimal hand-emitted line chart; series is [(name, xs, ys), ...]."""
    width, height = 640, 420
    ml, mr, mt, mb = 64, 148, 44, 56
    plot_w, plot_h = width - ml - mr, height - mt - mb
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = (y_hi - y_lo) * 0.08
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return mt + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" y2="{mt + plot_h}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="black"/>',
        f'<text x="{ml + plot_w / 2:.2f}" y="{height - 12}" text-anchor="middle">{x_label}</text>',
        f'<text x="18" y="{mt + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {mt + plot_h / 2:.2f})">{y_label}</text>',
    ]
    for x in sorted({int(x) for x in all_x}):
        px = sx(x)
        out.append(
            f'<line x1="{px:.2f}" y1="{mt + plot_h}" x2="{px:.2f}" y2="{mt + plot_h + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{mt + plot_h + 20}" text-anchor="middle">{x}</text>'
        )
    for i in range(5):
        y = y_lo + (y_hi - y_lo) * i / 4
        py = sy(y)
        out.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" y2="{py:.2f}" stroke="black"/>')
        out.append(
            f'<line x1="{ml}" y1="{py:.2f}" x2="{ml + plot_w}" y2="{py:.2f}" stroke="#dddddd"/>'
        )
        out.append(f'<text x="{ml - 9}" y="{py + 4:.2f}" text-anchor="end">{y:.3g}</text>')
    for idx, (name, xs, ys) in enumerate(series):
        color = _SERIES_COLORS[idx % len(_SERIES_COLORS)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        if len(xs) > 1:
            out.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = mt + 14 + idx * 18
        lx = ml + plot_w + 14
        out.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{lx + 28}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(aggregates: Sequence[GapAggregate], pair_results: Sequence[PairResult], out_dir) -> list:
    """Write pairs.csv, gaps.csv, table3.md and the two gap charts."""
    if not aggregates or not pair_results:
        raise ConfigInvalid("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    pairs_path = out / "pairs.csv"
    _write_pairs_csv(pairs_path, pair_results)
    written.append(pairs_path)

    gaps_path = out / "gaps.csv"
    _write_gaps_csv(gaps_path, aggregates)
    written.append(gaps_path)

    table_path = out / "table3.md"
    _write_table_md(table_path, aggregates)
    written.append(table_path)

    by_strategy = {}
    for agg in aggregates:
        by_strategy.setdefault(agg.strategy, []).append(agg)
    f1_series, rpd_series = [], []
    for strategy in sorted(by_strategy, key=_STRATEGY_ORDER.get):
        aggs = sorted(by_strategy[strategy], key=lambda a: a.gap)
        name = strategy.value.upper()
        f1_series.append((name, [a.gap for a in aggs], [a.mean_f1 for a in aggs]))
        rpd_series.append((name, [a.gap for a in aggs], [a.rpd * 100 for a in aggs]))
    f1_path = out / "f1_vs_gap.svg"
    f1_path.write_text(
        _svg_line_chart("Macro-F1 by temporal gap", "temporal gap (years)", "macro-F1", f1_series),
        encoding="utf-8",
    )
    written.append(f1_path)
    rpd_path = out / "rpd_vs_gap.svg"
    rpd_path.write_text(
        _svg_line_chart(
            "Relative performance drop by temporal gap", "temporal gap (years)", "RPD (%)", rpd_series
        ),
        encoding="utf-8",
    )
    written.append(rpd_path)
    return written


# ---------------------------------------------------------------------------
# re-rendering from persisted pair results


def load_pairs_csv(path) -> list:
    merged = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            strategy = StrategyKind(row["strategy"])
            source = int(row["source"])
            target = int(row["target"])
            seed = int(row["seed"])
            key = (strategy, source, target)
            if key not in merged:
                merged[key] = PairResult(
                    strategy=strategy, source_year=source, target_year=target, f1_by_seed={}
                )
            merged[key].f1_by_seed[seed] = float(row["f1"])
    results = sorted(
        merged.values(),
        key=lambda r: (_STRATEGY_ORDER[r.strategy], r.source_year, r.target_year),
    )
    for res in results:
        res.f1_by_seed = dict(sorted(res.f1_by_seed.items()))
    return results


def render_from_pairs(pairs_path, out_dir) -> list:
    results = load_pairs_csv(pairs_path)
    return emit_report(aggregate_by_gap(results), results, out_dir)
