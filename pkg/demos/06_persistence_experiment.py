"""End-to-end temporal persistence experiment at demo scale.

Runs the (source, target) grid for three embedding strategies on a drifting
corpus, aggregates macro-F1 by temporal gap, and writes the report files
(CSV tables, markdown summary, SVG charts) to demos/out/.

Expect a few minutes of runtime; shrink docs_per_year for a quicker pass.
"""
from pathlib import Path

from tempstance import (
    ClassifierConfig,
    EmbeddingConfig,
    ExperimentData,
    ExperimentSpec,
    StrategyKind,
    SyntheticDriftConfig,
    aggregate_by_gap,
    emit_report,
    generate_synthetic_corpus,
    run_grid,
)


def main():
    slices, labelled = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=4,
            docs_per_year=1200,
            base_vocab_size=400,
            lexical_drift_rate=0.15,
            association_drift_rate=0.1,
            stance_marker_count=12,
            seed=42,
        )
    )
    data = ExperimentData(slices={sl.year: sl for sl in slices}, labelled=labelled)
    spec = ExperimentSpec(
        years=tuple(sorted(data.slices)),
        strategies=(StrategyKind.DTE, StrategyKind.ITA, StrategyKind.TWO_TA),
        seeds=(1, 2),
        embedding=EmbeddingConfig(dim=32, window=4, negatives=4, epochs=10, initial_lr=0.05, min_count=2, seed=1),
        classifier=ClassifierConfig(lr=1e-2, seed=1),
    )
    print(f"running {len(spec.strategies)} strategies x 10 pairs x {len(spec.seeds)} seeds ...")
    results = run_grid(spec, data)
    aggregates = aggregate_by_gap(results)

    table = {}
    for agg in aggregates:
        table.setdefault(agg.strategy, {})[agg.gap] = agg
    gaps = sorted({a.gap for a in aggregates})
    print("\nmean macro-F1 (relative drop) by temporal gap:")
    print("        " + "     ".join(f"gap {g}" for g in gaps))
    for strategy, row in table.items():
        cells = []
        for g in gaps:
            agg = row[g]
            cells.append(f"{agg.mean_f1:.3f}" + (f"({agg.rpd * 100:+.0f}%)" if g else "      "))
        print(f"  {strategy.value:4s} " + "  ".join(cells))

    out = Path(__file__).parent / "out"
    written = emit_report(aggregates, results, out)
    print("\nreport files:")
    for path in written:
        print(f"  {path}")


if __name__ == "__main__":
    main()
