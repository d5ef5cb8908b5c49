from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempstance.alignment import StrategyKind
from tempstance.classifier import ClassifierConfig
from tempstance.embedding import EmbeddingConfig
from tempstance.errors import ConfigInvalid, MissingBaseline, MissingYear, ZeroBaseline
from tempstance.experiment import (
    ExperimentData,
    ExperimentSpec,
    GapAggregate,
    PairResult,
    aggregate_by_gap,
    emit_report,
    format_rpd_percent,
    grid_pairs,
    load_pairs_csv,
    render_from_pairs,
    rpd,
    run_grid,
    run_pair,
)
from tempstance.synthetic import SyntheticDriftConfig, generate_synthetic_corpus


# ---------------------------------------------------------------------------
# rpd


def test_rpd_published_examples():
    assert rpd(0.653, 0.554) == pytest.approx(-0.15161, abs=1e-4)
    assert format_rpd_percent(rpd(0.653, 0.554)) == "-15.2"
    assert format_rpd_percent(rpd(0.664, 0.542)) == "-18.4"


def test_rpd_no_change_and_gain():
    assert rpd(0.4, 0.4) == 0.0
    assert rpd(0.5, 0.6) == pytest.approx(0.2)


def test_rpd_zero_baseline():
    with pytest.raises(ZeroBaseline):
        rpd(0.0, 0.5)


@given(st.floats(0.05, 1.0), st.floats(-0.5, 0.5))
@settings(max_examples=200)
def test_rpd_recovers_relative_change(f0, delta):
    assert rpd(f0, f0 * (1.0 + delta)) == pytest.approx(delta, abs=1e-9)


def test_format_rpd_percent_half_up():
    assert format_rpd_percent(-0.15163) == "-15.2"
    assert format_rpd_percent(-0.10252600297) == "-10.3"
    assert format_rpd_percent(0.0205) == "+2.1"
    assert format_rpd_percent(0.0) == "+0.0"


# ---------------------------------------------------------------------------
# grid combinatorics


def test_grid_six_years_has_21_pairs():
    years = list(range(2014, 2020))
    pairs = grid_pairs(years)
    assert len(pairs) == 21
    hist = Counter(t - s for s, t in pairs)
    assert hist == {0: 6, 1: 5, 2: 4, 3: 3, 4: 2, 5: 1}


def test_grid_two_years():
    assert grid_pairs([0, 1]) == [(0, 0), (0, 1), (1, 1)]


def test_grid_pair_count_formula():
    for n in range(2, 9):
        assert len(grid_pairs(list(range(n)))) == n * (n + 1) // 2


# ---------------------------------------------------------------------------
# aggregation


def _pair(strategy, source, target, f1):
    return PairResult(
        strategy=strategy, source_year=source, target_year=target, f1_by_seed={1: f1}
    )


def test_aggregate_groups_gap4_pairs():
    results = [
        _pair(StrategyKind.DTE, 2014, 2014, 0.70),
        _pair(StrategyKind.DTE, 2014, 2018, 0.60),
        _pair(StrategyKind.DTE, 2015, 2019, 0.62),
    ]
    aggs = {a.gap: a for a in aggregate_by_gap(results)}
    assert aggs[4].n_pairs == 2
    assert aggs[4].mean_f1 == pytest.approx(0.61)
    assert aggs[4].rpd == pytest.approx((0.61 - 0.70) / 0.70)


def test_aggregate_single_gap0_pair():
    aggs = aggregate_by_gap([_pair(StrategyKind.ITA, 2014, 2014, 0.8)])
    assert len(aggs) == 1
    assert aggs[0].gap == 0
    assert aggs[0].mean_f1 == pytest.approx(0.8)
    assert aggs[0].rpd == 0.0


def test_aggregate_published_pair():
    results = [
        _pair(StrategyKind.DTE, 2014, 2014, 0.664),
        _pair(StrategyKind.DTE, 2014, 2019, 0.542),
    ]
    aggs = {a.gap: a for a in aggregate_by_gap(results)}
    assert format_rpd_percent(aggs[5].rpd) == "-18.4"


def test_aggregate_requires_gap0():
    with pytest.raises(MissingBaseline):
        aggregate_by_gap([_pair(StrategyKind.DTE, 2014, 2016, 0.6)])


def test_aggregate_baselines_are_per_strategy():
    results = [
        _pair(StrategyKind.DTE, 2014, 2014, 0.6),
        _pair(StrategyKind.DTE, 2014, 2015, 0.3),
        _pair(StrategyKind.ITA, 2014, 2014, 0.8),
        _pair(StrategyKind.ITA, 2014, 2015, 0.4),
    ]
    aggs = aggregate_by_gap(results)
    by_key = {(a.strategy, a.gap): a for a in aggs}
    assert by_key[(StrategyKind.DTE, 1)].rpd == pytest.approx(-0.5)
    assert by_key[(StrategyKind.ITA, 1)].rpd == pytest.approx(-0.5)


# ---------------------------------------------------------------------------
# report emission


def _fake_results():
    results = []
    for strategy, base in ((StrategyKind.DTE, 0.65), (StrategyKind.TWO_TA, 0.66)):
        for source, target in grid_pairs([2014, 2015, 2016]):
            gap = target - source
            f1 = base - 0.04 * gap + 0.001 * source % 1
            results.append(
                PairResult(
                    strategy=strategy,
                    source_year=source,
                    target_year=target,
                    f1_by_seed={1: f1, 2: f1 + 0.002},
                )
            )
    return results


def test_emit_report_writes_all_artifacts(tmp_path):
    results = _fake_results()
    aggs = aggregate_by_gap(results)
    written = emit_report(aggs, results, tmp_path)
    names = {p.name for p in written}
    assert names == {"pairs.csv", "gaps.csv", "table3.md", "f1_vs_gap.svg", "rpd_vs_gap.svg"}
    pairs_lines = (tmp_path / "pairs.csv").read_text().strip().split("\n")
    assert pairs_lines[0] == "strategy,source,target,gap,seed,f1"
    assert len(pairs_lines) == 1 + 2 * 6 * 2  # 2 strategies x 6 pairs x 2 seeds
    table = (tmp_path / "table3.md").read_text()
    assert "DTE" in table and "2TA" in table and "%" in table
    svg = (tmp_path / "f1_vs_gap.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_gaps_csv_round_trip_is_stable(tmp_path):
    results = _fake_results()
    aggs = aggregate_by_gap(results)
    emit_report(aggs, results, tmp_path / "a")
    # re-render from the emitted pairs.csv; both csv files must be reproduced
    render_from_pairs(tmp_path / "a" / "pairs.csv", tmp_path / "b")
    assert (tmp_path / "a" / "gaps.csv").read_bytes() == (tmp_path / "b" / "gaps.csv").read_bytes()
    assert (tmp_path / "a" / "pairs.csv").read_bytes() == (tmp_path / "b" / "pairs.csv").read_bytes()


def test_load_pairs_csv_merges_seeds(tmp_path):
    results = _fake_results()
    emit_report(aggregate_by_gap(results), results, tmp_path)
    loaded = load_pairs_csv(tmp_path / "pairs.csv")
    assert len(loaded) == len(results)
    assert loaded[0].f1_by_seed.keys() == {1, 2}


def test_single_gap0_strategy_renders_single_point(tmp_path):
    results = [_pair(StrategyKind.ITA, 2014, 2014, 0.7)]
    written = emit_report(aggregate_by_gap(results), results, tmp_path)
    svg = (tmp_path / "f1_vs_gap.svg").read_text()
    assert "circle" in svg and "polyline" not in svg
    gaps = (tmp_path / "gaps.csv").read_text().strip().split("\n")
    assert gaps[1] == "ita,0,0.7,0"
    assert written


# ---------------------------------------------------------------------------
# running pairs and grids on a tiny corpus


@pytest.fixture(scope="module")
def tiny_data():
    slices, labelled = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=2,
            docs_per_year=150,
            base_vocab_size=120,
            lexical_drift_rate=0.1,
            association_drift_rate=0.0,
            stance_marker_count=6,
            seed=21,
        )
    )
    return ExperimentData(slices={sl.year: sl for sl in slices}, labelled=labelled)


TINY_EMB = EmbeddingConfig(dim=10, window=3, negatives=3, epochs=2, min_count=2, seed=1)
TINY_CLF = ClassifierConfig(
    num_filters=4, kernel_width=3, max_len=16, lr=0.02, epochs=3, batch_size=16, seed=1
)


def test_run_pair_deterministic(tiny_data):
    a = run_pair(StrategyKind.DTE, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=5)
    b = run_pair(StrategyKind.DTE, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=5)
    assert a.f1_by_seed == b.f1_by_seed
    assert a.gap == 1
    assert 0.0 <= a.mean_f1 <= 1.0


def test_run_pair_missing_year(tiny_data):
    with pytest.raises(MissingYear):
        run_pair(StrategyKind.DTE, 2014, 2016, tiny_data, TINY_EMB, TINY_CLF, seed=5)


def test_run_grid_counts_and_order(tiny_data):
    spec = ExperimentSpec(
        years=(2014, 2015),
        strategies=(StrategyKind.DTE, StrategyKind.TWO_TA),
        seeds=(1, 2),
        embedding=TINY_EMB,
        classifier=TINY_CLF,
    )
    results = run_grid(spec, tiny_data)
    assert len(results) == 2 * 3  # strategies x pairs
    assert all(len(r.f1_by_seed) == 2 for r in results)
    keys = [(r.strategy, r.source_year, r.target_year) for r in results]
    assert keys == sorted(keys, key=lambda k: (list(StrategyKind).index(k[0]), k[1], k[2]))


def test_run_grid_thread_count_does_not_change_results(tiny_data):
    spec = ExperimentSpec(
        years=(2014, 2015),
        strategies=(StrategyKind.DTE, StrategyKind.ITA),
        seeds=(1,),
        embedding=TINY_EMB,
        classifier=TINY_CLF,
    )
    serial = run_grid(spec, tiny_data, threads=1)
    threaded = run_grid(spec, tiny_data, threads=4)
    assert [(r.strategy, r.source_year, r.target_year, r.f1_by_seed) for r in serial] == [
        (r.strategy, r.source_year, r.target_year, r.f1_by_seed) for r in threaded
    ]


def test_run_grid_matches_run_pair(tiny_data):
    spec = ExperimentSpec(
        years=(2014, 2015),
        strategies=(StrategyKind.ITE,),
        seeds=(3,),
        embedding=TINY_EMB,
        classifier=TINY_CLF,
    )
    grid = run_grid(spec, tiny_data)
    single = run_pair(
        StrategyKind.ITE, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=3, years=(2014, 2015)
    )
    by_key = {(r.source_year, r.target_year): r for r in grid}
    assert by_key[(2014, 2015)].f1_by_seed == single.f1_by_seed


def test_dual_alignment_representation(tiny_data):
    # dual mode encodes training text through the source-aligned matrix and
    # test text through the target-aligned one
    single = run_pair(
        StrategyKind.TWO_TA, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=2, align_repr="dual"
    )
    again = run_pair(
        StrategyKind.TWO_TA, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=2, align_repr="dual"
    )
    assert single.f1_by_seed == again.f1_by_seed
    spec = ExperimentSpec(
        years=(2014, 2015),
        strategies=(StrategyKind.TWO_TA,),
        seeds=(2,),
        embedding=TINY_EMB,
        classifier=TINY_CLF,
        align_repr="dual",
    )
    grid = run_grid(spec, tiny_data)
    by_key = {(r.source_year, r.target_year): r for r in grid}
    assert by_key[(2014, 2015)].f1_by_seed == single.f1_by_seed
    # non-aligned strategies are unaffected by the representation flag
    dte_dual = run_pair(
        StrategyKind.DTE, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=2, align_repr="dual"
    )
    dte_plain = run_pair(StrategyKind.DTE, 2014, 2015, tiny_data, TINY_EMB, TINY_CLF, seed=2)
    assert dte_dual.f1_by_seed == dte_plain.f1_by_seed


def test_spec_validation():
    with pytest.raises(ConfigInvalid):
        ExperimentSpec(
            years=(2014,),
            strategies=(StrategyKind.DTE,),
            seeds=(1,),
            embedding=TINY_EMB,
            classifier=TINY_CLF,
        ).validate()
    with pytest.raises(ConfigInvalid):
        ExperimentSpec(
            years=(2014, 2015),
            strategies=(StrategyKind.DTE,),
            seeds=(),
            embedding=TINY_EMB,
            classifier=TINY_CLF,
        ).validate()
