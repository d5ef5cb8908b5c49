from __future__ import annotations

import numpy as np
import pytest

from tempstance.alignment import (
    StrategyKind,
    StrategyPlan,
    align_slice,
    build_embedding,
    load_aligned,
    make_plan,
    plan_from_manifest,
    save_aligned,
    train_compass,
)
from tempstance.corpus import TemporalSlice, build_vocabulary
from tempstance.embedding import EmbeddingConfig
from tempstance.errors import ConfigInvalid, EmptySlice, MissingSlice
from tempstance.synthetic import SyntheticDriftConfig, generate_synthetic_corpus

YEARS = [2014, 2015, 2016, 2017, 2018, 2019]


def _slices(n_years=3, seed=5, docs=250, drift=0.1):
    slices, _ = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=n_years,
            docs_per_year=docs,
            base_vocab_size=150,
            lexical_drift_rate=drift,
            association_drift_rate=0.0,
            stance_marker_count=6,
            seed=seed,
        )
    )
    return {sl.year: sl for sl in slices}


CFG = EmbeddingConfig(dim=12, window=3, negatives=3, epochs=2, min_count=2, seed=8)


# ---------------------------------------------------------------------------
# strategy plans (data regimes)


def test_plan_dte():
    plan = make_plan(StrategyKind.DTE, 2015, 2018, YEARS)
    assert plan.data_years == (2015,)
    assert plan.gap == 3


def test_plan_ite_runs_from_first_year():
    plan = make_plan(StrategyKind.ITE, 2014, 2017, YEARS)
    assert plan.data_years == (2014, 2015, 2016, 2017)


def test_plan_2te_ignores_years_between():
    plan = make_plan(StrategyKind.TWO_TE, 2014, 2017, YEARS)
    assert plan.data_years == (2014, 2017)


def test_plan_ita_covers_first_through_target():
    plan = make_plan(StrategyKind.ITA, 2016, 2018, YEARS)
    assert plan.data_years == (2014, 2015, 2016, 2017, 2018)


def test_plan_2ta_source_equals_target_degenerates():
    plan = make_plan(StrategyKind.TWO_TA, 2016, 2016, YEARS)
    assert plan.data_years == (2016,)


def test_plan_gap_zero_at_first_year_matches_dte_regime():
    ite = make_plan(StrategyKind.ITE, 2014, 2014, YEARS)
    dte = make_plan(StrategyKind.DTE, 2014, 2014, YEARS)
    assert ite.data_years == dte.data_years == (2014,)
    ita = make_plan(StrategyKind.ITA, 2014, 2014, YEARS)
    assert len(ita.data_years) == 1


def test_plan_rejects_bad_years():
    with pytest.raises(ConfigInvalid):
        make_plan(StrategyKind.DTE, 2017, 2015, YEARS)
    with pytest.raises(ConfigInvalid):
        make_plan(StrategyKind.DTE, 2013, 2015, YEARS)


# ---------------------------------------------------------------------------
# compass


def test_compass_single_slice_vocab_matches_build_vocabulary():
    slices = _slices(n_years=1)
    sl = slices[2014]
    compass = train_compass([sl], CFG)
    vocab = build_vocabulary([sl], CFG.min_count)
    assert compass.vocab.id_to_word == vocab.id_to_word
    assert compass.vocab.counts.tolist() == vocab.counts.tolist()


def test_compass_covers_union_counts():
    slices = _slices(n_years=2)
    compass = train_compass([slices[2014], slices[2015]], CFG)
    union = build_vocabulary([slices[2014], slices[2015]], CFG.min_count)
    assert compass.vocab.id_to_word == union.id_to_word


def test_compass_deterministic():
    slices = _slices(n_years=2)
    a = train_compass([slices[2014], slices[2015]], CFG)
    b = train_compass([slices[2014], slices[2015]], CFG)
    assert a.context_matrix.tobytes() == b.context_matrix.tobytes()


def test_compass_context_matrix_is_write_protected():
    slices = _slices(n_years=1)
    compass = train_compass([slices[2014]], CFG)
    with pytest.raises(ValueError):
        compass.context_matrix[0, 0] = 1.0


# ---------------------------------------------------------------------------
# alignment


def test_align_slice_never_touches_compass():
    slices = _slices(n_years=2)
    compass = train_compass([slices[2014], slices[2015]], CFG)
    before = compass.context_matrix.tobytes()
    align_slice(compass, slices[2015], CFG)
    assert compass.context_matrix.tobytes() == before


def test_align_identical_text_gives_identical_matrices():
    slices = _slices(n_years=2)
    compass = train_compass([slices[2014], slices[2015]], CFG)
    twin_a = TemporalSlice(year=2014, documents=slices[2014].documents)
    twin_b = TemporalSlice(year=2015, documents=slices[2014].documents)
    a = align_slice(compass, twin_a, CFG)
    b = align_slice(compass, twin_b, CFG)
    assert a.input_matrix.tobytes() == b.input_matrix.tobytes()


def test_align_empty_slice_rejected():
    slices = _slices(n_years=1)
    compass = train_compass([slices[2014]], CFG)
    with pytest.raises(EmptySlice):
        align_slice(compass, TemporalSlice(year=2015, documents=[["never-seen-token"]]), CFG)


def test_aligned_shared_space_on_stable_vocabulary():
    # Zero drift: every word is a pivot. The same word's vectors from two
    # independently aligned years must agree far better than random pairs.
    slices, _ = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=2,
            docs_per_year=1200,
            base_vocab_size=300,
            lexical_drift_rate=0.0,
            association_drift_rate=0.0,
            stance_marker_count=10,
            seed=17,
        )
    )
    cfg = EmbeddingConfig(dim=24, window=4, negatives=4, epochs=3, min_count=2, seed=4)
    compass = train_compass(slices, cfg)
    a = align_slice(compass, slices[0], cfg)
    b = align_slice(compass, slices[1], cfg)

    def unit(m):
        return m / np.maximum(np.linalg.norm(m, axis=1, keepdims=True), 1e-12)

    ua, ub = unit(a.input_matrix), unit(b.input_matrix)
    top = np.argsort(-compass.vocab.counts)[:100]
    pivot_cos = np.array([ua[i] @ ub[i] for i in top])
    rng = np.random.default_rng(0)
    pairs = rng.choice(top, size=(500, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    random_cos = np.array([ua[i] @ ub[j] for i, j in pairs])
    assert pivot_cos.mean() >= np.quantile(random_cos, 0.9)
    assert np.median(pivot_cos) > np.median(random_cos)


# ---------------------------------------------------------------------------
# strategy drivers


class _ReadTracker(dict):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.reads = set()

    def __getitem__(self, key):
        self.reads.add(key)
        return super().__getitem__(key)


@pytest.mark.parametrize(
    "kind,source,target,expected",
    [
        (StrategyKind.DTE, 2015, 2016, {2015}),
        (StrategyKind.ITE, 2015, 2016, {2014, 2015, 2016}),
        (StrategyKind.TWO_TE, 2014, 2016, {2014, 2016}),
        (StrategyKind.ITA, 2015, 2016, {2014, 2015, 2016}),
        (StrategyKind.TWO_TA, 2014, 2016, {2014, 2016}),
        (StrategyKind.ITA, 2014, 2014, {2014}),
        (StrategyKind.TWO_TA, 2016, 2016, {2016}),
    ],
)
def test_build_embedding_reads_exactly_the_plan_slices(kind, source, target, expected):
    years = [2014, 2015, 2016]
    tracker = _ReadTracker(_slices(n_years=3))
    plan = make_plan(kind, source, target, years)
    look = build_embedding(plan, tracker, CFG)
    assert tracker.reads == expected
    assert look.dim == CFG.dim


def test_build_embedding_missing_slice():
    slices = _slices(n_years=2)
    plan = make_plan(StrategyKind.ITE, 2014, 2016, [2014, 2015, 2016])
    with pytest.raises(MissingSlice):
        build_embedding(plan, slices, CFG)


def test_dte_and_truncated_ita_share_vocabulary():
    slices = _slices(n_years=1)
    dte = build_embedding(make_plan(StrategyKind.DTE, 2014, 2014, [2014]), slices, CFG)
    ita = build_embedding(make_plan(StrategyKind.ITA, 2014, 2014, [2014]), slices, CFG)
    assert dte.vocab.id_to_word == ita.vocab.id_to_word


def test_ite_retrain_mode_trains_on_aggregate():
    slices = _slices(n_years=3)
    plan = make_plan(StrategyKind.ITE, 2014, 2016, [2014, 2015, 2016])
    retrain = build_embedding(plan, slices, CFG, ite_mode="retrain")
    union = build_vocabulary([slices[y] for y in plan.data_years], CFG.min_count)
    assert retrain.vocab.id_to_word == union.id_to_word
    fold = build_embedding(plan, slices, CFG, ite_mode="update")
    assert fold.matrix.shape[1] == retrain.matrix.shape[1] == CFG.dim


def test_ite_fold_grows_vocabulary_monotonically():
    slices = _slices(n_years=3, drift=0.2)
    plan16 = make_plan(StrategyKind.ITE, 2014, 2016, [2014, 2015, 2016])
    plan14 = make_plan(StrategyKind.ITE, 2014, 2014, [2014, 2015, 2016])
    look16 = build_embedding(plan16, slices, CFG)
    look14 = build_embedding(plan14, slices, CFG)
    assert set(look14.vocab.id_to_word) <= set(look16.vocab.id_to_word)
    assert len(look16.vocab) > len(look14.vocab)


def test_save_and_load_aligned_with_manifest(tmp_path):
    slices = _slices(n_years=2)
    years = [2014, 2015]
    plan = make_plan(StrategyKind.TWO_TA, 2014, 2015, years)
    compass = train_compass([slices[y] for y in plan.data_years], CFG)
    aligned = align_slice(compass, slices[2015], CFG)
    path = tmp_path / "aligned.txt"
    save_aligned(aligned, plan, path)
    loaded, manifest = load_aligned(path)
    assert manifest["strategy"] == "2ta"
    assert manifest["data_years"] == [2014, 2015]
    assert manifest["seed"] == CFG.seed
    assert np.abs(loaded.input_matrix - aligned.input_matrix).max() < 1e-6
    restored = plan_from_manifest(manifest)
    assert restored == StrategyPlan(
        kind=StrategyKind.TWO_TA, source_year=2014, target_year=2015, data_years=(2014, 2015)
    )
