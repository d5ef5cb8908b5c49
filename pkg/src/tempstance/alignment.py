"""Compass-based diachronic alignment and the five embedding strategies.

A compass is the context matrix of a CBOW run over a multi-year corpus. Slice
embeddings trained against the frozen compass share one coordinate space, so a
classifier trained on old text can read vectors for new surface forms. The
strategy drivers assemble, for a (source, target) year pair, the embedding the
classifier sees:

    dte   source-year embeddings only
    ite   incremental update from the first year through the target
    2te   incremental update with source and target years only
    ita   compass over first..target, target slice aligned to it
    2ta   compass over {source, target}, target slice aligned to it
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import TemporalSlice, Vocabulary
from .embedding import (
    EmbeddingConfig,
    EmbeddingLookup,
    EmbeddingModel,
    _init_input_rows,
    _train_phase,
    load_model,
    save_model,
    train_cbow,
    update_incremental,
)
from .errors import ConfigInvalid, EmptySlice, MissingSlice

# Stream tag separating alignment randomness from base-training randomness.
_ALIGN_STREAM = 97


class StrategyKind(Enum):
    DTE = "dte"
    ITE = "ite"
    TWO_TE = "2te"
    ITA = "ita"
    TWO_TA = "2ta"


@dataclass(frozen=True)
class StrategyPlan:
    kind: StrategyKind
    source_year: int
    target_year: int
    data_years: tuple

    @property
    def gap(self) -> int:
        return self.target_year - self.source_year


def make_plan(kind: StrategyKind, source_year: int, target_year: int, years: Sequence[int]) -> StrategyPlan:
    """Resolve which slices a strategy consumes for a (source, target) pair."""
    years = sorted(years)
    if source_year > target_year:
        raise ConfigInvalid(f"source year {source_year} is after target year {target_year}")
    for year in (source_year, target_year):
        if year not in years:
            raise ConfigInvalid(f"year {year} is outside the experiment range {years}")
    if kind is StrategyKind.DTE:
        data = (source_year,)
    elif kind in (StrategyKind.ITE, StrategyKind.ITA):
        data = tuple(y for y in years if y <= target_year)
    else:
        data = (source_year,) if source_year == target_year else (source_year, target_year)
    return StrategyPlan(kind=kind, source_year=source_year, target_year=target_year, data_years=data)


@dataclass
class CompassModel:
    """Vocabulary and frozen context matrix shared by aligned slices."""

    vocab: Vocabulary
    context_matrix: np.ndarray
    unigram_table: np.ndarray
    config: EmbeddingConfig

    def __post_init__(self):
        # Hard freeze: any attempted write raises.
        self.context_matrix.setflags(write=False)


@dataclass
class AlignedSlice:
    """A slice's input matrix trained against a frozen compass."""

    year: int
    input_matrix: np.ndarray
    compass: CompassModel
    epoch_losses: list = field(default_factory=list)

    def lookup(self) -> EmbeddingLookup:
        return EmbeddingLookup(self.compass.vocab, self.input_matrix)


def train_compass(slices: Sequence[TemporalSlice], config: EmbeddingConfig) -> CompassModel:
    """CBOW over the concatenated slices; keep vocabulary and context matrix."""
    corpus = [doc for sl in slices for doc in sl.documents]
    model = train_cbow(corpus, config)
    return CompassModel(
        vocab=model.vocab,
        context_matrix=model.output_matrix,
        unigram_table=model.unigram_table,
        config=config,
    )


def align_slice(compass: CompassModel, temporal_slice: TemporalSlice, config: EmbeddingConfig) -> AlignedSlice:
    """Train a fresh input matrix on one slice with the compass context frozen.

    Slice words missing from the compass vocabulary are skipped. The result is
    independent of the slice's year label, so equal text plus equal seed gives
    equal matrices.
    """
    config.validate()
    if config.dim != compass.context_matrix.shape[1]:
        raise ConfigInvalid(
            f"config dim {config.dim} does not match compass dim {compass.context_matrix.shape[1]}"
        )
    rng = np.random.default_rng([config.seed, _ALIGN_STREAM])
    aligned_model = EmbeddingModel(
        vocab=compass.vocab,
        input_matrix=_init_input_rows(rng, len(compass.vocab), config.dim),
        output_matrix=compass.context_matrix,
        unigram_table=compass.unigram_table,
        config=config,
    )
    n_tokens = _train_phase(aligned_model, temporal_slice.documents, rng, freeze_context=True)
    if n_tokens == 0:
        raise EmptySlice(
            f"slice {temporal_slice.year} has no tokens in the compass vocabulary"
        )
    return AlignedSlice(
        year=temporal_slice.year,
        input_matrix=aligned_model.input_matrix,
        compass=compass,
        epoch_losses=aligned_model.epoch_losses,
    )


def build_embedding(
    plan: StrategyPlan,
    slices: Mapping[int, TemporalSlice],
    config: EmbeddingConfig,
    ite_mode: str = "update",
) -> EmbeddingLookup:
    """Assemble the lookup a classifier uses for both its train and test text.

    ite_mode="retrain" rebuilds the incremental strategies from the aggregated
    corpus instead of folding per-year updates.
    """
    if ite_mode not in ("update", "retrain"):
        raise ConfigInvalid(f"ite_mode must be 'update' or 'retrain', got {ite_mode!r}")
    for year in plan.data_years:
        if year not in slices:
            raise MissingSlice(year)

    kind = plan.kind
    if kind is StrategyKind.DTE:
        return train_cbow(slices[plan.source_year].documents, config).lookup()

    if kind in (StrategyKind.ITE, StrategyKind.TWO_TE):
        years = plan.data_years
        if ite_mode == "retrain":
            corpus = [doc for y in years for doc in slices[y].documents]
            return train_cbow(corpus, config).lookup()
        model = train_cbow(slices[years[0]].documents, config)
        for year in years[1:]:
            model = update_incremental(model, slices[year], config)
        return model.lookup()

    compass = train_compass([slices[y] for y in plan.data_years], config)
    aligned = align_slice(compass, slices[plan.target_year], config)
    return aligned.lookup()


# ---------------------------------------------------------------------------
# persistence: aligned slice in the embedding file format plus a manifest


def save_aligned(aligned: AlignedSlice, plan: StrategyPlan, path) -> Path:
    path = Path(path)
    model = EmbeddingModel(
        vocab=aligned.compass.vocab,
        input_matrix=aligned.input_matrix,
        output_matrix=aligned.compass.context_matrix,
        unigram_table=aligned.compass.unigram_table,
        config=aligned.compass.config,
    )
    save_model(model, path)
    manifest = {
        "strategy": plan.kind.value,
        "source_year": plan.source_year,
        "target_year": plan.target_year,
        "data_years": list(plan.data_years),
        "seed": aligned.compass.config.seed,
    }
    with open(path.with_name(path.name + ".manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def load_aligned(path):
    """Load a persisted aligned slice; returns (AlignedSlice, manifest dict)."""
    path = Path(path)
    model = load_model(path)
    with open(path.with_name(path.name + ".manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    compass = CompassModel(
        vocab=model.vocab,
        context_matrix=model.output_matrix,
        unigram_table=model.unigram_table,
        config=model.config,
    )
    aligned = AlignedSlice(
        year=int(manifest["target_year"]),
        input_matrix=model.input_matrix,
        compass=compass,
    )
    return aligned, manifest


def plan_from_manifest(manifest: dict) -> StrategyPlan:
    return StrategyPlan(
        kind=StrategyKind(manifest["strategy"]),
        source_year=int(manifest["source_year"]),
        target_year=int(manifest["target_year"]),
        data_years=tuple(manifest["data_years"]),
    )
