"""Deterministic synthetic corpora with controllable lexical and stance drift.

The generator plays the role of the Twitter collections at desk scale. A fixed
set of word roles is split into stance markers (hashtag-like), per-marker topic
words, and neutral common words. Documents are topic-word mixtures around a
single generating marker, whose stance labels the post. Year over year a
fraction of surface forms is swapped for fresh forms filling the same role
(vocabulary change), and a fraction of markers has its stance reassigned
(association change).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import (
    DEFAULT_EVAL_FRAC,
    DEFAULT_TRAIN_FRAC,
    LabelledDataset,
    LabelledPost,
    StanceLabel,
    TemporalSlice,
    balance_and_split,
)
from .errors import ConfigInvalid

BASE_YEAR = 2014

# Document shape knobs. Topic words carry the stance signal; keeping them a
# minority of short documents limits redundancy, so losing drifted surface
# forms measurably hurts a stale embedding.
DOC_LEN_MIN = 9
DOC_LEN_MAX = 15
TOPIC_TOKEN_PROB = 0.35
# Fraction of non-marker roles that are topic words (rest are common words).
TOPIC_ROLE_SHARE = 0.3
# The labelled pool is a fraction of the unlabelled volume, mirroring how
# distant supervision yields far fewer labelled posts than raw ones.
LABELLED_PER_UNLABELLED = 0.5


@dataclass
class SyntheticDriftConfig:
    num_years: int = 6
    docs_per_year: int = 2000
    base_vocab_size: int = 600
    lexical_drift_rate: float = 0.1
    association_drift_rate: float = 0.0
    stance_marker_count: int = 20
    seed: int = 0

    def validate(self):
        if self.num_years < 1 or self.docs_per_year < 1:
            raise ConfigInvalid("num_years and docs_per_year must be positive")
        if self.stance_marker_count < 2:
            raise ConfigInvalid("need at least 2 stance markers (one per polarity)")
        if self.base_vocab_size < self.stance_marker_count + 2:
            raise ConfigInvalid("base_vocab_size too small for the marker count")
        for name in ("lexical_drift_rate", "association_drift_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ConfigInvalid(f"{name} must lie in [0, 1], got {rate}")


def _surface(role: int, generation: int, is_marker: bool) -> str:
    if is_marker:
        return f"#m{role:03d}g{generation}"
    return f"w{role:04d}g{generation}"


def generate_synthetic_corpus(config: SyntheticDriftConfig):
    """Generate (temporal slices, labelled dataset) for the configured drift.

    Slice documents keep their marker token; labelled posts drop it, exactly
    like lexicon hashtags are stripped during distant labelling.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    n_markers = config.stance_marker_count
    n_rest = config.base_vocab_size - n_markers
    n_topic = int(n_rest * TOPIC_ROLE_SHARE)
    n_common = n_rest - n_topic
    if n_topic < n_markers or n_common < 1:
        raise ConfigInvalid("base_vocab_size leaves too few topic or common roles")

    # Role ids: [0, n_markers) markers, then topic roles, then common roles.
    topic_roles_of = [[] for _ in range(n_markers)]
    for k in range(n_topic):
        topic_roles_of[k % n_markers].append(n_markers + k)
    common_lo = n_markers + n_topic

    generation = np.zeros(config.base_vocab_size, dtype=np.int64)
    # Alternate initial stances so labels start balanced.
    marker_support = np.array([i % 2 == 0 for i in range(n_markers)])

    n_labelled = max(20, int(config.docs_per_year * LABELLED_PER_UNLABELLED))
    slices = []
    labelled_by_year = {}

    for step in range(config.num_years):
        year = BASE_YEAR + step
        if step > 0:
            n_replace = int(config.lexical_drift_rate * config.base_vocab_size + 0.5)
            if n_replace:
                replaced = rng.choice(config.base_vocab_size, size=n_replace, replace=False)
                generation[replaced] += 1
            n_reassign = int(config.association_drift_rate * n_markers + 0.5)
            if n_reassign:
                # reassignment draws a fresh stance, so a marker can keep its
                # old polarity; the expected flip rate is half the drift rate
                picked = rng.choice(n_markers, size=n_reassign, replace=False)
                marker_support[picked] = rng.random(n_reassign) < 0.5

        def one_doc():
            marker = int(rng.integers(n_markers))
            length = int(rng.integers(DOC_LEN_MIN, DOC_LEN_MAX + 1))
            marker_pos = int(rng.integers(length))
            roles = topic_roles_of[marker]
            tokens = []
            for pos in range(length):
                if pos == marker_pos:
                    tokens.append(_surface(marker, int(generation[marker]), True))
                    continue
                if rng.random() < TOPIC_TOKEN_PROB:
                    role = roles[int(rng.integers(len(roles)))]
                else:
                    role = common_lo + int(rng.integers(n_common))
                tokens.append(_surface(role, int(generation[role]), False))
            return marker, marker_pos, tokens

        docs = []
        for _ in range(config.docs_per_year):
            _, _, tokens = one_doc()
            docs.append(tokens)
        slices.append(TemporalSlice(year=year, documents=docs))

        posts = []
        for _ in range(n_labelled):
            marker, marker_pos, tokens = one_doc()
            label = StanceLabel.SUPPORT if marker_support[marker] else StanceLabel.OPPOSE
            kept = tuple(tokens[:marker_pos] + tokens[marker_pos + 1 :])
            posts.append(LabelledPost(tokens=kept, year=year, label=label))
        labelled_by_year[year] = posts

    dataset = balance_and_split(
        labelled_by_year,
        train_frac=DEFAULT_TRAIN_FRAC,
        eval_frac=DEFAULT_EVAL_FRAC,
        seed=config.seed,
    )
    return slices, dataset


def marker_surfaces(config: SyntheticDriftConfig) -> set:
    """All marker surface forms the corpus can ever contain (any generation)."""
    config.validate()
    max_gen = config.num_years + 1
    return {
        _surface(role, gen, True)
        for role in range(config.stance_marker_count)
        for gen in range(max_gen)
    }
