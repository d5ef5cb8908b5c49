"""Corpus ingestion: tokenization, distant labelling, splits, vocabularies, drift stats.

Raw posts come in as JSON Lines ({"text": ..., "year": ..., "label": optional}),
get tokenized with Twitter-style normalization, and are turned into per-year
unlabelled token slices plus hashtag-labelled train/eval/test splits.
"""
from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import BothEmpty, ConfigInvalid, EmptyVocabulary, FormatError, YearEmpty

# Split fractions of the balanced yearly pool reproducing the reference
# per-year shape 5850/650/1500 out of an 8000-post pool.
DEFAULT_TRAIN_FRAC = 0.73125
DEFAULT_EVAL_FRAC = 0.08125


class StanceLabel(Enum):
    SUPPORT = "support"
    OPPOSE = "oppose"


@dataclass(frozen=True)
class RawPost:
    text: str
    year: int


@dataclass(frozen=True)
class LabelledPost:
    tokens: tuple
    year: int
    label: StanceLabel


@dataclass
class TemporalSlice:
    """One year's unlabelled corpus as tokenized documents."""

    year: int
    documents: list


@dataclass
class YearSplits:
    train: list
    eval: list
    test: list


@dataclass
class LabelledDataset:
    """Per-year stance-labelled posts partitioned into train/eval/test."""

    splits: dict

    @property
    def years(self):
        return sorted(self.splits)

    def year(self, year) -> YearSplits:
        return self.splits[year]


@dataclass
class HashtagLexicon:
    """Polarity-bearing hashtags used as distant-supervision proxies."""

    support: set
    oppose: set

    def __post_init__(self):
        for name, tags in (("support", self.support), ("oppose", self.oppose)):
            for tag in tags:
                if not tag.startswith("#") or tag != tag.lower():
                    raise ConfigInvalid(
                        f"{name} lexicon entry {tag!r} must be lowercase and start with '#'"
                    )
        overlap = self.support & self.oppose
        if overlap:
            raise ConfigInvalid(f"lexicon sets overlap: {sorted(overlap)}")

    def __contains__(self, token):
        return token in self.support or token in self.oppose

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(support=set(data["support"]), oppose=set(data["oppose"]))


@dataclass
class Vocabulary:
    """Dense word/id maps with per-id counts, ids ordered by descending count."""

    word_to_id: dict
    id_to_word: list
    counts: np.ndarray
    min_count: int

    def __len__(self):
        return len(self.id_to_word)

    def __contains__(self, word):
        return word in self.word_to_id

    def id_of(self, word) -> Optional[int]:
        return self.word_to_id.get(word)

    def word_set(self) -> set:
        return set(self.id_to_word)


# ---------------------------------------------------------------------------
# tokenization


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list:
    """Lowercase Twitter-style tokenizer.

    URLs become "<url>", mentions "<user>", hashtags are kept whole with their
    "#", and everything else is whitespace-split with leading/trailing
    punctuation stripped.
    """
    out = []
    for raw in text.split():
        low = raw.lower()
        if low.startswith("http://") or low.startswith("https://") or low.startswith("www."):
            out.append("<url>")
            continue
        tok = raw
        while tok and _is_punct(tok[0]) and tok[0] not in "@#":
            tok = tok[1:]
        while tok and _is_punct(tok[-1]):
            tok = tok[:-1]
        if not tok:
            continue
        if tok[0] == "@" and len(tok) > 1:
            out.append("<user>")
            continue
        out.append(tok.lower())
    return out


# ---------------------------------------------------------------------------
# distant supervision


def label_tokens(tokens: Sequence[str], year: int, lexicon: HashtagLexicon) -> Optional[LabelledPost]:
    """Label a tokenized post from its lexicon hashtags, stripping them.

    Returns None for posts with no lexicon hashtag or with both polarities.
    """
    has_support = any(t in lexicon.support for t in tokens)
    has_oppose = any(t in lexicon.oppose for t in tokens)
    if has_support == has_oppose:
        return None
    label = StanceLabel.SUPPORT if has_support else StanceLabel.OPPOSE
    kept = tuple(t for t in tokens if t not in lexicon)
    if not kept:
        return None
    return LabelledPost(tokens=kept, year=year, label=label)


def distant_label(post: RawPost, lexicon: HashtagLexicon) -> Optional[LabelledPost]:
    return label_tokens(tokenize(post.text), post.year, lexicon)


# ---------------------------------------------------------------------------
# splits


def balance_and_split(
    posts_by_year: Mapping[int, Sequence[LabelledPost]],
    train_frac: float = DEFAULT_TRAIN_FRAC,
    eval_frac: float = DEFAULT_EVAL_FRAC,
    seed: int = 0,
    balance: bool = True,
) -> LabelledDataset:
    """Downsample each year to equal label counts, then split stratified.

    Test gets the remainder of the pool after train and eval. Deterministic
    for a fixed seed.
    """
    if train_frac <= 0 or eval_frac <= 0 or train_frac + eval_frac >= 1:
        raise ConfigInvalid(
            f"need 0 < train_frac, eval_frac and train_frac + eval_frac < 1, "
            f"got {train_frac}/{eval_frac}"
        )
    rng = np.random.default_rng(seed)
    splits = {}
    for year in sorted(posts_by_year):
        by_label = {lab: [p for p in posts_by_year[year] if p.label is lab] for lab in StanceLabel}
        if any(not posts for posts in by_label.values()):
            raise YearEmpty(f"year {year} lacks posts for at least one label")
        n_keep = min(len(posts) for posts in by_label.values()) if balance else None
        train, evl, test = [], [], []
        for lab in StanceLabel:
            posts = by_label[lab]
            order = rng.permutation(len(posts))
            if n_keep is not None:
                order = order[:n_keep]
            picked = [posts[i] for i in order]
            n = len(picked)
            n_train = int(n * train_frac + 0.5)
            n_eval = int(n * eval_frac + 0.5)
            train.extend(picked[:n_train])
            evl.extend(picked[n_train : n_train + n_eval])
            test.extend(picked[n_train + n_eval :])
        for part in (train, evl, test):
            order = rng.permutation(len(part))
            part[:] = [part[i] for i in order]
        splits[year] = YearSplits(train=train, eval=evl, test=test)
    return LabelledDataset(splits=splits)


# ---------------------------------------------------------------------------
# vocabularies and drift


def vocabulary_from_counts(counts: Counter, min_count: int) -> Vocabulary:
    if min_count < 1:
        raise ConfigInvalid(f"min_count must be >= 1, got {min_count}")
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabulary(f"no word reaches min_count {min_count}")
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    words = [w for w, _ in kept]
    return Vocabulary(
        word_to_id={w: i for i, w in enumerate(words)},
        id_to_word=words,
        counts=np.array([c for _, c in kept], dtype=np.int64),
        min_count=min_count,
    )


def build_vocabulary(slices: Iterable[TemporalSlice], min_count: int) -> Vocabulary:
    counts = Counter()
    for sl in slices:
        for doc in sl.documents:
            counts.update(doc)
    return vocabulary_from_counts(counts, min_count)


def jaccard_similarity(vocab_a: set, vocab_b: set) -> float:
    if not vocab_a and not vocab_b:
        raise BothEmpty("both vocabularies are empty")
    inter = len(vocab_a & vocab_b)
    union = len(vocab_a | vocab_b)
    return inter / union


def jaccard_matrix(vocabs_by_year: Mapping[int, set]):
    """Symmetric year-by-year Jaccard similarity matrix."""
    years = sorted(vocabs_by_year)
    mat = np.ones((len(years), len(years)))
    for i, yi in enumerate(years):
        for j in range(i + 1, len(years)):
            mat[i, j] = mat[j, i] = jaccard_similarity(vocabs_by_year[yi], vocabs_by_year[years[j]])
    return years, mat


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class YearIngest:
    matched: int = 0
    ambiguous: int = 0
    unmatched: int = 0
    support: int = 0
    oppose: int = 0


@dataclass
class IngestStats:
    """Per-year distant-labelling outcome counts; label shares are pre-balance."""

    per_year: dict = field(default_factory=dict)

    def year(self, year) -> YearIngest:
        return self.per_year.setdefault(year, YearIngest())

    def to_dict(self):
        return {
            str(year): vars(stats) for year, stats in sorted(self.per_year.items())
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class IngestResult:
    slices: dict
    labelled_by_year: dict
    stats: IngestStats


def read_posts_jsonl(path) -> list:
    """Read (RawPost, explicit label or None) pairs from a JSON Lines file."""
    posts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if "text" not in obj or "year" not in obj:
                raise FormatError("post needs 'text' and 'year' fields", line=lineno)
            text = str(obj["text"])
            if not text.strip():
                raise FormatError("post text is empty", line=lineno)
            label = None
            if obj.get("label") is not None:
                try:
                    label = StanceLabel(obj["label"])
                except ValueError:
                    raise FormatError(
                        f"label must be 'support' or 'oppose', got {obj['label']!r}",
                        line=lineno,
                    ) from None
            posts.append((RawPost(text=text, year=int(obj["year"])), label))
    return posts


def ingest(posts: Iterable, lexicon: HashtagLexicon) -> IngestResult:
    """Build temporal slices and distantly labelled posts from raw posts.

    Every post's tokens feed the year's unlabelled slice (hashtags intact).
    Posts with an explicit label keep it; otherwise the lexicon decides, and
    ambiguous or unmatched posts are only counted. Lexicon hashtags are always
    stripped from labelled posts.
    """
    slices = {}
    labelled = {}
    stats = IngestStats()
    for post, explicit in posts:
        tokens = tokenize(post.text)
        if not tokens:
            continue
        year_stats = stats.year(post.year)
        slices.setdefault(post.year, []).append(tokens)
        if explicit is not None:
            kept = tuple(t for t in tokens if t not in lexicon)
            lp = LabelledPost(tokens=kept, year=post.year, label=explicit) if kept else None
        else:
            lp = label_tokens(tokens, post.year, lexicon)
            if lp is None:
                if any(t in lexicon for t in tokens):
                    year_stats.ambiguous += 1
                else:
                    year_stats.unmatched += 1
                continue
        if lp is None:
            year_stats.unmatched += 1
            continue
        year_stats.matched += 1
        if lp.label is StanceLabel.SUPPORT:
            year_stats.support += 1
        else:
            year_stats.oppose += 1
        labelled.setdefault(post.year, []).append(lp)
    slice_objs = {year: TemporalSlice(year=year, documents=docs) for year, docs in slices.items()}
    return IngestResult(slices=slice_objs, labelled_by_year=labelled, stats=stats)


# ---------------------------------------------------------------------------
# on-disk corpus layout (slices/<year>.txt + labelled/<year>/{train,eval,test}.jsonl)


def save_corpus_dir(out_dir, slices: Mapping[int, TemporalSlice], dataset: LabelledDataset):
    out = Path(out_dir)
    slice_dir = out / "slices"
    slice_dir.mkdir(parents=True, exist_ok=True)
    for year in sorted(slices):
        with open(slice_dir / f"{year}.txt", "w", encoding="utf-8") as fh:
            for doc in slices[year].documents:
                fh.write(" ".join(doc) + "\n")
    for year in dataset.years:
        year_dir = out / "labelled" / str(year)
        year_dir.mkdir(parents=True, exist_ok=True)
        parts = dataset.year(year)
        for name, posts in (("train", parts.train), ("eval", parts.eval), ("test", parts.test)):
            with open(year_dir / f"{name}.jsonl", "w", encoding="utf-8") as fh:
                for post in posts:
                    fh.write(
                        json.dumps(
                            {"tokens": list(post.tokens), "year": post.year, "label": post.label.value}
                        )
                        + "\n"
                    )


def load_corpus_dir(corpus_dir):
    """Load (slices mapping, LabelledDataset) written by save_corpus_dir."""
    root = Path(corpus_dir)
    slice_dir = root / "slices"
    if not slice_dir.is_dir():
        raise FileNotFoundError(f"no slices directory under {root}")
    slices = {}
    for path in sorted(slice_dir.glob("*.txt")):
        year = int(path.stem)
        docs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                toks = line.split()
                if toks:
                    docs.append(toks)
        slices[year] = TemporalSlice(year=year, documents=docs)
    splits = {}
    labelled_root = root / "labelled"
    if labelled_root.is_dir():
        for year_dir in sorted(labelled_root.iterdir()):
            if not year_dir.is_dir():
                continue
            year = int(year_dir.name)
            parts = {}
            for name in ("train", "eval", "test"):
                posts = []
                part_path = year_dir / f"{name}.jsonl"
                if part_path.exists():
                    with open(part_path, encoding="utf-8") as fh:
                        for line in fh:
                            line = line.strip()
                            if not line:
                                continue
                            obj = json.loads(line)
                            posts.append(
                                LabelledPost(
                                    tokens=tuple(obj["tokens"]),
                                    year=obj["year"],
                                    label=StanceLabel(obj["label"]),
                                )
                            )
                parts[name] = posts
            splits[year] = YearSplits(train=parts["train"], eval=parts["eval"], test=parts["test"])
    return slices, LabelledDataset(splits=splits)
