"""Synthetic polarity corpus with word vectors and a synonym lexicon.

Sentences mix neutral filler with positive and negative cue words; the
label is the majority polarity. Cue words share a polarity direction in
embedding space and synonyms are drawn from the same polarity group, which
gives a separable task where a few tokens carry the decision.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from faithkit.corpus import Dataset, Example, SynonymLexicon


@dataclass
class SyntheticCorpus:
    train: Dataset
    dev: Dataset
    test: Dataset
    vectors: dict[str, np.ndarray]
    lexicon: SynonymLexicon


def _words(prefix, count):
    return [f"{prefix}{i}" for i in range(count)]


def _synonym_groups(words, group_size):
    entries = {}
    for start in range(0, len(words), group_size):
        group = words[start : start + group_size]
        for w in group:
            entries[w] = [v for v in group if v != w]
    return entries


def make_corpus(
    seed: int = 0,
    n_train: int = 600,
    n_dev: int = 100,
    n_test: int = 200,
    min_len: int = 8,
    max_len: int = 30,
    dim: int = 50,
    n_polar: int = 24,
    n_neutral: int = 120,
    polar_rate: float = 0.15,
    group_size: int = 4,
    neutral_scale: float = 0.3,
) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    pos, neg, neutral = _words("good", n_polar), _words("bad", n_polar), _words("w", n_neutral)

    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    vectors = {}
    for w in neutral:
        vectors[w] = rng.normal(scale=neutral_scale, size=dim)
    for sign, words in ((1.0, pos), (-1.0, neg)):
        for w in words:
            vectors[w] = rng.normal(scale=0.3, size=dim) + sign * rng.uniform(0.5, 1.5) * direction

    def sentence():
        while True:
            length = int(rng.integers(min_len, max_len + 1))
            tokens = []
            for _ in range(length):
                if rng.random() < polar_rate:
                    bank = pos if rng.random() < 0.5 else neg
                else:
                    bank = neutral
                tokens.append(bank[int(rng.integers(len(bank)))])
            balance = sum(t in pos for t in tokens) - sum(t in neg for t in tokens)
            if balance != 0:
                return Example(int(balance > 0), tuple(tokens))

    def split(count, name):
        return Dataset([sentence() for _ in range(count)], name)

    lexicon = SynonymLexicon({**_synonym_groups(pos, group_size), **_synonym_groups(neg, group_size),
                              **_synonym_groups(neutral, group_size)})
    return SyntheticCorpus(split(n_train, "train"), split(n_dev, "dev"), split(n_test, "test"), vectors, lexicon)


def write_corpus(corpus: SyntheticCorpus, directory) -> dict[str, str]:
    """Write TSV splits, a word-vector file and a synonym TSV; return their paths."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for ds in (corpus.train, corpus.dev, corpus.test):
        path = os.path.join(directory, f"{ds.split}.tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for ex in ds:
                fh.write(f"{ex.label}\t{' '.join(ex.tokens)}\n")
        paths[ds.split] = path
    paths["embeddings"] = os.path.join(directory, "vectors.txt")
    with open(paths["embeddings"], "w", encoding="utf-8", newline="\n") as fh:
        for word, vec in corpus.vectors.items():
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    paths["synonyms"] = os.path.join(directory, "synonyms.tsv")
    with open(paths["synonyms"], "w", encoding="utf-8", newline="\n") as fh:
        for word, syns in corpus.lexicon.entries.items():
            fh.write(f"{word}\t{' '.join(syns)}\n")
    return paths
