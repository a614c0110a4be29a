"""Datasets, vocabularies, embedding files and synonym lexicons."""

from __future__ import annotations

import string
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from faithkit.errors import DimensionError, EmptyInputError, LabelError, ParseError
from faithkit.model import PAD_ID, UNK_ID, TokenSequence

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
_PUNCT = set(string.punctuation)


def _split_word(word: str) -> list[str]:
    start, end = 0, len(word)
    while start < end and word[start] in _PUNCT:
        start += 1
    while end > start and word[end - 1] in _PUNCT:
        end -= 1
    return list(word[:start]) + ([word[start:end]] if start < end else []) + list(word[end:])


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, peel edge punctuation into one-char tokens.

    >>> tokenize("Love this beer distributor.")
    ['love', 'this', 'beer', 'distributor', '.']
    """
    tokens = [tok for word in text.lower().split() for tok in _split_word(word)]
    if not tokens:
        raise EmptyInputError("text contains no tokens")
    return tokens


@dataclass(frozen=True)
class Example:
    label: int
    tokens: tuple[str, ...]


@dataclass
class Dataset:
    examples: list[Example]
    split: str = "train"

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def load_dataset(path, split: str | None = None) -> Dataset:
    """Read ``label<TAB>text`` lines. Blank lines are skipped."""
    with open(path, encoding="utf-8", newline="") as fh:
        raw = fh.read()
    examples = []
    for lineno, line in enumerate(raw.replace("\r\n", "\n").replace("\r", "\n").split("\n"), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ParseError("expected 'label<TAB>text'", line=lineno)
        label_text, text = line.split("\t", 1)
        try:
            label = int(label_text.strip())
        except ValueError:
            raise LabelError(f"label {label_text!r} is not an integer", line=lineno) from None
        if label not in (0, 1):
            raise LabelError(f"label {label} not in {{0, 1}}", line=lineno)
        try:
            tokens = tokenize(text)
        except EmptyInputError:
            raise ParseError("example text is empty", line=lineno) from None
        examples.append(Example(label, tuple(tokens)))
    return Dataset(examples, split or str(path))


class Vocabulary:
    """Token/id bijection with PAD=0 and UNK=1 reserved."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def build(cls, dataset: Dataset) -> "Vocabulary":
        """First-occurrence order over the split."""
        return cls(tok for ex in dataset for tok in ex.tokens)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id_of(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens) -> TokenSequence:
        tokens = tuple(tokens)
        return TokenSequence(tokens, np.array([self.id_of(t) for t in tokens], dtype=np.int64))

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]

    def encode_dataset(self, dataset: Dataset) -> list[tuple[int, TokenSequence]]:
        return [(ex.label, self.encode(ex.tokens)) for ex in dataset]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.itos[2:]) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls(line.rstrip("\r\n") for line in fh if line.rstrip("\r\n"))


def load_embeddings(path, vocab: Vocabulary, seed: int = 0) -> np.ndarray:
    """Embedding table for ``vocab`` from a ``word v1 ... vd`` text file.

    Words missing from the file, and UNK, get uniform(-0.1, 0.1) rows drawn
    from ``seed``; the PAD row is forced to zero.
    """
    found: dict[int, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2 or not parts[0]:
                continue
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DimensionError(f"line {lineno}: {len(parts) - 1} values, expected {dim}")
            word = parts[0]
            if word in vocab.stoi:
                try:
                    found[vocab.stoi[word]] = np.array([float(v) for v in parts[1:]])
                except ValueError:
                    raise ParseError("non-numeric embedding value", line=lineno) from None
    if dim is None:
        raise ParseError(f"no embedding vectors in {path}")
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    for idx, vec in found.items():
        table[idx] = vec
    table[PAD_ID] = 0.0
    return table


def random_embeddings(vocab_size: int, dim: int, seed: int = 0, scale: float = 0.1) -> np.ndarray:
    table = np.random.default_rng(seed).uniform(-scale, scale, size=(vocab_size, dim))
    table[PAD_ID] = 0.0
    return table


@dataclass
class SynonymLexicon:
    entries: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {
            head.lower(): list(dict.fromkeys(s.lower() for s in syns if s.lower() != head.lower()))
            for head, syns in self.entries.items()
        }

    def lookup(self, token: str) -> list[str]:
        return list(self.entries.get(token.lower(), []))

    def __len__(self):
        return len(self.entries)


def load_synonyms(path) -> SynonymLexicon:
    """Read ``word<TAB>syn1 syn2 ...``; a repeated head word keeps its last entry."""
    entries: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError("expected 'word<TAB>synonyms'", line=lineno)
            head, syns = line.split("\t", 1)
            head = head.strip().lower()
            if head in entries:
                warnings.warn(f"line {lineno}: duplicate head word {head!r}, last entry wins", stacklevel=2)
            entries[head] = syns.split()
    return SynonymLexicon(entries)
