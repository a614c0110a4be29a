"""Worst-case rank agreement under score-preserving synonym substitutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from faithkit.attribution import Attribution
from faithkit.corpus import SynonymLexicon, Vocabulary
from faithkit.metrics.stats import order_correlation
from faithkit.model import ClassifierModel, TokenSequence, _forward

Method = Callable[[TokenSequence], Attribution]


@dataclass(frozen=True)
class StabilityConfig:
    max_substitutions: int = 4
    tau: float = 0.1

    def __post_init__(self):
        if self.max_substitutions < 0 or not 0.0 <= self.tau <= 1.0:
            raise ValueError("need max_substitutions >= 0 and tau in [0, 1]")


@dataclass
class StabilityResult:
    value: float
    contrast: TokenSequence
    substitutions: list[tuple[int, str, str]] = field(default_factory=list)
    evaluations: int = 0


def candidate_synonyms(token: str, lexicon: SynonymLexicon, vocab: Vocabulary) -> list[str]:
    """Synonyms the model can actually embed (out-of-vocabulary ones are skipped)."""
    return [syn for syn in lexicon.lookup(token) if syn in vocab and syn != token]


def stability_search(
    model: ClassifierModel,
    x: TokenSequence,
    method: Method,
    lexicon: SynonymLexicon,
    vocab: Vocabulary,
    cfg: StabilityConfig = StabilityConfig(),
    target: int | None = None,
) -> StabilityResult:
    """Greedy contrast-example search.

    Tokens are visited in decreasing importance under ``method(x)``. For each
    token every synonym is tried on top of the current contrast example;
    candidates whose score moves by more than ``tau`` are discarded and the
    admissible one with the lowest rank correlation is kept if it strictly
    lowers the running minimum. The search ends after ``max_substitutions``
    accepted substitutions or when every token has been visited.
    """
    base = method(x)
    n = len(x)
    y = int(_forward(model, model.embed(x)).label) if target is None else int(target)
    clean = float(_forward(model, model.embed(x)).probs[y])
    result = StabilityResult(1.0, x)
    if n < 2 or cfg.max_substitutions == 0:
        return result

    for i in base.rank:
        if len(result.substitutions) >= cfg.max_substitutions:
            break
        best = None
        for syn in candidate_synonyms(x.tokens[i], lexicon, vocab):
            cand = result.contrast.replace(int(i), syn, vocab.id_of(syn))
            if abs(clean - float(_forward(model, model.embed(cand)).probs[y])) > cfg.tau:
                continue
            result.evaluations += 1
            corr = order_correlation(base.rank, method(cand).rank)
            if best is None or corr < best[0]:
                best = (corr, cand, syn)
        if best is not None and best[0] < result.value:
            result.substitutions.append((int(i), x.tokens[i], best[2]))
            result.value, result.contrast = best[0], best[1]
    return result


def stability(model, x, method, lexicon, vocab, cfg: StabilityConfig = StabilityConfig(), target=None) -> float:
    """Minimum Spearman correlation reached; 1.0 when nothing was substituted."""
    return stability_search(model, x, method, lexicon, vocab, cfg, target).value
