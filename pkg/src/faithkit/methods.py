"""Name-addressable attribution procedures with shared hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field

from faithkit import attribution as attr
from faithkit.certify import CertifyConfig, attribute_certify

METHODS = (
    "random", "vagrad", "gradinp", "inggrad", "deeplift",
    "occlusion", "lime", "vapgd", "pgdinp", "certify",
)
STOCHASTIC = frozenset({"random", "lime"})


@dataclass(frozen=True)
class MethodSettings:
    pgd: attr.PgdConfig = field(default_factory=attr.PgdConfig)
    lime: attr.LimeConfig = field(default_factory=attr.LimeConfig)
    ig_steps: int = 50
    certify_delta: float = 0.1


def run_method(name, model, x, settings: MethodSettings | None = None, rng=None, target=None) -> attr.Attribution:
    """Attribute ``x`` with method ``name``.

    ``rng`` is required by the stochastic methods; ``target`` pins the
    explained class (defaults to the clean prediction of ``x``).
    """
    s = settings or MethodSettings()
    if name in STOCHASTIC and rng is None:
        raise ValueError(f"method {name!r} needs a random generator")
    if name == "random":
        return attr.attribute_random(x, rng)
    if name == "vagrad":
        return attr.attribute_vagrad(model, x, target)
    if name == "gradinp":
        return attr.attribute_gradinp(model, x, target)
    if name == "inggrad":
        return attr.attribute_inggrad(model, x, s.ig_steps, target=target)
    if name == "deeplift":
        return attr.attribute_deeplift(model, x, target=target)
    if name == "occlusion":
        return attr.attribute_occlusion(model, x, target)
    if name == "lime":
        return attr.attribute_lime(model, x, s.lime, rng, target)
    if name == "vapgd":
        return attr.attribute_vapgd(model, x, s.pgd, target)
    if name == "pgdinp":
        return attr.attribute_pgdinp(model, x, s.pgd, target)
    if name == "certify":
        return attribute_certify(model, x, CertifyConfig(s.certify_delta), target)
    raise KeyError(f"unknown method {name!r}; known: {', '.join(METHODS)}")
