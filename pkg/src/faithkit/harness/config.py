"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from faithkit.errors import ParseError
from faithkit.methods import METHODS
from faithkit.metrics import METRICS, THRESHOLDS

PATH_KEYS = ("train_path", "dev_path", "test_path", "embeddings_path", "synonyms_path",
             "checkpoint_path", "output_path")
PGD_EPS_GRID = (0.1, 0.5, 1.2, 2.2)


@dataclass
class ExperimentConfig:
    # data and artifacts
    train_path: str = "train.tsv"
    dev_path: str = "dev.tsv"
    test_path: str = "test.tsv"
    embeddings_path: str = "vectors.txt"
    synonyms_path: str = "synonyms.tsv"
    checkpoint_path: str = "model.ckpt"
    output_path: str = "report.json"
    seed: int = 0
    # training
    hidden_size: int = 64
    learning_rate: float = 0.5
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    train_embeddings: bool = True
    # evaluation protocol
    methods: tuple[str, ...] = METHODS
    metrics: tuple[str, ...] = METRICS
    thresholds: tuple[float, ...] = THRESHOLDS
    samples_per_class: int = 100
    # attribution hyperparameters; pgd_eps may be "auto" (tuned on dev)
    pgd_eps: str = "0.5"
    pgd_iters: int = 50
    pgd_normalize: bool = True
    tune_examples: int = 50
    ig_steps: int = 50
    lime_samples: int = 200
    lime_kernel_width: float = 0.25
    lime_ridge: float = 1e-3
    certify_delta: float = 0.1
    # metric hyperparameters
    sens_iters: int = 100
    sens_step: float = 1.0
    sens_max_radius: float = 1024.0
    sens_bisect_rounds: int = 20
    stab_max_substitutions: int = 4
    stab_tau: float = 0.1
    # curves and interpolation
    curve_ks: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    curve_min_length: int = 0
    curve_max_length: int = 0
    interp_method: str = "vapgd"
    interp_metric: str = "sens"
    interp_examples: int = 50

    def validate(self) -> "ExperimentConfig":
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ParseError(f"unknown methods: {unknown}; known: {list(METHODS)}")
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ParseError(f"unknown metrics: {unknown}; known: {list(METRICS)}")
        if not self.thresholds or any(not 0.0 < q <= 1.0 for q in self.thresholds):
            raise ParseError("thresholds must lie in (0, 1]")
        if self.interp_method not in METHODS or self.interp_metric not in ("comp", "sens"):
            raise ParseError("interp_method must be a known method and interp_metric comp or sens")
        if self.pgd_eps != "auto":
            try:
                if float(self.pgd_eps) < 0:
                    raise ValueError
            except ValueError:
                raise ParseError(f"pgd_eps must be 'auto' or a non-negative number, got {self.pgd_eps!r}") from None
        return self

    def echo(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}


def _convert(field_type: str, raw: str, key: str):
    try:
        if field_type == "int":
            return int(raw)
        if field_type == "float":
            return float(raw)
        if field_type == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if field_type.startswith("tuple[int"):
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if field_type.startswith("tuple[float"):
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if field_type.startswith("tuple[str"):
            return tuple(v for v in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ParseError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Paths resolve against ``base_dir``."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ParseError(f"unknown key {key!r}", line=lineno)
        values[key] = _convert(types[key], raw, key)
    defaults = ExperimentConfig()
    for key in PATH_KEYS:
        path = values.get(key, getattr(defaults, key))
        if not os.path.isabs(path):
            values[key] = os.path.normpath(os.path.join(base_dir, path))
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), os.path.dirname(os.path.abspath(path)))


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    return dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None}).validate()
