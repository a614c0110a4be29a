"""Train -> attribute -> measure pipelines behind the CLI subcommands."""

from __future__ import annotations

import errno
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from faithkit.attribution import LimeConfig, PgdConfig
from faithkit.checkpoint import load_checkpoint, save_checkpoint
from faithkit.corpus import SynonymLexicon, Vocabulary, load_dataset, load_embeddings, load_synonyms
from faithkit.errors import FaithkitError
from faithkit.harness.config import PGD_EPS_GRID, ExperimentConfig
from faithkit.methods import METHODS, MethodSettings, run_method
from faithkit.metrics import (
    AttackConfig,
    StabilityConfig,
    comprehensiveness,
    interpolation_curve,
    radius_for_set,
    sensitivity_auc,
    stability,
    sufficiency,
)
from faithkit.metrics.removal import removal_delta
from faithkit.model import ClassifierModel, TokenSequence, TrainConfig, accuracy, predict, train

log = logging.getLogger(__name__)

# independent random streams derived from (seed, example index, stream id)
SAMPLE_STREAM = 1_000_003
TUNE_STREAM = 1_000_033
INTERP_STREAM = 1_000_037
NUMERIC_FAILURES = (FaithkitError, FloatingPointError, np.linalg.LinAlgError, ZeroDivisionError)


def vocab_path(cfg: ExperimentConfig) -> str:
    return cfg.checkpoint_path + ".vocab"


def require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, "no such file", path)
    return path


@dataclass
class TrainOutcome:
    model: ClassifierModel
    vocab: Vocabulary
    history: list
    dev_accuracy: float


def run_train(cfg: ExperimentConfig) -> TrainOutcome:
    for path in (cfg.train_path, cfg.dev_path, cfg.embeddings_path):
        require_file(path)
    train_ds = load_dataset(cfg.train_path, "train")
    dev_ds = load_dataset(cfg.dev_path, "dev")
    vocab = Vocabulary.build(train_ds)
    table = load_embeddings(cfg.embeddings_path, vocab, seed=cfg.seed)
    tcfg = TrainConfig(
        learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
        patience=cfg.patience, seed=cfg.seed, hidden_size=cfg.hidden_size,
        embedding_dim=table.shape[1], train_embeddings=cfg.train_embeddings,
    )
    dev = vocab.encode_dataset(dev_ds)
    model, history = train(vocab.encode_dataset(train_ds), table, tcfg, dev=dev)
    os.makedirs(os.path.dirname(os.path.abspath(cfg.checkpoint_path)), exist_ok=True)
    save_checkpoint(model, cfg.checkpoint_path)
    vocab.save(vocab_path(cfg))
    return TrainOutcome(model, vocab, history, accuracy(model, dev))


def load_artifacts(cfg: ExperimentConfig) -> tuple[ClassifierModel, Vocabulary]:
    vocab = Vocabulary.load(require_file(vocab_path(cfg)))
    model = load_checkpoint(require_file(cfg.checkpoint_path), vocab_size=len(vocab))
    return model, vocab


def example_rng(seed: int, example: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, example, stream])


def balanced_sample(labels, per_class: int, seed: int) -> list[int]:
    """Up to ``per_class`` indices of each gold class, without replacement, sorted."""
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, SAMPLE_STREAM])
    chosen = []
    for cls in (0, 1):
        pool = np.flatnonzero(labels == cls)
        take = min(per_class, len(pool))
        chosen.extend(rng.choice(pool, size=take, replace=False).tolist())
    return sorted(chosen)


def attack_config(cfg: ExperimentConfig) -> AttackConfig:
    return AttackConfig(iters=cfg.sens_iters, step=cfg.sens_step, max_radius=cfg.sens_max_radius,
                        bisect_rounds=cfg.sens_bisect_rounds)


def method_settings(cfg: ExperimentConfig, pgd_eps: float) -> MethodSettings:
    return MethodSettings(
        pgd=PgdConfig(eps=pgd_eps, iters=cfg.pgd_iters, normalize=cfg.pgd_normalize),
        lime=LimeConfig(cfg.lime_samples, cfg.lime_kernel_width, cfg.lime_ridge),
        ig_steps=cfg.ig_steps,
        certify_delta=cfg.certify_delta,
    )


def select_pgd_eps(model, examples: list[TokenSequence], method: str, cfg: ExperimentConfig) -> float:
    """Grid radius with the lowest mean sensitivity AUC on the tuning examples."""
    best_eps, best_auc = PGD_EPS_GRID[1], math.inf
    attack = attack_config(cfg)
    for eps in PGD_EPS_GRID:
        settings = method_settings(cfg, eps)
        aucs = []
        for x in examples:
            result = sensitivity_auc(model, x, run_method(method, model, x, settings), cfg.thresholds, attack)
            if result.defined:
                aucs.append(result.auc)
        mean = float(np.mean(aucs)) if aucs else math.inf
        log.info("pgd eps %.2f for %s: mean sensitivity AUC %.4f", eps, method, mean)
        if mean < best_auc:
            best_eps, best_auc = eps, mean
    return best_eps


def resolve_settings(cfg: ExperimentConfig, model, vocab) -> dict[str, MethodSettings]:
    """Per-method hyperparameters; PGD radii are tuned on dev when ``pgd_eps = auto``."""
    settings = {}
    fixed = None if cfg.pgd_eps == "auto" else float(cfg.pgd_eps)
    tune_pool = None
    for name in cfg.methods:
        eps = fixed
        if eps is None and name in ("vapgd", "pgdinp"):
            if tune_pool is None:
                dev = vocab.encode_dataset(load_dataset(require_file(cfg.dev_path), "dev"))
                rng = np.random.default_rng([cfg.seed, TUNE_STREAM])
                picks = np.sort(rng.permutation(len(dev))[: cfg.tune_examples])
                tune_pool = [dev[i][1] for i in picks]
            eps = select_pgd_eps(model, tune_pool, name, cfg)
        settings[name] = method_settings(cfg, 0.5 if eps is None else eps)
    return settings


@dataclass
class ExampleRecord:
    example: int
    method: str
    metric: str
    value: float | None
    failed: bool
    attack_failures: int = 0

    def as_dict(self) -> dict:
        return {"example": self.example, "method": self.method, "metric": self.metric,
                "value": self.value, "failed": self.failed, "attack_failures": self.attack_failures}


def evaluate_example(model, vocab, lexicon, x: TokenSequence, index: int, method: str,
                     cfg: ExperimentConfig, settings: MethodSettings) -> list[ExampleRecord]:
    """All configured metrics for one (example, method); failures are recorded, never raised."""
    stream = METHODS.index(method)
    rng = example_rng(cfg.seed, index, stream)
    y = int(predict(model, model.embed(x)))
    records = []
    try:
        attribution = run_method(method, model, x, settings, rng=rng, target=y)
    except NUMERIC_FAILURES as exc:
        log.warning("example %d, %s: attribution failed: %s", index, method, exc)
        return [ExampleRecord(index, method, metric, None, True) for metric in cfg.metrics]

    for metric in cfg.metrics:
        try:
            misses = 0
            if metric == "comp":
                value = float(np.mean([comprehensiveness(model, x, attribution, q, y) for q in cfg.thresholds]))
            elif metric == "suff":
                value = float(np.mean([sufficiency(model, x, attribution, q, y) for q in cfg.thresholds]))
            elif metric == "sens":
                result = sensitivity_auc(model, x, attribution, cfg.thresholds, attack_config(cfg), y)
                misses = result.n_failed
                value = result.auc if result.defined else None
            else:
                black_box = lambda cand: run_method(method, model, cand, settings, rng=rng, target=y)  # noqa: E731
                value = stability(model, x, black_box, lexicon, vocab,
                                  StabilityConfig(cfg.stab_max_substitutions, cfg.stab_tau), y)
            if value is not None and not math.isfinite(value):
                value = None
            records.append(ExampleRecord(index, method, metric, value, value is None, misses))
        except NUMERIC_FAILURES as exc:
            log.warning("example %d, %s, %s failed: %s", index, method, metric, exc)
            records.append(ExampleRecord(index, method, metric, None, True))
    return records


def load_eval_split(cfg: ExperimentConfig, vocab: Vocabulary):
    data = vocab.encode_dataset(load_dataset(require_file(cfg.test_path), "test"))
    return data


def load_lexicon(cfg: ExperimentConfig) -> SynonymLexicon:
    if "stab" not in cfg.metrics:
        return SynonymLexicon({})
    return load_synonyms(require_file(cfg.synonyms_path))


def run_evaluate(cfg: ExperimentConfig, model=None, vocab=None) -> tuple[list[int], list[ExampleRecord], dict]:
    if model is None:
        model, vocab = load_artifacts(cfg)
    lexicon = load_lexicon(cfg)
    data = load_eval_split(cfg, vocab)
    indices = balanced_sample([label for label, _ in data], cfg.samples_per_class, cfg.seed)
    settings = resolve_settings(cfg, model, vocab)
    records = []
    for index in indices:
        x = data[index][1]
        for method in cfg.methods:
            records.extend(evaluate_example(model, vocab, lexicon, x, index, method, cfg, settings[method]))
    chosen_eps = {m: s.pgd.eps for m, s in settings.items() if m in ("vapgd", "pgdinp")}
    return indices, records, chosen_eps


# -- curves ------------------------------------------------------------------

CURVE_COLUMNS = ("method", "k", "examples", "clamped", "comprehensiveness", "sensitivity", "sens_failures")


def curve_pool(cfg: ExperimentConfig, data) -> list[int]:
    lo = cfg.curve_min_length
    hi = cfg.curve_max_length or math.inf
    eligible = [i for i, (_, x) in enumerate(data) if lo <= len(x) <= hi]
    labels = np.array([data[i][0] for i in eligible])
    picks = balanced_sample(labels, cfg.samples_per_class, cfg.seed)
    return [eligible[i] for i in picks]


def run_curves(cfg: ExperimentConfig, ks=None, model=None, vocab=None) -> list[dict]:
    """Mean comprehensiveness and sensitivity radius after touching the top-k tokens."""
    if model is None:
        model, vocab = load_artifacts(cfg)
    ks = tuple(ks or cfg.curve_ks)
    if any(k < 1 for k in ks):
        raise ValueError("k must be >= 1")
    data = load_eval_split(cfg, vocab)
    pool = curve_pool(cfg, data)
    settings = resolve_settings(cfg, model, vocab)
    attack = attack_config(cfg)
    rows = []
    for method in cfg.methods:
        per_k = {k: {"comp": [], "sens": [], "clamped": 0, "fail": 0} for k in ks}
        for index in pool:
            x = data[index][1]
            y = int(predict(model, model.embed(x)))
            rng = example_rng(cfg.seed, index, METHODS.index(method))
            order = run_method(method, model, x, settings[method], rng=rng, target=y).rank
            for k in ks:
                acc = per_k[k]
                kk = min(k, len(x))
                acc["clamped"] += int(k > len(x))
                acc["comp"].append(removal_delta(model, x, order[:kk], y))
                radius = radius_for_set(model, x, order[:kk], attack, y)
                if math.isfinite(radius):
                    acc["sens"].append(radius)
                else:
                    acc["fail"] += 1
        for k in ks:
            acc = per_k[k]
            rows.append({
                "method": method, "k": k, "examples": len(pool), "clamped": acc["clamped"],
                "comprehensiveness": float(np.mean(acc["comp"])) if acc["comp"] else math.nan,
                "sensitivity": float(np.mean(acc["sens"])) if acc["sens"] else math.nan,
                "sens_failures": acc["fail"],
            })
    return rows


# -- interpolation -----------------------------------------------------------

INTERP_COLUMNS = ("example", "f0", "f1", "f2", "f3", "f4")


@dataclass
class InterpolationOutcome:
    rows: list[dict]
    mean: dict
    degenerate: int


def run_interpolate(cfg: ExperimentConfig, model=None, vocab=None) -> InterpolationOutcome:
    if model is None:
        model, vocab = load_artifacts(cfg)
    data = load_eval_split(cfg, vocab)
    eligible = [i for i, (_, x) in enumerate(data) if len(x) >= 8]
    rng = np.random.default_rng([cfg.seed, INTERP_STREAM])
    picks = sorted(rng.permutation(eligible)[: cfg.interp_examples].tolist()) if eligible else []
    settings = resolve_settings(cfg, model, vocab)[cfg.interp_method] \
        if cfg.interp_method in cfg.methods else method_settings(cfg, 0.5 if cfg.pgd_eps == "auto" else float(cfg.pgd_eps))
    attack = attack_config(cfg)
    rows, degenerate = [], 0
    for index in picks:
        x = data[index][1]
        y = int(predict(model, model.embed(x)))
        rng_m = example_rng(cfg.seed, index, METHODS.index(cfg.interp_method))
        attribution = run_method(cfg.interp_method, model, x, settings, rng=rng_m, target=y)
        curve = interpolation_curve(model, x, attribution, cfg.interp_metric,
                                    example_rng(cfg.seed, index, INTERP_STREAM), y, attack)
        if curve.degenerate:
            degenerate += 1
            continue
        rows.append({"example": index, **{f"f{i}": float(v) for i, v in enumerate(curve.values)}})
    mean = {"example": "mean"}
    for i in range(5):
        col = [row[f"f{i}"] for row in rows]
        mean[f"f{i}"] = float(np.mean(col)) if col else math.nan
    return InterpolationOutcome(rows, mean, degenerate)
