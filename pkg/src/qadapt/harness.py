"""Experiment orchestration: cross-domain grids, adaptation curves, and the
importance-weighted-base pipeline, with machine-readable reports.

Every cell carries the seed it was produced with; per-cell seeds are derived
by stable hashing so reruns of the same configuration reproduce reports
byte for byte. Reports deliberately omit wall-clock timestamps for that
reason (run times are logged to stderr instead).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import (
    Corpus,
    SynthDomainSpec,
    concat_corpora,
    generate_synthetic,
    load_canonical,
    preset_spec,
)
from .encoding import build_vocab
from .errors import DataError, DegenerateSampleError, SpecError, TrainingError
from .metrics import evaluate
from .qamodel import ModelConfig, QaModel, init_model, predict_answers
from .stats import answer_length_words
from .trainer import SubsetPlan, TrainConfig, finetune, sample_subsets, train
from .weighting import DEFAULT_CAP, shared_density_pair, weigh_corpus, weight_table

logger = logging.getLogger(__name__)

_EVAL_BATCH = 64


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labeled parts (hash-based, not hash())."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


# ---------------------------------------------------------------------------
# Result model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    train_spec: str
    test_corpus: str
    fraction: float | None
    draw: int | None
    seed: int
    f1: float | None
    em: float | None
    status: str = "ok"

    def to_json_dict(self) -> dict:
        return {
            "train_spec": self.train_spec,
            "test_corpus": self.test_corpus,
            "fraction": self.fraction,
            "draw": self.draw,
            "seed": self.seed,
            "f1": self.f1,
            "em": self.em,
            "status": self.status,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Cell":
        return cls(
            train_spec=d["train_spec"],
            test_corpus=d["test_corpus"],
            fraction=None if d["fraction"] is None else float(d["fraction"]),
            draw=None if d["draw"] is None else int(d["draw"]),
            seed=int(d["seed"]),
            f1=None if d["f1"] is None else float(d["f1"]),
            em=None if d["em"] is None else float(d["em"]),
            status=d.get("status", "ok"),
        )


@dataclass(frozen=True)
class Aggregate:
    train_spec: str
    test_corpus: str
    fraction: float | None
    n_cells: int
    mean_f1: float
    min_f1: float
    max_f1: float
    mean_em: float

    def to_json_dict(self) -> dict:
        return {
            "train_spec": self.train_spec,
            "test_corpus": self.test_corpus,
            "fraction": self.fraction,
            "n_cells": self.n_cells,
            "mean_f1": self.mean_f1,
            "min_f1": self.min_f1,
            "max_f1": self.max_f1,
            "mean_em": self.mean_em,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Aggregate":
        return cls(
            train_spec=d["train_spec"],
            test_corpus=d["test_corpus"],
            fraction=None if d["fraction"] is None else float(d["fraction"]),
            n_cells=int(d["n_cells"]),
            mean_f1=float(d["mean_f1"]),
            min_f1=float(d["min_f1"]),
            max_f1=float(d["max_f1"]),
            mean_em=float(d["mean_em"]),
        )


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    created_at: str | None = None
    note: str | None = None


@dataclass(frozen=True)
class ExperimentResult:
    kind: str
    cells: tuple[Cell, ...]
    aggregates: tuple[Aggregate, ...]
    provenance: Provenance

    def aggregate_for(self, train_spec: str, fraction=None, test_corpus=None) -> Aggregate:
        for agg in self.aggregates:
            if agg.train_spec != train_spec:
                continue
            if fraction is not None and agg.fraction != fraction:
                continue
            if test_corpus is not None and agg.test_corpus != test_corpus:
                continue
            return agg
        raise KeyError(f"no aggregate for ({train_spec!r}, fraction={fraction})")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "cells": [c.to_json_dict() for c in self.cells],
            "aggregates": [a.to_json_dict() for a in self.aggregates],
            "provenance": {
                "config_hash": self.provenance.config_hash,
                "note": self.provenance.note,
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentResult":
        return cls(
            kind=d["kind"],
            cells=tuple(Cell.from_json_dict(c) for c in d["cells"]),
            aggregates=tuple(Aggregate.from_json_dict(a) for a in d["aggregates"]),
            provenance=Provenance(
                config_hash=d["provenance"]["config_hash"],
                note=d["provenance"].get("note"),
            ),
        )


def compute_aggregates(cells) -> tuple[Aggregate, ...]:
    """Group cells by (train_spec, test_corpus, fraction); permutation-invariant."""
    groups: dict[tuple, list[Cell]] = {}
    for cell in cells:
        if cell.status != "ok" or cell.f1 is None:
            continue
        groups.setdefault((cell.train_spec, cell.test_corpus, cell.fraction), []).append(cell)
    aggs = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], -1.0 if k[2] is None else k[2])):
        members = groups[key]
        f1s = sorted(c.f1 for c in members)
        ems = sorted(0.0 if c.em is None else c.em for c in members)
        aggs.append(
            Aggregate(
                train_spec=key[0],
                test_corpus=key[1],
                fraction=key[2],
                n_cells=len(members),
                mean_f1=sum(f1s) / len(f1s),
                min_f1=f1s[0],
                max_f1=f1s[-1],
                mean_em=sum(ems) / len(ems),
            )
        )
    return tuple(aggs)


def build_result(kind: str, cells, config_hash: str, note: str | None = None) -> ExperimentResult:
    return ExperimentResult(
        kind=kind,
        cells=tuple(cells),
        aggregates=compute_aggregates(cells),
        provenance=Provenance(config_hash=config_hash, note=note),
    )


def _digest(desc: dict) -> str:
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _eval_cell(model: QaModel, test: Corpus, **cell_kwargs) -> Cell:
    result = evaluate(predict_answers(model, test, batch_size=_EVAL_BATCH), test)
    return Cell(test_corpus=test.name, f1=result.f1, em=result.exact_match, **cell_kwargs)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def cross_domain_grid(
    domains: dict[str, tuple[Corpus, Corpus]],
    base_config: TrainConfig,
    model_kwargs: dict | None = None,
    master_seed: int | None = None,
) -> ExperimentResult:
    """Train one model per domain plus their union; evaluate all on all test sets."""
    if len(domains) < 2:
        raise SpecError("cross-domain grid needs at least 2 domains")
    master = base_config.seed if master_seed is None else master_seed
    rows: list[tuple[str, Corpus]] = [(name, tr) for name, (tr, _) in domains.items()]
    rows.append(("union", concat_corpora("union", [tr for _, (tr, _) in domains.items()])))

    cells = []
    for row_name, train_corpus in rows:
        model_seed = derive_seed(master, "grid-init", row_name)
        train_seed = derive_seed(master, "grid-train", row_name)
        config = ModelConfig(
            vocab=build_vocab(train_corpus), seed=model_seed, **(model_kwargs or {})
        )
        try:
            model, _ = train(init_model(config), train_corpus, replace(base_config, seed=train_seed))
        except TrainingError as exc:
            raise TrainingError(f"grid cell train={row_name!r}: {exc}") from exc
        logger.info("grid: trained row %s (%d pairs)", row_name, len(train_corpus))
        for test_name, (_, test_corpus) in domains.items():
            cells.append(
                _eval_cell(
                    model,
                    test_corpus,
                    train_spec=row_name,
                    fraction=None,
                    draw=None,
                    seed=train_seed,
                )
            )
    desc = {
        "kind": "grid",
        "domains": {n: [tr.name, len(tr), te.name, len(te)] for n, (tr, te) in domains.items()},
        "train": base_config.to_json_dict(),
        "model": model_kwargs or {},
        "seed": master,
    }
    return build_result("grid", cells, _digest(desc))


def adaptation_curve(
    base: QaModel,
    target_train: Corpus,
    target_test: Corpus,
    plan: SubsetPlan,
    ft_config: TrainConfig,
    scratch_config: TrainConfig | None = None,
) -> ExperimentResult:
    """Fine-tune the base on drawn target subsets; compare with from-scratch models.

    Records a fraction-0 cell for the raw base, a "finetuned" series, and a
    "scratch" series of models trained on each subset alone.
    """
    master = plan.master_seed
    if scratch_config is None:
        scratch_config = replace(ft_config, epochs=max(5, ft_config.epochs))
    cells = [
        _eval_cell(
            base, target_test, train_spec="base", fraction=0.0, draw=None,
            seed=base.config.seed,
        )
    ]
    subsets = sample_subsets(target_train, plan)
    for fraction in plan.fractions:
        for draw, subset in enumerate(subsets[fraction]):
            ft_seed = derive_seed(master, "finetune", fraction, draw)
            model, _ = finetune(base, subset, replace(ft_config, seed=ft_seed))
            cells.append(
                _eval_cell(
                    model, target_test, train_spec="finetuned",
                    fraction=fraction, draw=draw, seed=ft_seed,
                )
            )
            scratch_cfg = ModelConfig(
                vocab=build_vocab(subset),
                **{
                    k: getattr(base.config, k)
                    for k in (
                        "d_model", "n_layers", "n_heads", "ffn_dim",
                        "max_seq_len", "max_answer_len", "init_scale",
                    )
                },
                seed=derive_seed(master, "scratch-init", fraction, draw),
            )
            scratch_seed = derive_seed(master, "scratch-train", fraction, draw)
            scratch, _ = train(
                init_model(scratch_cfg), subset, replace(scratch_config, seed=scratch_seed)
            )
            cells.append(
                _eval_cell(
                    scratch, target_test, train_spec="scratch",
                    fraction=fraction, draw=draw, seed=scratch_seed,
                )
            )
        logger.info("curve: finished fraction %s%%", fraction)
    desc = {
        "kind": "curve",
        "target": [target_train.name, len(target_train), target_test.name, len(target_test)],
        "plan": plan.to_json_dict(),
        "finetune": ft_config.to_json_dict(),
        "scratch": scratch_config.to_json_dict(),
        "base_seed": base.config.seed,
    }
    return build_result("curve", cells, _digest(desc))


def weighted_adaptation(
    source_train: Corpus,
    target_train: Corpus,
    target_test: Corpus,
    plan: SubsetPlan,
    base_config: TrainConfig,
    ft_config: TrainConfig,
    cap: float = DEFAULT_CAP,
    model_kwargs: dict | None = None,
) -> ExperimentResult:
    """Importance-weighted base training driven by per-draw length estimates.

    For each (fraction, draw): estimate target length density from the drawn
    subset, retrain the base on the weighted source, evaluate it, then
    fine-tune it on the same subset. The unweighted base and its fine-tunes
    are recorded alongside for comparison.
    """
    master = plan.master_seed
    vocab = build_vocab(source_train)
    model_config = ModelConfig(
        vocab=vocab, seed=derive_seed(master, "base-init"), **(model_kwargs or {})
    )
    base_seed = derive_seed(master, "base-train")
    base_train_config = replace(base_config, seed=base_seed)
    base, _ = train(init_model(model_config), source_train, base_train_config)
    logger.info("weighted: trained unweighted base (%d pairs)", len(source_train))
    cells = [
        _eval_cell(base, target_test, train_spec="base", fraction=0.0, draw=None, seed=base_seed)
    ]
    source_lengths = [answer_length_words(p) for p in source_train]
    subsets = sample_subsets(target_train, plan)
    for fraction in plan.fractions:
        for draw, subset in enumerate(subsets[fraction]):
            ft_seed = derive_seed(master, "finetune", fraction, draw)
            try:
                p_s, p_t = shared_density_pair(
                    source_lengths, [answer_length_words(p) for p in subset]
                )
            except (DegenerateSampleError, DataError) as exc:
                logger.warning(
                    "weighted: fraction %s draw %d failed density estimation: %s",
                    fraction, draw, exc,
                )
                for spec_name in ("weighted_base", "weighted_finetuned"):
                    cells.append(
                        Cell(
                            train_spec=spec_name, test_corpus=target_test.name,
                            fraction=fraction, draw=draw, seed=base_seed,
                            f1=None, em=None, status="failed",
                        )
                    )
            else:
                weights = weigh_corpus(source_train, weight_table(p_s, p_t, cap=cap))
                weighted_base, _ = train(
                    init_model(model_config), source_train, base_train_config, weights=weights
                )
                cells.append(
                    _eval_cell(
                        weighted_base, target_test, train_spec="weighted_base",
                        fraction=fraction, draw=draw, seed=base_seed,
                    )
                )
                wft, _ = finetune(weighted_base, subset, replace(ft_config, seed=ft_seed))
                cells.append(
                    _eval_cell(
                        wft, target_test, train_spec="weighted_finetuned",
                        fraction=fraction, draw=draw, seed=ft_seed,
                    )
                )
            uft, _ = finetune(base, subset, replace(ft_config, seed=ft_seed))
            cells.append(
                _eval_cell(
                    uft, target_test, train_spec="finetuned",
                    fraction=fraction, draw=draw, seed=ft_seed,
                )
            )
        logger.info("weighted: finished fraction %s%%", fraction)
    desc = {
        "kind": "weighted_curve",
        "source": [source_train.name, len(source_train)],
        "target": [target_train.name, len(target_train), target_test.name, len(target_test)],
        "plan": plan.to_json_dict(),
        "base_train": base_config.to_json_dict(),
        "finetune": ft_config.to_json_dict(),
        "cap": cap,
        "model": model_kwargs or {},
    }
    return build_result("weighted_curve", cells, _digest(desc))


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ("kind", "train_spec", "test_corpus", "fraction", "draw", "seed", "f1", "em")


def emit_report(result: ExperimentResult, path, format: str = "json") -> None:
    """Write a report; JSON mirrors the result losslessly, CSV carries the cells."""
    path = Path(path)
    if format == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(result.to_json_dict(), fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for c in result.cells:
                writer.writerow(
                    [
                        result.kind,
                        c.train_spec,
                        c.test_corpus,
                        "" if c.fraction is None else repr(c.fraction),
                        "" if c.draw is None else c.draw,
                        c.seed,
                        "" if c.f1 is None else repr(c.f1),
                        "" if c.em is None else repr(c.em),
                    ]
                )
    else:
        raise SpecError(f"unknown report format {format!r}")


def load_report_json(path) -> ExperimentResult:
    with open(path, encoding="utf-8") as fh:
        return ExperimentResult.from_json_dict(json.load(fh))


def load_report_csv(path) -> list[Cell]:
    cells = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _CSV_COLUMNS:
            raise DataError(f"{path}: expected columns {','.join(_CSV_COLUMNS)}")
        for row in reader:
            cells.append(
                Cell(
                    train_spec=row["train_spec"],
                    test_corpus=row["test_corpus"],
                    fraction=float(row["fraction"]) if row["fraction"] else None,
                    draw=int(row["draw"]) if row["draw"] else None,
                    seed=int(row["seed"]),
                    f1=float(row["f1"]) if row["f1"] else None,
                    em=float(row["em"]) if row["em"] else None,
                )
            )
    return cells


# ---------------------------------------------------------------------------
# Config-file driven runs (used by the CLI) and the desk-scale benchmark
# ---------------------------------------------------------------------------


def _resolve_corpus(entry: dict, base_dir: Path) -> Corpus:
    if "path" in entry:
        return load_canonical(base_dir / entry["path"])
    if "synth" in entry:
        return generate_synthetic(SynthDomainSpec.from_json_dict(entry["synth"]))
    if "preset" in entry:
        spec = preset_spec(
            entry["preset"],
            n_pairs=int(entry["n_pairs"]),
            seed=int(entry["seed"]),
            name=entry.get("name"),
        )
        return generate_synthetic(spec)
    raise SpecError(f"corpus entry needs 'path', 'synth', or 'preset': {sorted(entry)}")


def load_experiment_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}"
        ) from exc
    if "domains" not in cfg or not isinstance(cfg["domains"], dict):
        raise SpecError(f"{path}: config needs a 'domains' object")
    cfg["_base_dir"] = str(path.parent)
    return cfg


def _train_config_from(cfg: dict, key: str, default: TrainConfig) -> TrainConfig:
    if key in cfg:
        return TrainConfig.from_json_dict(cfg[key])
    return default


def run_experiment(kind: str, cfg: dict) -> ExperimentResult:
    """Execute a config-file experiment of kind grid, curve, or weighted."""
    base_dir = Path(cfg.get("_base_dir", "."))
    domains = {
        name: (
            _resolve_corpus(entry["train"], base_dir),
            _resolve_corpus(entry["test"], base_dir),
        )
        for name, entry in cfg["domains"].items()
    }
    model_kwargs = dict(cfg.get("model", {}))
    base_config = _train_config_from(cfg, "base_train", benchmark_base_config())
    master = int(cfg.get("seed", base_config.seed))

    if kind == "grid":
        return cross_domain_grid(
            domains, base_config, model_kwargs=model_kwargs, master_seed=master
        )

    try:
        source_name, target_name = cfg["source"], cfg["target"]
        source_train = domains[source_name][0]
        target_train, target_test = domains[target_name]
    except KeyError as exc:
        raise SpecError(f"experiment config missing domain reference: {exc}") from exc
    plan = SubsetPlan.from_json_dict(cfg["plan"]) if "plan" in cfg else benchmark_plan(master)
    ft_config = _train_config_from(cfg, "finetune", benchmark_finetune_config())

    if kind == "curve":
        vocab = build_vocab(source_train)
        model_config = ModelConfig(
            vocab=vocab, seed=derive_seed(master, "base-init"), **model_kwargs
        )
        base, _ = train(
            init_model(model_config),
            source_train,
            replace(base_config, seed=derive_seed(master, "base-train")),
        )
        scratch_config = (
            TrainConfig.from_json_dict(cfg["scratch"]) if "scratch" in cfg else None
        )
        return adaptation_curve(
            base, target_train, target_test, plan, ft_config, scratch_config=scratch_config
        )
    if kind == "weighted":
        return weighted_adaptation(
            source_train,
            target_train,
            target_test,
            plan,
            base_config,
            ft_config,
            cap=float(cfg.get("cap", DEFAULT_CAP)),
            model_kwargs=model_kwargs,
        )
    raise SpecError(f"unknown experiment kind {kind!r}")


# Desk-scale defaults: the smallest synthetic setup on which the qualitative
# transfer-learning and importance-weighting effects are observable.

BENCHMARK_SOURCE_N = 8000
BENCHMARK_TARGET_TRAIN_N = 2000
BENCHMARK_TARGET_TEST_N = 500


def benchmark_corpora(
    source_n: int = BENCHMARK_SOURCE_N,
    target_train_n: int = BENCHMARK_TARGET_TRAIN_N,
    target_test_n: int = BENCHMARK_TARGET_TEST_N,
    seed: int = 0,
):
    """(source_train, target_train, target_test) synthetic benchmark corpora."""
    from .corpus import general_like_spec, manual_like_spec

    source = generate_synthetic(
        general_like_spec(source_n, seed=derive_seed(seed, "source-train"), name="general-like")
    )
    target_train = generate_synthetic(
        manual_like_spec(
            target_train_n, seed=derive_seed(seed, "target-train"), name="manual-like-train"
        )
    )
    target_test = generate_synthetic(
        manual_like_spec(
            target_test_n, seed=derive_seed(seed, "target-test"), name="manual-like-test"
        )
    )
    return source, target_train, target_test


def benchmark_plan(master_seed: int = 0) -> SubsetPlan:
    return SubsetPlan(fractions=(1, 5, 10, 25, 50, 75), n_draws=5, master_seed=master_seed)


def benchmark_base_config() -> TrainConfig:
    return TrainConfig(epochs=3, batch_size=32, learning_rate=0.3, seed=0)


def benchmark_finetune_config() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=16, learning_rate=0.3, seed=0)


def benchmark_scratch_config() -> TrainConfig:
    return TrainConfig(epochs=6, batch_size=16, learning_rate=0.3, seed=0)
