"""Command-line entry point exposing all workflows.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 runtime
(training) failure. stdout carries only the primary result; diagnostics go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .corpus import SynthDomainSpec, generate_synthetic, load_canonical, save_canonical
from .encoding import build_vocab
from .errors import QadaptError, TrainingError
from .metrics import evaluate
from .qamodel import (
    ModelConfig,
    init_model,
    load_checkpoint,
    predict_answers,
    save_checkpoint,
)
from .stats import (
    auto_bin_edges,
    corpus_answer_lengths,
    length_histogram,
    prefix_distribution,
    write_histogram_csv,
    write_prefixes_csv,
)
from .trainer import TrainConfig, finetune, save_train_log, train
from .weighting import (
    DEFAULT_CAP,
    load_weight_table_csv,
    save_weight_table_csv,
    weigh_corpus,
    weights_from_corpora,
)

logger = logging.getLogger("qadapt")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _read_json(path):
    from .errors import DataError

    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}"
        ) from exc


def _load_train_config(path, seed_override):
    cfg = dict(_read_json(path))
    model_kwargs = dict(cfg.pop("model", {}))
    train_cfg = TrainConfig.from_json_dict(cfg)
    if seed_override is not None:
        train_cfg = replace(train_cfg, seed=seed_override)
    return train_cfg, model_kwargs


def _cmd_gen_synth(args) -> int:
    spec = SynthDomainSpec.from_json_dict(_read_json(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    corpus = generate_synthetic(spec)
    save_canonical(corpus, args.out)
    _emit({"out": str(args.out), "n_pairs": len(corpus)})
    return 0


def _cmd_stats(args) -> int:
    corpus = load_canonical(args.corpus)
    edges = None
    if args.edges_shared_with:
        other = load_canonical(args.edges_shared_with)
        pooled = np.concatenate(
            [corpus_answer_lengths(corpus), corpus_answer_lengths(other)]
        )
        edges = auto_bin_edges(pooled)
    out_dir = Path(args.output or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    hist_path = out_dir / "length_histogram.csv"
    write_histogram_csv(length_histogram(corpus, edges=edges), hist_path)
    prefix_path = out_dir / "prefixes.csv"
    write_prefixes_csv(prefix_distribution(corpus, n_words=args.prefix_words), prefix_path)
    _emit({"length_histogram": str(hist_path), "prefixes": str(prefix_path)})
    return 0


def _cmd_weights(args) -> int:
    source = load_canonical(args.source)
    target = load_canonical(args.target)
    p_s, p_t, table = weights_from_corpora(source, target, cap=args.cap)
    save_weight_table_csv(p_s, p_t, table, args.out)
    _emit({"out": str(args.out), "n_bins": len(table.weights), "cap": table.cap})
    return 0


def _cmd_train(args) -> int:
    corpus = load_canonical(args.corpus)
    train_cfg, model_kwargs = _load_train_config(args.config, args.seed)
    model_kwargs.setdefault("seed", train_cfg.seed)
    model = init_model(ModelConfig(vocab=build_vocab(corpus), **model_kwargs))
    weights = None
    if args.weights:
        weights = weigh_corpus(corpus, load_weight_table_csv(args.weights))
    trained, log = train(model, corpus, train_cfg, weights)
    save_checkpoint(trained, args.out)
    save_train_log(log, str(args.out) + ".log.json")
    _emit({"checkpoint": str(args.out), **log.to_json_dict()})
    return 0


def _cmd_finetune(args) -> int:
    base = load_checkpoint(args.base)
    corpus = load_canonical(args.corpus)
    train_cfg, _ = _load_train_config(args.config, args.seed)
    tuned, log = finetune(base, corpus, train_cfg)
    save_checkpoint(tuned, args.out)
    save_train_log(log, str(args.out) + ".log.json")
    _emit({"checkpoint": str(args.out), **log.to_json_dict()})
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    corpus = load_canonical(args.corpus)
    result = evaluate(predict_answers(model, corpus), corpus)
    if args.output:
        if args.format == "csv":
            import csv as _csv

            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                writer = _csv.writer(fh)
                writer.writerow(["id", "f1", "em"])
                writer.writerows(result.per_example)
        else:
            with open(args.output, "w", encoding="utf-8") as fh:
                json.dump(result.to_json_dict(), fh, indent=2)
                fh.write("\n")
    _emit(
        {
            "f1": result.f1,
            "exact_match": result.exact_match,
            "n_evaluated": result.n_evaluated,
        }
    )
    return 0


def _cmd_experiment(args) -> int:
    cfg = harness.load_experiment_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    result = harness.run_experiment(args.kind, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if args.format in ("json", "both"):
        path = out_dir / "report.json"
        harness.emit_report(result, path, format="json")
        written["json"] = str(path)
    if args.format in ("csv", "both"):
        path = out_dir / "report.csv"
        harness.emit_report(result, path, format="csv")
        written["csv"] = str(path)
    _emit({"kind": result.kind, "n_cells": len(result.cells), "reports": written})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qadapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus from a domain spec")
    p.add_argument("--spec", required=True, help="SynthDomainSpec JSON file")
    p.add_argument("--out", required=True, help="output canonical corpus file")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("stats", help="emit answer-length and question-prefix CSV reports")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prefix-words", type=int, choices=(1, 2), default=2)
    p.add_argument(
        "--edges-shared-with",
        default=None,
        help="second corpus; histogram edges come from the pooled lengths",
    )
    p.add_argument("--output", default=".", help="directory for the CSV reports")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("weights", help="estimate the capped importance-weight table")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cap", type=float, default=DEFAULT_CAP)
    p.add_argument("--out", required=True, help="output weight table CSV")
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("train", help="train a model from scratch on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True, help="TrainConfig JSON (optional 'model' section)")
    p.add_argument("--weights", default=None, help="weight table CSV from `qadapt weights`")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on a target sample")
    p.add_argument("--base", required=True, help="base checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", default=None, help="write the full per-example result here")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run a config-file experiment")
    p.add_argument("kind", choices=("grid", "curve", "weighted"))
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        logger.error("training failed: %s", exc)
        return 3
    except QadaptError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
