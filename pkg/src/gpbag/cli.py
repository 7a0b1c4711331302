"""Command-line interface.

Output layout under ``--out``::

    train     model/manifest.json, model/member_NNN.json, train_log.csv, test.csv
    evaluate  report.csv, summary.txt, summary.json
    sweep     sweep.csv, sweep_summary.json, [sweep_warning.txt]
    compare   compare.csv, compare.txt, compare_summary.json
    resample  resampled.csv
    prepare   <dst> (one CSV)

Every command also appends timestamped lines to ``run.log``; data files
never contain timestamps, so reruns with the same config are identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import __version__, recipes
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import Dataset, DatasetError, SplitSpec, load_csv, save_csv, stratified_split
from .ensemble import EnsembleModel, train_ensemble
from .evaluation import (compare_baseline, evaluate, format_table, sign_test, sweep_shape_warning,
                         sweep_train_fraction, write_reports_csv, write_summary)
from .resampling import balance
from .seeding import derive_seed

log = logging.getLogger("gpbag")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2

TRAIN_LOG_COLUMNS = ["bag", "round", "attempt", "mean_loss", "beta", "gp_fitness", "status"]


class CommandError(Exception):
    def __init__(self, message, code=EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _overrides(args) -> dict[str, str]:
    pairs = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    if args.seed is not None:
        pairs["seed"] = str(args.seed)
    if args.out is not None:
        pairs["out"] = args.out
    for flag, key in (("data", "data.path"), ("label_column", "data.label_column"),
                      ("positive_label", "data.positive_label")):
        v = getattr(args, flag, None)
        if v is not None:
            pairs[key] = v
    return pairs


def _config(args) -> ExperimentConfig:
    return load_config(args.config, _overrides(args), args.preset)


def _setup_logging(out: str, verbose: bool) -> None:
    os.makedirs(out, exist_ok=True)
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    log.handlers.clear()
    log.setLevel(logging.INFO)
    fh = logging.FileHandler(os.path.join(out, "run.log"), encoding="utf-8")
    fh.setFormatter(fmt)
    log.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(message)s"))
    sh.setLevel(logging.INFO if verbose else logging.WARNING)
    log.addHandler(sh)


def _load_dataset(cfg: ExperimentConfig, path: str | None = None) -> Dataset:
    path = path or cfg.data_path
    if not path:
        raise ConfigError("data.path: no dataset given (use --data or data.path)")
    if not os.path.isfile(path):
        raise CommandError(f"dataset not found: {path}")
    return load_csv(path, cfg.label_column, cfg.positive_label)


def _write_train_log(path, model: EnsembleModel) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=TRAIN_LOG_COLUMNS, lineterminator="\n")
        w.writeheader()
        for bag, m in enumerate(model.members):
            for event in m.log:
                w.writerow({"bag": bag, **{k: repr(v) if isinstance(v, float) else v
                                           for k, v in event.items() if k in TRAIN_LOG_COLUMNS}})


def cmd_train(args) -> int:
    cfg = _config(args)
    d = _load_dataset(cfg)
    train, test = stratified_split(d, cfg.split)
    _setup_logging(cfg.out, args.verbose)
    log.info("training on %s: %d rows (%d minority), %d bags", d.name, train.total,
             train.positive_count, cfg.ensemble.bag_count)
    model = train_ensemble(train, cfg.ensemble, jobs=args.jobs)
    model_dir = os.path.join(cfg.out, "model")
    model.save(model_dir)
    manifest_path = os.path.join(model_dir, "manifest.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest["experiment"] = cfg.to_dict()
    manifest["data"] = {"name": d.name, "label_column": cfg.label_column,
                        "positive_label": cfg.positive_label, "train_rows": train.total,
                        "test_rows": test.total}
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_train_log(os.path.join(cfg.out, "train_log.csv"), model)
    if test.total:
        save_csv(test, os.path.join(cfg.out, "test.csv"), label_name=cfg.label_column,
                 positive_label=cfg.positive_label, negative_label="other")
    log.info("model written to %s", model_dir)
    print(model_dir)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.model:
        raise ConfigError("--model: required")
    manifest_path = os.path.join(args.model, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise CommandError(f"no model at {args.model} (missing manifest.json)")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version", "").split(".")[0] != __version__.split(".")[0]:
        raise CommandError(f"model version {manifest.get('version')!r} is incompatible with "
                           f"gpbag {__version__}", EXIT_USAGE)
    data_meta = manifest.get("data", {})
    pairs = _overrides(args)
    pairs.setdefault("data.label_column", data_meta.get("label_column", "class"))
    pairs.setdefault("data.positive_label", data_meta.get("positive_label", "positive"))
    cfg = load_config(args.config, pairs, args.preset)
    test = _load_dataset(cfg, args.data)
    model = EnsembleModel.load(args.model)
    if test.feature_count != model.feature_count:
        raise CommandError(f"feature count mismatch: model expects {model.feature_count}, "
                           f"{args.data or cfg.data_path} has {test.feature_count}", EXIT_USAGE)
    _setup_logging(cfg.out, args.verbose)
    report = evaluate(model, test, seed=cfg.seed, dataset=test.name)
    write_reports_csv(os.path.join(cfg.out, "report.csv"), [report])
    text = format_table([report])
    with open(os.path.join(cfg.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    write_summary(os.path.join(cfg.out, "summary.json"), report.row())
    print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    d = _load_dataset(cfg)
    _setup_logging(cfg.out, args.verbose)
    log.info("sweep on %s: fractions %s, %d repeats", d.name, cfg.fractions, cfg.repeats)
    result = sweep_train_fraction(d, cfg.fractions, cfg.ensemble, cfg.repeats, jobs=args.jobs,
                                  seed=cfg.seed)
    write_reports_csv(os.path.join(cfg.out, "sweep.csv"), result.rows, result.means)
    write_summary(os.path.join(cfg.out, "sweep_summary.json"),
                  {"dataset": d.name, "means": {repr(f): m for f, m in result.means.items()},
                   "best_minority_fraction": result.best_fraction()})
    warning = sweep_shape_warning(result)
    if warning:
        with open(os.path.join(cfg.out, "sweep_warning.txt"), "w", encoding="utf-8") as fh:
            fh.write(warning + "\n")
        log.warning(warning)
    print(format_table(result.rows))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    d = _load_dataset(cfg)
    _setup_logging(cfg.out, args.verbose)
    rows = compare_baseline(d, cfg.ensemble, cfg.repeats, cfg.split.train_fraction,
                            cfg.baseline_rounds, seed=cfg.seed, jobs=args.jobs)
    write_reports_csv(os.path.join(cfg.out, "compare.csv"), rows)
    test = sign_test(rows)
    write_summary(os.path.join(cfg.out, "compare_summary.json"), {"dataset": d.name, "sign_test": test})
    text = format_table(rows) + (f"\nminority accuracy: ensemble wins {test['wins']} of "
                                 f"{test['pairs']} pairs (one-sided sign test p = {test['p_value']:.4g})")
    with open(os.path.join(cfg.out, "compare.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_resample(args) -> int:
    cfg = _config(args)
    d = _load_dataset(cfg)
    import dataclasses
    plan = dataclasses.replace(cfg.ensemble.plan, seed=derive_seed(cfg.seed, "resample"))
    out = balance(d, plan)  # validation errors surface before anything is written
    _setup_logging(cfg.out, args.verbose)
    path = os.path.join(cfg.out, "resampled.csv")
    save_csv(out, path, label_name=cfg.label_column, positive_label=cfg.positive_label,
             negative_label="other", synthetic_column=True)
    log.info("%d rows in, %d rows out (%d synthetic): %s", d.total, out.total,
             int(out.synthetic_mask.sum()), path)
    print(path)
    return EXIT_OK


RECIPES = {"uci-yeast": recipes.uci_yeast, "uci-ionosphere": recipes.uci_ionosphere,
           "uci-vowel": recipes.uci_vowel, "keel": recipes.keel}


def cmd_prepare(args) -> int:
    if not os.path.isfile(args.src):
        raise CommandError(f"source file not found: {args.src}")
    n = RECIPES[args.recipe](args.src, args.dst)
    print(f"{n} rows written to {args.dst}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment config file")
    common.add_argument("--seed", type=int, help="run seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for bags/sweep cells")
    common.add_argument("--preset", choices=("full", "quick"),
                        help="'quick' = population 100, 10 generations, 10 bags")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("--data", help="dataset CSV (overrides data.path)")
    common.add_argument("--label-column", dest="label_column")
    common.add_argument("--positive-label", dest="positive_label")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gpbag", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"gpbag {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train an ensemble").set_defaults(func=cmd_train)
    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a saved model")
    ev.add_argument("--model", required=True, help="model directory written by 'train'")
    ev.set_defaults(func=cmd_evaluate)
    sub.add_parser("sweep", parents=[common], help="training-fraction sweep").set_defaults(func=cmd_sweep)
    sub.add_parser("compare", parents=[common],
                   help="ensemble vs AdaBoost.M1 stumps on paired splits").set_defaults(func=cmd_compare)
    sub.add_parser("resample", parents=[common],
                   help="rebalance a whole dataset").set_defaults(func=cmd_resample)
    pr = sub.add_parser("prepare", help="convert a UCI/KEEL file to CSV")
    pr.add_argument("recipe", choices=sorted(RECIPES))
    pr.add_argument("src")
    pr.add_argument("dst")
    pr.set_defaults(func=cmd_prepare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"gpbag {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CommandError as exc:
        print(f"gpbag {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"gpbag {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
