"""Command-line driver for the calibration pipeline.

Subcommands cover the full workflow: `synth` emits a reproducible
synthetic sensor-network CSV, `preprocess` turns raw CSVs into a feature
matrix plus a split file, `train` fits a booster and writes the model,
training curves, and an evaluation report, `finetune` continues boosting
an existing tree model on a new matrix, `evaluate` scores a model,
`predict` emits per-row predictions, and `gridsearch` sweeps
hyperparameter grids.

Options resolve in fixed precedence: command-line flag, then config-file
key, then built-in default. A single --seed drives every random choice in
a run. Every run writes `manifest.json` recording the resolved
configuration, the seed, and a sha256 per artifact, so identical config
plus seed reproduces identical bytes. Any failure prints a one-line JSON
error record to stderr and exits nonzero.

Config keys (key = value grammar, see the config module): bare keys
eta, rounds, max_depth, subsample, colsample_bytree, min_child_weight,
lambda, alpha, gamma, early_stopping_rounds, seed, fill, target, split,
booster; namespaced keys synth.<field>, schema.<field>, grid.<knob>.
Unknown keys are rejected; keys a subcommand does not use are ignored, so
one file can describe a whole experiment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from aircal import gbdt, model_io, tune
from aircal.config import parse_config, take
from aircal.errors import ConfigError, IntegrityError, ParseError, SchemaError
from aircal.evaluate import evaluate, export_curves, report_json_line, report_text
from aircal.gbdt import Ensemble, Hyperparams
from aircal.ingest import (
    DEFAULT_SCHEMA,
    group_by_sensor,
    parse_csv,
    table_to_csv,
    to_records,
)
from aircal.linear import LinearParams, train_linear
from aircal.preprocess import (
    DataSplit,
    FeatureMatrix,
    FillStrategy,
    SplitMode,
    TargetMode,
    build_features,
    impute_records,
    make_split,
    matrix_from_csv,
    matrix_to_csv,
    split_from_json,
    split_to_json,
    truncate_to_min,
)
from aircal.synth import SynthConfig, generate, inject_missing, records_to_table
from aircal.tune import ParamGrid, grid_search, trials_to_csv

_HYPER_KEYS = frozenset(
    {
        "eta", "rounds", "max_depth", "subsample", "colsample_bytree",
        "min_child_weight", "lambda", "alpha", "gamma",
        "early_stopping_rounds", "seed",
    }
)
_MODE_KEYS = frozenset({"fill", "target", "split", "booster"})
_SYNTH_KEYS = frozenset(
    {
        "n_sensors", "n_timesteps", "center_lon", "center_lat", "spread",
        "coeff_raw", "coeff_hum", "coeff_temp", "spatial_amp", "noise_sigma",
        "missing_fraction",
    }
)
_GRID_KEYS = frozenset(tune.TUNABLE)
_SCHEMA_KEYS = frozenset(DEFAULT_SCHEMA)


def _validate_config_keys(cfg: dict) -> None:
    for key in cfg:
        if "." in key:
            ns, _, leaf = key.partition(".")
            known = {
                "synth": _SYNTH_KEYS, "grid": _GRID_KEYS, "schema": _SCHEMA_KEYS,
            }.get(ns)
            if known is None or leaf not in known:
                raise ConfigError(f"unknown config key {key!r}")
        elif key not in _HYPER_KEYS and key not in _MODE_KEYS:
            raise ConfigError(f"unknown config key {key!r}")


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_config(args) -> dict:
    cfg = parse_config(_read_text(args.config)) if args.config else {}
    _validate_config_keys(cfg)
    return cfg


class _Run:
    """Collects artifacts for one invocation and writes the manifest."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.artifacts: dict[str, str] = {}
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.artifacts[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    def finish(self, command: str, seed: int, config_record: dict) -> None:
        doc = {
            "command": command,
            "seed": int(seed),
            "config": config_record,
            "artifacts": self.artifacts,
        }
        text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        take(cfg, "seed", int)
        return args.seed
    return take(cfg, "seed", int, 0)


def _resolve_choice(flag_value: Optional[str], cfg: dict, key: str,
                    enum_cls, default: str):
    raw = flag_value if flag_value is not None else take(cfg, key, str, default)
    try:
        return enum_cls(raw)
    except ValueError:
        choices = "|".join(m.value for m in enum_cls)
        raise ConfigError(f"{key} must be one of {choices}, got {raw!r}") from None


def _tree_params(args, cfg: dict, seed: int) -> Hyperparams:
    kwargs = {
        "eta": args.eta if args.eta is not None else take(cfg, "eta", float, 0.3),
        "n_rounds": args.rounds if args.rounds is not None
        else take(cfg, "rounds", int, 100),
        "max_depth": take(cfg, "max_depth", int, 6),
        "subsample": take(cfg, "subsample", float, 1.0),
        "colsample_bytree": take(cfg, "colsample_bytree", float, 1.0),
        "min_child_weight": take(cfg, "min_child_weight", float, 1.0),
        "reg_lambda": take(cfg, "lambda", float, 1.0),
        "gamma": take(cfg, "gamma", float, 0.0),
        "seed": seed,
        "early_stopping_rounds": take(cfg, "early_stopping_rounds", int, None),
    }
    try:
        return Hyperparams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _linear_params(args, cfg: dict, seed: int) -> LinearParams:
    kwargs = {
        "eta": args.eta if args.eta is not None else take(cfg, "eta", float, 0.3),
        "n_rounds": args.rounds if args.rounds is not None
        else take(cfg, "rounds", int, 100),
        "reg_lambda": take(cfg, "lambda", float, 1.0),
        "alpha": take(cfg, "alpha", float, 0.0),
        "seed": seed,
    }
    try:
        return LinearParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _params_record(params) -> dict:
    record = {
        "eta": params.eta,
        "rounds": params.n_rounds,
        "lambda": params.reg_lambda,
    }
    if isinstance(params, Hyperparams):
        record.update(
            max_depth=params.max_depth,
            subsample=params.subsample,
            colsample_bytree=params.colsample_bytree,
            min_child_weight=params.min_child_weight,
            gamma=params.gamma,
            early_stopping_rounds=params.early_stopping_rounds,
        )
    else:
        record["alpha"] = params.alpha
    return record


def _load_matrix(path: str) -> FeatureMatrix:
    return matrix_from_csv(_read_text(path))


def _check_split_bounds(split: DataSplit, matrix: FeatureMatrix) -> None:
    top = max(
        int(part.max(initial=-1))
        for part in (split.train_idx, split.val_idx, split.test_idx)
    )
    if top >= matrix.n_rows:
        raise IntegrityError(
            f"split row index {top} out of range for a "
            f"{matrix.n_rows}-row matrix"
        )


def _obtain_split(args, cfg: dict, matrix: FeatureMatrix, seed: int
                  ) -> tuple[DataSplit, Optional[str]]:
    """Use the recorded split when given; otherwise derive one so a bare
    matrix is still trainable."""
    if getattr(args, "split_file", None):
        split = split_from_json(_read_text(args.split_file))
        _check_split_bounds(split, matrix)
        return split, args.split_file
    mode = _resolve_choice(getattr(args, "split", None), cfg, "split",
                           SplitMode, "chrono")
    return make_split(matrix.n_rows, mode, seed), None


def _eval_rows(matrix: FeatureMatrix, split: Optional[DataSplit],
               partition: str) -> np.ndarray:
    if partition == "all":
        return np.arange(matrix.n_rows, dtype=np.int64)
    if split is None:
        raise ConfigError(f"partition {partition!r} needs --split-file")
    return {
        "train": split.train_idx, "val": split.val_idx, "test": split.test_idx,
    }[partition]


def _write_eval(run: _Run, model, matrix: FeatureMatrix, rows, partition: str):
    report = evaluate(model, matrix, rows)
    run.write("eval.txt", f"partition: {partition}\n" + report_text(report))
    run.write("eval.json", report_json_line(report) + "\n")
    return report


def _format_float(x: float) -> str:
    return repr(float(x))


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    kwargs = {
        "n_sensors": take(cfg, "synth.n_sensors", int, 10),
        "n_timesteps": take(cfg, "synth.n_timesteps", int, 500),
        "center_lon": take(cfg, "synth.center_lon", float, 10.0),
        "center_lat": take(cfg, "synth.center_lat", float, 50.0),
        "spread": take(cfg, "synth.spread", float, 0.5),
        "coeff_raw": take(cfg, "synth.coeff_raw", float, 0.8),
        "coeff_hum": take(cfg, "synth.coeff_hum", float, 0.1),
        "coeff_temp": take(cfg, "synth.coeff_temp", float, 0.2),
        "spatial_amp": take(cfg, "synth.spatial_amp", float, 10.0),
        "noise_sigma": take(cfg, "synth.noise_sigma", float, 2.0),
        "seed": seed,
    }
    missing = take(cfg, "synth.missing_fraction", float, 0.0)
    if not 0.0 <= missing < 1.0:
        raise ConfigError("synth.missing_fraction must be in [0, 1)")
    try:
        config = SynthConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    per_sensor = generate(config)
    if missing > 0.0:
        per_sensor = inject_missing(per_sensor, missing, seed)
    table = records_to_table(per_sensor)
    run = _Run(args.out)
    run.write("raw.csv", table_to_csv(table))
    record = {f"synth.{k}": v for k, v in kwargs.items() if k != "seed"}
    record["synth.missing_fraction"] = missing
    run.finish("synth", seed, record)
    print(
        f"synth: {table.n_rows} readings from {config.n_sensors} sensors "
        f"-> {os.path.join(args.out, 'raw.csv')}"
    )
    return 0


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    schema = dict(DEFAULT_SCHEMA)
    for field in sorted(_SCHEMA_KEYS):
        column = take(cfg, f"schema.{field}", str, None)
        if column is not None:
            schema[field] = column
    fill = _resolve_choice(args.fill, cfg, "fill", FillStrategy, "ffbf")
    target = _resolve_choice(args.target, cfg, "target", TargetMode, "offset")
    mode = _resolve_choice(args.split, cfg, "split", SplitMode, "chrono")
    records = []
    for path in args.inputs:
        records.extend(to_records(parse_csv(_read_text(path)), schema))
    records.sort(key=lambda r: (r.sensor_id, r.timestamp))
    for a, b in zip(records, records[1:]):
        if a.sensor_id == b.sensor_id and a.timestamp == b.timestamp:
            raise IntegrityError(
                f"duplicate reading for sensor {a.sensor_id!r} "
                f"at timestamp {a.timestamp}"
            )
    per_sensor = group_by_sensor(records)
    per_sensor = impute_records(per_sensor, fill)
    per_sensor = truncate_to_min(per_sensor)
    matrix, excluded = build_features(per_sensor, target)
    split = make_split(matrix.n_rows, mode, seed)
    run = _Run(args.out)
    run.write("matrix.csv", matrix_to_csv(matrix))
    run.write("split.json", split_to_json(split))
    record = {
        "inputs": list(args.inputs),
        "fill": fill.value,
        "target": target.value,
        "split": mode.value,
        "schema": {k: schema[k] for k in sorted(schema)},
    }
    run.finish("preprocess", seed, record)
    print(
        f"preprocess: {matrix.n_rows} rows ({excluded} dropped for missing "
        f"reference); split {split.train_idx.size}/{split.val_idx.size}"
        f"/{split.test_idx.size}"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    booster = args.booster if args.booster is not None else take(
        cfg, "booster", str, "tree"
    )
    if booster not in ("tree", "linear"):
        raise ConfigError(f"booster must be tree or linear, got {booster!r}")
    target = _resolve_choice(args.target, cfg, "target", TargetMode, "offset")
    matrix = _load_matrix(args.matrix)
    split, split_path = _obtain_split(args, cfg, matrix, seed)
    if booster == "tree":
        params = _tree_params(args, cfg, seed)
        model, report = gbdt.train(matrix, split, params, target)
    else:
        params = _linear_params(args, cfg, seed)
        model, report = train_linear(matrix, split, params, target)
    run = _Run(args.out)
    run.write("model.calib.json", model_io.save(model, report))
    run.write("curves.csv", export_curves(report))
    partition = "test" if split.test_idx.size else "all"
    rows = _eval_rows(matrix, split, partition)
    eval_report = _write_eval(run, model, matrix, rows, partition)
    record = {
        "matrix": args.matrix,
        "split_file": split_path,
        "booster": booster,
        "target": target.value,
    }
    record.update(_params_record(params))
    run.finish("train", seed, record)
    best = report.best_iteration
    best_text = "" if best is None else f", best_iteration {best}"
    print(
        f"train: {len(report.train_rmse)} rounds{best_text}; "
        f"{partition} RMSE {eval_report.overall_rmse:.6f}"
    )
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_config(args)
    base_model, _ = model_io.load(_read_text(args.model))
    if not isinstance(base_model, Ensemble):
        raise ConfigError("fine-tuning supports the tree booster only")
    seed_given = args.seed is not None or "seed" in cfg
    seed = _resolve_seed(args, cfg) if seed_given else base_model.params.seed
    rounds = args.rounds if args.rounds is not None else take(
        cfg, "rounds", int, 100
    )
    overrides = {}
    eta = args.eta if args.eta is not None else take(cfg, "eta", float, None)
    if eta is not None:
        overrides["eta"] = eta
    if seed != base_model.params.seed:
        overrides["seed"] = seed
    try:
        params = replace(base_model.params, **overrides) if overrides else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    matrix = _load_matrix(args.matrix)
    split, split_path = _obtain_split(args, cfg, matrix, seed)
    model, report = gbdt.continue_training(
        base_model, matrix, split, rounds, params
    )
    run = _Run(args.out)
    run.write("model.calib.json", model_io.save(model, report))
    run.write("curves.csv", export_curves(report))
    partition = "test" if split.test_idx.size else "all"
    rows = _eval_rows(matrix, split, partition)
    eval_report = _write_eval(run, model, matrix, rows, partition)
    record = {
        "model": args.model,
        "matrix": args.matrix,
        "split_file": split_path,
        "rounds": rounds,
        "eta": model.params.eta,
    }
    run.finish("finetune", seed, record)
    print(
        f"finetune: +{rounds} rounds on {len(base_model.trees)} existing "
        f"trees; {partition} RMSE {eval_report.overall_rmse:.6f}"
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    model, _ = model_io.load(_read_text(args.model))
    matrix = _load_matrix(args.matrix)
    split = None
    if args.split_file:
        split = split_from_json(_read_text(args.split_file))
        _check_split_bounds(split, matrix)
    partition = args.partition or ("test" if split is not None else "all")
    rows = _eval_rows(matrix, split, partition)
    run = _Run(args.out)
    eval_report = _write_eval(run, model, matrix, rows, partition)
    record = {
        "model": args.model,
        "matrix": args.matrix,
        "split_file": args.split_file,
        "partition": partition,
    }
    run.finish("evaluate", seed, record)
    print(
        f"evaluate: {partition} RMSE {eval_report.overall_rmse:.6f} "
        f"over {eval_report.n_rows} rows"
    )
    return 0


def _feature_rows(text: str, feature_names: tuple) -> np.ndarray:
    """Read feature values from a CSV whose leading columns are the
    model's features, in order; trailing columns are ignored."""
    table = parse_csv(text)
    width = len(feature_names)
    if tuple(table.column_names[:width]) != feature_names:
        raise SchemaError(
            f"expected leading columns {list(feature_names)}, "
            f"got {list(table.column_names[:width])}"
        )
    values = np.empty((table.n_rows, width), dtype=np.float64)
    for i, row in enumerate(table.rows):
        for j in range(width):
            cell = row[j]
            if cell is None:
                raise IntegrityError(
                    f"row {i}: missing value for feature "
                    f"{feature_names[j]!r}"
                )
            if isinstance(cell, str):
                raise ParseError(
                    f"row {i}: non-numeric value {cell!r} for feature "
                    f"{feature_names[j]!r}"
                )
            values[i, j] = cell
    return values


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    model, _ = model_io.load(_read_text(args.model))
    values = _feature_rows(_read_text(args.data), model.feature_names)
    preds = model.predict(values)
    lines = ["row,prediction"]
    lines.extend(f"{i},{_format_float(p)}" for i, p in enumerate(preds))
    run = _Run(args.out)
    run.write("predictions.csv", "\n".join(lines) + "\n")
    record = {"model": args.model, "data": args.data}
    run.finish("predict", seed, record)
    print(f"predict: {preds.shape[0]} rows -> "
          f"{os.path.join(args.out, 'predictions.csv')}")
    return 0


def cmd_gridsearch(args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args, cfg)
    axes = {}
    for knob in sorted(_GRID_KEYS):
        value = take(cfg, f"grid.{knob}", (int, float, list), None)
        if value is None:
            continue
        axes[knob] = tuple(value) if isinstance(value, list) else (value,)
    if not axes:
        raise ConfigError("no grid axes configured (use grid.<knob> keys)")
    target = _resolve_choice(args.target, cfg, "target", TargetMode, "offset")
    base = _tree_params(args, cfg, seed)
    matrix = _load_matrix(args.matrix)
    split, split_path = _obtain_split(args, cfg, matrix, seed)
    grid = ParamGrid(axes)
    result = grid_search(grid, matrix, split, base, target)
    run = _Run(args.out)
    run.write("trials.csv", trials_to_csv(grid, result))
    best_doc = {
        "trial": result.best,
        "val_rmse": result.best_val_rmse,
        "params": _params_record(result.best_params),
    }
    run.write("best.json",
              json.dumps(best_doc, sort_keys=True, indent=2) + "\n")
    record = {
        "matrix": args.matrix,
        "split_file": split_path,
        "target": target.value,
        "grid": {k: list(v) for k, v in sorted(axes.items())},
    }
    record.update({f"base.{k}": v for k, v in _params_record(base).items()})
    run.finish("gridsearch", seed, record)
    print(
        f"gridsearch: {len(result.trials)} trials; best trial "
        f"{result.best} val RMSE {result.best_val_rmse:.6f}"
    )
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="seed for every random choice")
    p.add_argument("--out", default=".", help="output directory")


def _add_train_knobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rounds", type=int, help="boosting rounds")
    p.add_argument("--eta", type=float, help="learning rate")
    p.add_argument("--split-file", help="split JSON from preprocess")
    p.add_argument("--split", choices=[m.value for m in SplitMode],
                   help="split mode when no --split-file is given")
    p.add_argument("--target", choices=[m.value for m in TargetMode],
                   help="label the matrix was built with")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircal",
        description="Train and apply PM2.5 sensor calibration models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sensor network CSV")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="raw CSVs -> feature matrix + split")
    p.add_argument("inputs", nargs="+", help="raw sensor CSV files")
    p.add_argument("--fill", choices=[m.value for m in FillStrategy],
                   help="missing-value strategy")
    p.add_argument("--target", choices=[m.value for m in TargetMode],
                   help="label construction")
    p.add_argument("--split", choices=[m.value for m in SplitMode],
                   help="partitioning mode")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit a booster on a feature matrix")
    p.add_argument("matrix", help="feature matrix CSV")
    p.add_argument("--booster", choices=["tree", "linear"])
    _add_train_knobs(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune",
                       help="continue boosting a tree model on new data")
    p.add_argument("matrix", help="feature matrix CSV")
    p.add_argument("--model", required=True, help="existing .calib.json model")
    _add_train_knobs(p)
    _add_common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="score a model on a matrix")
    p.add_argument("matrix", help="feature matrix CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--split-file")
    p.add_argument("--partition", choices=["train", "val", "test", "all"])
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="emit predictions for feature rows")
    p.add_argument("data", help="CSV whose leading columns are the features")
    p.add_argument("--model", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gridsearch", help="sweep hyperparameter grids")
    p.add_argument("matrix", help="feature matrix CSV")
    p.add_argument("--booster", choices=["tree"], default=None,
                   help="grids apply to the tree booster")
    _add_train_knobs(p)
    _add_common(p)
    p.set_defaults(func=cmd_gridsearch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KeyboardInterrupt, SystemExit, MemoryError):
        raise
    except Exception as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
