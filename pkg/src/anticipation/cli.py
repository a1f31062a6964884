"""Command-line orchestration.

Subcommands cover the whole pipeline on one run directory::

    simulate   generate a synthetic train/test dataset
    baseline   fit a histogram baseline (and score it on the test split)
    train      train one recurrent model per horizon
    predict    MC-dropout summaries for the test split
    evaluate   metric tables for baselines and model per horizon
    analyze    uncertainty analyses (PCC, filtering, TP/FP, trigger)

Every command reads one JSON config file; flags override file values and
the fully resolved config lands in the run manifest together with the
seed, a config hash, and SHA-256 checksums of the artifacts written.
Artifacts are append-only per run directory: rerunning a command that
would overwrite its own outputs fails unless ``--overwrite`` is given.

Exit codes: 0 ok, 2 config error, 3 input error, 4 numeric failure,
5 empty result.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import os
import sys
from typing import Optional

import numpy as np

from . import analysis, baselines, inference, labels, metrics, network, reports, workflow
from .errors import (
    AnnotationParseError,
    ConfigError,
    EmptyResultError,
    InputError,
    NumericError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4
EXIT_EMPTY = 5


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------

_SCHEMA = {
    "": {"seed", "horizons", "sim", "split", "model", "train", "eval", "analysis"},
    "sim": {
        "instruments", "phases", "duration_mean", "duration_std", "phase_plan",
        "usage_rules", "trigger_rules", "features", "fps", "instrument_names",
    },
    "sim.phase_plan": {"length_mean", "length_std"},
    "sim.usage_rules": {"instrument", "phase", "probability", "length_mean", "length_std", "segments"},
    "sim.trigger_rules": {"trigger", "target", "delay_mean", "delay_jitter", "probability",
                          "length_mean", "length_std"},
    "sim.features": {"dim", "noise_std", "instrument_gain", "phase_gain"},
    "split": {"n_train", "n_test"},
    "model": {"hidden", "encoder", "dropout", "output_mode", "phase_classes",
              "lambda_cls", "lambda_phase", "weight_decay"},
    "train": {"epochs", "learning_rate", "window", "accum_steps"},
    "eval": {"samples", "bins", "instruments", "methods"},
    "analysis": {"percentiles", "trigger", "use_std", "memory_frames"},
    "analysis.trigger": {"trigger", "target"},
}

DEFAULT_CONFIG = {
    "seed": 0,
    "horizons": [3.0],
    "sim": None,
    "split": {"n_train": 12, "n_test": 8},
    "model": {"hidden": 64, "encoder": [64, 64], "dropout": 0.2,
              "output_mode": "linear_clamped", "phase_classes": 0,
              "lambda_cls": 1e-2, "lambda_phase": None, "weight_decay": 1e-5},
    "train": {"epochs": 100, "learning_rate": 1e-4, "window": 128, "accum_steps": 3},
    "eval": {"samples": 10, "bins": 1000, "instruments": None,
             "methods": ["meanhist", "oraclehist", "model"]},
    "analysis": {"percentiles": list(analysis.DEFAULT_PERCENTILES), "trigger": None,
                 "use_std": False, "memory_frames": 0},
}


def _check_keys(payload: dict, schema_key: str) -> None:
    allowed = _SCHEMA[schema_key]
    unknown = set(payload) - allowed
    if unknown:
        where = schema_key or "top level"
        raise ConfigError(f"unknown config key(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _check_keys(raw, "")
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    for section, value in raw.items():
        if isinstance(value, dict) and isinstance(config.get(section), dict):
            _check_keys(value, section)
            config[section].update(value)
        else:
            if section in ("sim",) and isinstance(value, dict):
                _check_keys(value, section)
            config[section] = value
    for rule_key in ("phase_plan", "usage_rules", "trigger_rules"):
        for entry in (config.get("sim") or {}).get(rule_key, []) or []:
            _check_keys(entry, f"sim.{rule_key}")
    if (config.get("sim") or {}).get("features"):
        _check_keys(config["sim"]["features"], "sim.features")
    if config["analysis"].get("trigger"):
        _check_keys(config["analysis"]["trigger"], "analysis.trigger")
    return config


def sim_config_from_dict(payload: dict) -> workflow.SimConfig:
    if not payload:
        raise ConfigError("config has no 'sim' section")
    try:
        features = workflow.FeatureSpec(**(payload.get("features") or {}))
        config = workflow.SimConfig(
            instruments=payload["instruments"],
            phases=payload["phases"],
            duration_mean=payload["duration_mean"],
            duration_std=payload.get("duration_std", 0.0),
            phase_plan=tuple(workflow.PhaseSpec(**p) for p in payload.get("phase_plan", [])),
            usage_rules=tuple(workflow.UsageRule(**r) for r in payload.get("usage_rules", [])),
            trigger_rules=tuple(workflow.TriggerRule(**r) for r in payload.get("trigger_rules", [])),
            features=features,
            fps=payload.get("fps", 1.0),
            instrument_names=tuple(payload["instrument_names"]) if payload.get("instrument_names") else None,
        )
        config.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'sim' section: {exc}") from None
    return config


def network_config(config: dict, input_dim: int, instruments: int, horizon: float) -> network.NetworkConfig:
    model, tr = config["model"], config["train"]
    try:
        return network.NetworkConfig(
            input_dim=input_dim,
            instruments=instruments,
            hidden=model["hidden"],
            encoder=tuple(model["encoder"]),
            phase_classes=model["phase_classes"],
            dropout=model["dropout"],
            output_mode=model["output_mode"],
            horizon=horizon,
            lambda_cls=model["lambda_cls"],
            lambda_phase=model["lambda_phase"],
            weight_decay=model["weight_decay"],
            learning_rate=tr["learning_rate"],
            window=tr["window"],
            accum_steps=tr["accum_steps"],
            epochs=tr["epochs"],
            seed=config["seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid model/train section: {exc}") from None


def resolved_config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Run directory: datasets, manifest, overwrite policy
# ---------------------------------------------------------------------------

def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _record_run(out_dir: str, command: str, config: dict, artifacts: list[str]) -> None:
    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest = {"runs": []}
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    manifest["runs"].append({
        "command": command,
        "seed": config["seed"],
        "config_hash": resolved_config_hash(config),
        "resolved_config": config,
        "artifacts": {os.path.relpath(p, out_dir): _sha256(p) for p in sorted(artifacts)},
    })
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _refuse_existing(paths: list[str], overwrite: bool) -> None:
    existing = [p for p in paths if os.path.exists(p)]
    if existing and not overwrite:
        raise InputError(
            "output already exists (use --overwrite or a new run directory): "
            + ", ".join(sorted(existing)[:4])
        )


def write_dataset(sequences, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for seq in sequences:
        base = os.path.join(out_dir, seq.id)
        workflow.save_annotations(seq, base + ".csv")
        written.append(base + ".csv")
        if seq.features is not None:
            workflow.save_features(seq.features, base + ".features.csv", format="csv")
            written.append(base + ".features.csv")
    return written


def load_dataset(data_dir: str, split: str, fps: float = 1.0) -> list[workflow.ProcedureSequence]:
    split_dir = os.path.join(data_dir, split)
    if not os.path.isdir(split_dir):
        raise InputError(f"dataset split directory not found: {split_dir}")
    sequences = []
    for path in sorted(glob.glob(os.path.join(split_dir, "*.csv"))):
        if path.endswith(".features.csv"):
            continue
        seq = workflow.load_annotations(path, format="generic_csv", fps=fps)
        feature_path = path[:-4] + ".features.csv"
        if os.path.exists(feature_path):
            seq = workflow.attach_features(seq, feature_path)
        sequences.append(seq)
    if not sequences:
        raise InputError(f"no sequences found in {split_dir}")
    return sequences


def _summary_seed(seed: int, horizon: float, index: int) -> int:
    return network._derived_seed(seed, 5, int(round(horizon * 1000)), index)


def _instrument_subset(config: dict, names: tuple[str, ...]) -> list[int]:
    wanted = config["eval"].get("instruments")
    if wanted is None:
        return list(range(len(names)))
    subset = []
    for item in wanted:
        if isinstance(item, str):
            if item not in names:
                raise ConfigError(f"eval.instruments names unknown instrument {item!r}")
            subset.append(names.index(item))
        else:
            if not 0 <= int(item) < len(names):
                raise ConfigError(f"eval.instruments index {item} out of range")
            subset.append(int(item))
    return subset


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(config: dict, out_dir: str, overwrite: bool) -> list[str]:
    sim = sim_config_from_dict(config["sim"])
    n_train, n_test = config["split"]["n_train"], config["split"]["n_test"]
    if n_train < 1 or n_test < 0:
        raise ConfigError("split.n_train must be >= 1 and split.n_test >= 0")
    dataset_dir = os.path.join(out_dir, "dataset")
    _refuse_existing([dataset_dir], overwrite)
    data = workflow.generate_dataset(sim, n_train + n_test, seed=config["seed"])
    written = write_dataset(data[:n_train], os.path.join(dataset_dir, "train"))
    if n_test:
        written += write_dataset(data[n_train:], os.path.join(dataset_dir, "test"))
    return written


def cmd_baseline(config: dict, out_dir: str, data_dir: str, mode: str, overwrite: bool) -> list[str]:
    if mode not in baselines.MODES:
        raise ConfigError(f"baseline mode must be one of {baselines.MODES}, got {mode!r}")
    train_seqs = load_dataset(data_dir, "train")
    has_test = os.path.isdir(os.path.join(data_dir, "test"))
    if mode == "oracle" and not has_test:
        raise InputError(
            "oracle mode requires per-video durations of an evaluation split; "
            f"no test split found under {data_dir}"
        )
    written = []
    base_dir = os.path.join(out_dir, "baselines")
    os.makedirs(base_dir, exist_ok=True)
    for h in config["horizons"]:
        model = baselines.fit_baseline(train_seqs, h, bins=config["eval"]["bins"], mode=mode)
        path = os.path.join(base_dir, f"baseline_{mode}_h{h:g}.json")
        _refuse_existing([path], overwrite)
        baselines.save_baseline(model, path)
        written.append(path)
        if has_test:
            test_seqs = load_dataset(data_dir, "test")
            preds = [baselines.predict_baseline(model, duration=s.n_frames) for s in test_seqs]
            targets = [labels.compute_targets(s, h) for s in test_seqs]
            report = metrics.evaluate_predictions(
                preds, [t.remaining for t in targets], h,
                names=test_seqs[0].names,
            )
            report_path = os.path.join(base_dir, f"metrics_{mode}_h{h:g}.csv")
            _refuse_existing([report_path], overwrite)
            reports.write_metrics_table({mode: report}, report_path)
            written.append(report_path)
    return written


def cmd_train(config: dict, out_dir: str, data_dir: str, overwrite: bool) -> list[str]:
    train_seqs = load_dataset(data_dir, "train")
    if train_seqs[0].features is None:
        raise InputError("training requires feature files alongside the annotations")
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    log_dir = os.path.join(out_dir, "reports")
    os.makedirs(ckpt_dir, exist_ok=True)
    os.makedirs(log_dir, exist_ok=True)
    written = []
    for h in config["horizons"]:
        net_config = network_config(
            config, train_seqs[0].features.shape[1], train_seqs[0].n_instruments, h
        )
        ckpt_path = os.path.join(ckpt_dir, f"model_h{h:g}.bin")
        log_path = os.path.join(log_dir, f"train_log_h{h:g}.csv")
        _refuse_existing([ckpt_path, log_path], overwrite)
        params, log = network.train(train_seqs, net_config)
        network.save_params(params, ckpt_path, net_config)
        with open(log_path, "w", encoding="utf-8", newline="") as fh:
            keys = list(log[0].keys()) if log else ["epoch"]
            fh.write(",".join(keys) + "\n")
            for row in log:
                cells = (row.get(k, "") for k in keys)
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in cells) + "\n")
        written += [ckpt_path, log_path]
    return written


def _summaries_for_split(config: dict, out_dir: str, data_dir: str, h: float,
                         overwrite: bool, reuse: bool = True):
    """MC summaries for every test sequence (reusing files when present)."""
    test_seqs = load_dataset(data_dir, "test")
    summary_dir = os.path.join(out_dir, "summaries")
    os.makedirs(summary_dir, exist_ok=True)
    params = net_config = None
    summaries, written = [], []
    for idx, seq in enumerate(test_seqs):
        path = os.path.join(summary_dir, f"summary_{seq.id}_h{h:g}.csv")
        if reuse and os.path.exists(path):
            summaries.append(inference.load_summary_csv(path))
            continue
        _refuse_existing([path], overwrite)
        if params is None:
            ckpt_path = os.path.join(out_dir, "checkpoints", f"model_h{h:g}.bin")
            if not os.path.exists(ckpt_path):
                raise InputError(f"checkpoint not found: {ckpt_path} (run 'train' first)")
            net_config = network_config(
                config, seq.features.shape[1], seq.n_instruments, h
            )
            params = network.load_params(ckpt_path, net_config)
        summary = inference.mc_predict(
            params, net_config, seq.features,
            samples=config["eval"]["samples"],
            seed=_summary_seed(config["seed"], h, idx),
        )
        inference.save_summary_csv(summary, path)
        summaries.append(summary)
        written.append(path)
    return test_seqs, summaries, written


def cmd_predict(config: dict, out_dir: str, data_dir: str, overwrite: bool) -> list[str]:
    written = []
    for h in config["horizons"]:
        _, _, paths = _summaries_for_split(config, out_dir, data_dir, h, overwrite, reuse=False)
        written += paths
    return written


def cmd_evaluate(config: dict, out_dir: str, data_dir: str, overwrite: bool) -> list[str]:
    train_seqs = load_dataset(data_dir, "train")
    test_seqs = load_dataset(data_dir, "test")
    methods = [m.lower() for m in config["eval"]["methods"]]
    unknown = set(methods) - {"meanhist", "oraclehist", "model"}
    if unknown:
        raise ConfigError(f"unknown eval.methods: {', '.join(sorted(unknown))}")
    names = test_seqs[0].names or tuple(f"inst_{j}" for j in range(test_seqs[0].n_instruments))
    subset = _instrument_subset(config, names)
    sub_names = tuple(names[j] for j in subset)
    report_dir = os.path.join(out_dir, "reports")
    base_dir = os.path.join(out_dir, "baselines")
    os.makedirs(report_dir, exist_ok=True)
    os.makedirs(base_dir, exist_ok=True)
    written = []
    for h in config["horizons"]:
        targets = [labels.compute_targets(s, h) for s in test_seqs]
        remaining = [t.remaining[:, subset] for t in targets]
        table: dict[str, metrics.MetricsReport] = {}
        for mode in ("mean", "oracle"):
            method = f"{mode}hist"
            if method not in methods:
                continue
            model = baselines.fit_baseline(train_seqs, h, bins=config["eval"]["bins"], mode=mode)
            path = os.path.join(base_dir, f"baseline_{mode}_h{h:g}.json")
            if not os.path.exists(path):
                baselines.save_baseline(model, path)
                written.append(path)
            preds = [baselines.predict_baseline(model, duration=s.n_frames)[:, subset]
                     for s in test_seqs]
            table[method] = metrics.evaluate_predictions(preds, remaining, h, names=sub_names)
        if "model" in methods:
            _, summaries, paths = _summaries_for_split(config, out_dir, data_dir, h, overwrite)
            written += paths
            preds = [np.clip(s.reg_mean[:, subset], 0.0, h) for s in summaries]
            table["model"] = metrics.evaluate_predictions(preds, remaining, h, names=sub_names)
        csv_path = os.path.join(report_dir, f"metrics_h{h:g}.csv")
        json_path = os.path.join(report_dir, f"metrics_h{h:g}.json")
        _refuse_existing([csv_path, json_path], overwrite)
        reports.write_metrics_table(table, csv_path, json_path)
        written += [csv_path, json_path]
    return written


def cmd_analyze(config: dict, out_dir: str, data_dir: str, overwrite: bool,
                plots: bool = False) -> list[str]:
    report_dir = os.path.join(out_dir, "reports")
    os.makedirs(report_dir, exist_ok=True)
    written = []
    percentiles = config["analysis"]["percentiles"]
    use_std = config["analysis"]["use_std"]
    trigger_cfg = config["analysis"]["trigger"]
    for h in config["horizons"]:
        test_seqs, summaries, paths = _summaries_for_split(config, out_dir, data_dir, h, overwrite)
        written += paths
        targets = [labels.compute_targets(s, h) for s in test_seqs]
        names = test_seqs[0].names

        pcc = analysis.error_uncertainty_pcc(summaries, targets, use_std=use_std)
        curves = analysis.filter_by_uncertainty(summaries, targets, percentiles=percentiles)
        tpfp = analysis.tp_fp_uncertainty(summaries, targets)
        if all(np.isnan(r.value) and r.count == 0 for r in pcc) and \
                all(res.tp.count == 0 and res.fp.count == 0 for res in tpfp):
            raise EmptyResultError(
                f"no anticipating predictions anywhere at horizon {h:g}; nothing to analyze"
            )
        out_paths = {
            "pcc": os.path.join(report_dir, f"analysis_pcc_h{h:g}.csv"),
            "filter": os.path.join(report_dir, f"analysis_filtering_h{h:g}.csv"),
            "tpfp": os.path.join(report_dir, f"analysis_tpfp_h{h:g}.csv"),
        }
        _refuse_existing(list(out_paths.values()), overwrite)
        reports.write_pcc_csv(pcc, out_paths["pcc"], names)
        reports.write_filter_csv(curves, out_paths["filter"], names)
        reports.write_tpfp_csv(tpfp, out_paths["tpfp"], names)
        written += list(out_paths.values())

        trigger_result = None
        if trigger_cfg:
            k = test_seqs[0].n_instruments
            for key in ("trigger", "target"):
                if not 0 <= trigger_cfg[key] < k:
                    raise ConfigError(f"analysis.trigger.{key} out of range for {k} instruments")
            tracks = [s.presence[:, trigger_cfg["trigger"]] for s in test_seqs]
            trigger_result = analysis.trigger_conditional_uncertainty(
                summaries, targets,
                target=trigger_cfg["target"], trigger=trigger_cfg["trigger"],
                trigger_presence=tracks,
                memory_frames=config["analysis"]["memory_frames"],
            )
            trig_path = os.path.join(report_dir, f"analysis_trigger_h{h:g}.csv")
            _refuse_existing([trig_path], overwrite)
            reports.write_trigger_csv(trigger_result, trig_path, names)
            written.append(trig_path)

        if plots:
            plot_dir = os.path.join(out_dir, "plots")
            os.makedirs(plot_dir, exist_ok=True)
            pool_reg = np.concatenate([s.reg_mean for s in summaries])
            pool_var = np.concatenate([s.reg_epistemic_var for s in summaries])
            pool_r = np.concatenate([t.remaining for t in targets])
            reg_mask = np.concatenate([inference.anticipating_mask(s)[0] for s in summaries])
            for j, name in enumerate(names or [f"inst_{j}" for j in range(pool_r.shape[1])]):
                sel = reg_mask[:, j]
                if sel.sum() < 2:
                    continue
                p = os.path.join(plot_dir, f"error_uncertainty_{name}_h{h:g}.svg")
                reports.plot_error_uncertainty(
                    np.abs(pool_reg[sel, j] - pool_r[sel, j]), pool_var[sel, j], p, title=name
                )
                written.append(p)
            p = os.path.join(plot_dir, f"filtering_h{h:g}.svg")
            reports.plot_filter_curves(curves, p, names)
            written.append(p)
            if trigger_result is not None:
                p = os.path.join(plot_dir, f"trigger_h{h:g}.svg")
                reports.plot_trigger_box(trigger_result, p)
                written.append(p)
    return written


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anticipation",
        description="Anticipate sparse instrument usage in procedural timelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "baseline", "train", "predict", "evaluate", "analyze"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="run directory for artifacts")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--horizon", type=float, default=None,
                       help="override the horizons list with a single value")
        p.add_argument("--overwrite", action="store_true",
                       help="allow replacing artifacts in an existing run directory")
        if name != "simulate":
            p.add_argument("--data", default=None,
                           help="dataset directory (default: <out>/dataset)")
        if name == "baseline":
            p.add_argument("--mode", choices=baselines.MODES, default="mean")
        if name in ("predict", "evaluate"):
            p.add_argument("--samples", type=int, default=None, help="MC sample count")
        if name == "analyze":
            p.add_argument("--percentiles", default=None,
                           help="comma-separated percentile grid, e.g. 10,20,...,100")
            p.add_argument("--plots", action="store_true", help="emit SVG plots")
    return parser


def _apply_overrides(config: dict, args: argparse.Namespace) -> dict:
    if args.seed is not None:
        config["seed"] = args.seed
    if args.horizon is not None:
        config["horizons"] = [args.horizon]
    if getattr(args, "samples", None) is not None:
        config["eval"]["samples"] = args.samples
    if getattr(args, "percentiles", None):
        try:
            config["analysis"]["percentiles"] = [float(q) for q in args.percentiles.split(",")]
        except ValueError:
            raise ConfigError(f"--percentiles must be comma-separated numbers, got {args.percentiles!r}")
    return config


def _dispatch(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    data_dir = getattr(args, "data", None) or os.path.join(out_dir, "dataset")
    if args.command == "simulate":
        written = cmd_simulate(config, out_dir, args.overwrite)
    elif args.command == "baseline":
        written = cmd_baseline(config, out_dir, data_dir, args.mode, args.overwrite)
    elif args.command == "train":
        written = cmd_train(config, out_dir, data_dir, args.overwrite)
    elif args.command == "predict":
        written = cmd_predict(config, out_dir, data_dir, args.overwrite)
    elif args.command == "evaluate":
        written = cmd_evaluate(config, out_dir, data_dir, args.overwrite)
    elif args.command == "analyze":
        written = cmd_analyze(config, out_dir, data_dir, args.overwrite, plots=args.plots)
    else:  # pragma: no cover - argparse guards this
        raise ConfigError(f"unknown command {args.command!r}")
    _record_run(out_dir, args.command, config, written)
    print(f"{args.command}: wrote {len(written)} artifact(s) under {out_dir}")
    return EXIT_OK


def run(command: str, config: str, out: str, **flags) -> int:
    """Programmatic entry point; returns the process exit code."""
    argv = [command, "--config", config, "--out", out]
    for key, value in flags.items():
        flag = f"--{key.replace('_', '-')}"
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is not None:
            argv += [flag, str(value)]
    return main(argv)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnnotationParseError, InputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EmptyResultError as exc:
        print(f"empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
