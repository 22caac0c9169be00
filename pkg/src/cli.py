"""
🖥️ Command-line interface - the pipeline end to end

    synth      generate a synthetic dataset container
    extract    PSD and band features of a dataset, plus the band layout
    train      k-fold cross-validation of one variant
    evaluate   per-subject cross-validation over several datasets
    ablate     OESCN, OESCN_a1 and OESCN_a2 on a shared fold plan
    attn-dump  averaged attention matrices of a trained OESCN fold

Settings resolve as defaults < preset < --config file < flags, and every
command writes a manifest of what it resolved. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numeric error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from src.core.bandgen import band_counts
from src.core.checkpoint import load_checkpoint, write_npz
from src.core.enums import Variant
from src.core.model import build_model, layer_shapes, mean_attention
from src.core.signal import psd_grid
from src.core.training import (
    Standardizer,
    evaluate_subjects,
    fit_model_config,
    make_plan,
    psd_features,
    run_ablation,
    run_cv,
    variant_inputs,
)
from src.data.storage import load_dataset, save_dataset
from src.data.synth import synth_dataset
from src.models.recording import Dataset
from src.ui import report
from src.utils.config import (
    SYNTH_PRESETS,
    TRAIN_PRESETS,
    VERSION,
    RunConfig,
    load_config_file,
    to_jsonable,
    update_section,
)
from src.utils.errors import InvalidArgumentError, InvalidDataError, OescnError
from src.utils.logging import setup_logging


def manifest_for(out: Path) -> Path:
    """`report.csv` -> `report.manifest.json`"""
    out = Path(out)
    return out.with_name(f"{out.stem}.manifest.json")


def write_manifest(path: Path, command: str, config: RunConfig, **details: Any) -> Path:
    """
    🧾 Writes the resolved configuration of a run as sorted JSON
    """
    document = {"command": command, "version": VERSION, "config": to_jsonable(config)}
    document.update(to_jsonable(details))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _overrides(args: argparse.Namespace, mapping: Dict[str, str]) -> Dict[str, Any]:
    """Flag values that were actually given, renamed to config fields"""
    return {field: getattr(args, flag) for flag, field in mapping.items() if getattr(args, flag, None) is not None}


SYNTH_FLAGS = {
    "classes": "n_classes",
    "trials_per_class": "trials_per_class",
    "channels": "channels",
    "samples": "samples",
    "rate": "rate_hz",
    "noise": "noise_sigma",
    "subject": "subject_id",
}

TRAIN_FLAGS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr",
    "seed": "seed",
    "fold_seed": "fold_seed",
    "folds": "folds",
    "workers": "workers",
    "stratified": "stratified",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    🔧 defaults < preset < config file < flags

    Raises:
        InvalidArgumentError: On a bad config file or flag value
    """
    preset = getattr(args, "preset", "desk")
    config = RunConfig(synth=SYNTH_PRESETS[preset], train=TRAIN_PRESETS[preset])
    if getattr(args, "config", None):
        config = load_config_file(args.config, config)
    model = config.model
    if getattr(args, "variant", None) is not None:
        model = replace(model, variant=args.variant)
    return replace(
        config,
        model=model,
        synth=update_section(config.synth, _overrides(args, SYNTH_FLAGS)),
        train=update_section(config.train, _overrides(args, TRAIN_FLAGS)),
    )


def _dataset_or_synth(args: argparse.Namespace, config: RunConfig) -> Dataset:
    """The dataset argument, or a synthetic dataset from the preset when none is given"""
    if getattr(args, "dataset", None):
        return load_dataset(args.dataset)
    config.synth.validate(config.welch.f_lo_hz, config.welch.f_hi_hz)
    logging.info(f"🧪 No dataset given, synthesising the '{args.preset}' preset with seed {args.data_seed}")
    return synth_dataset(config.synth, args.data_seed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    """🧪 Generates a dataset container and its manifest"""
    config = resolve_config(args)
    config.synth.validate(config.welch.f_lo_hz, config.welch.f_hi_hz)
    dataset = synth_dataset(config.synth, args.seed)
    save_dataset(
        dataset,
        args.out,
        extra={"command": "synth", "version": VERSION, "preset": args.preset, "synth": to_jsonable(config.synth)},
    )
    print(report.dataset_summary(dataset))
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    """🎚️ Writes PSD and band features of every trial plus the band layout"""
    config = resolve_config(args)
    dataset = load_dataset(args.dataset)
    freqs, _ = psd_grid(config.welch, dataset.rate_hz)
    layout = band_counts(int(freqs.size), config.model.bands)
    psd = psd_features(dataset, config.welch)
    cfg = fit_model_config(config.model, dataset, config.welch)
    bands = variant_inputs(psd, replace(cfg, variant=Variant.OESCN))

    out = Path(args.out).with_suffix(".npz")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_npz(out, {"psd": psd, "bands": bands, "freqs_hz": freqs, "labels": dataset.labels})
    report.write_frame(report.layout_frame(layout), report.sibling(out, "layout"))
    write_manifest(manifest_for(out), "extract", config, dataset=str(args.dataset), outputs=[str(out)])
    print(report.dataset_summary(dataset))
    print(report.layout_summary(layout))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """🏋️ k-fold cross-validation of one variant"""
    config = resolve_config(args)
    dataset = _dataset_or_synth(args, config)
    cfg = fit_model_config(config.model, dataset, config.welch)
    config = replace(config, model=cfg)
    print(report.dataset_summary(dataset))
    print(report.model_summary(layer_shapes(cfg), build_model(cfg).parameter_count()))

    run = run_cv(dataset, config.train.folds, cfg, config.train, config.welch, args.checkpoint_dir)
    outputs = report.write_run_report(run, args.out)
    write_manifest(
        manifest_for(args.out),
        "train",
        config,
        dataset=args.dataset,
        data_seed=None if args.dataset else args.data_seed,
        checkpoints=run.checkpoint_paths,
        outputs=[str(p) for p in outputs],
    )
    print(report.run_summary(run))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    """🧍 Independent cross-validation per subject dataset"""
    config = resolve_config(args)
    datasets = [load_dataset(path) for path in args.datasets]
    table = evaluate_subjects(
        datasets, config.train.folds, config.model, config.train, config.welch, args.checkpoint_dir
    )
    out = Path(args.out)
    outputs = [report.write_frame(report.subject_frame(table), out)]
    outputs.append(report.write_frame(report.subject_runs_frame(table), report.sibling(out, "folds")))
    write_manifest(
        manifest_for(out),
        "evaluate",
        config,
        datasets=[str(p) for p in args.datasets],
        outputs=[str(p) for p in outputs],
    )
    print(report.subject_summary(table))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """⚖️ The three variants on one fold plan"""
    config = resolve_config(args)
    dataset = _dataset_or_synth(args, config)
    cfg = fit_model_config(config.model, dataset, config.welch)
    reports = run_ablation(dataset, config.train.folds, config.train, cfg, config.welch, args.checkpoint_dir)
    out = Path(args.out)
    outputs = [
        report.write_frame(report.ablation_frame(reports), out),
        report.write_frame(report.wide_ablation_frame(reports), report.sibling(out, "wide")),
        report.write_frame(make_plan(dataset, config.train).to_frame(), report.sibling(out, "folds")),
    ]
    write_manifest(
        manifest_for(out),
        "ablate",
        replace(config, model=cfg),
        dataset=args.dataset,
        data_seed=None if args.dataset else args.data_seed,
        outputs=[str(p) for p in outputs],
    )
    print(report.ablation_summary(reports))
    return 0


def cmd_attn_dump(args: argparse.Namespace) -> int:
    """🔭 Attention matrices of a trained fold, averaged over samples"""
    network, _, extra, manifest = load_checkpoint(args.checkpoint)
    if network.attention is None or network.layout is None:
        raise InvalidArgumentError(f"{network.cfg.variant.value} checkpoints hold no attention heads")
    if "norm_mean" not in extra or "norm_std" not in extra:
        raise InvalidDataError(f"checkpoint {args.checkpoint} has no feature normalisation statistics")
    config = resolve_config(args)
    dataset = load_dataset(args.dataset)
    indices = np.arange(len(dataset)) if args.samples is None else np.asarray(args.samples, dtype=np.int64)
    if indices.size == 0 or np.any(indices < 0) or np.any(indices >= len(dataset)):
        raise InvalidArgumentError(f"sample indices must lie in [0, {len(dataset)})")

    features = variant_inputs(psd_features(dataset, config.welch), network.cfg)
    x = Standardizer(mean=extra["norm_mean"], std=extra["norm_std"]).transform(features[indices])
    weights = mean_attention(network, x)
    out_dir = Path(args.out)
    paths = report.write_attention_dump(weights, network.layout, out_dir)
    write_manifest(
        out_dir / "manifest.json",
        "attn-dump",
        replace(config, model=network.cfg),
        checkpoint=str(args.checkpoint),
        fold_index=manifest.get("fold_index"),
        dataset=str(args.dataset),
        samples=indices.tolist(),
        outputs=[str(p) for p in paths],
    )
    print(report.layout_summary(network.layout))
    print(f"🔭 Wrote {len(paths)} files to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file (sections welch, bands, model, train, synth)")
    parser.add_argument("-d", "--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--log-dir", type=Path, help="Directory for oescn.log (default ./logs)")


def _add_preset(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--preset", choices=sorted(SYNTH_PRESETS), default="desk", help="Dataset shape and training preset"
    )


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, help="Training epochs per fold")
    parser.add_argument("--batch-size", type=int, help="Minibatch size (>= 2)")
    parser.add_argument("--lr", type=float, help="Adam learning rate")
    parser.add_argument("--seed", type=int, help="Training seed (initialisation, shuffling, dropout)")
    parser.add_argument("--fold-seed", type=int, help="Seed of the fold plan")
    parser.add_argument("--folds", type=int, help="Number of folds k")
    parser.add_argument("--workers", type=int, help="Folds trained in parallel")
    parser.add_argument(
        "--no-stratify", dest="stratified", action="store_const", const=False, help="Plain shuffled folds"
    )
    parser.add_argument("--checkpoint-dir", type=Path, help="Save one checkpoint per fold here")


def build_parser() -> argparse.ArgumentParser:
    """🧭 The argument parser with all subcommands"""
    parser = argparse.ArgumentParser(
        prog="oescn", description="Olfactory EEG classification with frequency band attention"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Generate a synthetic dataset")
    _add_common(synth)
    _add_preset(synth)
    synth.add_argument("--seed", type=int, default=0, help="Generator seed")
    synth.add_argument("-o", "--out", type=Path, required=True, help="Dataset container to write")
    synth.add_argument("--classes", type=int, help="Number of classes")
    synth.add_argument("--trials-per-class", type=int, help="Trials per class")
    synth.add_argument("--channels", type=int, help="Channels C")
    synth.add_argument("--samples", type=int, help="Samples per trial T")
    synth.add_argument("--rate", type=float, help="Sampling rate in Hz")
    synth.add_argument("--noise", type=float, help="White noise sigma")
    synth.add_argument("--subject", help="Subject id stored in the container")
    synth.set_defaults(handler=cmd_synth)

    extract = sub.add_parser("extract", help="Extract PSD and band features")
    _add_common(extract)
    extract.add_argument("dataset", type=Path, help="Dataset container")
    extract.add_argument("-o", "--out", type=Path, required=True, help="Feature archive (.npz)")
    extract.set_defaults(handler=cmd_extract)

    for name, handler, text in (
        ("train", cmd_train, "Cross-validate one variant"),
        ("ablate", cmd_ablate, "Cross-validate all three variants on shared folds"),
    ):
        command = sub.add_parser(name, help=text)
        _add_common(command)
        _add_preset(command)
        _add_training(command)
        command.add_argument("dataset", nargs="?", help="Dataset container (default: synthesise the preset)")
        command.add_argument("--data-seed", type=int, default=0, help="Seed of the synthesised dataset")
        command.add_argument("-o", "--out", type=Path, default=Path(f"{name}.csv"), help="Report CSV")
        if name == "train":
            command.add_argument("--variant", type=Variant.parse, help="OESCN, OESCN_a1 or OESCN_a2")
        command.set_defaults(handler=handler)

    evaluate = sub.add_parser("evaluate", help="Per-subject cross-validation table")
    _add_common(evaluate)
    _add_preset(evaluate)
    _add_training(evaluate)
    evaluate.add_argument("datasets", nargs="+", type=Path, help="One dataset container per subject")
    evaluate.add_argument("--variant", type=Variant.parse, help="OESCN, OESCN_a1 or OESCN_a2")
    evaluate.add_argument("-o", "--out", type=Path, default=Path("subjects.csv"), help="Subject table CSV")
    evaluate.set_defaults(handler=cmd_evaluate)

    dump = sub.add_parser("attn-dump", help="Write averaged attention matrices of a checkpoint")
    _add_common(dump)
    dump.add_argument("checkpoint", type=Path, help="OESCN fold checkpoint (.npz)")
    dump.add_argument("dataset", type=Path, help="Dataset the samples come from")
    dump.add_argument("--samples", type=int, nargs="+", help="Trial indices to average over (default: all)")
    dump.add_argument("-o", "--out", type=Path, default=Path("attention"), help="Output directory")
    dump.set_defaults(handler=cmd_attn_dump)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    🚀 Parses arguments, runs the command and maps errors to exit codes

    Returns:
        int: 0 on success, else the error category's exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging(debug=args.debug, log_dir=args.log_dir)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except OescnError as e:
        logging.error(f"💥 {args.command} failed: {e}")
        print(f"error ({e.category.name.lower()}): {e}", file=sys.stderr)
        return e.category.exit_code
