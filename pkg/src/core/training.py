"""
🏋️ Experiment orchestration - features, fold training, cross-validation

A run goes: Welch PSD per trial (once, label-free) -> band means for the
band variants -> log1p and z-scoring with training-fold statistics ->
minibatch Adam on cross-entropy for a fixed number of epochs -> accuracy on
the held-out fold in eval mode. `run_cv` rotates the validation fold,
`run_ablation` repeats that for all three variants on one fold plan and
`evaluate_subjects` repeats it per subject.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Self

from src.core.bandgen import band_matrix
from src.core.checkpoint import save_checkpoint
from src.core.enums import Mode, Variant
from src.core.model import OescnNetwork, build_model, input_layout
from src.core.nn import CrossEntropyLoss
from src.core.optim import AdamState, adam_step
from src.core.signal import psd_grid, welch_power
from src.data.folds import FoldPlan, kfold_split
from src.data.metrics import confusion_matrix
from src.models.recording import Dataset
from src.models.run_report import FoldResult, RunReport, SubjectTable
from src.utils.config import ModelConfig, TrainConfig, WelchConfig, to_jsonable
from src.utils.errors import FoldError, InvalidArgumentError, NumericError, OescnError

CONSTANT_STD_RTOL = 1e-12


def fit_model_config(cfg: ModelConfig, dataset: Dataset, welch: WelchConfig) -> ModelConfig:
    """
    📐 Copies the input geometry of `dataset` (C, P, classes) into `cfg`
    """
    freqs, _ = psd_grid(welch, dataset.rate_hz)
    return replace(cfg, channels=dataset.channels, n_bins=int(freqs.size), n_classes=dataset.n_classes)


def psd_features(dataset: Dataset, welch: WelchConfig) -> np.ndarray:
    """
    📈 Welch PSD of every trial, shape (n_trials, C, P)
    """
    dataset.validate()
    values = np.stack([welch_power(trial.samples, trial.rate_hz, welch) for trial in dataset.trials])
    logging.info(f"📈 Extracted PSDs {values.shape} from {len(dataset)} trials")
    return values


def variant_inputs(psd: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """
    🎚️ The unnormalised classifier input: band means S for band variants, F otherwise

    Raises:
        InvalidArgumentError: If the PSD geometry does not match the config
    """
    if psd.shape[1:] != (cfg.channels, cfg.n_bins):
        raise InvalidArgumentError(
            f"features {psd.shape[1:]} do not match the model input ({cfg.channels}, {cfg.n_bins})"
        )
    layout = input_layout(cfg)
    return band_matrix(psd, layout) if layout is not None else psd


@dataclass(frozen=True)
class Standardizer:
    """
    ⚖️ log1p followed by a per-feature z-score

    Attributes:
        mean: Feature means over the training trials, shape (C, W)
        std: Feature standard deviations (1 where a feature is constant)
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> Self:
        logged = np.log1p(features)
        mean = logged.mean(axis=0)
        std = logged.std(axis=0)
        # a constant feature leaves rounding noise in std, not an exact zero
        constant = std <= CONSTANT_STD_RTOL * np.maximum(1.0, np.abs(mean))
        return cls(mean=mean, std=np.where(constant, 1.0, std))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.log1p(features) - self.mean) / self.std

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"norm_mean": self.mean, "norm_std": self.std}


def fold_seed(seed: int, fold: int) -> int:
    """Network seed of one fold, shared by every variant"""
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def minibatches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """
    📦 Consecutive batches of `order`; a trailing batch of one joins the one before
    """
    batches = [order[start : start + batch_size] for start in range(0, order.size, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def fit_fold(
    features: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    fold_index: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    checkpoint_path: Optional[Path] = None,
) -> Tuple[OescnNetwork, FoldResult]:
    """
    🏋️ Trains one network on precomputed (unnormalised) inputs

    Args:
        features: Classifier inputs of every trial, (n_trials, C, W)
        labels: Class of every trial
        train_idx: Trials to train on
        val_idx: Trials to validate on
        fold_index: Fold number, mixed into the network and shuffle seeds
        model_cfg: Network settings
        train_cfg: Training protocol
        checkpoint_path: Where to save the trained fold (skipped when None)

    Raises:
        FoldError: Wrapping any pipeline error, with the fold index attached
    """
    started = time.perf_counter()
    try:
        train_cfg.validate()
        if train_idx.size < 2:
            raise InvalidArgumentError(f"fold {fold_index} leaves {train_idx.size} training trial(s)")
        norm = Standardizer.fit(features[train_idx])
        x_train, y_train = norm.transform(features[train_idx]), labels[train_idx]
        x_val, y_val = norm.transform(features[val_idx]), labels[val_idx]

        network = build_model(model_cfg, fold_seed(train_cfg.seed, fold_index))
        adam = AdamState(lr=train_cfg.lr, beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps)
        loss_fn = CrossEntropyLoss()
        curve = np.zeros(train_cfg.epochs)

        for epoch in range(train_cfg.epochs):
            rng = np.random.default_rng([train_cfg.seed, fold_index, epoch])
            total = 0.0
            for batch in minibatches(rng.permutation(train_idx.size), train_cfg.batch_size):
                network.zero_grad()
                loss, _ = loss_fn.forward(network.logits(x_train[batch], Mode.TRAIN), y_train[batch])
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite training loss at epoch {epoch + 1}")
                network.backward(loss_fn.backward())
                adam_step(network.trainable(), adam)
                total += loss * batch.size
            curve[epoch] = total / train_idx.size
            if (epoch + 1) % train_cfg.report_every == 0 or epoch + 1 == train_cfg.epochs:
                logging.debug(f"📉 Fold {fold_index} epoch {epoch + 1}/{train_cfg.epochs} - loss {curve[epoch]:.4f}")

        predictions = np.argmax(network.forward(x_val, Mode.EVAL), axis=1)
        accuracy = float(np.mean(predictions == y_val))
        saved = None
        if checkpoint_path is not None:
            saved = str(
                save_checkpoint(
                    checkpoint_path,
                    network,
                    adam,
                    extra={**norm.arrays(), "train_indices": train_idx, "val_indices": val_idx},
                    manifest={"fold_index": fold_index, "train": to_jsonable(train_cfg)},
                )
            )
    except FoldError:
        raise
    except OescnError as e:
        logging.error(f"💥 Fold {fold_index} failed: {e}")
        raise FoldError(fold_index, e) from e

    result = FoldResult(
        fold_index=fold_index,
        accuracy=accuracy,
        train_indices=np.asarray(train_idx),
        val_indices=np.asarray(val_idx),
        loss_curve=curve,
        confusion=confusion_matrix(y_val, predictions, model_cfg.n_classes),
        checkpoint_path=saved,
        wall_clock_s=time.perf_counter() - started,
    )
    logging.info(f"🧠 {model_cfg.variant.value} fold {fold_index} done - accuracy {accuracy:.3f}")
    return network, result


def train_fold(
    dataset: Dataset,
    plan: FoldPlan,
    fold_index: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    welch: Optional[WelchConfig] = None,
    checkpoint_path: Optional[Path] = None,
) -> Tuple[OescnNetwork, FoldResult]:
    """
    🎯 Full pipeline for one fold rotation of `plan`, starting from raw trials

    Returns:
        (network, result): The trained network and its validation record

    Raises:
        FoldError: If anything inside the fold fails
    """
    welch = welch or WelchConfig()
    if plan.n_trials != len(dataset):
        raise InvalidArgumentError(f"fold plan covers {plan.n_trials} trials, dataset has {len(dataset)}")
    try:
        features = variant_inputs(psd_features(dataset, welch), model_cfg)
    except OescnError as e:
        raise FoldError(fold_index, e) from e
    return fit_fold(
        features,
        dataset.labels,
        plan.training(fold_index),
        plan.validation(fold_index),
        fold_index,
        model_cfg,
        train_cfg,
        checkpoint_path,
    )


def _fold_job(args: tuple) -> FoldResult:
    """Worker entry point; only the result crosses the process boundary"""
    _, result = fit_fold(*args)
    return result


def _checkpoint_for(checkpoint_dir: Optional[Path], variant: Variant, fold: int) -> Optional[Path]:
    if checkpoint_dir is None:
        return None
    return Path(checkpoint_dir) / variant.value / f"fold_{fold:02d}.npz"


def make_plan(dataset: Dataset, train_cfg: TrainConfig, k: Optional[int] = None) -> FoldPlan:
    """🗂️ The fold plan a run over `dataset` uses"""
    labels = dataset.labels if train_cfg.stratified else None
    return kfold_split(len(dataset), k or train_cfg.folds, train_cfg.fold_seed, labels)


def cross_validate(
    features: np.ndarray,
    labels: np.ndarray,
    plan: FoldPlan,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    subject_id: str = "",
    checkpoint_dir: Optional[Path] = None,
) -> RunReport:
    """
    🔁 Trains one model per fold rotation on precomputed inputs

    With `train_cfg.workers` > 1 the folds run in a process pool; results
    are collected in fold order either way.
    """
    jobs = [
        (
            features,
            labels,
            plan.training(fold),
            plan.validation(fold),
            fold,
            model_cfg,
            train_cfg,
            _checkpoint_for(checkpoint_dir, model_cfg.variant, fold),
        )
        for fold in range(plan.k)
    ]
    logging.info(
        f"🔁 {model_cfg.variant.value}: {plan.k}-fold CV on {labels.size} trials "
        f"({train_cfg.epochs} epochs, batch {train_cfg.batch_size}, {train_cfg.workers} worker(s))"
    )
    if train_cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=train_cfg.workers) as pool:
            folds = list(pool.map(_fold_job, jobs))
    else:
        folds = [_fold_job(job) for job in jobs]

    report = RunReport(
        variant=model_cfg.variant,
        subject_id=subject_id,
        plan=plan,
        folds=folds,
        config={"model": to_jsonable(model_cfg), "train": to_jsonable(train_cfg)},
    )
    logging.info(f"🏁 {report} ({report.wall_clock_s:.1f} s of training)")
    return report


def run_cv(
    dataset: Dataset,
    k: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    welch: Optional[WelchConfig] = None,
    checkpoint_dir: Optional[Path] = None,
    plan: Optional[FoldPlan] = None,
) -> RunReport:
    """
    🔁 k-fold cross-validation of one variant on one dataset

    Args:
        dataset: The subject's trials
        k: Number of folds
        model_cfg: Network settings; its geometry must match the dataset
        train_cfg: Training protocol, seeds included
        welch: PSD settings (defaults when None)
        checkpoint_dir: Per-fold checkpoints go to <dir>/<variant>/fold_XX.npz
        plan: Use this fold plan instead of drawing one

    Raises:
        InvalidArgumentError: If the configs or k do not fit the dataset
        FoldError: If a fold fails
    """
    welch = welch or WelchConfig()
    model_cfg.validate()
    plan = plan or make_plan(dataset, train_cfg, k)
    if plan.n_trials != len(dataset) or plan.k != k:
        raise InvalidArgumentError(f"fold plan ({plan.k} folds, {plan.n_trials} trials) does not fit the run")
    features = variant_inputs(psd_features(dataset, welch), model_cfg)
    report = cross_validate(features, dataset.labels, plan, model_cfg, train_cfg, dataset.subject_id, checkpoint_dir)
    report.config["welch"] = to_jsonable(welch)
    return report


def run_ablation(
    dataset: Dataset,
    k: int,
    train_cfg: TrainConfig,
    model_cfg: Optional[ModelConfig] = None,
    welch: Optional[WelchConfig] = None,
    checkpoint_dir: Optional[Path] = None,
) -> Dict[Variant, RunReport]:
    """
    ⚖️ OESCN, OESCN_a1 and OESCN_a2 on one fold plan with the same seeds

    The PSDs are extracted once and shared by all variants.

    Returns:
        Dict[Variant, RunReport]: Reports in variant order
    """
    welch = welch or WelchConfig()
    base = model_cfg or fit_model_config(ModelConfig(), dataset, welch)
    plan = make_plan(dataset, train_cfg, k)
    psd = psd_features(dataset, welch)
    reports: Dict[Variant, RunReport] = {}
    for variant in Variant:
        cfg = replace(base, variant=variant)
        cfg.validate()
        report = cross_validate(
            variant_inputs(psd, cfg), dataset.labels, plan, cfg, train_cfg, dataset.subject_id, checkpoint_dir
        )
        report.config["welch"] = to_jsonable(welch)
        reports[variant] = report
    return reports


def evaluate_subjects(
    datasets: Sequence[Dataset],
    k: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    welch: Optional[WelchConfig] = None,
    checkpoint_dir: Optional[Path] = None,
) -> SubjectTable:
    """
    🧍 Independent cross-validation per subject, summarised as a table

    Every dataset is one subject; models are never shared between subjects.

    Raises:
        InvalidArgumentError: If no datasets are given
    """
    if not datasets:
        raise InvalidArgumentError("evaluate needs at least one dataset")
    welch = welch or WelchConfig()
    reports = []
    for index, dataset in enumerate(datasets):
        cfg = fit_model_config(model_cfg, dataset, welch)
        subject_dir = Path(checkpoint_dir) / f"subject_{index:02d}" if checkpoint_dir is not None else None
        reports.append(run_cv(dataset, k, cfg, train_cfg, welch, subject_dir))
    rows = [(report.subject_id or f"subject_{i}", report.mean, report.std) for i, report in enumerate(reports)]
    return SubjectTable(variant=model_cfg.variant, rows=rows, reports=reports)
