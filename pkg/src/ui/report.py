"""
📊 Reports - CSV files and console summaries of datasets, features and runs

Tables go through pandas with 17 significant digits so the files parse
back to the same floats; matrices go through numpy.savetxt. Nothing here
writes wall-clock times to files, so reruns with the same seeds produce
the same bytes.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from src.core.enums import Variant
from src.models.bands import BandLayout
from src.models.recording import Dataset
from src.models.run_report import RunReport, SubjectTable

FLOAT_FORMAT = "%.17g"


def sibling(path: Path, tag: str) -> Path:
    """`report.csv` + "loss" -> `report.loss.csv`"""
    path = Path(path)
    return path.with_name(f"{path.stem}.{tag}.csv")


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """
    💾 Writes a table as CSV with round-trip float formatting
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_matrix(matrix: np.ndarray, path: Path) -> Path:
    """
    💾 Writes a 2-D array as headerless CSV
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(matrix), fmt=FLOAT_FORMAT, delimiter=",")
    return path


def read_matrix(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def layout_frame(layout: BandLayout) -> pd.DataFrame:
    """
    📐 One row per scale (window length, increment, band count, column offset)
    followed by a `total` row whose `bands` is K
    """
    scales = pd.DataFrame(
        {
            "scale": [str(i) for i in range(layout.n_scales)],
            "window_length": layout.window_lengths,
            "increment": [layout.increment_g] * layout.n_scales,
            "bands": layout.per_scale_counts,
            "offset": layout.offsets,
        }
    )
    total = pd.DataFrame({"scale": ["total"], "bands": [layout.total_k]})
    frame = pd.concat([scales, total], ignore_index=True)
    return frame.astype({name: "Int64" for name in ("window_length", "increment", "bands", "offset")})


def report_frame(report: RunReport) -> pd.DataFrame:
    """
    📋 Per-fold rows followed by `mean` and `std` summary rows
    """
    rows: List[Dict[str, object]] = [
        {
            "variant": report.variant.value,
            "subject": report.subject_id,
            "fold": str(fold.fold_index),
            "n_train": fold.n_train,
            "n_val": fold.n_val,
            "accuracy": fold.accuracy,
        }
        for fold in report.folds
    ]
    mean, std = report.stats
    total_train = sum(fold.n_train for fold in report.folds)
    total_val = sum(fold.n_val for fold in report.folds)
    for label, value in (("mean", mean), ("std", std)):
        rows.append(
            {
                "variant": report.variant.value,
                "subject": report.subject_id,
                "fold": label,
                "n_train": total_train,
                "n_val": total_val,
                "accuracy": value,
            }
        )
    return pd.DataFrame(rows, columns=["variant", "subject", "fold", "n_train", "n_val", "accuracy"])


def ablation_frame(reports: Dict[Variant, RunReport]) -> pd.DataFrame:
    """
    ⚖️ The variants' report tables stacked, told apart by the `variant` column

    `wide_ablation_frame` gives the side-by-side view.
    """
    return pd.concat([report_frame(report) for report in reports.values()], ignore_index=True)


def wide_ablation_frame(reports: Dict[Variant, RunReport]) -> pd.DataFrame:
    """One row per fold (plus mean and std), one accuracy column per variant"""
    long = ablation_frame(reports)
    wide = long.pivot(index="fold", columns="variant", values="accuracy")
    order = [str(i) for i in range(len(next(iter(reports.values())).folds))] + ["mean", "std"]
    wide = wide.reindex(index=order, columns=[v.value for v in reports]).reset_index()
    wide.columns.name = None
    return wide


def subject_frame(table: SubjectTable) -> pd.DataFrame:
    """
    🧍 Per-subject mean and std, then `Average` and `Inter-subject std` rows
    """
    rows = [{"subject": subject, "mean": mean, "std": std} for subject, mean, std in table.rows]
    rows.append({"subject": "Average", "mean": table.average, "std": np.nan})
    spread = table.inter_subject_std
    if spread is not None:
        rows.append({"subject": "Inter-subject std", "mean": spread, "std": np.nan})
    frame = pd.DataFrame(rows, columns=["subject", "mean", "std"])
    frame.insert(0, "variant", table.variant.value)
    return frame


def subject_runs_frame(table: SubjectTable) -> pd.DataFrame:
    """Every subject's fold rows and summary rows, one after the other"""
    return pd.concat([report_frame(run) for run in table.reports], ignore_index=True)


def loss_frame(report: RunReport) -> pd.DataFrame:
    """Mean training loss per epoch, one column per fold"""
    data = {"epoch": np.arange(1, report.folds[0].loss_curve.size + 1)}
    for fold in report.folds:
        data[f"fold_{fold.fold_index:02d}"] = fold.loss_curve
    return pd.DataFrame(data)


def confusion_frame(report: RunReport) -> pd.DataFrame:
    """Summed validation confusion counts, rows true class, columns predicted"""
    counts = report.confusion
    frame = pd.DataFrame(counts, columns=[f"pred_{c}" for c in range(counts.shape[1])])
    frame.insert(0, "true", np.arange(counts.shape[0]))
    return frame


def write_run_report(report: RunReport, out: Path) -> List[Path]:
    """
    💾 Writes `<out>`, `<out stem>.confusion.csv`, `<out stem>.loss.csv` and `<out stem>.folds.csv`
    """
    return [
        write_frame(report_frame(report), out),
        write_frame(confusion_frame(report), sibling(out, "confusion")),
        write_frame(loss_frame(report), sibling(out, "loss")),
        write_frame(report.plan.to_frame(), sibling(out, "folds")),
    ]


def write_attention_dump(weights: Sequence[np.ndarray], layout: BandLayout, out_dir: Path) -> List[Path]:
    """
    🔭 Writes `global.csv`, `local_<i>_L<L_i>.csv` per local head and `layout.csv`

    Args:
        weights: Global matrix first, then one matrix per local head
        layout: The band layout the matrices are aligned to
        out_dir: Target directory
    """
    out_dir = Path(out_dir)
    paths = [write_matrix(weights[0], out_dir / "global.csv")]
    for i, (matrix, length) in enumerate(zip(weights[1:], layout.window_lengths)):
        paths.append(write_matrix(matrix, out_dir / f"local_{i}_L{length}.csv"))
    paths.append(write_frame(layout_frame(layout), out_dir / "layout.csv"))
    return paths


# ---------------------------------------------------------------------------
# Console
# ---------------------------------------------------------------------------


def dataset_summary(dataset: Dataset) -> str:
    counts = ", ".join(f"{c}: {n}" for c, n in enumerate(dataset.class_counts()))
    return (
        f"🗃️ {len(dataset)} trials of subject '{dataset.subject_id}' - "
        f"C={dataset.channels}, T={dataset.length}, {dataset.rate_hz:g} Hz, "
        f"{dataset.n_classes} classes ({counts})"
    )


def layout_summary(layout: BandLayout) -> str:
    counts = "/".join(str(c) for c in layout.per_scale_counts)
    return f"🎚️ P={layout.n_bins}, K={layout.total_k}, bands per scale {counts} (L={layout.window_lengths})"


def run_summary(report: RunReport) -> str:
    lines = [str(fold) for fold in report.folds]
    lines.append(f"🏁 {report}")
    return "\n".join(lines)


def ablation_summary(reports: Dict[Variant, RunReport]) -> str:
    return "\n".join(f"⚖️ {report}" for report in reports.values())


def subject_summary(table: SubjectTable) -> str:
    lines = [f"🧍 {subject}: {100 * mean:.1f} ± {100 * std:.1f} %" for subject, mean, std in table.rows]
    lines.append(f"📊 Average: {100 * table.average:.1f} %")
    if table.inter_subject_std is not None:
        lines.append(f"📏 Inter-subject std: {100 * table.inter_subject_std:.1f}")
    return "\n".join(lines)


def model_summary(shapes: Iterable, parameter_count: int) -> str:
    lines = [f"  {name:<10} {tuple(shape)}" for name, shape in shapes]
    lines.append(f"🧠 {parameter_count} trainable parameters")
    return "\n".join(lines)
