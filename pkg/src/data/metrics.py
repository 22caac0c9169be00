"""
📊 Accuracy statistics in the shape of a per-subject results table

Standard deviations are sample standard deviations (n - 1 denominator).
"""

from typing import Sequence, Tuple

import numpy as np

from src.utils.errors import InvalidArgumentError


def accuracy_stats(per_fold_accuracies: Sequence[float]) -> Tuple[float, float]:
    """
    🧮 Mean and sample std of per-fold accuracies

    A single fold has std 0.

    Raises:
        InvalidArgumentError: On an empty list or values outside [0, 1]
    """
    values = np.asarray(per_fold_accuracies, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgumentError("no accuracies to summarise")
    if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"accuracies must lie in [0, 1], got {values.tolist()}")
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), std


def inter_subject_std(per_subject_means: Sequence[float]) -> float:
    """
    🧍 Sample std of per-subject mean accuracies

    Raises:
        InvalidArgumentError: With fewer than two subjects
    """
    values = np.asarray(per_subject_means, dtype=np.float64)
    if values.size < 2:
        raise InvalidArgumentError(f"need at least 2 subjects, got {values.size}")
    return float(np.std(values, ddof=1))


def confusion_matrix(targets: Sequence[int], predictions: Sequence[int], n_classes: int) -> np.ndarray:
    """
    🔲 Counts with rows = true class, columns = predicted class
    """
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(targets, dtype=np.int64), np.asarray(predictions, dtype=np.int64)), 1)
    return matrix
