"""
🏁 Run Reports - what a cross-validation run leaves behind

A FoldResult is the receipt of one trained fold, a RunReport collects the
folds of one variant on one subject, and a SubjectTable lines up several
subjects the way a per-subject results table does.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.enums import Variant
from src.data.folds import FoldPlan
from src.data.metrics import accuracy_stats, inter_subject_std


@dataclass(eq=False)
class FoldResult:
    """
    📝 One fold rotation: which trials trained, which validated and how it went

    Attributes:
        fold_index: Position of the validation fold in the plan
        accuracy: Validation accuracy in eval mode, in [0, 1]
        train_indices: Trials the model (and the feature statistics) saw
        val_indices: Held-out trials
        loss_curve: Mean training loss per epoch
        confusion: Validation counts, rows true class, columns predicted
        checkpoint_path: Where the trained fold was saved, if it was
        wall_clock_s: Training time (kept out of deterministic outputs)
    """

    fold_index: int
    accuracy: float
    train_indices: np.ndarray
    val_indices: np.ndarray
    loss_curve: np.ndarray
    confusion: np.ndarray
    checkpoint_path: Optional[str] = None
    wall_clock_s: float = 0.0

    @property
    def n_train(self) -> int:
        return int(self.train_indices.size)

    @property
    def n_val(self) -> int:
        return int(self.val_indices.size)

    def __str__(self) -> str:
        return f"Fold {self.fold_index}: accuracy {self.accuracy:.4f} ({self.n_train} train / {self.n_val} val)"


@dataclass(eq=False)
class RunReport:
    """
    📋 All folds of one variant trained on one subject

    Attributes:
        variant: Network variant
        subject_id: Subject the dataset belongs to
        plan: The fold plan every fold followed
        folds: Fold results, in fold order
        config: Resolved configuration snapshot (plain JSON data)
    """

    variant: Variant
    subject_id: str
    plan: FoldPlan
    folds: List[FoldResult]
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def accuracies(self) -> List[float]:
        return [fold.accuracy for fold in self.folds]

    @property
    def stats(self) -> Tuple[float, float]:
        """(mean, sample std) of the fold accuracies"""
        return accuracy_stats(self.accuracies)

    @property
    def mean(self) -> float:
        return self.stats[0]

    @property
    def std(self) -> float:
        return self.stats[1]

    @property
    def confusion(self) -> np.ndarray:
        return np.sum([fold.confusion for fold in self.folds], axis=0)

    @property
    def checkpoint_paths(self) -> List[str]:
        return [fold.checkpoint_path for fold in self.folds if fold.checkpoint_path]

    @property
    def wall_clock_s(self) -> float:
        return float(sum(fold.wall_clock_s for fold in self.folds))

    def __str__(self) -> str:
        mean, std = self.stats
        return f"{self.variant.value} on {self.subject_id}: {100 * mean:.1f} ± {100 * std:.1f} % over {len(self.folds)} folds"


@dataclass(eq=False)
class SubjectTable:
    """
    🧍 Per-subject mean ± std with an average row and the inter-subject std

    Attributes:
        variant: Network variant every subject was trained with
        rows: (subject_id, mean, std) per subject, in input order
        reports: The underlying run reports
    """

    variant: Variant
    rows: List[Tuple[str, float, float]]
    reports: List[RunReport] = field(default_factory=list)

    @property
    def average(self) -> float:
        return float(np.mean([mean for _, mean, _ in self.rows]))

    @property
    def inter_subject_std(self) -> Optional[float]:
        """None with a single subject"""
        if len(self.rows) < 2:
            return None
        return inter_subject_std([mean for _, mean, _ in self.rows])
