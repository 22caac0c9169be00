"""
🗂️ Fold planning for k-fold cross-validation
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from src.utils.errors import InvalidArgumentError


@dataclass(eq=False)
class FoldPlan:
    """
    📋 A partition of the trial indices into k validation folds

    Attributes:
        k: Number of folds
        folds: Sorted trial indices of each fold
        seed: Shuffle seed
        stratified: Whether classes were dealt evenly over folds
    """

    k: int
    folds: List[np.ndarray]
    seed: int
    stratified: bool = False

    @property
    def n_trials(self) -> int:
        return int(sum(len(fold) for fold in self.folds))

    def validation(self, fold: int) -> np.ndarray:
        return self.folds[fold]

    def training(self, fold: int) -> np.ndarray:
        """All indices outside `fold`, sorted"""
        return np.sort(np.concatenate([f for i, f in enumerate(self.folds) if i != fold]))

    def fold_of_trial(self) -> np.ndarray:
        owner = np.empty(self.n_trials, dtype=np.int64)
        for i, fold in enumerate(self.folds):
            owner[fold] = i
        return owner

    def to_frame(self) -> pd.DataFrame:
        """One row per trial with its validation fold"""
        return pd.DataFrame({"trial": np.arange(self.n_trials), "fold": self.fold_of_trial()})

    def same_as(self, other: "FoldPlan") -> bool:
        return self.k == other.k and all(np.array_equal(a, b) for a, b in zip(self.folds, other.folds))


def kfold_split(
    n_trials: int, k: int, seed: int, labels: Optional[Sequence[int]] = None
) -> FoldPlan:
    """
    🔀 Seeded shuffle, then a balanced partition into k folds

    Without labels the shuffled order is cut into contiguous runs, the first
    n_trials % k folds one longer. With labels every class is shuffled on
    its own and the classes are dealt round-robin over the folds, so fold
    sizes still differ by at most one and each fold gets a near-equal share
    of every class.

    Raises:
        InvalidArgumentError: If k < 2 or n_trials < k
    """
    if k < 2:
        raise InvalidArgumentError(f"need k >= 2 folds, got {k}")
    if n_trials < k:
        raise InvalidArgumentError(f"cannot split {n_trials} trials into {k} folds")
    rng = np.random.default_rng(seed)

    if labels is None:
        order = rng.permutation(n_trials)
        sizes = np.full(k, n_trials // k)
        sizes[: n_trials % k] += 1
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        folds = [np.sort(order[bounds[i] : bounds[i + 1]]) for i in range(k)]
        return FoldPlan(k=k, folds=folds, seed=seed, stratified=False)

    labels = np.asarray(labels)
    if labels.shape != (n_trials,):
        raise InvalidArgumentError(f"{labels.size} labels for {n_trials} trials")
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    owner = np.arange(n_trials) % k
    folds = [np.sort(order[owner == i]) for i in range(k)]
    return FoldPlan(k=k, folds=folds, seed=seed, stratified=True)
