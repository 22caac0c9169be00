"""
🧾 Recording records - trials, PSD features and whole datasets

Plain dataclasses carried between the signal, band and data modules.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.core.enums import Provenance
from src.utils.errors import InvalidDataError


@dataclass(eq=False)
class TrialRecording:
    """
    🧠 One labeled multichannel EEG trial

    Attributes:
        samples: Amplitudes, shape (C channels, T time points)
        rate_hz: Sampling rate in Hz
        label: Class index in [0, n_classes)
        subject_id: Opaque subject identifier
    """

    samples: np.ndarray
    rate_hz: float
    label: int
    subject_id: str = ""

    @property
    def channels(self) -> int:
        return int(self.samples.shape[0])

    @property
    def length(self) -> int:
        return int(self.samples.shape[1])

    def validate(self) -> None:
        """
        ✅ Checks shape, finiteness and rate

        Raises:
            InvalidDataError: If the trial violates its invariants
        """
        if self.samples.ndim != 2 or self.samples.shape[0] < 1 or self.samples.shape[1] < 1:
            raise InvalidDataError(f"trial samples must be a non-empty C x T matrix, got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidDataError("trial holds non-finite samples")
        if not self.rate_hz > 0:
            raise InvalidDataError(f"sampling rate must be positive, got {self.rate_hz}")


@dataclass(eq=False)
class PsdFeatures:
    """
    📈 Per-channel PSD on a fixed frequency grid

    Attributes:
        values: Power densities, shape (C, P), all >= 0
        freqs_hz: The P grid frequencies, strictly increasing
    """

    values: np.ndarray
    freqs_hz: np.ndarray

    @property
    def n_bins(self) -> int:
        return int(self.values.shape[1])


@dataclass(eq=False)
class Dataset:
    """
    🗃️ All trials of one subject

    Attributes:
        trials: The recordings, sharing C, T and rate
        n_classes: Number of classes
        subject_id: Subject identifier
        provenance: File or synthetic origin
        seed: Generator seed for synthetic datasets
    """

    trials: List[TrialRecording]
    n_classes: int
    subject_id: str = ""
    provenance: Provenance = Provenance.FILE
    seed: Optional[int] = None
    _stacked: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def channels(self) -> int:
        return self.trials[0].channels

    @property
    def length(self) -> int:
        return self.trials[0].length

    @property
    def rate_hz(self) -> float:
        return self.trials[0].rate_hz

    @property
    def labels(self) -> np.ndarray:
        return np.array([trial.label for trial in self.trials], dtype=np.int64)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def samples(self) -> np.ndarray:
        """All samples stacked as (n_trials, C, T)"""
        if self._stacked is None:
            self._stacked = np.stack([trial.samples for trial in self.trials])
        return self._stacked

    def validate(self) -> None:
        """
        ✅ Checks every trial and the shared geometry

        Raises:
            InvalidDataError: If any trial or label is invalid
        """
        if not self.trials:
            raise InvalidDataError("dataset holds no trials")
        if self.n_classes < 1:
            raise InvalidDataError(f"n_classes must be >= 1, got {self.n_classes}")
        first = self.trials[0]
        for index, trial in enumerate(self.trials):
            trial.validate()
            if trial.samples.shape != first.samples.shape or trial.rate_hz != first.rate_hz:
                raise InvalidDataError(f"trial {index} does not share C, T and rate with trial 0")
            if not 0 <= trial.label < self.n_classes:
                raise InvalidDataError(f"trial {index} label {trial.label} outside [0, {self.n_classes})")
