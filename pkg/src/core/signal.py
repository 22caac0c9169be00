"""
📈 Welch PSD estimation - from raw EEG to per-channel power spectra

Each channel is cut into overlapping Hamming-windowed segments, each segment
is zero-padded to `fft_len` and transformed, and the one-sided periodograms
are averaged. Only bins inside [f_lo_hz, f_hi_hz] are kept.
"""

import logging
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy.signal import windows

from src.models.recording import PsdFeatures, TrialRecording
from src.utils.config import WelchConfig
from src.utils.errors import InvalidArgumentError, InvalidDataError


def hamming_window(n: int) -> np.ndarray:
    """
    🪟 Symmetric Hamming window, 0.54 - 0.46 cos(2 pi k / (n - 1))

    Args:
        n: Number of coefficients (>= 1); n = 1 gives [1.0]

    Raises:
        InvalidArgumentError: If n < 1
    """
    if n < 1:
        raise InvalidArgumentError(f"window length must be >= 1, got {n}")
    return windows.hamming(n, sym=True)


def segment_signal(channel: np.ndarray, cfg: WelchConfig) -> np.ndarray:
    """
    ✂️ Cuts one channel into Welch segments

    Segment j starts at j * hop (hop = window_len - overlap_points); samples
    that do not fill a whole window at the end are dropped.

    Returns:
        np.ndarray: Read-only view of shape (n_segments, window_len)

    Raises:
        InvalidArgumentError: If the channel is shorter than one window
    """
    cfg.validate()
    channel = np.asarray(channel)
    if channel.shape[-1] < cfg.window_len:
        raise InvalidArgumentError(
            f"signal of {channel.shape[-1]} samples is shorter than the {cfg.window_len}-sample window"
        )
    return sliding_window_view(channel, cfg.window_len, axis=-1)[..., :: cfg.hop, :]


def psd_grid(cfg: WelchConfig, rate_hz: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    📏 The analysis frequency grid

    Returns:
        (freqs_hz, bin_indices): kept frequencies and their rfft bin indices
    """
    cfg.validate(rate_hz)
    all_freqs = np.arange(cfg.fft_len // 2 + 1) * rate_hz / cfg.fft_len
    keep = np.flatnonzero((all_freqs >= cfg.f_lo_hz) & (all_freqs <= cfg.f_hi_hz))
    if keep.size == 0:
        raise InvalidArgumentError(
            f"no FFT bin falls inside [{cfg.f_lo_hz}, {cfg.f_hi_hz}] Hz with fft_len={cfg.fft_len}"
        )
    return all_freqs[keep], keep


def welch_power(samples: np.ndarray, rate_hz: float, cfg: WelchConfig) -> np.ndarray:
    """
    ⚡ Welch PSD over the last axis of any array, restricted to the analysis band

    Args:
        samples: Array (..., T)
        rate_hz: Sampling rate in Hz
        cfg: Welch settings

    Returns:
        np.ndarray: PSD values (..., P)

    Raises:
        InvalidDataError: If samples hold non-finite values
        InvalidArgumentError: If cfg is invalid for the rate or signal length
    """
    samples = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise InvalidDataError("cannot estimate a PSD from non-finite samples")
    _, keep = psd_grid(cfg, rate_hz)

    window = hamming_window(cfg.window_len)
    segments = segment_signal(samples, cfg) * window
    spectrum = sp_fft.rfft(segments, n=cfg.fft_len, axis=-1)
    power = (spectrum.real ** 2 + spectrum.imag ** 2) / (rate_hz * np.sum(window ** 2))

    # One-sided spectrum: double everything except DC and (even fft_len) Nyquist
    last = cfg.fft_len // 2 if cfg.fft_len % 2 else cfg.fft_len // 2 - 1
    power[..., 1 : last + 1] *= 2.0

    return power.mean(axis=-2)[..., keep]


def welch_psd(trial: TrialRecording, cfg: WelchConfig) -> PsdFeatures:
    """
    🔬 Per-channel Welch PSD of one trial

    Args:
        trial: The recording (C x T)
        cfg: Welch settings

    Returns:
        PsdFeatures: Values (C, P) and the grid frequencies

    Raises:
        InvalidDataError: If the trial holds non-finite samples
        InvalidArgumentError: If cfg is invalid for the trial
    """
    trial.validate()
    freqs, _ = psd_grid(cfg, trial.rate_hz)
    values = welch_power(trial.samples, trial.rate_hz, cfg)
    logging.debug(f"📈 PSD of {trial.channels} channels on {freqs.size} bins")
    return PsdFeatures(values=values, freqs_hz=freqs)
