"""
📈 Welch PSD tests - brute-force periodogram oracle and scipy cross-check
"""

import math

import numpy as np
import pytest
from scipy import signal as sp_signal

from src.core.signal import hamming_window, psd_grid, segment_signal, welch_power, welch_psd
from src.models.recording import TrialRecording
from src.utils.config import WelchConfig
from src.utils.errors import InvalidArgumentError, InvalidDataError


def brute_force_psd(channel: np.ndarray, rate: float, cfg: WelchConfig) -> np.ndarray:
    """Segment loop with an explicit DFT sum, one-sided, averaged over segments"""
    n = cfg.window_len
    window = np.array([0.54 - 0.46 * math.cos(2 * math.pi * k / (n - 1)) for k in range(n)])
    norm = rate * np.sum(window ** 2)
    hop = cfg.window_len - cfg.overlap_points
    n_segments = (channel.size - n) // hop + 1
    bins = np.arange(cfg.fft_len // 2 + 1)
    phase = np.exp(-2j * np.pi * np.outer(bins, np.arange(n)) / cfg.fft_len)
    total = np.zeros(bins.size)
    for j in range(n_segments):
        segment = channel[j * hop : j * hop + n] * window
        spectrum = phase @ segment
        power = np.abs(spectrum) ** 2 / norm
        for f in bins:
            if 0 < f and not (cfg.fft_len % 2 == 0 and f == cfg.fft_len // 2):
                power[f] *= 2
        total += power
    freqs = bins * rate / cfg.fft_len
    keep = (freqs >= cfg.f_lo_hz) & (freqs <= cfg.f_hi_hz)
    return (total / n_segments)[keep]


def test_hamming_window_matches_the_closed_form():
    n = 200
    expected = 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
    np.testing.assert_allclose(hamming_window(n), expected, rtol=0, atol=1e-15)
    assert hamming_window(1).tolist() == [1.0]
    with pytest.raises(InvalidArgumentError):
        hamming_window(0)


def test_default_grid_has_seventy_one_hertz_bins():
    freqs, keep = psd_grid(WelchConfig(), 1000.0)
    assert freqs.size == 70
    np.testing.assert_array_equal(freqs, np.arange(1, 71, dtype=float))
    np.testing.assert_array_equal(keep, np.arange(1, 71))


def test_segments_start_every_hop_and_drop_the_tail():
    cfg = WelchConfig()
    segments = segment_signal(np.arange(1000.0), cfg)
    assert segments.shape == (5, 200)
    assert segments[1, 0] == cfg.hop
    assert segments[-1, -1] == 4 * cfg.hop + 199


@pytest.mark.parametrize("seed", range(21))
def test_welch_matches_brute_force_periodogram(seed, welch):
    rng = np.random.default_rng(seed)
    length = (200, 1000, 10000)[seed % 3]
    channels = 1 if length == 10000 else 2
    samples = rng.normal(size=(channels, length))
    psd = welch_power(samples, 1000.0, welch)
    for c in range(channels):
        np.testing.assert_allclose(psd[c], brute_force_psd(samples[c], 1000.0, welch), rtol=1e-10)


def test_welch_agrees_with_scipy(rng, welch):
    samples = rng.normal(size=(3, 2000))
    freqs, expected = sp_signal.welch(
        samples,
        fs=1000.0,
        window=sp_signal.windows.hamming(welch.window_len, sym=True),
        noverlap=welch.overlap_points,
        nfft=welch.fft_len,
        detrend=False,
        scaling="density",
        average="mean",
    )
    grid, keep = psd_grid(welch, 1000.0)
    np.testing.assert_allclose(freqs[keep], grid)
    np.testing.assert_allclose(welch_power(samples, 1000.0, welch), expected[:, keep], rtol=1e-10)


def test_pure_sinusoid_peaks_at_its_frequency(welch):
    t = np.arange(2000) / 1000.0
    trial = TrialRecording(samples=np.stack([np.sin(2 * np.pi * 10 * t), np.sin(2 * np.pi * 23 * t)]), rate_hz=1000.0, label=0)
    psd = welch_psd(trial, welch)
    assert psd.freqs_hz[np.argmax(psd.values[0])] == 10.0
    assert psd.freqs_hz[np.argmax(psd.values[1])] == 23.0
    assert np.all(psd.values >= 0)


def test_zero_signal_has_zero_power(welch):
    psd = welch_power(np.zeros((2, 1000)), 1000.0, welch)
    assert psd.shape == (2, 70)
    assert not psd.any()


def test_short_or_broken_input_is_rejected(welch):
    with pytest.raises(InvalidArgumentError):
        welch_power(np.ones((1, 150)), 1000.0, welch)
    broken = np.ones((1, 1000))
    broken[0, 10] = np.nan
    with pytest.raises(InvalidDataError):
        welch_power(broken, 1000.0, welch)
    with pytest.raises(InvalidArgumentError):
        welch_power(np.ones((1, 1000)), 100.0, welch)


@pytest.mark.parametrize(
    "cfg",
    [
        WelchConfig(window_len=200, overlap_points=200),
        WelchConfig(window_len=2000, fft_len=1000),
        WelchConfig(f_lo_hz=50.0, f_hi_hz=10.0),
    ],
)
def test_invalid_welch_settings(cfg):
    with pytest.raises(InvalidArgumentError):
        cfg.validate(1000.0)


def test_ten_second_trials_give_fifty_two_segments(welch):
    assert segment_signal(np.zeros(10000), welch).shape == (52, 200)


@pytest.mark.parametrize("alpha", [0.5, 3.0, -2.0, 1e3])
def test_power_scales_with_the_square_of_the_amplitude(alpha, rng, welch):
    samples = rng.normal(size=(2, 1000))
    np.testing.assert_allclose(
        welch_power(alpha * samples, 1000.0, welch), alpha ** 2 * welch_power(samples, 1000.0, welch), rtol=1e-10
    )


def test_grid_does_not_depend_on_the_trial_length(welch):
    for length in (200, 1000, 10000):
        trial = TrialRecording(samples=np.ones((1, length)), rate_hz=1000.0, label=0)
        np.testing.assert_array_equal(welch_psd(trial, welch).freqs_hz, np.arange(1.0, 71.0))
