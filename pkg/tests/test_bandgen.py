"""
🎚️ Band generator tests
"""

import numpy as np
import pytest

from src.core.bandgen import band_counts, band_matrix, build_combination, slice_scale, split_blocks
from src.models.recording import PsdFeatures
from src.utils.config import BandGenConfig
from src.utils.errors import InvalidArgumentError


def loop_slices(f_c: np.ndarray, l: int, g: int) -> np.ndarray:
    b = (f_c.size - l) // g
    out = np.zeros(b)
    for j in range(b):
        total = 0.0
        for u in range(l):
            total += f_c[j * g + u]
        out[j] = total / l
    return out


def test_default_layout_counts():
    layout = band_counts(70, BandGenConfig())
    assert layout.per_scale_counts == (69, 65, 60, 55, 50)
    assert layout.total_k == 299
    assert layout.offsets == (0, 69, 134, 194, 249)
    assert [s.stop - s.start for s in layout.blocks()] == [69, 65, 60, 55, 50]


def test_increment_two_halves_the_counts():
    layout = band_counts(70, BandGenConfig(increment_g=2))
    assert layout.per_scale_counts == (34, 32, 30, 27, 25)


@pytest.mark.parametrize("p, lengths", [(20, (1, 20)), (5, (5,)), (3, (1, 4))])
def test_window_as_long_as_the_psd_is_rejected(p, lengths):
    with pytest.raises(InvalidArgumentError):
        band_counts(p, BandGenConfig(window_lengths=lengths))


@pytest.mark.parametrize("seed", range(10))
def test_slices_match_the_loop_exactly(seed):
    rng = np.random.default_rng(seed)
    f_c = rng.exponential(size=70)
    for length in (1, 5, 10, 15, 20):
        for g in (1, 2, 3):
            b = (70 - length) // g
            np.testing.assert_array_equal(slice_scale(f_c, length, g, b), loop_slices(f_c, length, g))


def test_width_one_slices_are_the_first_p_minus_one_bins():
    f_c = np.arange(70.0)
    np.testing.assert_array_equal(slice_scale(f_c, 1, 1, 69), f_c[:69])


def test_slice_count_must_match():
    with pytest.raises(InvalidArgumentError):
        slice_scale(np.ones(70), 5, 1, 66)


def test_combination_concatenates_scales_in_order(rng):
    values = rng.exponential(size=(3, 70))
    s = build_combination(PsdFeatures(values=values, freqs_hz=np.arange(1.0, 71.0)), BandGenConfig())
    assert s.s.shape == (3, 299)
    blocks = split_blocks(s.s, s.layout)
    for block, length in zip(blocks, (1, 5, 10, 15, 20)):
        for c in range(3):
            np.testing.assert_array_equal(block[c], loop_slices(values[c], length, 1))


def test_band_matrix_works_on_batches(rng):
    layout = band_counts(70, BandGenConfig())
    batch = rng.exponential(size=(4, 2, 70))
    out = band_matrix(batch, layout)
    assert out.shape == (4, 2, 299)
    np.testing.assert_array_equal(out[2], band_matrix(batch[2], layout))
    with pytest.raises(InvalidArgumentError):
        band_matrix(batch[..., :60], layout)


def test_constant_psd_gives_constant_bands():
    layout = band_counts(70, BandGenConfig())
    assert np.all(band_matrix(np.full((2, 70), 3.0), layout) == 3.0)
    assert not band_matrix(np.zeros((2, 70)), layout).any()


def test_window_one_shorter_than_the_psd_gives_one_band():
    assert band_counts(21, BandGenConfig(window_lengths=(1, 20))).per_scale_counts == (20, 1)


def test_each_scale_reads_only_its_own_leading_bins(rng):
    cfg = BandGenConfig()
    layout = band_counts(70, cfg)
    psd = rng.exponential(size=(2, 70))
    base = band_matrix(psd, layout)
    for scale, (length, count) in enumerate(zip(layout.window_lengths, layout.per_scale_counts)):
        reach = (count - 1) * cfg.increment_g + length
        block = layout.block(scale)
        perturbed = psd.copy()
        perturbed[:, reach:] += 100.0
        np.testing.assert_array_equal(band_matrix(perturbed, layout)[:, block], base[:, block])
        perturbed = psd.copy()
        perturbed[:, reach - 1] += 100.0
        assert not np.array_equal(band_matrix(perturbed, layout)[:, block], base[:, block])


def test_permuting_channels_permutes_band_rows(rng):
    layout = band_counts(70, BandGenConfig())
    psd = rng.exponential(size=(6, 70))
    order = rng.permutation(6)
    np.testing.assert_array_equal(band_matrix(psd[order], layout), band_matrix(psd, layout)[order])


def test_longer_windows_give_fewer_bands():
    counts = band_counts(70, BandGenConfig()).per_scale_counts
    assert all(a > b for a, b in zip(counts, counts[1:]))
