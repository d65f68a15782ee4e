"""Tests for reconstruction metrics"""

import numpy as np
import pytest

from agtv_tomo.metrics import intensity_profile, metric_report, radial_bins, raps, rel_l2_error


def test_rel_l2_error():
    truth = np.ones((4, 4))
    assert rel_l2_error(truth, truth) == 0.0
    assert rel_l2_error(2.0 * truth, truth) == pytest.approx(1.0)
    assert rel_l2_error(np.zeros((4, 4)), truth) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rel_l2_error(truth, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        rel_l2_error(np.ones((4, 4)), np.ones((5, 5)))


def test_intensity_profile(phantom16):
    profile = intensity_profile(phantom16, 8)
    assert np.array_equal(profile, phantom16[8])
    with pytest.raises(ValueError):
        intensity_profile(phantom16, 16)


def test_radial_bins():
    labels, counts = radial_bins(8)
    assert labels.shape == (8, 8)
    assert labels[4, 4] == 0
    assert counts.size == 4
    assert counts[0] == 1
    # (+-1, 0), (0, +-1) and the four diagonals at sqrt(2)
    assert counts[1] == 8
    with pytest.raises(ValueError):
        radial_bins(7)


def test_raps_of_constant_image():
    spectrum = raps(np.full((8, 8), 0.5))
    assert spectrum.size == 4
    assert spectrum[0] == pytest.approx((0.5 * 64) ** 2)
    assert np.allclose(spectrum[1:], 0.0)


def test_raps_peaks_at_the_oscillation_frequency():
    cols = np.arange(32)
    image = np.tile(np.cos(2 * np.pi * 5 * cols / 32), (32, 1))
    assert int(np.argmax(raps(image))) == 5


def test_raps_is_rotation_symmetric():
    image = np.random.default_rng(0).standard_normal((16, 16))
    assert np.allclose(raps(image), raps(image.T))
    assert np.allclose(raps(image), raps(np.rot90(image, 2)))


def test_metric_report(phantom16):
    noisy = phantom16 + 0.01
    report = metric_report(noisy, phantom16)
    assert report.profile_row == 8
    assert report.profile == noisy[8].tolist()
    assert len(report.raps) == 8
    assert report.rel_l2_error == pytest.approx(rel_l2_error(noisy, phantom16))

    blind = metric_report(noisy, row=3)
    assert blind.rel_l2_error is None
    assert blind.profile_row == 3


def test_metric_report_odd_side():
    report = metric_report(np.ones((5, 5)), np.ones((5, 5)))
    assert report.raps == []
    assert report.profile_row == 2
    assert report.rel_l2_error == 0.0


def test_raps_accounts_for_the_in_disk_power(rng):
    """Bin averages times bin sizes add up to the spectral power at radius < n/2."""
    image = rng.standard_normal((16, 16))
    labels, counts = radial_bins(16)
    power = np.abs(np.fft.fftshift(np.fft.fft2(image))) ** 2

    binned = float(np.sum(raps(image) * counts))
    assert binned == pytest.approx(float(power[labels < 8].sum()))
    # corner frequencies are left out, so the total is below Parseval's n^2 * sum(x^2)
    assert binned < 256 * float(np.sum(image**2))


def test_raps_of_white_noise_is_flat(rng):
    n, draws = 64, 8
    spectrum = np.mean([raps(rng.standard_normal((n, n))) for _ in range(draws)], axis=0)

    # unit-variance white noise has expected power n^2 at every frequency
    band = spectrum[4:] / n**2
    assert band.mean() == pytest.approx(1.0, rel=0.05)
    assert np.all((band > 0.6) & (band < 1.4))
