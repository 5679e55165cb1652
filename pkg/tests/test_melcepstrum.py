import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emoshift import melcepstrum as mc
from emoshift.corpus import AudioClip
from emoshift.errors import ConfigError, SignalError
from emoshift.melcepstrum import (
    MelBankConfig,
    build_filterbank,
    center_bins,
    cepstrum,
    delta_track,
    extract_features,
    extract_features_multi,
    filter_energies,
    mel_filterbank,
    mel_inv,
    mel_of,
    pool_features,
)
from emoshift.spectral import FramingConfig

from . import oracles


def test_mel_values():
    assert mel_of(0) == 0.0
    assert mel_of(700) == pytest.approx(2595 * math.log10(2))
    assert mel_of(700) == pytest.approx(781.17, abs=0.005)
    assert mel_of(8000) == pytest.approx(2840.02, abs=0.005)
    assert mel_inv(0) == 0.0
    assert mel_inv(2595) == pytest.approx(6300.0, rel=1e-12)


@pytest.mark.parametrize("f", [0, 100, 700, 1000, 4000, 8000])
def test_mel_round_trip(f):
    assert mel_inv(mel_of(f)) == pytest.approx(f, rel=1e-9, abs=1e-12)


def test_mel_domain():
    with pytest.raises(SignalError):
        mel_of(-1)
    with pytest.raises(SignalError):
        mel_inv(-0.5)


def test_center_bins_endpoints():
    cfg = MelBankConfig()
    c = center_bins(cfg)
    assert len(c) == 28
    assert c[0] == 0.0 and c[-1] == 256.0
    np.testing.assert_array_equal(center_bins(cfg, 2.0), 2 * c)
    assert center_bins(cfg, 2.0)[-1] == 512.0


def test_center_bin_one():
    # independent: (N/Fs) * 700 * (10**(mel(Fs/2)/27/2595) - 1)
    mel_top = 2595 * math.log10(1 + 8000 / 700)
    expected = 512 / 16000 * 700 * (10 ** (mel_top / 27 / 2595) - 1)
    assert center_bins(MelBankConfig())[1] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(2.19, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 8.0), st.floats(0.05, 8.0))
def test_scaling_is_linear_and_monotone(a, b):
    cfg = MelBankConfig()
    np.testing.assert_allclose(center_bins(cfg, a * b), a * center_bins(cfg, b), rtol=1e-12)
    assert np.all(np.diff(center_bins(cfg, a)) > 0)


def test_center_bins_rejects_bad_scale():
    with pytest.raises(ConfigError):
        center_bins(MelBankConfig(), 0.0)


def test_hand_triangle():
    bank = build_filterbank(np.array([0.0, 4.0, 8.0]), 16)
    w = bank.weights[0]
    assert w[4] == pytest.approx(0.25)
    assert w[0] == 0.0 and w[8] == 0.0
    np.testing.assert_allclose(w[:9], [0, 1 / 16, 2 / 16, 3 / 16, 0.25, 3 / 16, 2 / 16, 1 / 16, 0])


def test_filterbank_matches_branching_oracle():
    for fsf in (0.6, 1.0, 1.3, 2.0):
        c = center_bins(MelBankConfig(), fsf)
        np.testing.assert_allclose(build_filterbank(c, 512).weights, oracles.brute_triangle(c, 257), atol=1e-15)


def test_filters_above_nyquist_are_zero():
    bank = mel_filterbank(MelBankConfig(shift_mode="filter"), 12.0)  # centers doubled
    escaped = bank.centers[:-2] >= 256
    assert escaped.any()
    assert not bank.weights[escaped].any()


def test_unit_area():
    bank = mel_filterbank(MelBankConfig())
    c = bank.centers
    inside = (c[:-2] > 0) & (c[2:] < 256)
    sums = bank.weights.sum(axis=1)[inside]
    assert inside.sum() >= 24
    assert np.all((sums >= 0.9) & (sums <= 1.1))


def test_peak_amplitude(rng):
    c = np.cumsum(rng.uniform(3, 9, 10))
    c = np.concatenate([[0.0], c])
    bank = build_filterbank(c, 2 * int(c[-1]) + 4)
    for m in range(1, len(c) - 1):
        assert bank.weights[m - 1].max() <= 2 / (c[m + 1] - c[m - 1]) + 1e-15


def test_invalid_centers():
    with pytest.raises(SignalError) as exc:
        build_filterbank(np.array([0.0, 5.0, 5.0]), 16)
    assert exc.value.code == "invalid-centers"


def test_energies_floor_and_sifting():
    bank = mel_filterbank(MelBankConfig())
    assert np.all(filter_energies(np.zeros((3, 257)), bank, 1e-10) == 1e-10)
    spec = np.zeros((1, 257))
    spec[0, 40] = 1.0
    e = filter_energies(spec, bank, 1e-300)
    np.testing.assert_allclose(e[0], np.maximum(bank.weights[:, 40], 1e-300))


def test_energies_shape_error():
    with pytest.raises(SignalError) as exc:
        filter_energies(np.zeros((3, 100)), mel_filterbank(MelBankConfig()))
    assert exc.value.code == "shape-error"


def test_energies_match_double_loop(rng):
    cfg = MelBankConfig(filter_count=4, coefficient_count=2, frame_length=64, sample_rate=8000)
    bank = mel_filterbank(cfg)
    spec = rng.uniform(0, 5, (6, 33))
    ref = oracles.brute_energies(spec, bank.weights, 1e-10)
    np.testing.assert_allclose(filter_energies(spec, bank), ref, rtol=1e-12, atol=1e-300)


def test_cepstrum_constant_energies():
    out = cepstrum(np.full((5, 26), 3.7), 25)
    assert np.max(np.abs(out)) < 1e-9


def test_cepstrum_single_term():
    out = cepstrum(np.array([[math.e, 1.0, 1.0, 1.0]]), 2)
    np.testing.assert_allclose(out[0], [math.cos(math.pi / 8), math.cos(math.pi / 4)], rtol=1e-12)
    assert out[0, 0] == pytest.approx(0.9239, abs=1e-4)
    assert out[0, 1] == pytest.approx(0.7071, abs=1e-4)


def test_cepstrum_matches_double_loop(rng):
    e = rng.uniform(1e-3, 1e3, (7, 26))
    np.testing.assert_allclose(cepstrum(e, 25), oracles.brute_cepstrum(e, 25), rtol=1e-12, atol=1e-12)


def test_cepstrum_requires_positive():
    with pytest.raises(SignalError):
        cepstrum(np.zeros((1, 4)), 2)


@pytest.mark.parametrize("f", [4, 26, 40])
def test_dct_orthogonal_to_constants(f):
    basis = mc.dct_matrix(f, f - 1)
    assert np.max(np.abs(basis.sum(axis=1))) < 1e-9


def test_coefficient_count_must_be_below_filters():
    with pytest.raises(ConfigError):
        MelBankConfig(filter_count=25, coefficient_count=25)


def test_delta():
    assert not delta_track(np.full((6, 3), 2.5), 2).any()
    ramp = np.tile(np.arange(10.0)[:, None], (1, 3))
    np.testing.assert_array_equal(delta_track(ramp, 2), np.full((8, 3), 2.0))
    with pytest.raises(SignalError) as exc:
        delta_track(np.zeros((2, 3)), 2)
    assert exc.value.code == "track-too-short"


def test_delta_matches_subtraction(rng):
    x = rng.normal(size=(10, 3))
    d = delta_track(x, 2)
    for t in range(2, 10):
        assert np.array_equal(d[t - 2], x[t] - x[t - 2])


def test_pool():
    out = pool_features(np.full((8, 25), -1.5), 2)
    assert len(out) == 75
    np.testing.assert_array_equal(out[:25], -1.5)
    assert not out[25:].any()
    with pytest.raises(SignalError) as exc:
        pool_features(np.zeros((3, 25)), 2)
    assert exc.value.code == "clip-too-short-for-features"


def test_pool_matches_oracle(rng):
    x = rng.normal(size=(20, 25))
    np.testing.assert_allclose(pool_features(x, 2), oracles.stats(x, 2), rtol=1e-12, atol=1e-12)


def _clip(f0, seed=0):
    return AudioClip(16000, oracles.harmonic(f0, seed=seed))


def test_zero_shift_is_unmodified_pipeline():
    c = _clip(150)
    cfg, fr = MelBankConfig(), FramingConfig()
    from emoshift.spectral import power_spectrogram

    mfcc = cepstrum(filter_energies(power_spectrogram(c, fr), mel_filterbank(cfg), cfg.log_floor), 25)
    np.testing.assert_allclose(extract_features(c, fr, cfg, 0.0), pool_features(mfcc, 2), rtol=1e-10, atol=1e-10)


def test_multi_equals_single():
    c = _clip(180)
    fr, cfg = FramingConfig(), MelBankConfig()
    shifts = [-1.5, 0.0, 0.5, 2.0]
    many = extract_features_multi(c, fr, cfg, shifts)
    for row, p in zip(many, shifts):
        np.testing.assert_allclose(row, extract_features(c, fr, cfg, p), rtol=1e-12, atol=1e-12)


def test_shift_changes_features():
    c = _clip(150)
    a = extract_features(c, FramingConfig(), MelBankConfig(), 0.0)
    b = extract_features(c, FramingConfig(), MelBankConfig(), 1.0)
    assert a.shape == (75,) and not np.allclose(a, b)


def test_short_clip():
    with pytest.raises(SignalError) as exc:
        extract_features(AudioClip(16000, np.zeros(400)), FramingConfig(), MelBankConfig())
    assert exc.value.code == "clip-too-short"


def test_deterministic():
    c = _clip(210)
    a = extract_features(c, FramingConfig(), MelBankConfig(), 0.75)
    b = extract_features(AudioClip(16000, c.samples.copy()), FramingConfig(), MelBankConfig(), 0.75)
    assert np.array_equal(a, b)


def test_clip_rate_overrides_config():
    c = AudioClip(8000, oracles.harmonic(150, fs=8000))
    a = extract_features(c, FramingConfig(256, 128), MelBankConfig(frame_length=256))
    b = extract_features(c, FramingConfig(256, 128), MelBankConfig(frame_length=256, sample_rate=8000))
    assert np.array_equal(a, b)


def _dist(a, b):
    return np.mean(np.abs(a[:13] - b[:13]))


@pytest.mark.parametrize("s", [1, 2, 4])
def test_pitch_shift_consistency(s):
    fr, cfg = FramingConfig(), MelBankConfig()
    target = extract_features(_clip(150 * 2 ** (s / 12)), fr, cfg, 0.0)
    matched = extract_features(_clip(150), fr, cfg, s)
    control = extract_features(_clip(150), fr, cfg, -s)
    assert _dist(target, matched) < _dist(target, control)


@pytest.mark.parametrize("p", [-3.0, 0.5, 2.0])
def test_filter_mode_is_the_mirrored_convention(p):
    # literal center scaling by 2**(P/12) equals the default convention at -P
    c, fr = _clip(170), FramingConfig()
    a = extract_features(c, fr, MelBankConfig(shift_mode="filter"), p)
    b = extract_features(c, fr, MelBankConfig(), -p)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    assert MelBankConfig(shift_mode="filter").scale_for(12.0) == 2.0
    assert MelBankConfig().scale_for(12.0) == 0.5
