import numpy as np
import pytest

from emoshift.corpus import load_listing, read_wav
from emoshift.errors import ConfigError
from emoshift.synth import (
    FEMALE_PITCH,
    MALE_PITCH,
    SynthSpec,
    generate_corpus,
    harmonic_signal,
    pitch_contour,
    speaker_traits,
)


def dominant_hz(x, fs):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    return np.argmax(spec) * fs / len(x)


@pytest.mark.parametrize("bad", [dict(males=0), dict(classes=0), dict(classes=8), dict(clips_per_cell=0),
                                 dict(duration=0.01)])
def test_spec_validation(bad):
    with pytest.raises(ConfigError):
        SynthSpec(**bad)


def test_speaker_pitch_bands():
    traits = speaker_traits(SynthSpec(males=5, females=5), np.random.default_rng(0))
    for spk, gender, pitch, _ in traits:
        lo, hi = MALE_PITCH if gender == "male" else FEMALE_PITCH
        assert lo <= pitch <= hi
        assert spk[0] == gender[0]


def test_harmonic_signal_fundamental():
    x = harmonic_signal(150.0, 16000, n=16000, tilt=1.0)
    assert abs(dominant_hz(x, 16000) - 150) <= 1.0
    assert np.max(np.abs(x)) == pytest.approx(0.5)


def test_harmonics_stay_below_nyquist():
    x = harmonic_signal(250.0, 8000, n=8000)
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), 1 / 8000)
    assert spec[freqs > 0.46 * 8000].max() < 1e-6 * spec.max()


def test_contours_differ_by_class():
    t = np.arange(16000) / 16000
    rng = np.random.default_rng(0)
    steady = pitch_contour(0, t, rng)
    assert np.ptp(steady) == 0
    assert np.ptp(pitch_contour(1, t, rng)) > 2
    rise, fall = pitch_contour(2, t, rng), pitch_contour(3, t, rng)
    assert rise[-1] > rise[0] and fall[-1] < fall[0]


def test_corpus_layout(tmp_path):
    listing = generate_corpus(SynthSpec(classes=4, clips_per_cell=2, duration=0.2), tmp_path, seed=1)
    m = load_listing(listing)
    assert len(m) == 2 * 2 * 4 * 2
    assert m.speakers == {"male": ("m01", "m02"), "female": ("f01", "f02")}
    assert sorted(m.counts()["emotion"]) == ["anger", "fear", "happiness", "neutral"]
    clip = read_wav(m.entries[0].path)
    assert clip.sample_rate == 16000 and np.max(np.abs(clip.samples)) <= 1.0


def test_seed_changes_output(tmp_path):
    spec = SynthSpec(clips_per_cell=1, duration=0.1)
    generate_corpus(spec, tmp_path / "a", seed=1)
    generate_corpus(spec, tmp_path / "b", seed=2)
    name = "m01_neutral_000.wav"
    assert (tmp_path / "a" / name).read_bytes() != (tmp_path / "b" / name).read_bytes()
