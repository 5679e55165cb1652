"""Synthetic emotional-speech stand-in for data-free verification.

Each synthetic speaker has a fixed base pitch (males low, females high). The
class is carried only by *how* the pitch moves over the clip: steady, slow or
fast vibrato, rising or falling glides, and so on. A global pitch change
therefore moves a clip toward another speaker but never toward another class,
which is exactly the prior the pitch-shift enlargement exploits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import EMOTIONS, encode_wav
from .errors import ConfigError

MALE_PITCH = (95.0, 140.0)
FEMALE_PITCH = (180.0, 250.0)


@dataclass(frozen=True)
class SynthSpec:
    males: int = 2
    females: int = 2
    classes: int = 3
    clips_per_cell: int = 10
    sample_rate: int = 16000
    duration: float = 1.0

    def __post_init__(self):
        if self.males < 1 or self.females < 1:
            raise ConfigError("need at least one speaker per gender")
        if not 1 <= self.classes <= len(EMOTIONS):
            raise ConfigError(f"classes must be in [1, {len(EMOTIONS)}]")
        if self.clips_per_cell < 1:
            raise ConfigError("clips_per_cell must be >= 1")
        if self.duration * self.sample_rate < 1024:
            raise ConfigError("clips must be at least 1024 samples long")


def pitch_contour(kind: int, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pitch deviation in semitones over time for class ``kind``."""
    dur = t[-1] if len(t) else 1.0
    u = t / dur
    phase = rng.uniform(0, 2 * np.pi)
    if kind == 0:  # steady
        c = np.zeros_like(t)
    elif kind == 1:  # fast, wide vibrato
        c = 1.5 * np.sin(2 * np.pi * rng.uniform(6.0, 8.0) * t + phase)
    elif kind == 2:  # rising glide
        c = rng.uniform(3.0, 5.0) * (u - 0.5)
    elif kind == 3:  # falling glide
        c = -rng.uniform(3.0, 5.0) * (u - 0.5)
    elif kind == 4:  # slow, shallow vibrato
        c = 0.7 * np.sin(2 * np.pi * rng.uniform(2.0, 3.0) * t + phase)
    elif kind == 5:  # rise-fall
        c = rng.uniform(3.0, 4.0) * np.sin(np.pi * u) - 2.0
    else:  # jittery steps
        steps = rng.normal(0.0, 1.2, size=int(np.ceil(dur * 8)) + 1)
        c = steps[np.minimum((t * 8).astype(int), len(steps) - 1)]
    return c + rng.normal(0.0, 0.05)


def harmonic_signal(
    f0: np.ndarray | float,
    sample_rate: int,
    n: int | None = None,
    tilt: float = 1.0,
    rng: np.random.Generator | None = None,
    peak: float = 0.5,
) -> np.ndarray:
    """Band-limited harmonic signal following the (possibly time-varying) ``f0``.

    Harmonic ``h`` has amplitude ``h**-tilt``; harmonics are dropped once they
    would exceed 0.45 * sample_rate at the highest instantaneous pitch.
    """
    rng = rng or np.random.default_rng(0)
    f0 = np.broadcast_to(np.asarray(f0, dtype=np.float64), (n,) if n is not None else np.shape(f0))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    n_harm = max(1, int(0.45 * sample_rate / f0.max()))
    x = np.zeros(len(f0))
    for h in range(1, n_harm + 1):
        x += h ** (-tilt) * np.cos(h * phase + rng.uniform(0, 2 * np.pi))
    return peak * x / np.max(np.abs(x))


def speaker_traits(spec: SynthSpec, rng: np.random.Generator) -> list[tuple[str, str, float, float]]:
    """``(speaker id, gender, base pitch Hz, spectral tilt)`` per speaker."""
    out = []
    for i in range(spec.males):
        out.append((f"m{i + 1:02d}", "male", rng.uniform(*MALE_PITCH), rng.uniform(0.8, 1.2)))
    for i in range(spec.females):
        out.append((f"f{i + 1:02d}", "female", rng.uniform(*FEMALE_PITCH), rng.uniform(0.8, 1.2)))
    return out


def synth_clip(kind: int, base_pitch: float, tilt: float, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    n = int(spec.duration * spec.sample_rate * rng.uniform(0.85, 1.15))
    t = np.arange(n) / spec.sample_rate
    semis = pitch_contour(kind, t, rng) + rng.normal(0.0, 0.3)  # per-utterance pitch wobble
    f0 = base_pitch * 2.0 ** (semis / 12.0)
    x = harmonic_signal(f0, spec.sample_rate, tilt=tilt, rng=rng)
    x *= 0.6 + 0.4 * np.sin(np.pi * t / t[-1])  # utterance-level loudness arc
    return x + rng.normal(0.0, 1e-3, n)


def generate_corpus(spec: SynthSpec, out_dir: str | Path, seed: int = 0) -> Path:
    """Write WAVs plus ``manifest.csv`` (``path,speaker,gender,emotion``).

    Output is byte-identical for a fixed ``(spec, seed)``. Returns the
    listing path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for spk, gender, pitch, tilt in speaker_traits(spec, rng):
        for c in range(spec.classes):
            for j in range(spec.clips_per_cell):
                x = synth_clip(c, pitch, tilt, spec, rng)
                name = f"{spk}_{EMOTIONS[c]}_{j:03d}.wav"
                (out / name).write_bytes(encode_wav(x, spec.sample_rate))
                rows.append((name, spk, gender, EMOTIONS[c]))
    listing = out / "manifest.csv"
    with listing.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "speaker", "gender", "emotion"])
        w.writerows(rows)
    return listing
