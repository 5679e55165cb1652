"""Framing, windowing and per-frame power spectra."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .corpus import AudioClip
from .errors import ConfigError, SignalError

WINDOWS = ("rectangular", "hamming", "hann")


@dataclass(frozen=True)
class FramingConfig:
    frame_length: int = 512
    hop: int = 256
    window: str = "hamming"
    pre_emphasis: float = 0.0

    def __post_init__(self):
        n = self.frame_length
        if n < 16 or n % 2:
            raise ConfigError(f"frame_length must be even and >= 16, got {n}")
        if not 1 <= self.hop <= n:
            raise ConfigError(f"hop must be in [1, {n}], got {self.hop}")
        if self.window not in WINDOWS:
            raise ConfigError(f"window must be one of {WINDOWS}, got {self.window!r}")
        if not 0.0 <= self.pre_emphasis < 1.0:
            raise ConfigError(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")


@lru_cache(maxsize=32)
def window(kind: str, n: int) -> np.ndarray:
    """Symmetric window of length ``n`` (read-only, cached)."""
    idx = np.arange(n)
    if kind == "rectangular":
        w = np.ones(n)
    elif kind == "hamming":
        w = 0.54 - 0.46 * np.cos(2 * np.pi * idx / (n - 1))
    elif kind == "hann":
        w = 0.5 - 0.5 * np.cos(2 * np.pi * idx / (n - 1))
    else:
        raise ConfigError(f"unknown window {kind!r}")
    w.setflags(write=False)
    return w


def frame_count(length: int, cfg: FramingConfig) -> int:
    if length < cfg.frame_length:
        return 0
    return (length - cfg.frame_length) // cfg.hop + 1


def frame_signal(clip: AudioClip | np.ndarray, cfg: FramingConfig) -> np.ndarray:
    """Slice into ``T x N`` overlapping frames; the trailing partial frame is dropped."""
    x = clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)
    if cfg.pre_emphasis:
        x = np.append(x[:1], x[1:] - cfg.pre_emphasis * x[:-1])
    t = frame_count(len(x), cfg)
    if t == 0:
        raise SignalError(f"clip has {len(x)} samples, frame length is {cfg.frame_length}", "clip-too-short")
    starts = np.arange(t) * cfg.hop
    return x[starts[:, None] + np.arange(cfg.frame_length)]


def apply_window(frames: np.ndarray, kind: str, n: int | None = None) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    length = frames.shape[-1]
    if n is not None and length != n:
        raise SignalError(f"frame has {length} samples, expected {n}", "frame-length-mismatch")
    return frames * window(kind, length)


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    """``|X[k]|^2`` for ``k = 0..N/2`` along the last axis."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] % 2:
        raise SignalError("frame length must be even", "frame-length-mismatch")
    spec = np.fft.rfft(frames, axis=-1)
    return spec.real**2 + spec.imag**2


def power_spectrogram(clip: AudioClip | np.ndarray, cfg: FramingConfig) -> np.ndarray:
    frames = frame_signal(clip, cfg)
    return power_spectrum(apply_window(frames, cfg.window))
