"""Mel filter bank (optionally frequency scaled), MFCCs, deltas and pooling.

The per-shift hot loop (filter energies -> log -> DCT -> delta -> pooled
statistics) has two implementations with the same contract:

* ``emoshift._ckernels.shifted_features`` (Cython, built when a compiler is
  available)
* :func:`shifted_features_py`, the NumPy reference kept in this module

:data:`BACKEND` names the one picked at import. Set ``EMOSHIFT_PURE_PYTHON=1``
to force the NumPy path, or call :func:`use_backend`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import AudioClip
from .errors import ConfigError, SignalError
from .spectral import FramingConfig, power_spectrogram

try:
    if os.environ.get("EMOSHIFT_PURE_PYTHON"):
        raise ImportError("pure python forced")
    from ._ckernels import shifted_features as _shifted_features_c
except ImportError:
    _shifted_features_c = None

BACKEND = "cython" if _shifted_features_c is not None else "python"

SHIFT_MODES = ("pitch", "filter")


@dataclass(frozen=True)
class MelBankConfig:
    """Filter bank and cepstral settings.

    ``shift_mode`` fixes how a pitch shift in semitones moves the filter
    centers. ``"pitch"`` scales them by ``2**(-P/12)`` so a positive shift
    makes the clip look higher pitched; ``"filter"`` scales them by
    ``2**(+P/12)`` (centers move up, the clip looks lower pitched).
    """

    filter_count: int = 26
    coefficient_count: int = 25
    frame_length: int = 512
    sample_rate: int = 16000
    log_floor: float = 1e-10
    delta_shift: int = 2
    shift_mode: str = "pitch"

    def __post_init__(self):
        if not 1 <= self.coefficient_count < self.filter_count:
            raise ConfigError(
                f"need 1 <= coefficient_count < filter_count, got C={self.coefficient_count}, F={self.filter_count}"
            )
        if not self.log_floor > 0:
            raise ConfigError(f"log_floor must be > 0, got {self.log_floor}")
        if self.delta_shift < 1:
            raise ConfigError(f"delta_shift must be >= 1, got {self.delta_shift}")
        if self.frame_length < 16 or self.frame_length % 2:
            raise ConfigError(f"frame_length must be even and >= 16, got {self.frame_length}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.shift_mode not in SHIFT_MODES:
            raise ConfigError(f"shift_mode must be one of {SHIFT_MODES}, got {self.shift_mode!r}")

    @property
    def bin_count(self) -> int:
        return self.frame_length // 2 + 1

    @property
    def feature_count(self) -> int:
        return 3 * self.coefficient_count

    def scale_for(self, p_sf: float) -> float:
        """Center-frequency scale factor applied for a shift of ``p_sf`` semitones."""
        f = 2.0 ** (p_sf / 12.0)
        return 1.0 / f if self.shift_mode == "pitch" else f


@dataclass(frozen=True)
class MelFilterBank:
    centers: np.ndarray
    weights: np.ndarray
    scale_factor: float = 1.0

    @property
    def filter_count(self) -> int:
        return self.weights.shape[0]


def mel_of(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise SignalError("frequency must be >= 0", "domain-error")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_inv(b):
    b = np.asarray(b, dtype=np.float64)
    if np.any(b < 0):
        raise SignalError("mel value must be >= 0", "domain-error")
    out = 700.0 * (10.0 ** (b / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


def center_bins(cfg: MelBankConfig, fsf: float = 1.0) -> np.ndarray:
    """Filter centers ``f[0..F+1]`` in fractional DFT bins, scaled by ``fsf``."""
    if not fsf > 0 or not math.isfinite(fsf):
        raise ConfigError(f"frequency scale factor must be finite and > 0, got {fsf}")
    n, fs, nf = cfg.frame_length, cfg.sample_rate, cfg.filter_count
    top = mel_of(fs / 2.0)
    m = np.arange(nf + 2)
    f = (n / fs) * mel_inv(m * top / (nf + 1))
    f[0] = 0.0
    f[-1] = n / 2.0  # exact; the mel round trip is off by an ulp
    return fsf * f


def triangle_weights(centers: np.ndarray, bin_count: int) -> np.ndarray:
    """Evaluate the unit-area triangles at integer bins ``0..bin_count-1``."""
    c = np.asarray(centers, dtype=np.float64)
    k = np.arange(bin_count, dtype=np.float64)[None, :]
    lo, mid, hi = c[:-2, None], c[1:-1, None], c[2:, None]
    rise = 2.0 * (k - lo) / ((hi - lo) * (mid - lo))
    fall = 2.0 * (hi - k) / ((hi - lo) * (hi - mid))
    w = np.where((k >= lo) & (k < mid), rise, 0.0)
    return np.where((k >= mid) & (k < hi), fall, w)


def build_filterbank(centers: np.ndarray, frame_length: int, scale_factor: float = 1.0) -> MelFilterBank:
    """Triangular filters on bins ``0..N/2``; support above Nyquist is dropped."""
    c = np.asarray(centers, dtype=np.float64)
    if c.ndim != 1 or len(c) < 3 or np.any(np.diff(c) <= 0):
        raise SignalError("filter centers must be strictly increasing, length >= 3", "invalid-centers")
    w = triangle_weights(c, frame_length // 2 + 1)
    c.setflags(write=False)
    w.setflags(write=False)
    return MelFilterBank(c, w, scale_factor)


def mel_filterbank(cfg: MelBankConfig, p_sf: float = 0.0) -> MelFilterBank:
    fsf = cfg.scale_for(p_sf)
    return build_filterbank(center_bins(cfg, fsf), cfg.frame_length, fsf)


def filter_energies(spectrogram: np.ndarray, bank: MelFilterBank, log_floor: float = 1e-10) -> np.ndarray:
    spec = np.asarray(spectrogram, dtype=np.float64)
    if spec.ndim != 2 or spec.shape[1] != bank.weights.shape[1]:
        raise SignalError(f"spectrogram shape {spec.shape} vs bank bins {bank.weights.shape[1]}", "shape-error")
    return np.maximum(spec @ bank.weights.T, log_floor)


def dct_matrix(n_filters: int, n_coef: int) -> np.ndarray:
    """``C x F`` basis ``cos(m (k - 1/2) pi / F)`` for ``m = 1..C``, ``k = 1..F``."""
    m = np.arange(1, n_coef + 1)[:, None]
    k = np.arange(1, n_filters + 1)[None, :]
    return np.cos(m * (k - 0.5) * np.pi / n_filters)


def cepstrum(energies: np.ndarray, n_coef: int) -> np.ndarray:
    e = np.asarray(energies, dtype=np.float64)
    n_filters = e.shape[1]
    if not 1 <= n_coef < n_filters:
        raise ConfigError(f"need 1 <= C < F, got C={n_coef}, F={n_filters}")
    if np.any(e <= 0):
        raise SignalError("filter energies must be positive", "domain-error")
    return np.log(e) @ dct_matrix(n_filters, n_coef).T


def delta_track(mfcc: np.ndarray, d: int = 2) -> np.ndarray:
    mfcc = np.asarray(mfcc, dtype=np.float64)
    if d < 1 or mfcc.shape[0] <= d:
        raise SignalError(f"{mfcc.shape[0]} frames, differentiation shift {d}", "track-too-short")
    return mfcc[d:] - mfcc[:-d]


def pool_features(mfcc: np.ndarray, d: int = 2) -> np.ndarray:
    """``[mean(MFCC), std(MFCC), std(delta MFCC)]`` with population std."""
    mfcc = np.asarray(mfcc, dtype=np.float64)
    if mfcc.shape[0] < d + 2:
        raise SignalError(f"{mfcc.shape[0]} frames, need >= {d + 2}", "clip-too-short-for-features")
    delta = delta_track(mfcc, d)
    return np.concatenate([mfcc.mean(axis=0), mfcc.std(axis=0), delta.std(axis=0)])


def shifted_features_py(
    power: np.ndarray,
    base_centers: np.ndarray,
    scales: np.ndarray,
    n_coef: int,
    d: int,
    log_floor: float,
) -> np.ndarray:
    """Pooled feature vectors of one spectrogram for several center scalings."""
    bins = power.shape[1]
    basis = dct_matrix(len(base_centers) - 2, n_coef).T
    out = np.empty((len(scales), 3 * n_coef))
    for i, s in enumerate(scales):
        w = triangle_weights(s * base_centers, bins)
        mfcc = np.log(np.maximum(power @ w.T, log_floor)) @ basis
        out[i] = pool_features(mfcc, d)
    return out


def use_backend(name: str) -> str:
    """Switch the hot-loop implementation; returns the previous backend name."""
    global BACKEND
    if name not in ("cython", "python"):
        raise ValueError(name)
    if name == "cython" and _shifted_features_c is None:
        raise ImportError("compiled kernels are not available")
    prev, BACKEND = BACKEND, name
    return prev


def shifted_features(power, base_centers, scales, n_coef, d, log_floor) -> np.ndarray:
    power = np.ascontiguousarray(power, dtype=np.float64)
    base_centers = np.ascontiguousarray(base_centers, dtype=np.float64)
    scales = np.ascontiguousarray(np.atleast_1d(scales), dtype=np.float64)
    if power.shape[0] < d + 2:
        raise SignalError(f"{power.shape[0]} frames, need >= {d + 2}", "clip-too-short-for-features")
    if BACKEND == "cython":
        return _shifted_features_c(power, base_centers, scales, int(n_coef), int(d), float(log_floor))
    return shifted_features_py(power, base_centers, scales, n_coef, d, log_floor)


def _for_clip(clip: AudioClip, framing: FramingConfig, cfg: MelBankConfig) -> MelBankConfig:
    if framing.frame_length != cfg.frame_length:
        raise ConfigError(f"framing N={framing.frame_length} but bank N={cfg.frame_length}")
    if clip.sample_rate != cfg.sample_rate:
        cfg = replace(cfg, sample_rate=clip.sample_rate)
    return cfg


def extract_features_multi(
    clip: AudioClip,
    framing: FramingConfig,
    cfg: MelBankConfig,
    shifts: Sequence[float],
) -> np.ndarray:
    """Feature vectors for every pitch shift in ``shifts`` (one row each).

    The power spectrogram is computed once and shared across shifts. The
    clip's own sample rate overrides ``cfg.sample_rate``.
    """
    cfg = _for_clip(clip, framing, cfg)
    for p in shifts:
        if not math.isfinite(p):
            raise ConfigError(f"pitch shift must be finite, got {p}")
    power = power_spectrogram(clip, framing)
    scales = np.array([cfg.scale_for(p) for p in shifts])
    return shifted_features(power, center_bins(cfg), scales, cfg.coefficient_count, cfg.delta_shift, cfg.log_floor)


def extract_features(clip: AudioClip, framing: FramingConfig, cfg: MelBankConfig, p_sf: float = 0.0) -> np.ndarray:
    return extract_features_multi(clip, framing, cfg, [p_sf])[0]
