"""Gender-dependent pitch-shift grids and the training-set enlargement factor.

A policy ``(R, S, K)`` gives male clips the shifts ``n*S`` inside
``[-K*R, R]`` and female clips the mirrored range ``[-R, K*R]``. Grid points
are generated from integer multiples of ``S`` so that fractional steps such
as 1/32 never accumulate rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .corpus import CorpusManifest, ManifestEntry
from .errors import ConfigError, CorpusError

# Published grid layout: rows are steps, columns are ranges.
TABLE_STEPS = (1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1, 2)
TABLE_RANGES = (0, 0.5, 1, 2, 3, 4, 6, 8, 10, 12)
TABLE_K = (1.0, 0.75)

_EPS = 1e-9


@dataclass(frozen=True)
class ShiftPolicy:
    range: float = 0.0
    step: float = 1.0
    symmetry: float = 0.75

    def __post_init__(self):
        for name, v in (("range", self.range), ("step", self.step), ("symmetry", self.symmetry)):
            if not math.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v}")
        if self.range < 0:
            raise ConfigError(f"range R must be >= 0, got {self.range}")
        if self.step <= 0:
            raise ConfigError(f"step S must be > 0, got {self.step}")
        if not 0 < self.symmetry <= 1:
            raise ConfigError(f"symmetry K must be in (0, 1], got {self.symmetry}")


@dataclass(frozen=True)
class ShiftGrid:
    shifts: tuple[float, ...]
    gender: str

    def __len__(self) -> int:
        return len(self.shifts)

    def __iter__(self):
        return iter(self.shifts)


def fsf(p_sf: float) -> float:
    """Frequency scale factor for a pitch shift in semitones."""
    return 2.0 ** (p_sf / 12.0)


def _multiples(limit: float, step: float) -> int:
    """Largest n with n*step <= limit (tolerant to float noise in the ratio)."""
    return math.floor(limit / step + _EPS)


def _bounds(policy: ShiftPolicy, gender: str) -> tuple[int, int]:
    r, s, k = policy.range, policy.step, policy.symmetry
    if gender == "male":
        return -_multiples(k * r, s), _multiples(r, s)
    if gender == "female":
        return -_multiples(r, s), _multiples(k * r, s)
    raise CorpusError(f"gender {gender!r}", "unknown-gender")


def shift_grid(policy: ShiftPolicy, gender: str) -> ShiftGrid:
    lo, hi = _bounds(policy, gender)
    return ShiftGrid(tuple(n * policy.step for n in range(lo, hi + 1)), gender)


def enlargement_factor(policy: ShiftPolicy) -> int:
    """Patterns per original training clip: ``floor(R/S) + floor(K*R/S) + 1``."""
    r, s, k = policy.range, policy.step, policy.symmetry
    return _multiples(r, s) + _multiples(k * r, s) + 1


def enlargement_factor_ceiling(policy: ShiftPolicy) -> int:
    """The closed form ``ceil(R(1+K)/S) + 1`` as printed alongside the tables.

    It disagrees with the grid count whenever ``R/S`` or ``K*R/S`` is not an
    integer (e.g. R=1, S=1, K=0.75 gives 3 while the grid is ``{0, 1}``).
    Kept only so reports can list the discrepancy.
    """
    r, s, k = policy.range, policy.step, policy.symmetry
    if r == 0:
        return 1
    return math.ceil(r * (1 + k) / s - _EPS) + 1


def ef_table(
    ranges: Sequence[float] = TABLE_RANGES,
    steps: Sequence[float] = TABLE_STEPS,
    symmetry: float = 0.75,
) -> list[list[int]]:
    return [[enlargement_factor(ShiftPolicy(r, s, symmetry)) for r in ranges] for s in steps]


def ceiling_discrepancies(
    ranges: Sequence[float] = TABLE_RANGES,
    steps: Sequence[float] = TABLE_STEPS,
    symmetry: float = 0.75,
) -> list[tuple[float, float, int, int]]:
    """Cells ``(S, R, grid count, ceiling formula)`` where the two disagree."""
    out = []
    for s in steps:
        for r in ranges:
            p = ShiftPolicy(r, s, symmetry)
            a, b = enlargement_factor(p), enlargement_factor_ceiling(p)
            if a != b:
                out.append((s, r, a, b))
    return out


@dataclass(frozen=True)
class ExtractionTask:
    entry: ManifestEntry
    p_sf: float
    training: bool


def augment_plan(
    manifest: CorpusManifest,
    training_speakers: Iterable[str],
    policy: ShiftPolicy,
    test_speakers: Iterable[str] = (),
) -> list[ExtractionTask]:
    """Extraction tasks for one split.

    Every clip of a training speaker gets one task per grid shift for its
    gender; test clips get exactly one unshifted task.
    """
    train = set(training_speakers)
    test = set(test_speakers)
    known = {s for spk in manifest.speakers.values() for s in spk}
    unknown = (train | test) - known
    if unknown:
        raise CorpusError(f"speakers not in manifest: {sorted(unknown)}", "unknown-speaker")
    if train & test:
        raise CorpusError(f"speakers in both train and test: {sorted(train & test)}", "speaker-leak")
    grids = {g: shift_grid(policy, g) for g in ("male", "female")}
    tasks = []
    for e in manifest.entries:
        if e.meta.speaker_id in train:
            tasks.extend(ExtractionTask(e, p, True) for p in grids[e.meta.gender])
        elif e.meta.speaker_id in test:
            tasks.append(ExtractionTask(e, 0.0, False))
    return tasks


def parse_step(text: str | float) -> float:
    """Accept ``0.25``, ``"1/4"`` or ``"0.25"``."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(Fraction(text.strip()))
