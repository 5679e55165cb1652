"""WAV decoding, EmoDB-style clip naming and corpus manifests."""

from __future__ import annotations

import csv
import logging
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CorpusError, WavError

log = logging.getLogger(__name__)

EMOTIONS = ("neutral", "anger", "fear", "happiness", "sadness", "disgust", "boredom")
EMOTION_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

# German emotion letters used in EmoDB file names.
EMOTION_CODES = {
    "W": "anger",  # Wut
    "L": "boredom",  # Langeweile
    "E": "disgust",  # Ekel
    "A": "fear",  # Angst
    "F": "happiness",  # Freude
    "T": "sadness",  # Trauer
    "N": "neutral",
}

DEFAULT_SPEAKER_GENDER = {
    "03": "male", "10": "male", "11": "male", "12": "male", "15": "male",
    "08": "female", "09": "female", "13": "female", "14": "female", "16": "female",
}

GENDERS = ("male", "female")

_NAME_RE = re.compile(r"^(?P<speaker>\d{2})(?P<text>[a-z]\d{2})(?P<emotion>[A-Z])(?P<version>[a-z0-9])$")

PCM_SCALE = 32768.0
_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise WavError(f"sample rate must be positive, got {self.sample_rate}", "malformed-container")
        if len(self.samples) == 0:
            raise WavError("clip has no samples", "truncated-file")
        self.samples.setflags(write=False)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ClipMeta:
    speaker_id: str
    gender: str
    emotion: str
    text_code: str = ""
    version: str = ""

    def __post_init__(self):
        if self.emotion not in EMOTION_INDEX:
            raise CorpusError(f"emotion {self.emotion!r} not in {EMOTIONS}", "unknown-emotion")
        if self.gender not in GENDERS:
            raise CorpusError(f"gender {self.gender!r} not in {GENDERS}", "unknown-gender")

    @property
    def label(self) -> int:
        return EMOTION_INDEX[self.emotion]


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    meta: ClipMeta
    sample_rate: int = 0

    @property
    def clip_id(self) -> str:
        return self.path.stem


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    rejected: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()
    speakers: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            raise CorpusError("no valid clips", "empty-corpus")
        ids = [e.clip_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = next(k for k, v in Counter(ids).items() if v > 1)
            raise CorpusError(f"duplicate clip id {dup!r}", "duplicate-clip")
        index: dict[str, set[str]] = {g: set() for g in GENDERS}
        for e in self.entries:
            index[e.meta.gender].add(e.meta.speaker_id)
        both = index["male"] & index["female"]
        if both:
            raise CorpusError(f"speakers listed under both genders: {sorted(both)}", "inconsistent-gender")
        object.__setattr__(self, "speakers", {g: tuple(sorted(s)) for g, s in index.items()})

    def __len__(self) -> int:
        return len(self.entries)

    def gender_of(self, speaker_id: str) -> str:
        for g, spk in self.speakers.items():
            if speaker_id in spk:
                return g
        raise CorpusError(f"speaker {speaker_id!r} not in manifest", "unknown-speaker")

    def require_couples(self) -> None:
        for g in GENDERS:
            if len(self.speakers[g]) < 2:
                raise CorpusError(
                    f"need >=2 {g} speakers for leave-one-couple-out, have {len(self.speakers[g])}",
                    "insufficient-speakers",
                )

    def summary(self) -> str:
        n_spk = sum(len(s) for s in self.speakers.values())
        n_emo = len({e.meta.emotion for e in self.entries})
        return f"{len(self.entries)} clips, {n_spk} speakers, {n_emo} emotions"

    def counts(self) -> dict[str, Counter]:
        return {
            "emotion": Counter(e.meta.emotion for e in self.entries),
            "speaker": Counter(e.meta.speaker_id for e in self.entries),
        }


def decode_wav(data: bytes) -> AudioClip:
    """Decode a mono 16-bit PCM RIFF/WAVE byte string.

    Samples are divided by 32768, so the result lies in [-1, 1).
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("missing RIFF/WAVE magic", "malformed-container")

    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16 or body + size > len(data):
                raise WavError("fmt chunk too short", "malformed-container")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE and size >= 40:
                (sub_format,) = struct.unpack_from("<H", data, body + 24)
                fmt = (sub_format,) + fmt[1:]
        elif chunk_id == b"data":
            if fmt is None:
                raise WavError("data chunk before fmt chunk", "malformed-container")
            audio_format, channels, rate, _, _, bits = fmt
            if audio_format != _WAVE_FORMAT_PCM or bits != 16:
                raise WavError(f"format tag {audio_format:#x}, {bits} bits", "unsupported-encoding")
            if channels != 1:
                raise WavError(f"{channels} channels", "unsupported-channels")
            if body + size > len(data):
                raise WavError(f"data chunk declares {size} bytes, {len(data) - body} available", "truncated-file")
            if size % 2:
                raise WavError("odd data length for 16-bit samples", "truncated-file")
            ints = np.frombuffer(data, dtype="<i2", count=size // 2, offset=body)
            return AudioClip(int(rate), ints.astype(np.float64) / PCM_SCALE)
        pos = body + size + (size & 1)

    if fmt is None:
        raise WavError("no fmt chunk", "malformed-container")
    raise WavError("no data chunk", "truncated-file")


def encode_wav(samples: np.ndarray, sample_rate: int) -> bytes:
    """Inverse of :func:`decode_wav`: canonical 44-byte header + PCM-16 mono."""
    ints = np.clip(np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_PCM, 1, sample_rate, sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def read_wav(path: str | Path) -> AudioClip:
    return decode_wav(Path(path).read_bytes())


def parse_clip_name(name: str, speaker_gender: Mapping[str, str] | None = None) -> ClipMeta:
    """Parse an EmoDB file name such as ``03a01Fa.wav``."""
    table = DEFAULT_SPEAKER_GENDER if speaker_gender is None else speaker_gender
    stem = Path(name).stem
    m = _NAME_RE.match(stem)
    if m is None:
        raise CorpusError(f"{name!r} does not match <speaker:2><text:3><emotion:1><version:1>", "malformed-name")
    problems = []
    if m["emotion"] not in EMOTION_CODES:
        problems.append(("unknown-emotion", f"emotion letter {m['emotion']!r}"))
    if m["speaker"] not in table:
        problems.append(("unknown-speaker", f"speaker {m['speaker']!r}"))
    if problems:
        # report the speaker problem first, mention everything
        problems.sort(key=lambda p: p[0] != "unknown-speaker")
        raise CorpusError(f"{name}: " + "; ".join(p[1] for p in problems), problems[0][0])
    return ClipMeta(
        speaker_id=m["speaker"],
        gender=table[m["speaker"]],
        emotion=EMOTION_CODES[m["emotion"]],
        text_code=m["text"],
        version=m["version"],
    )


def _sniff_rate(path: Path) -> int:
    return read_wav(path).sample_rate


def _build(
    entries: list[ManifestEntry], rejected: list[tuple[str, str]], require_couples: bool = True
) -> CorpusManifest:
    warnings = []
    rates = sorted({e.sample_rate for e in entries if e.sample_rate})
    if len(rates) > 1:
        warnings.append(f"mixed sample rates {rates}; features are not resampled")
    for path, reason in rejected:
        log.warning("rejected %s: %s", path, reason)
    manifest = CorpusManifest(tuple(entries), tuple(rejected), tuple(warnings))
    if require_couples:
        manifest.require_couples()
    return manifest


def load_listing(path: str | Path, check_audio: bool = True, require_couples: bool = True) -> CorpusManifest:
    """Load an explicit ``path,speaker,gender,emotion`` listing.

    Relative paths resolve against the listing's directory. A header row is
    optional. Listed metadata overrides anything encoded in the file names.
    """
    path = Path(path)
    base = path.parent
    entries, rejected = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].startswith("#"):
                continue
            row = [c.strip() for c in row]
            if i == 0 and row[:4] == ["path", "speaker", "gender", "emotion"]:
                continue
            if len(row) < 4:
                rejected.append((",".join(row), "expected 4 columns"))
                continue
            clip_path = Path(row[0])
            if not clip_path.is_absolute():
                clip_path = base / clip_path
            try:
                meta = ClipMeta(speaker_id=row[1], gender=row[2], emotion=row[3])
                rate = _sniff_rate(clip_path) if check_audio else 0
            except (CorpusError, WavError, OSError) as exc:
                rejected.append((str(clip_path), str(exc)))
                continue
            entries.append(ManifestEntry(clip_path, meta, rate))
    return _build(entries, rejected, require_couples)


def load_manifest(
    root: str | Path,
    speaker_gender: Mapping[str, str] | None = None,
    check_audio: bool = True,
    require_couples: bool = True,
) -> CorpusManifest:
    """Build a manifest from a directory of WAV files or a listing file.

    Files that fail to parse or decode are kept in ``rejected`` with the
    reason rather than dropped silently.
    """
    root = Path(root)
    if root.is_file():
        if root.suffix.lower() == ".manifest":
            return read_manifest(root, require_couples)
        return load_listing(root, check_audio, require_couples)
    if not root.is_dir():
        raise CorpusError(f"{root} is neither a directory nor a listing file", "empty-corpus")

    entries, rejected = [], []
    for wav in sorted(p for p in root.rglob("*") if p.suffix.lower() == ".wav"):
        try:
            meta = parse_clip_name(wav.name, speaker_gender)
            rate = _sniff_rate(wav) if check_audio else 0
        except (CorpusError, WavError) as exc:
            rejected.append((str(wav), str(exc)))
            continue
        entries.append(ManifestEntry(wav, meta, rate))
    return _build(entries, rejected, require_couples)


_RECORD_KEYS = ("path", "speaker", "gender", "emotion", "text_code", "version", "sample_rate")


def write_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    """Serialize as blank-line separated ``key: value`` records."""
    lines = ["# emoshift manifest v1", f"# {manifest.summary()}"]
    for w in manifest.warnings:
        lines.append(f"# warning: {w}")
    for p, reason in manifest.rejected:
        lines.append(f"# rejected: {p}: {reason}")
    for e in manifest.entries:
        lines += [
            "",
            f"path: {e.path}",
            f"speaker: {e.meta.speaker_id}",
            f"gender: {e.meta.gender}",
            f"emotion: {e.meta.emotion}",
            f"text_code: {e.meta.text_code}",
            f"version: {e.meta.version}",
            f"sample_rate: {e.sample_rate}",
        ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _records(lines: Iterable[str]) -> Iterable[dict[str, str]]:
    rec: dict[str, str] = {}
    for raw in lines:
        line = raw.rstrip("\n")
        if line.startswith("#"):
            continue
        if not line.strip():
            if rec:
                yield rec
                rec = {}
            continue
        key, _, value = line.partition(":")
        rec[key.strip()] = value.strip()
    if rec:
        yield rec


def read_manifest(path: str | Path, require_couples: bool = True) -> CorpusManifest:
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for rec in _records(fh):
            missing = [k for k in _RECORD_KEYS if k not in rec]
            if missing:
                raise CorpusError(f"record missing keys {missing}", "malformed-manifest")
            meta = ClipMeta(rec["speaker"], rec["gender"], rec["emotion"], rec["text_code"], rec["version"])
            entries.append(ManifestEntry(Path(rec["path"]), meta, int(rec["sample_rate"])))
    return _build(entries, [], require_couples)
