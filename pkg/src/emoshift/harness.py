"""Leave-one-couple-out evaluation, feature cache and (R, S, K) sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augmentation import (
    TABLE_RANGES,
    TABLE_STEPS,
    ShiftPolicy,
    augment_plan,
    ceiling_discrepancies,
    enlargement_factor,
)
from .classifiers import CLASSIFIERS, LabeledDataset, error_count, fit_least_squares
from .corpus import EMOTIONS, CorpusManifest, ManifestEntry, read_wav
from .errors import ConfigError, CorpusError, EmoShiftError, SignalError
from .melcepstrum import MelBankConfig, extract_features_multi
from .spectral import FramingConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldPlan:
    test_male: str
    test_female: str
    train_speakers: tuple[str, ...]

    @property
    def test_speakers(self) -> tuple[str, str]:
        return (self.test_male, self.test_female)

    @property
    def name(self) -> str:
        return f"{self.test_male}+{self.test_female}"


@dataclass(frozen=True)
class ExperimentConfig:
    policy: ShiftPolicy = field(default_factory=ShiftPolicy)
    classifier: str = "linear"
    framing: FramingConfig = field(default_factory=FramingConfig)
    bank: MelBankConfig = field(default_factory=MelBankConfig)
    ridge: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {sorted(CLASSIFIERS)}, got {self.classifier!r}")
        if self.ridge < 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if self.framing.frame_length != self.bank.frame_length:
            raise ConfigError("framing and filter bank disagree on the frame length")

    @property
    def expansion(self) -> str:
        return CLASSIFIERS[self.classifier]

    def feature_hash(self) -> str:
        """Hash of everything that changes a feature vector (not the policy)."""
        blob = json.dumps({"framing": asdict(self.framing), "bank": asdict(self.bank)}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def config_hash(self) -> str:
        blob = json.dumps(
            {"features": self.feature_hash(), "classifier": self.classifier, "ridge": self.ridge,
             "K": self.policy.symmetry},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def loco_folds(manifest: CorpusManifest) -> list[FoldPlan]:
    """One fold per (male, female) speaker pair, in sorted speaker order."""
    manifest.require_couples()
    males, females = manifest.speakers["male"], manifest.speakers["female"]
    everyone = sorted(males + females)
    return [
        FoldPlan(m, f, tuple(s for s in everyone if s not in (m, f)))
        for m, f in product(males, females)
    ]


def _fmt_shift(p: float) -> str:
    return repr(float(p))


class FeatureCache:
    """Feature vectors keyed by ``(clip id, P_SF)`` for one feature config.

    Safe for concurrent use; inserting an existing key is a no-op. With a
    ``directory`` the vectors are also appended to
    ``<directory>/<feature hash>/<clip id>.csv`` as ``clip_id,p_sf,v1..vL``
    rows and read back lazily, so a restarted sweep does not recompute them.
    """

    def __init__(self, framing: FramingConfig, bank: MelBankConfig, directory: str | Path | None = None):
        self.framing = framing
        self.bank = bank
        self.key = ExperimentConfig(framing=framing, bank=bank).feature_hash()
        self.dir = Path(directory) / self.key if directory is not None else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, dict[float, np.ndarray]] = {}
        self._loaded: set[str] = set()
        self._lock = threading.Lock()
        self._clip_locks: dict[str, threading.Lock] = {}
        self.computed = 0

    def _clip_lock(self, clip_id: str) -> threading.Lock:
        with self._lock:
            return self._clip_locks.setdefault(clip_id, threading.Lock())

    def _load(self, clip_id: str) -> dict[float, np.ndarray]:
        rows = self._mem.setdefault(clip_id, {})
        if clip_id in self._loaded or self.dir is None:
            return rows
        path = self.dir / f"{clip_id}.csv"
        if path.exists():
            with path.open(newline="") as fh:
                for rec in csv.reader(fh):
                    if len(rec) != 2 + self.bank.feature_count or rec[0] != clip_id:
                        continue  # torn trailing write
                    rows.setdefault(float(rec[1]), np.array([float(v) for v in rec[2:]]))
        self._loaded.add(clip_id)
        return rows

    def get(self, entry: ManifestEntry, shifts: Sequence[float]) -> np.ndarray:
        """``len(shifts) x L`` matrix, computing only the missing shifts."""
        clip_id = entry.clip_id
        with self._clip_lock(clip_id):
            rows = self._load(clip_id)
            missing = sorted({float(p) for p in shifts if float(p) not in rows})
            if missing:
                try:
                    clip = read_wav(entry.path)
                    vecs = extract_features_multi(clip, self.framing, self.bank, missing)
                except (EmoShiftError, OSError) as exc:
                    raise SignalError(f"feature extraction failed for {entry.path}: {exc}", "extraction-failed") from exc
                for p, v in zip(missing, vecs):
                    rows[p] = v
                self.computed += len(missing)
                if self.dir is not None:
                    with (self.dir / f"{clip_id}.csv").open("a", newline="") as fh:
                        w = csv.writer(fh)
                        for p, v in zip(missing, vecs):
                            w.writerow([clip_id, _fmt_shift(p), *map(repr, v.tolist())])
            return np.stack([rows[float(p)] for p in shifts])

    def __len__(self) -> int:
        return sum(len(v) for v in self._mem.values())


@dataclass(frozen=True)
class FoldResult:
    fold: str
    test_errors: int
    test_count: int
    train_errors: int
    train_count: int
    tasks: int
    fallback_ridge: bool = False

    @property
    def test_error(self) -> float:
        return self.test_errors / self.test_count

    @property
    def train_error(self) -> float:
        return self.train_errors / self.train_count


def run_fold(
    fold: FoldPlan,
    manifest: CorpusManifest,
    config: ExperimentConfig,
    cache: FeatureCache | None = None,
) -> FoldResult:
    """Fit on the augmented training speakers, score the unmodified test couple.

    The training error is measured on the augmented training set.
    """
    if cache is None:
        cache = FeatureCache(config.framing, config.bank)
    tasks = augment_plan(manifest, fold.train_speakers, config.policy, fold.test_speakers)

    # test purity and work accounting
    test_ids = set(fold.test_speakers)
    train_tasks = [t for t in tasks if t.training]
    test_tasks = [t for t in tasks if not t.training]
    if any(t.entry.meta.speaker_id in test_ids for t in train_tasks):
        raise CorpusError(f"fold {fold.name}: test speaker in training data", "speaker-leak")
    if any(t.p_sf != 0.0 or t.entry.meta.speaker_id not in test_ids for t in test_tasks):
        raise CorpusError(f"fold {fold.name}: modified or foreign test pattern", "test-contamination")
    n_train_clips = sum(1 for e in manifest.entries if e.meta.speaker_id in fold.train_speakers)
    n_test_clips = sum(1 for e in manifest.entries if e.meta.speaker_id in test_ids)
    ef = enlargement_factor(config.policy)
    if len(train_tasks) != n_train_clips * ef or len(test_tasks) != n_test_clips:
        raise CorpusError(f"fold {fold.name}: plan size mismatch", "plan-mismatch")
    if not test_tasks or not train_tasks:
        raise CorpusError(f"fold {fold.name}: empty split", "empty-corpus")

    by_clip: dict[str, list] = {}
    for t in train_tasks:
        by_clip.setdefault(t.entry.clip_id, []).append(t)
    x_tr, y_tr = [], []
    for group in by_clip.values():
        entry = group[0].entry
        x_tr.append(cache.get(entry, [t.p_sf for t in group]))
        y_tr.extend([entry.meta.label] * len(group))
    x_te = np.vstack([cache.get(t.entry, [0.0]) for t in test_tasks])
    y_te = [t.entry.meta.label for t in test_tasks]

    k = len(EMOTIONS)
    train = LabeledDataset(np.vstack(x_tr), np.array(y_tr), k)
    test = LabeledDataset(x_te, np.array(y_te), k)
    model = fit_least_squares(train, config.expansion, config.ridge)
    return FoldResult(
        fold=fold.name,
        test_errors=error_count(model, test),
        test_count=len(test),
        train_errors=error_count(model, train),
        train_count=len(train),
        tasks=len(tasks),
        fallback_ridge=model.fallback_ridge,
    )


@dataclass(frozen=True)
class ExperimentResult:
    folds: tuple[FoldResult, ...]
    enlargement_factor: int

    @property
    def test_error(self) -> float:
        """Pooled (micro-averaged) test error over all folds."""
        return sum(f.test_errors for f in self.folds) / sum(f.test_count for f in self.folds)

    @property
    def test_error_macro(self) -> float:
        return sum(f.test_error for f in self.folds) / len(self.folds)

    @property
    def train_error(self) -> float:
        return sum(f.train_errors for f in self.folds) / sum(f.train_count for f in self.folds)

    def to_dict(self) -> dict:
        return {
            "test_error": self.test_error,
            "test_error_macro": self.test_error_macro,
            "train_error": self.train_error,
            "enlargement_factor": self.enlargement_factor,
            "folds": [asdict(f) for f in self.folds],
        }


def run_experiment(
    manifest: CorpusManifest,
    config: ExperimentConfig,
    cache: FeatureCache | None = None,
    jobs: int = 1,
) -> ExperimentResult:
    folds = loco_folds(manifest)
    if cache is None:
        cache = FeatureCache(config.framing, config.bank)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda f: run_fold(f, manifest, config, cache), folds))
    else:
        results = [run_fold(f, manifest, config, cache) for f in folds]
    return ExperimentResult(tuple(results), enlargement_factor(config.policy))


def step_label(s: float) -> str:
    fr = Fraction(s).limit_denominator(1024)
    return str(fr)


def range_label(r: float) -> str:
    return f"{r:g}"


@dataclass
class SweepReport:
    """Error grid (rows S, columns R) for a fixed ``K`` and classifier."""

    symmetry: float
    classifier: str
    ranges: tuple[float, ...]
    steps: tuple[float, ...]
    config_hash: str
    cells: dict[tuple[float, float], dict] = field(default_factory=dict)  # (S, R) -> record

    def table(self, key: str) -> list[list[float | None]]:
        return [[self.cells.get((s, r), {}).get(key) for r in self.ranges] for s in self.steps]

    def write_csv(self, path: str | Path, key: str = "test_error") -> None:
        write_grid_csv(path, self.ranges, self.steps, self.table(key))


def write_grid_csv(path, ranges, steps, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["S\\R", *map(range_label, ranges)])
        for s, row in zip(steps, rows):
            w.writerow([step_label(s), *("" if v is None else (v if isinstance(v, int) else f"{v:.6f}") for v in row)])


def read_grid_csv(path) -> tuple[list[float], list[float], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ranges = [float(v) for v in rows[0][1:]]
    steps = [float(Fraction(r[0])) for r in rows[1:]]
    return ranges, steps, [r[1:] for r in rows[1:]]


def _cell_id(k: float, classifier: str, s: float, r: float, chash: str) -> str:
    return f"{chash}|{classifier}|K={k!r}|S={s!r}|R={r!r}"


def load_audit(path: str | Path) -> dict[str, dict]:
    """Completed sweep cells by id; a torn trailing line is ignored."""
    done = {}
    p = Path(path)
    if not p.exists():
        return done
    for line in p.read_text(encoding="utf-8").splitlines():
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            continue
        done[rec["cell"]] = rec
    return done


def run_sweep(
    manifest: CorpusManifest,
    ranges: Sequence[float] = TABLE_RANGES,
    steps: Sequence[float] = TABLE_STEPS,
    symmetries: Sequence[float] = (0.75,),
    classifiers: Sequence[str] = ("linear", "diagonal"),
    base: ExperimentConfig | None = None,
    cache: FeatureCache | None = None,
    audit_path: str | Path | None = None,
    jobs: int = 1,
) -> list[SweepReport]:
    """Run every ``(K, classifier, S, R)`` cell.

    Each finished cell is appended to ``audit_path`` (JSON lines with per-fold
    counts) right away; cells already present there are not recomputed.
    """
    if not ranges or not steps or not symmetries or not classifiers:
        raise ConfigError("sweep lists must be non-empty")
    base = base or ExperimentConfig()
    # validate every cell before any work
    for k, s, r in product(symmetries, steps, ranges):
        ShiftPolicy(r, s, k)
    for c in classifiers:
        replace(base, classifier=c)
    if cache is None:
        cache = FeatureCache(base.framing, base.bank)
    done = load_audit(audit_path) if audit_path else {}
    reports = []
    for k, clf in product(symmetries, classifiers):
        cfg_k = replace(base, classifier=clf, policy=ShiftPolicy(0.0, 1.0, k))
        chash = cfg_k.config_hash()
        rep = SweepReport(k, clf, tuple(ranges), tuple(steps), chash)
        for s, r in product(steps, ranges):
            cid = _cell_id(k, clf, s, r, chash)
            rec = done.get(cid)
            if rec is None:
                cfg = replace(cfg_k, policy=ShiftPolicy(r, s, k))
                res = run_experiment(manifest, cfg, cache, jobs)
                rec = {"cell": cid, "K": k, "classifier": clf, "S": s, "R": r, **res.to_dict()}
                if audit_path:
                    with Path(audit_path).open("a", encoding="utf-8") as fh:
                        fh.write(json.dumps(rec) + "\n")
                done[cid] = rec
                log.info("K=%g %s S=%s R=%g: test %.4f (EF %d)", k, clf, step_label(s), r, rec["test_error"],
                         rec["enlargement_factor"])
            rep.cells[(s, r)] = rec
        reports.append(rep)
    return reports


def reports_from_audit(
    audit_path: str | Path,
    ranges: Iterable[float] | None = None,
    steps: Iterable[float] | None = None,
) -> list[SweepReport]:
    """Rebuild reports from an audit file, grouping cells by (config, K, classifier)."""
    groups: dict[tuple[str, float, str], dict] = {}
    for rec in load_audit(audit_path).values():
        chash = rec["cell"].split("|", 1)[0]
        groups.setdefault((chash, rec["K"], rec["classifier"]), {})[(rec["S"], rec["R"])] = rec
    reports = []
    for (chash, k, clf), cells in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][0])):
        rs = tuple(ranges) if ranges is not None else tuple(sorted({r for _, r in cells}))
        ss = tuple(steps) if steps is not None else tuple(sorted({s for s, _ in cells}))
        reports.append(SweepReport(k, clf, rs, ss, chash, cells))
    return reports


def write_sweep_outputs(reports: Sequence[SweepReport], out_dir: str | Path) -> list[Path]:
    """One test-error CSV (plus a training-error CSV) per report and one EF CSV per K.

    The EF CSV is accompanied by a note listing the cells where the printed
    ceiling formula disagrees with the grid count.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    seen_k = set()
    for rep in reports:
        stem = f"{rep.classifier}_K{rep.symmetry:g}"
        rep.write_csv(out / f"test_error_{stem}.csv", "test_error")
        rep.write_csv(out / f"train_error_{stem}.csv", "train_error")
        written += [out / f"test_error_{stem}.csv", out / f"train_error_{stem}.csv"]
        if rep.symmetry not in seen_k:
            seen_k.add(rep.symmetry)
            written += write_ef_outputs(out, rep.ranges, rep.steps, rep.symmetry)
    return written


def write_ef_outputs(out_dir, ranges, steps, symmetry) -> list[Path]:
    out = Path(out_dir)
    ef_path = out / f"enlargement_factor_K{symmetry:g}.csv"
    rows = [[enlargement_factor(ShiftPolicy(r, s, symmetry)) for r in ranges] for s in steps]
    write_grid_csv(ef_path, ranges, steps, rows)
    note = out / f"enlargement_factor_K{symmetry:g}_ceiling_discrepancies.csv"
    with note.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["S", "R", "grid_count", "ceil_formula"])
        for s, r, a, b in ceiling_discrepancies(ranges, steps, symmetry):
            w.writerow([step_label(s), range_label(r), a, b])
    return [ef_path, note]
