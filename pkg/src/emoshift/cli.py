"""Command-line entry point: ``emoshift {ingest,run,sweep,synth,report}``.

Every parameter can come from a JSON config file (``--config``); command-line
flags override file values. Example config::

    {
      "corpus": "data/emodb/wav",
      "framing": {"frame_length": 512, "hop": 256, "window": "hamming"},
      "bank": {"filter_count": 26, "coefficient_count": 25},
      "policy": {"R": 4, "S": "1/4", "K": 0.75},
      "classifier": "linear",
      "ridge": 0.0,
      "sweep": {"ranges": [0, 0.5, 1, 2, 3, 4, 6, 8, 10, 12],
                "steps": ["1/32", "1/16", "1/8", "1/4", "1/2", 1, 2],
                "symmetries": [1, 0.75],
                "classifiers": ["linear", "diagonal"]},
      "out": "results", "cache": "cache", "jobs": 4
    }
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .augmentation import TABLE_RANGES, TABLE_STEPS, ShiftPolicy, ceiling_discrepancies, enlargement_factor, parse_step
from .corpus import CorpusManifest, load_manifest, write_manifest
from .errors import ConfigError, EmoShiftError
from .harness import (
    ExperimentConfig,
    FeatureCache,
    reports_from_audit,
    run_experiment,
    run_sweep,
    step_label,
    write_ef_outputs,
    write_sweep_outputs,
)
from .melcepstrum import BACKEND, MelBankConfig
from .spectral import FramingConfig
from .synth import SynthSpec, generate_corpus

log = logging.getLogger("emoshift")


@dataclass
class RunConfig:
    corpus: str | None = None
    framing: FramingConfig = field(default_factory=FramingConfig)
    bank: MelBankConfig = field(default_factory=MelBankConfig)
    policy: ShiftPolicy = field(default_factory=ShiftPolicy)
    classifier: str = "linear"
    ridge: float = 0.0
    ranges: tuple[float, ...] = TABLE_RANGES
    steps: tuple[float, ...] = TABLE_STEPS
    symmetries: tuple[float, ...] = (0.75,)
    classifiers: tuple[str, ...] = ("linear", "diagonal")
    out: str = "results"
    cache: str | None = None
    jobs: int = 1
    seed: int = 0

    def experiment(self, **overrides) -> ExperimentConfig:
        base = ExperimentConfig(self.policy, self.classifier, self.framing, self.bank, self.ridge, self.seed)
        return ExperimentConfig(**{**{f.name: getattr(base, f.name) for f in fields(base)}, **overrides})

    def validate(self) -> None:
        self.experiment()
        for c in self.classifiers:
            self.experiment(classifier=c)
        for k in self.symmetries:
            for s in self.steps:
                for r in self.ranges:
                    ShiftPolicy(r, s, k)
        if not (self.ranges and self.steps and self.symmetries and self.classifiers):
            raise ConfigError("sweep lists must be non-empty")
        _synth_spec(self.corpus)
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        out = Path(self.out)
        probe = out if out.exists() else next((p for p in out.parents if p.exists()), Path("."))
        if not os.access(probe, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")


def _synth_spec(corpus: str | None) -> SynthSpec | None:
    """``synth:M,F,C,N`` (speakers per gender, classes, clips per cell)."""
    if not corpus or not corpus.startswith("synth:"):
        return None
    try:
        return SynthSpec(*(int(v) for v in corpus[6:].split(",")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic corpus spec {corpus!r}: {exc}") from exc


def _num_list(values, conv=float) -> tuple:
    if isinstance(values, (str, int, float)):
        values = [v for v in str(values).split(",") if v.strip()]
    return tuple(conv(v) for v in values)


def _sub(cls, data: dict, base):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{**asdict(base), **data})


def _policy(data: dict, base: ShiftPolicy) -> ShiftPolicy:
    alias = {"R": "range", "S": "step", "K": "symmetry"}
    d = {alias.get(k, k): v for k, v in data.items()}
    if "step" in d:
        d["step"] = parse_step(d["step"])
    return _sub(ShiftPolicy, {k: float(v) for k, v in d.items()}, base)


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file first, then command-line overrides, then full validation."""
    cfg = RunConfig()
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    sweep = data.pop("sweep", {})
    framing = data.pop("framing", {})
    bank = data.pop("bank", {})
    policy = data.pop("policy", {})
    try:
        for key in ("corpus", "classifier", "out", "cache"):
            if key in data:
                setattr(cfg, key, data.pop(key))
        for key, conv in (("ridge", float), ("jobs", int), ("seed", int)):
            if key in data:
                setattr(cfg, key, conv(data.pop(key)))
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")

        for flag, key in (("window", "window"), ("hop", "hop"), ("frame_length", "frame_length")):
            if getattr(args, flag, None) is not None:
                framing[key] = getattr(args, flag)
        if getattr(args, "frame_length", None) is not None:
            bank["frame_length"] = args.frame_length
        elif "frame_length" in framing:
            bank.setdefault("frame_length", framing["frame_length"])
        for flag in ("filters", "coefficients", "shift_mode", "sample_rate"):
            if getattr(args, flag, None) is not None:
                key = {"filters": "filter_count", "coefficients": "coefficient_count"}.get(flag, flag)
                bank[key] = getattr(args, flag)
        for flag in ("R", "S", "K"):
            if getattr(args, flag, None) is not None:
                policy[flag] = getattr(args, flag)

        cfg.framing = _sub(FramingConfig, framing, cfg.framing)
        cfg.bank = _sub(MelBankConfig, bank, cfg.bank)
        cfg.policy = _policy(policy, cfg.policy)

        if "ranges" in sweep:
            cfg.ranges = _num_list(sweep["ranges"])
        if "steps" in sweep:
            cfg.steps = _num_list(sweep["steps"], parse_step)
        if "symmetries" in sweep:
            cfg.symmetries = _num_list(sweep["symmetries"])
        if "classifiers" in sweep:
            cfg.classifiers = _num_list(sweep["classifiers"], str)
        for flag, attr, conv in (("ranges", "ranges", float), ("steps", "steps", parse_step),
                                 ("symmetries", "symmetries", float), ("classifiers", "classifiers", str)):
            if getattr(args, flag, None):
                setattr(cfg, attr, _num_list(getattr(args, flag), conv))

        for flag in ("corpus", "classifier", "out", "cache", "ridge", "jobs", "seed"):
            if getattr(args, flag, None) is not None:
                setattr(cfg, flag, getattr(args, flag))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def _corpus(cfg: RunConfig) -> CorpusManifest:
    if not cfg.corpus:
        raise ConfigError("no corpus given (--corpus or 'corpus' in the config)")
    spec = _synth_spec(cfg.corpus)
    if spec is not None:
        listing = generate_corpus(spec, Path(cfg.out) / "synth_corpus", cfg.seed)
        return load_manifest(listing)
    return load_manifest(cfg.corpus)


def _cache(cfg: RunConfig) -> FeatureCache:
    return FeatureCache(cfg.framing, cfg.bank, cfg.cache)


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.root, require_couples=not args.allow_unbalanced)
    out = Path(args.out) if args.out else Path("corpus.manifest")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out)
    counts = manifest.counts()
    print(manifest.summary())
    print("per emotion: " + ", ".join(f"{k}={v}" for k, v in sorted(counts["emotion"].items())))
    print("per speaker: " + ", ".join(f"{k}={v}" for k, v in sorted(counts["speaker"].items())))
    for g, spk in manifest.speakers.items():
        print(f"{g}: {', '.join(spk)}")
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if manifest.rejected:
        print(f"{len(manifest.rejected)} file(s) rejected:", file=sys.stderr)
        for p, reason in manifest.rejected:
            print(f"  {p}: {reason}", file=sys.stderr)
    print(f"manifest written to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = build_config(args)
    exp = cfg.experiment()
    manifest = _corpus(cfg)
    result = run_experiment(manifest, exp, _cache(cfg), cfg.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.policy
    record = {
        "classifier": exp.classifier,
        "R": p.range, "S": p.step, "K": p.symmetry,
        "config_hash": exp.config_hash(),
        "framing": asdict(cfg.framing),
        "bank": asdict(cfg.bank),
        "backend": BACKEND,
        **result.to_dict(),
    }
    audit = out / f"run_{exp.config_hash()}_R{p.range:g}_S{step_label(p.step).replace('/', 'over')}.json"
    audit.write_text(json.dumps(record, indent=2), encoding="utf-8")
    print(f"classifier {exp.classifier}, R={p.range:g} S={step_label(p.step)} K={p.symmetry:g}")
    print(f"enlargement factor: {result.enlargement_factor}")
    print(f"test error: {result.test_error:.4f} (fold-macro {result.test_error_macro:.4f}, {len(result.folds)} folds)")
    print(f"train error (augmented set): {result.train_error:.4f}")
    print(f"audit record: {audit}")
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    manifest = _corpus(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    audit = out / "sweep_audit.jsonl"
    reports = run_sweep(
        manifest, cfg.ranges, cfg.steps, cfg.symmetries, cfg.classifiers,
        base=cfg.experiment(), cache=_cache(cfg), audit_path=audit, jobs=cfg.jobs,
    )
    written = write_sweep_outputs(reports, out)
    for rep in reports:
        best = min(rep.cells.values(), key=lambda r: r["test_error"])
        print(f"{rep.classifier} K={rep.symmetry:g}: best test error "
              f"{best['test_error']:.4f} at R={best['R']:g} S={step_label(best['S'])} (EF {best['enlargement_factor']})")
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(args.males, args.females, args.classes, args.clips, args.sample_rate, args.duration)
    listing = generate_corpus(spec, args.out, args.seed)
    n = spec.clips_per_cell * spec.classes * (spec.males + spec.females)
    print(f"{n} clips written to {Path(args.out)}; listing {listing}")
    return 0


def cmd_report(args) -> int:
    audit = Path(args.audit)
    if audit.is_dir():
        audit = audit / "sweep_audit.jsonl"
    if not audit.exists():
        raise ConfigError(f"no audit file at {audit}")
    reports = reports_from_audit(audit)
    out = Path(args.out) if args.out else audit.parent
    written = write_sweep_outputs(reports, out)
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_ef(args) -> int:
    """Print the enlargement-factor table and where the ceiling formula disagrees."""
    ranges = _num_list(args.ranges) if args.ranges else TABLE_RANGES
    steps = _num_list(args.steps, parse_step) if args.steps else TABLE_STEPS
    print("S\\R," + ",".join(f"{r:g}" for r in ranges))
    for s in steps:
        print(step_label(s) + "," + ",".join(str(enlargement_factor(ShiftPolicy(r, s, args.K))) for r in ranges))
    bad = ceiling_discrepancies(ranges, steps, args.K)
    print(f"# ceil(R(1+K)/S)+1 disagrees with the grid count in {len(bad)} cells:", file=sys.stderr)
    for s, r, a, b in bad:
        print(f"#   S={step_label(s)} R={r:g}: grid {a}, ceiling formula {b}", file=sys.stderr)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        for p in write_ef_outputs(args.out, ranges, steps, args.K):
            print(f"wrote {p}", file=sys.stderr)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--corpus", help="WAV directory, listing CSV, .manifest file, or synth:M,F,C,N")
    p.add_argument("--out", help="output directory")
    p.add_argument("--cache", help="feature cache directory")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--classifier", choices=["linear", "diagonal", "quadratic", "full"])
    p.add_argument("--ridge", type=float)
    p.add_argument("--window", choices=["rectangular", "hamming", "hann"])
    p.add_argument("--hop", type=int)
    p.add_argument("--frame-length", dest="frame_length", type=int)
    p.add_argument("--filters", type=int)
    p.add_argument("--coefficients", type=int)
    p.add_argument("--shift-mode", dest="shift_mode", choices=["pitch", "filter"])
    p.add_argument("--sample-rate", dest="sample_rate", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoshift", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a corpus and write a manifest")
    p.add_argument("root", help="WAV directory or listing CSV")
    p.add_argument("--out", help="manifest path (default corpus.manifest)")
    p.add_argument("--allow-unbalanced", action="store_true", help="accept fewer than 2 speakers per gender")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="one leave-one-couple-out experiment")
    _add_common(p)
    p.add_argument("-R", type=float, help="shift range (semitones)")
    p.add_argument("-S", type=str, help="shift step (semitones, e.g. 1/4)")
    p.add_argument("-K", type=float, help="symmetry factor")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="(R, S, K, classifier) sweep with CSV tables")
    _add_common(p)
    p.add_argument("--ranges", help="comma-separated R values")
    p.add_argument("--steps", help="comma-separated S values (fractions allowed)")
    p.add_argument("--symmetries", help="comma-separated K values")
    p.add_argument("--classifiers", help="comma-separated classifier names")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--males", type=int, default=2)
    p.add_argument("--females", type=int, default=2)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--clips", type=int, default=10, help="clips per (speaker, class)")
    p.add_argument("--sample-rate", dest="sample_rate", type=int, default=16000)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render CSV tables from a sweep audit file")
    p.add_argument("audit", help="sweep_audit.jsonl or the directory holding it")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ef", help="print the enlargement-factor table")
    p.add_argument("-K", type=float, default=0.75)
    p.add_argument("--ranges")
    p.add_argument("--steps")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ef)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"emoshift: {exc}", file=sys.stderr)
        return 2
    except EmoShiftError as exc:
        print(f"emoshift: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
