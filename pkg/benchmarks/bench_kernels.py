"""Compiled vs NumPy feature kernels on a typical clip.

    python benchmarks/bench_kernels.py [--frames 120] [--repeat 5]

Times the multi-shift feature extraction (one spectrogram, many filter-bank
scalings) for a few grid sizes and prints the speedup and the largest
absolute difference between the two backends.
"""

import argparse
import timeit

import numpy as np

from emoshift import melcepstrum as mc
from emoshift.augmentation import ShiftPolicy, shift_grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--frames", type=int, default=120, help="frames per clip (about 2 s at hop 256)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    cfg = mc.MelBankConfig()
    rng = np.random.default_rng(0)
    power = rng.gamma(1.0, 1.0, size=(args.frames, cfg.frame_length // 2 + 1)) ** 2
    centers = mc.center_bins(cfg)
    have_c = mc._shifted_features_c is not None
    print(f"compiled kernels available: {have_c}")

    print(f"{'grid':>22} {'shifts':>6} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max diff':>9}")
    for r, s in ((0, 1), (2, 0.5), (4, 1 / 4), (4, 1 / 16)):
        shifts = shift_grid(ShiftPolicy(r, s, 0.75), "male").shifts
        scales = np.array([cfg.scale_for(p) for p in shifts])

        def run(backend):
            mc.use_backend(backend)
            return mc.shifted_features(power, centers, scales, cfg.coefficient_count, cfg.delta_shift, cfg.log_floor)

        t_py = min(timeit.repeat(lambda: run("python"), number=1, repeat=args.repeat))
        ref = run("python")
        if have_c:
            t_c = min(timeit.repeat(lambda: run("cython"), number=1, repeat=args.repeat))
            diff = float(np.abs(run("cython") - ref).max())
            c_ms, speed, dtxt = f"{t_c * 1e3:10.2f}", f"{t_py / t_c:7.1f}x", f"{diff:9.1e}"
        else:
            c_ms, speed, dtxt = f"{'-':>10}", f"{'-':>8}", f"{'-':>9}"
        label = f"R={r:g} S={s:g}"
        print(f"{label:>22} {len(shifts):6d} {t_py * 1e3:10.2f} {c_ms} {speed} {dtxt}")
    mc.use_backend("cython" if have_c else "python")


if __name__ == "__main__":
    main()
