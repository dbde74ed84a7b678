"""Single-stream detection on the three simulated scenarios plus ARL and delay estimates.

Runs the Gaussian and Poisson LFL detectors on the lfl / random / ipid
bundles and prints the stop time of each, then estimates the ARL and
the worst-case delay by Monte Carlo.
"""

import argparse
import math

from robustqcd.datagen import gen_single, single_stream_bundle
from robustqcd.detector import RobustNsState, ThresholdSchedule, run_detector
from robustqcd.laws import PostChangeLaw, PreChangeLaw, derive_lfl, interval_class
from robustqcd.montecarlo import DetectorSpec, McConfig, estimate_arl, worst_case_delay

CLASSES = {
    "gaussian": interval_class("gaussian", (0, 1), (2, 3)),
    "poisson": interval_class("poisson", (0.4, 0.5), (1, 1.1)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nu", type=int, default=23)
    ap.add_argument("--horizon", type=int, default=100)
    ap.add_argument("--alpha", type=float, default=1 / 150)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    a = math.log(1 / args.alpha)

    for family, cls in CLASSES.items():
        lfl = derive_lfl(cls)
        print(f"== {family}: LFL {lfl}, A = {a:.3f}")
        for name, spec in single_stream_bundle(family, args.nu, args.horizon, args.seed).items():
            ev = run_detector(gen_single(spec), RobustNsState(lfl, ThresholdSchedule.constant(a)))
            print(f"  {name:7s} nu={args.nu} stop={ev.stop_time}")
        det = DetectorSpec(lfl, ThresholdSchedule.constant(a))
        cfg = McConfig(trials=args.trials, seed=args.seed)
        pre = PreChangeLaw.constant(lfl.pre.densities[0])
        post = PostChangeLaw.constant(lfl.post.densities[0])
        print("  " + estimate_arl(det, pre, cfg).to_record())
        worst, _ = worst_case_delay(det, pre, post, cfg)
        print("  " + worst.to_record())


if __name__ == "__main__":
    main()
