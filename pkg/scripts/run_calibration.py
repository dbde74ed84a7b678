"""Calibrate the threshold to a target ARL and compare with the log(target) rule."""

import argparse
import math

from robustqcd.detector import ThresholdSchedule
from robustqcd.laws import Density, PreChangeLaw, constant_lfl
from robustqcd.montecarlo import DetectorSpec, McConfig, calibrate_threshold, estimate_arl
from robustqcd.multistream import enumerate_subsets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=150.0)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--M", type=int, default=1)
    ap.add_argument("--K", type=int, default=1)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    lfl = constant_lfl(Density.gaussian(1.0), Density.gaussian(2.0))
    ss = enumerate_subsets(args.M, args.K) if args.M > 1 else None
    spec = DetectorSpec(lfl, ThresholdSchedule.constant(1.0), ss)
    pre = PreChangeLaw.constant(Density.gaussian(1.0))
    cfg = McConfig(trials=args.trials, seed=args.seed)
    cal = calibrate_threshold(spec, pre, args.target, cfg)
    print(f"calibrated A = {cal.threshold:.4f} after {cal.iterations} steps: {cal.estimate.to_record()}")
    rule = math.log(args.target * (len(ss) if ss else 1))
    print(f"log rule A = {rule:.4f}: {estimate_arl(spec.with_threshold(rule), pre, cfg).to_record()}")


if __name__ == "__main__":
    main()
