#!/usr/bin/env python3
"""Play a scripted scenario and print a short report.

Equivalent to `ovgrasp run` plus a per-command timeline, handy when
tuning scenario geometry.
"""

from __future__ import annotations

import argparse

from ovgrasp.evaluation import scenario_metrics
from ovgrasp.sim import load_scenario, run_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", help="scenario JSON file")
    parser.add_argument("--out", default=None, help="write trace files here")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--distance-space", choices=("mixed", "metric"), default=None)
    args = parser.parse_args()

    trace = run_scenario(load_scenario(args.scenario), seed=args.seed,
                         distance_space=args.distance_space)
    print(f"{trace.name}: {trace.outcome}")
    for fr in trace.frames:
        if fr.command is not None:
            print(f"  t={fr.t:5.1f}  {fr.command}  target={fr.target_label}"
                  f"  nearest_gt={fr.gt_nearest_label}  closure={fr.closure:.3f}")
    print(f"metrics: {scenario_metrics(trace)}")
    if args.out:
        trace.write(args.out)
        print(f"trace written to {args.out}")


if __name__ == "__main__":
    main()
