#!/usr/bin/env python3
"""Score grasp trials and cross-check published score tables.

Prints the per-type grasping ability scores from a trials CSV and, when
a published-scores file is given, recomputes each published GAS from
its own components and flags rows that do not add up.
"""

from __future__ import annotations

import argparse

from ovgrasp.evaluation import (format_consistency_table, format_gas_table,
                                gas_report, load_published_gas,
                                read_trials_csv, verify_published_gas)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", default="fixtures/table1_trials.csv")
    parser.add_argument("--published", default="fixtures/published_gas.json")
    parser.add_argument("--tol", type=float, default=0.02)
    args = parser.parse_args()

    report = gas_report(read_trials_csv(args.trials))
    print(format_gas_table(report))
    if args.published:
        checks = verify_published_gas(load_published_gas(args.published),
                                      tol=args.tol)
        print()
        print(format_consistency_table(checks))
        bad = [c for c in checks if not c["consistent"]]
        print(f"\n{len(checks) - len(bad)} rows consistent, {len(bad)} flagged")


if __name__ == "__main__":
    main()
