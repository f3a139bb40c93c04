#!/usr/bin/env python3
"""Synthetic anomaly-detection grid: AUC across train/test contamination levels.

Trains one model per training-contamination level on logs from the bundled
shipping process and evaluates it against test sets with varying anomaly
fractions, printing an AUC table.  Desk-scale defaults finish in a couple of
minutes; raise --train-traces for tighter numbers.
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from edbn import default_shipping_model, generate, inject_anomalies, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-traces", type=int, default=5000)
    parser.add_argument("--test-traces", type=int, default=1000)
    parser.add_argument("--train-fractions", default="0.0,0.005,0.01,0.025")
    parser.add_argument("--test-fractions", default="0.001,0.005,0.01,0.025,0.05,0.10")
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--fd-threshold", type=float, default=0.99)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--out", default=None, help="optional CSV path for the grid")
    args = parser.parse_args()

    train_fracs = [float(f) for f in args.train_fractions.split(",")]
    test_fracs = [float(f) for f in args.test_fractions.split(",")]

    process = default_shipping_model()
    clean_train = generate(process, args.train_traces, seed=args.seed)
    test_base = generate(process, args.test_traces, seed=args.seed + 1)

    header = ["train\\test"] + [f"{f:g}" for f in test_fracs]
    rows = []
    for train_frac in train_fracs:
        train = (
            clean_train
            if train_frac == 0.0
            else inject_anomalies(clean_train, train_frac, seed=args.seed + 2).log
        )
        row = [f"{train_frac:g}"]
        for test_frac in test_fracs:
            labeled = inject_anomalies(test_base, test_frac, seed=args.seed + 3)
            started = time.perf_counter()
            report = run_experiment(train, labeled, args.k, args.fd_threshold)
            row.append(f"{report.auc:.3f}")
            print(
                f"train {train_frac:g} / test {test_frac:g}: "
                f"AUC={report.auc:.4f} ({time.perf_counter() - started:.1f}s)",
                flush=True,
            )
        rows.append(row)

    width = max(len(c) for r in [header] + rows for c in r) + 2
    print()
    for row in [header] + rows:
        print("".join(c.rjust(width) for c in row))

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row in [header] + rows:
                fh.write(",".join(row) + "\n")
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
