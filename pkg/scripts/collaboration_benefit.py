#!/usr/bin/env python3
"""Collaboration vs matched local-only control on the standard task,
plus the subset-size sweep. Takes a couple of minutes."""

import argparse

from nfdp.experiments import collaboration_gap, k_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--k", type=int, default=60)
    args = parser.parse_args()

    collab, control = collaboration_gap(k=args.k, seeds=tuple(args.seeds))
    print(f"k={args.k}  collaboration: {collab:.4f}  local-only control: {control:.4f}")
    print(f"gap: {100 * (collab - control):+.1f} points")

    sweep = k_sweep(seeds=tuple(args.seeds))
    print("\nsubset-size sweep (seed-averaged mean final accuracy):")
    for k, acc in sorted(sweep.items()):
        print(f"  k={k:>4}: {acc:.4f}")


if __name__ == "__main__":
    main()
