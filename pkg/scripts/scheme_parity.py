#!/usr/bin/env python3
"""Utility comparison of the two sampling schemes at equal subset size.

The with-replacement budget is strictly smaller (see `nfdp audit`), so any
utility parity here is a free privacy win.
"""

import argparse

from nfdp.accounting import budget_with_replacement, budget_without_replacement
from nfdp.experiments import scheme_parity


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--k", type=int, default=60)
    parser.add_argument("--n", type=int, default=300)
    args = parser.parse_args()

    w, wo = scheme_parity(k=args.k, seeds=tuple(args.seeds))
    print(f"with replacement:    {w:.4f}")
    print(f"without replacement: {wo:.4f}")
    print(f"difference: {100 * abs(w - wo):.2f} points")

    bw = budget_with_replacement(args.n, args.k)
    bwo = budget_without_replacement(args.n, args.k)
    print(f"\nbudgets at n={args.n}, k={args.k}:")
    print(f"  with:    eps={bw.epsilon_nat:.6f} delta={bw.delta:.6f}")
    print(f"  without: eps={bwo.epsilon_nat:.6f} delta={bwo.delta:.6f}")


if __name__ == "__main__":
    main()
