#!/usr/bin/env python3
"""Budget tables for the benchmark-sized populations: epsilon in log10
units with natural delta, for a row of subset sizes per population."""

from nfdp.accounting import budget_with_replacement


def main():
    for name, n, ks in (("femnist", 2880, (16, 60, 300, 2880)), ("cifar", 300, (16, 60, 120, 300))):
        print(f"{name} (n={n}, sampling with replacement)")
        print(f"{'k':>6} {'eps_log10':>10} {'delta':>8}")
        for k in ks:
            b = budget_with_replacement(n, k)
            print(f"{k:>6} {b.epsilon_log10:>10.4f} {b.delta:>8.4f}")
        print()


if __name__ == "__main__":
    main()
