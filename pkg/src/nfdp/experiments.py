"""Canned experiment setups shared by the scripts and the acceptance suite.

The "standard task" is the non-IID benchmark every comparative experiment
runs on: 12 Gaussian subclasses (4 superclasses x 3) in 20 dimensions,
5 parties with per-party covariate shift, 300 private examples each, soft
label distillation over a matched public pool for 20 rounds. Chance level
is 1/12.

The no-collaboration control matches total training effort: rounds=0 with
the collaboration epochs folded into local training (t1 + R*(t2+t3)).
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .accounting import budget_with_replacement, calibrate_gaussian_sigma
from .config import SimulationConfig
from .federation import SimulationResult, run_simulation

FIGURE_QUERY_COUNT = 100_000
FIGURE_SUBSET_K = 3
FIGURE_TOTALS = {"femnist": 28_800, "cifar": 3_000}


def standard_config(k: int = 60, seed: int = 0, **overrides) -> SimulationConfig:
    base = SimulationConfig(
        parties=5,
        rounds=20,
        t1=20,
        t2=2,
        t3=1,
        k=k,
        sampling="with",
        mode="softmax",
        privacy="nfdp",
        public_size=1000,
        public_pool=2000,
        partition="shift",
        shift_strength=1.0,
        per_party_n=300,
        test_n=1000,
        task_features=20,
        task_superclasses=4,
        task_subclasses=3,
        task_separation=6.0,
        task_noise=1.0,
        layer_dims=(64,),
        lr_digest=0.05,
        lr_revisit=0.05,
        batch=32,
        seed=seed,
    )
    return replace(base, **overrides) if overrides else base


def control_config(base: SimulationConfig) -> SimulationConfig:
    """Local-only twin of ``base`` with the same total training effort."""
    extra = base.rounds * (base.t2 + base.t3)
    return replace(base, rounds=0, t1=base.t1 + extra)


def run_config(config: SimulationConfig) -> SimulationResult:
    return run_simulation(
        config.federation_config(),
        config.task(),
        config.plan(),
        pool_size=config.public_pool,
        public_distribution=config.public_distribution(),
        public_shift=config.public_shift,
        test_n=config.test_n,
    )


def mean_final_accuracy(result: SimulationResult) -> float:
    return float(np.mean(result.final_accuracy))


def chance_level(config: SimulationConfig) -> float:
    return 1.0 / config.task().emitted_classes


def collaboration_gap(k: int = 60, seeds: tuple[int, ...] = (0, 1, 2)) -> tuple[float, float]:
    """Seed-averaged (collaboration, control) final accuracy at subset size k."""
    collab = np.mean([mean_final_accuracy(run_config(standard_config(k=k, seed=s))) for s in seeds])
    control = np.mean(
        [mean_final_accuracy(run_config(control_config(standard_config(k=k, seed=s)))) for s in seeds]
    )
    return float(collab), float(control)


def k_sweep(ks: tuple[int, ...] = (16, 60, 300), seeds: tuple[int, ...] = (0, 1, 2)) -> dict[int, float]:
    return {
        k: float(np.mean([mean_final_accuracy(run_config(standard_config(k=k, seed=s))) for s in seeds]))
        for k in ks
    }


def scheme_parity(k: int = 60, seeds: tuple[int, ...] = (0, 1, 2)) -> tuple[float, float]:
    with_mean = np.mean(
        [mean_final_accuracy(run_config(standard_config(k=k, seed=s, sampling="with"))) for s in seeds]
    )
    without_mean = np.mean(
        [mean_final_accuracy(run_config(standard_config(k=k, seed=s, sampling="without"))) for s in seeds]
    )
    return float(with_mean), float(without_mean)


def sigma_band_points() -> list[tuple[str, int, int, float, float]]:
    """(dataset, parties, per-party n, sigma, log10 sigma) over the 2..10 party range."""
    points = []
    for name, total in FIGURE_TOTALS.items():
        for parties in range(2, 11):
            n = total // parties
            budget = budget_with_replacement(n, FIGURE_SUBSET_K)
            sigma = calibrate_gaussian_sigma(budget, FIGURE_QUERY_COUNT, 1.0)
            points.append((name, parties, n, sigma, math.log10(sigma)))
    return points


def ldp_run_config(seed: int = 0, sigma: float | None = None) -> SimulationConfig:
    """The perturbation-baseline run on the standard task.

    Raw logit payloads (the original distillation payload) plus noise at the
    calibrated scale; the digest rate is lowered so fitting the enormous
    noised targets stays numerically stable instead of overflowing -- the
    model is still destroyed, which is the point.
    """
    if sigma is None:
        budget = budget_with_replacement(300, FIGURE_SUBSET_K)
        sigma = calibrate_gaussian_sigma(budget, FIGURE_QUERY_COUNT, 1.0)
    return standard_config(
        seed=seed,
        mode="logits",
        privacy="ldp",
        ldp_sigma=sigma,
        lr_digest=1e-4,
    )


def ldp_noise_floor(seeds: tuple[int, ...] = (0, 1, 2)) -> tuple[float, float]:
    """Seed-averaged final accuracy under calibrated noise, plus chance level."""
    accs = [mean_final_accuracy(run_config(ldp_run_config(seed=s))) for s in seeds]
    return float(np.mean(accs)), chance_level(standard_config())
