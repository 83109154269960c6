"""Central-finite-difference oracle for the learner's analytic gradients.

Perturbs every parameter coordinate of randomly drawn (model, batch, loss)
triples and compares (f(x+h) - f(x-h)) / 2h against backprop. Relative error
uses max(1, |analytic|, |numeric|) in the denominator so dead units with
zero gradient do not produce spurious ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learner import Batch, LossKind, MlpModel, init_model, loss_and_grad, softmax
from .rng import derive_stream


@dataclass(frozen=True)
class WorstCoordinate:
    trial: int
    loss: LossKind
    layer: int
    which: str  # "weight" | "bias"
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass(frozen=True)
class GradCheckReport:
    trials: int
    tolerance: float
    max_rel_error: float
    worst: WorstCoordinate

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def central_difference_grads(
    model: MlpModel, batch: Batch, loss: LossKind, h: float = 1e-5
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    def loss_at() -> float:
        return loss_and_grad(model, batch, loss)[0]

    grads_w = []
    grads_b = []
    for params, grads in ((model.weights, grads_w), (model.biases, grads_b)):
        for p in params:
            g = np.zeros_like(p)
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + h
                up = loss_at()
                p[idx] = orig - h
                down = loss_at()
                p[idx] = orig
                g[idx] = (up - down) / (2.0 * h)
            grads.append(g)
    return grads_w, grads_b


def _random_trial(seed: int, trial: int) -> tuple[MlpModel, Batch, LossKind]:
    stream = derive_stream(seed, ("gradcheck", trial))
    d_in = 2 + stream.randbelow(5)
    classes = 2 + stream.randbelow(4)
    hidden = [3 + stream.randbelow(6) for _ in range(stream.randbelow(3))]
    dims = (d_in, *hidden, classes)
    model = init_model(dims, stream)
    # Check a generic parameter point: fresh zero biases can pin deep
    # pre-activations exactly on the rectifier kink (an all-dead previous
    # layer feeds 0), where subgradients and central differences
    # legitimately disagree.
    for bias in model.biases:
        bias += 0.1 * stream.normal_block(bias.size)
    b = 1 + stream.randbelow(8)
    inputs = stream.normal_block(b * d_in).reshape(b, d_in) * 1.5
    loss = list(LossKind)[trial % 3]
    if loss is LossKind.HARD_CROSS_ENTROPY:
        targets = stream.integers_block(b, classes)
    elif loss is LossKind.SOFT_CROSS_ENTROPY:
        targets = softmax(stream.normal_block(b * classes).reshape(b, classes))
    else:
        targets = stream.normal_block(b * classes).reshape(b, classes)
    return model, Batch(inputs, targets, loss), loss


def run_gradcheck(trials: int = 100, tolerance: float = 1e-6, seed: int = 0) -> GradCheckReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    max_rel = -1.0
    worst = None
    for trial in range(trials):
        model, batch, loss = _random_trial(seed, trial)
        _, (aw, ab) = loss_and_grad(model, batch, loss)
        nw, nb = central_difference_grads(model, batch, loss)
        for which, analytic, numeric in (("weight", aw, nw), ("bias", ab, nb)):
            for layer, (a, n) in enumerate(zip(analytic, numeric)):
                denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
                rel = np.abs(a - n) / denom
                idx = np.unravel_index(np.argmax(rel), rel.shape)
                if rel[idx] > max_rel:
                    max_rel = float(rel[idx])
                    worst = WorstCoordinate(
                        trial=trial,
                        loss=loss,
                        layer=layer,
                        which=which,
                        index=tuple(int(i) for i in idx),
                        analytic=float(a[idx]),
                        numeric=float(n[idx]),
                        rel_error=float(rel[idx]),
                    )
    assert worst is not None
    return GradCheckReport(trials=trials, tolerance=tolerance, max_rel_error=max_rel, worst=worst)
