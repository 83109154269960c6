"""Synthetic classification tasks with IID and non-IID party partitions.

Gaussian blobs stand in for the image benchmarks so experiments run in
seconds while keeping the structural distinctions that matter: subclasses
grouped under superclasses, IID vs one-subclass-per-party vs per-party
covariate shift, and a public pool whose distribution can match or drift
from the private data.

Geometry: superclass centers sit on orthogonal directions scaled by
``separation`` (pairwise distance separation*sqrt(2)); each subclass offsets
its superclass center by a random direction of norm separation/4, so means
of different superclasses stay at least separation/2 apart by construction.
Subclass means inside one superclass are distinct but deliberately close --
they are the confusable pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .rng import RngStream, derive_stream


class LabelSpace(Enum):
    SUBCLASS = "subclass"
    SUPERCLASS = "superclass"


class PartitionMode(Enum):
    IID = "iid"
    NON_IID_SUBCLASS = "subclass"
    NON_IID_SHIFT = "shift"


class PublicDistribution(Enum):
    MATCHED = "matched"
    SHIFTED = "shifted"


@dataclass(frozen=True)
class SyntheticTask:
    features: int
    superclasses: int
    subclasses_per_super: int
    separation: float
    noise_sigma: float
    label_space: LabelSpace = LabelSpace.SUBCLASS

    def __post_init__(self) -> None:
        if self.features < 2:
            raise ValueError("features must be >= 2")
        if self.superclasses < 2:
            raise ValueError("superclasses must be >= 2")
        if self.subclasses_per_super < 1:
            raise ValueError("subclasses_per_super must be >= 1")
        if self.separation <= 0 or self.noise_sigma <= 0:
            raise ValueError("separation and noise_sigma must be positive")

    @property
    def generative_classes(self) -> int:
        return self.superclasses * self.subclasses_per_super

    @property
    def emitted_classes(self) -> int:
        if self.label_space is LabelSpace.SUPERCLASS:
            return self.superclasses
        return self.generative_classes


@dataclass(frozen=True)
class PartitionPlan:
    parties: int
    mode: PartitionMode
    per_party_n: int
    shift_strength: float = 0.0

    def __post_init__(self) -> None:
        if self.parties < 1:
            raise ValueError("parties must be >= 1")
        if self.per_party_n < 1:
            raise ValueError("per_party_n must be >= 1")
        if self.shift_strength < 0:
            raise ValueError("shift_strength must be >= 0")


@dataclass(frozen=True)
class LabeledSet:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels must have matching row counts")

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class UnlabeledSet:
    inputs: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class TaskModel:
    """Class means plus noise spec: everything needed to draw samples."""

    task: SyntheticTask
    class_means: np.ndarray  # (superclasses * subclasses_per_super, features)

    def label_of(self, subclass_index: np.ndarray) -> np.ndarray:
        if self.task.label_space is LabelSpace.SUPERCLASS:
            return subclass_index // self.task.subclasses_per_super
        return subclass_index


def _unit_rows(stream: RngStream, count: int, dim: int) -> np.ndarray:
    rows = stream.normal_block(count * dim).reshape(count, dim)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate_task(task: SyntheticTask, stream: RngStream) -> TaskModel:
    """Place superclass centers and subclass offsets; deterministic in the stream."""
    g, m, d = task.superclasses, task.subclasses_per_super, task.features
    if g <= d:
        raw = stream.normal_block(d * g).reshape(d, g)
        q, r = np.linalg.qr(raw)
        directions = (q * np.sign(np.diag(r))).T  # canonical orthonormal columns
    else:
        # more superclasses than dimensions: fall back to rejection sampling
        for _ in range(200):
            directions = _unit_rows(stream, g, d)
            gaps = np.linalg.norm(directions[:, None, :] - directions[None, :, :], axis=2)
            np.fill_diagonal(gaps, np.inf)
            if gaps.min() >= 0.5:
                break
        else:
            raise ValueError(
                f"could not place {g} superclass centers at least separation/2 apart in {d} dims"
            )
    centers = directions * task.separation
    offsets = _unit_rows(stream, g * m, d).reshape(g, m, d) * (task.separation / 4.0)
    means = (centers[:, None, :] + offsets).reshape(g * m, d)
    return TaskModel(task=task, class_means=means)


def _draw_labeled(
    model: TaskModel, count: int, stream: RngStream, allowed_subclasses: np.ndarray
) -> LabeledSet:
    picks = stream.integers_block(count, len(allowed_subclasses))
    subclass = allowed_subclasses[picks]
    noise = stream.normal_block(count * model.task.features).reshape(count, -1)
    inputs = model.class_means[subclass] + model.task.noise_sigma * noise
    return LabeledSet(inputs=inputs, labels=model.label_of(subclass))


def _party_transform(
    stream: RngStream, dim: int, strength: float, separation: float
) -> tuple[np.ndarray, np.ndarray]:
    """Affine distortion x -> x @ A + b of magnitude ``strength`` (identity at 0)."""
    wiggle = stream.normal_block(dim * dim).reshape(dim, dim) / np.sqrt(dim)
    shift_dir = _unit_rows(stream, 1, dim)[0]
    a = np.eye(dim) + strength * wiggle
    b = strength * (separation / 4.0) * shift_dir
    return a, b


def draw_party_sets(
    model: TaskModel, plan: PartitionPlan, master_seed: int, test_n: int = 1000
) -> tuple[list[LabeledSet], LabeledSet]:
    """Per-party private training sets plus one shared test set.

    IID: every party draws from all subclasses. NON_IID_SUBCLASS: party i
    draws only from subclass i of each superclass (labels must be
    superclasses; the shared test still covers every subclass).
    NON_IID_SHIFT: IID draws pushed through a party-specific affine
    distortion; the shared test stays undistorted.
    """
    task = model.task
    g, m = task.superclasses, task.subclasses_per_super
    if plan.mode is PartitionMode.NON_IID_SUBCLASS:
        if plan.parties > m:
            raise ValueError(
                f"subclass partition supports at most {m} parties (one subclass per superclass), got {plan.parties}"
            )
        if task.label_space is not LabelSpace.SUPERCLASS:
            raise ValueError("subclass partition requires superclass labels")
    all_subclasses = np.arange(g * m)
    parties = []
    for party in range(plan.parties):
        stream = derive_stream(master_seed, ("party-data", party))
        if plan.mode is PartitionMode.NON_IID_SUBCLASS:
            allowed = np.arange(g) * m + party
        else:
            allowed = all_subclasses
        drawn = _draw_labeled(model, plan.per_party_n, stream, allowed)
        if plan.mode is PartitionMode.NON_IID_SHIFT:
            a, b = _party_transform(
                derive_stream(master_seed, ("party-shift", party)),
                task.features,
                plan.shift_strength,
                task.separation,
            )
            drawn = LabeledSet(inputs=drawn.inputs @ a + b, labels=drawn.labels)
        parties.append(drawn)
    test = _draw_labeled(model, test_n, derive_stream(master_seed, ("test-data",)), all_subclasses)
    return parties, test


def draw_public_pool(
    model: TaskModel,
    size: int,
    distribution: PublicDistribution,
    master_seed: int,
    shift_strength: float = 0.0,
) -> UnlabeledSet:
    """Unlabeled pool, either matched to the task or globally shifted."""
    if size < 1:
        raise ValueError("pool size must be >= 1")
    draw_stream = derive_stream(master_seed, ("public-pool",))
    labeled = _draw_labeled(model, size, draw_stream, np.arange(model.task.generative_classes))
    inputs = labeled.inputs
    if distribution is PublicDistribution.SHIFTED and shift_strength > 0.0:
        a, b = _party_transform(
            derive_stream(master_seed, ("public-pool-shift",)),
            model.task.features,
            shift_strength,
            model.task.separation,
        )
        inputs = inputs @ a + b
    return UnlabeledSet(inputs=inputs)


def draw_labeled_sample(
    model: TaskModel, size: int, master_seed: int, purpose: str = "warm-data"
) -> LabeledSet:
    """A labeled draw from the full generative model (all subclasses)."""
    stream = derive_stream(master_seed, (purpose,))
    return _draw_labeled(model, size, stream, np.arange(model.task.generative_classes))


def export_csv(path: str, inputs: np.ndarray, labels: np.ndarray | None = None) -> None:
    """Dataset as CSV with header f0..f{d-1}[,label]."""
    d = inputs.shape[1]
    header = ",".join(f"f{i}" for i in range(d))
    with open(path, "w", newline="\n") as fh:
        if labels is not None:
            fh.write(header + ",label\n")
            for row, label in zip(inputs, labels):
                fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(label)}\n")
        else:
            fh.write(header + "\n")
            for row in inputs:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def import_csv(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a dataset written by :func:`export_csv` (label column optional)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        has_labels = header[-1] == "label"
        d = len(header) - 1 if has_labels else len(header)
        expected = [f"f{i}" for i in range(d)] + (["label"] if has_labels else [])
        if header != expected:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows])
    if data.size == 0:
        data = data.reshape(0, len(header))
    if has_labels:
        return data[:, :d], data[:, d].astype(np.int64)
    return data, None
