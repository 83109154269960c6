"""The collaboration engine: initialization plus R rounds of
predict -> aggregate -> digest -> revisit.

Privacy modes:

* NFDP        -- each party trains only on a subset sampled once from its
                 private data; nothing is ever noised. The subset is selected
                 before any training and reused verbatim in every round.
* FED_LDP     -- parties train on their full private data but perturb every
                 shared prediction with Gaussian noise (calibrated from a
                 target budget or given directly).
* NON_PRIVATE -- full data, no noise; the utility upper baseline.

Round indexing is deliberately staggered: round t digests the consensus
built on public subset t while issuing predictions on subset t+1, which the
next round digests. All randomness flows through streams derived from
(master seed, purpose, party, round), so party updates may run serially or
on a thread pool with bit-identical results.

Private data sits behind an access-guarded view that records every row it
hands out; tests assert that an NFDP run touches no private row outside the
selected subset.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .accounting import (
    PrivacyBudget,
    SamplingScheme,
    calibrate_gaussian_sigma,
)
from .datagen import (
    LabeledSet,
    PartitionPlan,
    PublicDistribution,
    SyntheticTask,
    UnlabeledSet,
    draw_party_sets,
    draw_public_pool,
    generate_task,
)
from .learner import (
    DIGEST_LOSS_FOR_MODE,
    Batch,
    KnowledgeMode,
    LossKind,
    MlpModel,
    TrainingDivergedError,
    TrainSpec,
    accuracy,
    init_model,
    predict_knowledge,
    train,
)
from .oracle import theorem_budget
from .rng import derive_stream
from .sampling import SubsetSelection, sample_subset, sample_without_replacement


class PrivacyMode(Enum):
    NFDP = "nfdp"
    FED_LDP = "ldp"
    NON_PRIVATE = "none"


class QueryRule(Enum):
    PER_EXAMPLE = "per_example"  # T = public_size * rounds
    PER_CLASS = "per_class"  # T = public_size * classes * rounds


@dataclass(frozen=True)
class LdpSettings:
    """Either a noise scale directly, or a target budget to calibrate one."""

    sigma: float | None = None
    target: PrivacyBudget | None = None
    c2: float = 1.0
    query_rule: QueryRule = QueryRule.PER_EXAMPLE

    def __post_init__(self) -> None:
        if (self.sigma is None) == (self.target is None):
            raise ValueError("give exactly one of sigma or a target budget")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("ldp sigma must be positive")
        if self.c2 <= 0:
            raise ValueError("c2 must be positive")


@dataclass(frozen=True)
class FederationConfig:
    parties: int
    rounds: int
    t1: int
    t2: int
    t3: int
    k: int
    scheme: SamplingScheme
    knowledge_mode: KnowledgeMode
    public_subset_size: int
    privacy: PrivacyMode = PrivacyMode.NFDP
    ldp: LdpSettings | None = None
    hidden_dims: tuple[int, ...] = (32,)
    lr_digest: float = 0.05
    lr_revisit: float = 0.05
    batch_size: int = 32
    warm_start: bool = False
    warm_size: int = 500
    public_draw_fixed: bool = False
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.parties < 1:
            raise ValueError("parties must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if min(self.t1, self.t2, self.t3) < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.public_subset_size < 1:
            raise ValueError("public_subset_size must be >= 1")
        if self.privacy is PrivacyMode.FED_LDP:
            if self.ldp is None:
                raise ValueError("FED_LDP requires ldp settings")
            if self.knowledge_mode is KnowledgeMode.ARGMAX:
                raise ValueError("Gaussian perturbation needs a continuous payload; argmax mode is rejected")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class Knowledge:
    """Per-public-example payload: logit rows, probability rows, or labels."""

    mode: KnowledgeMode
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.mode is KnowledgeMode.ARGMAX:
            if self.values.ndim != 1 or not np.issubdtype(self.values.dtype, np.integer):
                raise ValueError("argmax knowledge must be an integer label vector")
        else:
            if self.values.ndim != 2:
                raise ValueError("logits/softmax knowledge must be a (examples, classes) matrix")
            if self.mode is KnowledgeMode.SOFTMAX:
                if np.any(self.values < 0) or np.any(np.abs(self.values.sum(axis=1) - 1.0) > 1e-9):
                    raise ValueError("softmax knowledge rows must be distributions")

    def __len__(self) -> int:
        return len(self.values)


class GuardedPrivateData:
    """A party's private arrays; every row handed out is recorded."""

    def __init__(self, data: LabeledSet):
        self._inputs = data.inputs
        self._labels = data.labels
        self._touched: set[int] = set()

    def __len__(self) -> int:
        return len(self._inputs)

    def take(self, indices: tuple[int, ...]) -> LabeledSet:
        self._touched.update(int(i) for i in indices)
        rows = np.fromiter(indices, dtype=np.int64, count=len(indices))
        return LabeledSet(inputs=self._inputs[rows], labels=self._labels[rows])

    @property
    def touched(self) -> frozenset[int]:
        return frozenset(self._touched)


def _selection_digest(selection: SubsetSelection) -> str:
    payload = ",".join(str(i) for i in selection.indices).encode()
    return hashlib.sha256(payload).hexdigest()


@dataclass
class PartyState:
    party_id: int
    model: MlpModel
    selection: SubsetSelection
    guard: GuardedPrivateData
    private_batch: Batch
    selection_hash: str = field(default="")

    def __post_init__(self) -> None:
        if not self.selection_hash:
            self.selection_hash = _selection_digest(self.selection)

    def assert_selection_fixed(self) -> None:
        if _selection_digest(self.selection) != self.selection_hash:
            raise RuntimeError(f"party {self.party_id}: private subset changed between rounds")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    public_indices: tuple[int, ...]
    pre_digest_accuracy: tuple[float, ...]
    post_revisit_accuracy: tuple[float, ...]
    consensus_entropy: float
    train_loss: tuple[float, ...]

    def __post_init__(self) -> None:
        for acc in (*self.pre_digest_accuracy, *self.post_revisit_accuracy):
            if not (0.0 <= acc <= 1.0):
                raise ValueError(f"accuracy out of range: {acc}")


@dataclass(frozen=True)
class InitResult:
    states: list[PartyState]
    public_indices: tuple[int, ...]
    consensus: Knowledge
    accuracy: tuple[float, ...]
    train_loss: tuple[float, ...]


@dataclass(frozen=True)
class SimulationResult:
    init: InitResult
    records: list[RoundRecord]
    party_budgets: tuple[PrivacyBudget, ...]
    final_accuracy: tuple[float, ...]
    party_n: int
    k: int
    scheme: SamplingScheme
    privacy: PrivacyMode
    ldp_sigma: float | None


def aggregate(knowledges: list[Knowledge], mode: KnowledgeMode) -> Knowledge:
    """Equal-weight consensus: elementwise mean for logits/softmax, majority
    vote (ties to the lowest class) for argmax.

    Continuous payloads are summed in sorted order per slot, so the consensus
    is exactly invariant under party permutation.
    """
    if not knowledges:
        raise ValueError("nothing to aggregate")
    if any(k.mode is not mode for k in knowledges):
        raise ValueError("knowledge mode mismatch")
    lengths = {len(k) for k in knowledges}
    if len(lengths) != 1:
        raise ValueError("knowledge lists must have equal length")
    if mode is KnowledgeMode.ARGMAX:
        votes = np.stack([k.values for k in knowledges])  # (parties, examples)
        classes = int(votes.max()) + 1
        counts = np.zeros((votes.shape[1], classes), dtype=np.int64)
        for row in votes:
            counts[np.arange(votes.shape[1]), row] += 1
        return Knowledge(mode=mode, values=np.argmax(counts, axis=1))
    stacked = np.stack([k.values for k in knowledges])
    consensus = np.sort(stacked, axis=0).sum(axis=0) / len(knowledges)
    return Knowledge(mode=mode, values=consensus)


def apply_ldp_noise(knowledge: Knowledge, sigma: float, stream) -> Knowledge:
    """Party-side Gaussian perturbation of a continuous payload.

    Softmax rows are clamped at zero and renormalized afterwards (a row
    driven entirely negative falls back to uniform).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if knowledge.mode is KnowledgeMode.ARGMAX:
        raise ValueError("cannot add Gaussian noise to hard labels")
    noise = stream.normal_block(knowledge.values.size).reshape(knowledge.values.shape)
    noised = knowledge.values + sigma * noise
    if knowledge.mode is KnowledgeMode.SOFTMAX:
        noised = np.maximum(noised, 0.0)
        sums = noised.sum(axis=1, keepdims=True)
        dead = sums[:, 0] == 0.0
        noised[dead] = 1.0 / noised.shape[1]
        sums[dead] = 1.0
        noised = noised / sums
    return Knowledge(mode=knowledge.mode, values=noised)


def consensus_entropy(consensus: Knowledge, knowledges: list[Knowledge]) -> float:
    """Mean per-example entropy (nats) of the aggregate."""
    if consensus.mode is KnowledgeMode.ARGMAX:
        votes = np.stack([k.values for k in knowledges])
        classes = int(votes.max()) + 1
        shares = np.zeros((votes.shape[1], classes))
        for row in votes:
            shares[np.arange(votes.shape[1]), row] += 1.0
        p = shares / votes.shape[0]
    elif consensus.mode is KnowledgeMode.SOFTMAX:
        p = consensus.values
    else:
        from .learner import softmax

        p = softmax(consensus.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return float(terms.sum(axis=1).mean())


def _digest_batch(inputs: np.ndarray, consensus: Knowledge) -> Batch:
    loss = DIGEST_LOSS_FOR_MODE[consensus.mode]
    return Batch(inputs=inputs, targets=consensus.values, kind=loss)


def _resolve_sigma(config: FederationConfig, classes: int) -> float | None:
    if config.privacy is not PrivacyMode.FED_LDP:
        return None
    assert config.ldp is not None
    if config.ldp.sigma is not None:
        return config.ldp.sigma
    rounds = max(config.rounds, 1)
    queries = config.public_subset_size * rounds
    if config.ldp.query_rule is QueryRule.PER_CLASS:
        queries *= classes
    return calibrate_gaussian_sigma(config.ldp.target, queries, config.ldp.c2)


def _draw_public_subset(config: FederationConfig, pool_size: int, index: int) -> tuple[int, ...]:
    if config.public_subset_size > pool_size:
        raise ValueError(
            f"public subset size {config.public_subset_size} exceeds pool size {pool_size}"
        )
    label_index = 0 if config.public_draw_fixed else index
    stream = derive_stream(config.master_seed, ("public-subset", label_index))
    return sample_without_replacement(stream, pool_size, config.public_subset_size).indices


def _map_parties(config: FederationConfig, fn, states):
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, states))
    return [fn(s) for s in states]


def run_initialization(
    config: FederationConfig,
    party_data: list[LabeledSet],
    pool: UnlabeledSet,
    classes: int,
    sigma: float | None,
    warm_data: Batch | None = None,
) -> InitResult:
    """Select subsets, train each party locally, and build the first consensus.

    Every party starts from the same initial model (identical stream label);
    with ``warm_start`` that shared model is first fit on ``warm_data``, a
    labeled draw from the public distribution (pretrained-model stand-in).
    """
    if len(party_data) != config.parties:
        raise ValueError("one private dataset per party required")
    features = pool.inputs.shape[1]
    dims = (features, *config.hidden_dims, classes)
    shared = init_model(dims, derive_stream(config.master_seed, ("model-init",)))
    if config.warm_start:
        if warm_data is None:
            raise ValueError("warm_start requires labeled warm-start data")
        spec = TrainSpec(config.lr_revisit, config.batch_size, max(config.t1, 1), LossKind.HARD_CROSS_ENTROPY)
        shared, _ = train(shared, warm_data, spec, derive_stream(config.master_seed, ("warm-train",)))

    def setup(party: int) -> tuple[PartyState, float]:
        data = party_data[party]
        n = len(data)
        if config.privacy is PrivacyMode.NFDP:
            stream = derive_stream(config.master_seed, ("select", party))
            selection = sample_subset(stream, n, config.k, config.scheme)
        else:
            # full-data modes: the "selection" covers every index
            selection = SubsetSelection(
                indices=tuple(range(n)),
                scheme=config.scheme,
                seed_path=(config.master_seed, ("select", party)),
            )
        guard = GuardedPrivateData(data)
        subset = guard.take(selection.indices)
        if len(subset) == 0 and config.t1 > 0:
            raise ValueError(f"party {party}: empty private subset with t1 > 0")
        batch = Batch(subset.inputs, subset.labels, LossKind.HARD_CROSS_ENTROPY)
        model = shared.copy()
        last_loss = math.nan
        if config.t1 > 0:
            spec = TrainSpec(config.lr_revisit, config.batch_size, config.t1, LossKind.HARD_CROSS_ENTROPY)
            try:
                model, losses = train(model, batch, spec, derive_stream(config.master_seed, ("t1", party)))
            except TrainingDivergedError as err:
                raise TrainingDivergedError(f"party {party}, initialization: {err}") from err
            last_loss = losses[-1]
        state = PartyState(
            party_id=party,
            model=model,
            selection=selection,
            guard=guard,
            private_batch=batch,
        )
        return state, last_loss

    setup_results = _map_parties(config, setup, range(config.parties))
    states = [r[0] for r in setup_results]
    t1_losses = tuple(r[1] for r in setup_results)
    indices = _draw_public_subset(config, len(pool), 0)
    subset_inputs = pool.inputs[np.asarray(indices)]

    def first_knowledge(state: PartyState) -> Knowledge:
        payload = predict_knowledge(state.model, subset_inputs, config.knowledge_mode)
        knowledge = Knowledge(mode=config.knowledge_mode, values=payload)
        if sigma is not None:
            noise_stream = derive_stream(config.master_seed, ("ldp-noise", state.party_id, 0))
            knowledge = apply_ldp_noise(knowledge, sigma, noise_stream)
        return knowledge

    knowledges = _map_parties(config, first_knowledge, states)
    consensus = aggregate(knowledges, config.knowledge_mode)
    return InitResult(
        states=states,
        public_indices=indices,
        consensus=consensus,
        accuracy=(),
        train_loss=t1_losses,
    )


def run_round(
    t: int,
    states: list[PartyState],
    consensus: Knowledge,
    public_indices: tuple[int, ...],
    pool: UnlabeledSet,
    config: FederationConfig,
    test_set: LabeledSet,
    sigma: float | None,
) -> tuple[list[PartyState], Knowledge, tuple[int, ...], RoundRecord]:
    """One collaboration round; returns new states, next consensus, next subset."""
    if config.rounds and t >= config.rounds:
        raise ValueError(f"round {t} out of range for {config.rounds} rounds")
    digest_inputs = pool.inputs[np.asarray(public_indices)]
    next_indices = _draw_public_subset(config, len(pool), t + 1)
    next_inputs = pool.inputs[np.asarray(next_indices)]

    def update(state: PartyState) -> tuple[PartyState, Knowledge, float, float, float]:
        state.assert_selection_fixed()
        pre_acc = accuracy(state.model, test_set.inputs, test_set.labels)
        model = state.model
        losses: list[float] = []
        try:
            if config.t2 > 0:
                spec = TrainSpec(config.lr_digest, config.batch_size, config.t2, DIGEST_LOSS_FOR_MODE[config.knowledge_mode])
                model, digest_losses = train(
                    model,
                    _digest_batch(digest_inputs, consensus),
                    spec,
                    derive_stream(config.master_seed, ("digest", state.party_id, t)),
                )
                losses.extend(digest_losses)
            if config.t3 > 0:
                spec = TrainSpec(config.lr_revisit, config.batch_size, config.t3, LossKind.HARD_CROSS_ENTROPY)
                model, revisit_losses = train(
                    model,
                    state.private_batch,
                    spec,
                    derive_stream(config.master_seed, ("revisit", state.party_id, t)),
                )
                losses.extend(revisit_losses)
        except TrainingDivergedError as err:
            raise TrainingDivergedError(f"party {state.party_id}, round {t}: {err}") from err
        payload = predict_knowledge(model, next_inputs, config.knowledge_mode)
        knowledge = Knowledge(mode=config.knowledge_mode, values=payload)
        if sigma is not None:
            noise_stream = derive_stream(config.master_seed, ("ldp-noise", state.party_id, t + 1))
            knowledge = apply_ldp_noise(knowledge, sigma, noise_stream)
        post_acc = accuracy(model, test_set.inputs, test_set.labels)
        new_state = PartyState(
            party_id=state.party_id,
            model=model,
            selection=state.selection,
            guard=state.guard,
            private_batch=state.private_batch,
            selection_hash=state.selection_hash,
        )
        mean_loss = float(np.mean(losses)) if losses else math.nan
        return new_state, knowledge, pre_acc, post_acc, mean_loss

    results = _map_parties(config, update, states)
    new_states = [r[0] for r in results]
    knowledges = [r[1] for r in results]
    next_consensus = aggregate(knowledges, config.knowledge_mode)
    record = RoundRecord(
        round_index=t,
        public_indices=public_indices,
        pre_digest_accuracy=tuple(r[2] for r in results),
        post_revisit_accuracy=tuple(r[3] for r in results),
        consensus_entropy=consensus_entropy(next_consensus, knowledges),
        train_loss=tuple(r[4] for r in results),
    )
    return new_states, next_consensus, next_indices, record


def party_budget(config: FederationConfig, party_n: int) -> PrivacyBudget:
    if config.privacy is PrivacyMode.NFDP:
        return theorem_budget(party_n, config.k, config.scheme)
    if config.privacy is PrivacyMode.FED_LDP and config.ldp is not None and config.ldp.target is not None:
        return config.ldp.target
    # no certified guarantee to report
    return PrivacyBudget(math.inf, 1.0)


def run_simulation(
    config: FederationConfig,
    task: SyntheticTask,
    plan: PartitionPlan,
    pool_size: int = 2000,
    public_distribution: PublicDistribution = PublicDistribution.MATCHED,
    public_shift: float = 0.0,
    test_n: int = 1000,
) -> SimulationResult:
    """Full deterministic run: data, initialization, R rounds, summary."""
    if plan.parties != config.parties:
        raise ValueError("plan and config disagree on the number of parties")
    if config.privacy is PrivacyMode.NFDP and config.scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        if config.k > plan.per_party_n:
            raise ValueError(f"k={config.k} exceeds per-party dataset size {plan.per_party_n}")
    effective = config
    if config.privacy is not PrivacyMode.NFDP and config.k != plan.per_party_n:
        # full-data modes pin the subset to the whole dataset
        effective = _replace_k(config, plan.per_party_n)
    model = generate_task(task, derive_stream(config.master_seed, ("task",)))
    party_sets, test_set = draw_party_sets(model, plan, config.master_seed, test_n=test_n)
    pool = draw_public_pool(
        model, pool_size, public_distribution, config.master_seed, shift_strength=public_shift
    )
    classes = task.emitted_classes
    sigma = _resolve_sigma(effective, classes)
    warm_data = None
    if effective.warm_start:
        from .datagen import draw_labeled_sample

        warm = draw_labeled_sample(model, effective.warm_size, effective.master_seed)
        warm_data = Batch(warm.inputs, warm.labels, LossKind.HARD_CROSS_ENTROPY)
    init = _run_initialization_full(effective, party_sets, pool, test_set, classes, sigma, warm_data)
    states = init.states
    consensus = init.consensus
    indices = init.public_indices
    records: list[RoundRecord] = []
    for t in range(effective.rounds):
        states, consensus, indices, record = run_round(
            t, states, consensus, indices, pool, effective, test_set, sigma
        )
        records.append(record)
    final = records[-1].post_revisit_accuracy if records else init.accuracy
    budgets = tuple(party_budget(effective, len(party_sets[p])) for p in range(effective.parties))
    return SimulationResult(
        init=init,
        records=records,
        party_budgets=budgets,
        final_accuracy=final,
        party_n=plan.per_party_n,
        k=effective.k,
        scheme=effective.scheme,
        privacy=effective.privacy,
        ldp_sigma=sigma,
    )


def _replace_k(config: FederationConfig, k: int) -> FederationConfig:
    from dataclasses import replace

    return replace(config, k=k)


def _run_initialization_full(
    config: FederationConfig,
    party_data: list[LabeledSet],
    pool: UnlabeledSet,
    test_set: LabeledSet,
    classes: int,
    sigma: float | None,
    warm_data: Batch | None = None,
) -> InitResult:
    base = run_initialization(config, party_data, pool, classes, sigma, warm_data)
    accs = tuple(accuracy(s.model, test_set.inputs, test_set.labels) for s in base.states)
    return InitResult(
        states=base.states,
        public_indices=base.public_indices,
        consensus=base.consensus,
        accuracy=accs,
        train_loss=base.train_loss,
    )
