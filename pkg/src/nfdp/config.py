"""Flat key=value run configuration with strict validation.

One ``key=value`` pair per line, UTF-8, ``#`` starts a comment. Unknown keys
and duplicate keys are errors (typo safety); every key has a default, so an
empty file is a valid run. The effective configuration (defaults applied and
derived values resolved) can be serialized back out and re-parsed to
reproduce the run byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .accounting import PrivacyBudget, SamplingScheme
from .datagen import LabelSpace, PartitionMode, PartitionPlan, PublicDistribution, SyntheticTask
from .federation import FederationConfig, LdpSettings, PrivacyMode, QueryRule
from .learner import KnowledgeMode


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"key '{key}': "
        super().__init__(prefix + message)


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {text!r}")


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError as err:
        raise ValueError(f"expected comma-separated ints, got {text!r}") from err
    if any(d < 1 for d in dims):
        raise ValueError("layer dims must be positive")
    return dims


def _parse_optional_float(text: str) -> float:
    return float(text)


@dataclass(frozen=True)
class SimulationConfig:
    parties: int = 5
    rounds: int = 20
    t1: int = 20
    t2: int = 2
    t3: int = 1
    k: int = 60
    sampling: str = "with"
    mode: str = "softmax"
    privacy: str = "nfdp"
    ldp_sigma: float | None = None
    ldp_epsilon: float | None = None
    ldp_delta: float | None = None
    ldp_c2: float = 1.0
    ldp_query_rule: str = "per_example"
    public_size: int = 1000
    public_pool: int = 2000
    public_shift: float = 0.0
    public_draw: str = "fresh"
    task_features: int = 20
    task_superclasses: int = 4
    task_subclasses: int = 3
    task_separation: float = 6.0
    task_noise: float = 1.0
    task_labels: str = "auto"
    partition: str = "shift"
    shift_strength: float = 1.0
    per_party_n: int = 300
    test_n: int = 1000
    lr_digest: float = 0.05
    lr_revisit: float = 0.05
    batch: int = 32
    layer_dims: tuple[int, ...] = (64,)
    warm_start: bool = False
    warm_size: int = 500
    charts: bool = False
    threads: int = 1
    seed: int = 0

    def resolved_labels(self) -> str:
        if self.task_labels != "auto":
            return self.task_labels
        return "superclass" if self.partition == "subclass" else "subclass"

    def task(self) -> SyntheticTask:
        return SyntheticTask(
            features=self.task_features,
            superclasses=self.task_superclasses,
            subclasses_per_super=self.task_subclasses,
            separation=self.task_separation,
            noise_sigma=self.task_noise,
            label_space=LabelSpace(self.resolved_labels()),
        )

    def plan(self) -> PartitionPlan:
        return PartitionPlan(
            parties=self.parties,
            mode=PartitionMode(self.partition),
            per_party_n=self.per_party_n,
            shift_strength=self.shift_strength,
        )

    def ldp_settings(self) -> LdpSettings | None:
        if self.privacy != "ldp":
            return None
        if self.ldp_sigma is not None:
            return LdpSettings(sigma=self.ldp_sigma, c2=self.ldp_c2, query_rule=QueryRule(self.ldp_query_rule))
        target = PrivacyBudget(self.ldp_epsilon, self.ldp_delta)
        return LdpSettings(target=target, c2=self.ldp_c2, query_rule=QueryRule(self.ldp_query_rule))

    def federation_config(self) -> FederationConfig:
        return FederationConfig(
            parties=self.parties,
            rounds=self.rounds,
            t1=self.t1,
            t2=self.t2,
            t3=self.t3,
            k=self.k,
            scheme=SamplingScheme.parse(self.sampling),
            knowledge_mode=KnowledgeMode(self.mode),
            public_subset_size=self.public_size,
            privacy=PrivacyMode(self.privacy),
            ldp=self.ldp_settings(),
            hidden_dims=self.layer_dims,
            lr_digest=self.lr_digest,
            lr_revisit=self.lr_revisit,
            batch_size=self.batch,
            warm_start=self.warm_start,
            warm_size=self.warm_size,
            public_draw_fixed=self.public_draw == "fixed",
            master_seed=self.seed,
            threads=self.threads,
        )

    def public_distribution(self) -> PublicDistribution:
        return PublicDistribution.SHIFTED if self.public_shift > 0 else PublicDistribution.MATCHED


_PARSERS = {
    "parties": int,
    "rounds": int,
    "t1": int,
    "t2": int,
    "t3": int,
    "k": int,
    "sampling": str,
    "mode": str,
    "privacy": str,
    "ldp_sigma": _parse_optional_float,
    "ldp_epsilon": _parse_optional_float,
    "ldp_delta": _parse_optional_float,
    "ldp_c2": float,
    "ldp_query_rule": str,
    "public_size": int,
    "public_pool": int,
    "public_shift": float,
    "public_draw": str,
    "task_features": int,
    "task_superclasses": int,
    "task_subclasses": int,
    "task_separation": float,
    "task_noise": float,
    "task_labels": str,
    "partition": str,
    "shift_strength": float,
    "per_party_n": int,
    "test_n": int,
    "lr_digest": float,
    "lr_revisit": float,
    "batch": int,
    "layer_dims": _parse_dims,
    "warm_start": _parse_bool,
    "warm_size": int,
    "charts": _parse_bool,
    "threads": int,
    "seed": int,
}

_CHOICES = {
    "sampling": {"with", "without"},
    "mode": {"logits", "softmax", "argmax"},
    "privacy": {"nfdp", "ldp", "none"},
    "ldp_query_rule": {"per_example", "per_class"},
    "public_draw": {"fresh", "fixed"},
    "task_labels": {"auto", "subclass", "superclass"},
    "partition": {"iid", "subclass", "shift"},
}


def parse_config_text(text: str) -> SimulationConfig:
    """Parse, apply defaults, and cross-validate a config document."""
    pairs: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key=value", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in pairs:
            raise ConfigError("duplicate key", line=lineno, key=key)
        pairs[key] = (lineno, value)

    values = {}
    for key, (lineno, raw_value) in pairs.items():
        try:
            value = _PARSERS[key](raw_value)
        except ValueError as err:
            raise ConfigError(str(err), line=lineno, key=key) from err
        if key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigError(
                f"must be one of {sorted(_CHOICES[key])}, got {value!r}", line=lineno, key=key
            )
        values[key] = value
    config = SimulationConfig(**values)
    return _validate(config, {k: line for k, (line, _) in pairs.items()})


def parse_config_file(path: str) -> SimulationConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err


def _validate(config: SimulationConfig, lines: dict[str, int]) -> SimulationConfig:
    def err(message: str, key: str) -> ConfigError:
        return ConfigError(message, line=lines.get(key), key=key)

    positive = ["parties", "t1", "t2", "t3", "k", "public_size", "public_pool", "per_party_n", "test_n", "batch", "threads", "warm_size"]
    for key in positive:
        value = getattr(config, key)
        minimum = 0 if key in ("t1", "t2", "t3") else 1
        if value < minimum:
            raise err(f"must be >= {minimum}, got {value}", key)
    if config.rounds < 0:
        raise err("must be >= 0", "rounds")
    if config.public_size > config.public_pool:
        raise err(
            f"public_size {config.public_size} exceeds public_pool {config.public_pool}", "public_size"
        )
    if config.privacy == "ldp":
        has_sigma = config.ldp_sigma is not None
        has_target = config.ldp_epsilon is not None or config.ldp_delta is not None
        if has_sigma and has_target:
            raise err("give either ldp_sigma or ldp_epsilon/ldp_delta, not both", "ldp_sigma")
        if not has_sigma:
            if config.ldp_epsilon is None or config.ldp_delta is None:
                raise err("ldp privacy needs ldp_sigma or both ldp_epsilon and ldp_delta", "privacy")
            if not (config.ldp_epsilon > 0):
                raise err("must be positive", "ldp_epsilon")
            if not (0 < config.ldp_delta < 1):
                raise err("must be in (0, 1)", "ldp_delta")
        if config.mode == "argmax":
            raise err("argmax payloads cannot be noised; use logits or softmax", "mode")
    elif config.ldp_sigma is not None or config.ldp_epsilon is not None or config.ldp_delta is not None:
        raise err("ldp_* keys require privacy=ldp", "privacy")
    if config.partition == "subclass":
        if config.parties > config.task_subclasses:
            raise err(
                f"subclass partition supports at most task_subclasses={config.task_subclasses} parties",
                "parties",
            )
        if config.task_labels == "subclass":
            raise err("subclass partition requires superclass labels", "task_labels")
    if config.privacy == "nfdp" and config.sampling == "without" and config.k > config.per_party_n:
        raise err(f"k must be <= per_party_n={config.per_party_n} for sampling without replacement", "k")
    # full-data privacy modes pin k to the whole private dataset
    if config.privacy in ("none", "ldp") and config.k != config.per_party_n:
        config = replace(config, k=config.per_party_n)
    if config.task_labels == "auto":
        config = replace(config, task_labels=config.resolved_labels())
    return config


def effective_text(config: SimulationConfig) -> str:
    """Serialize the resolved configuration; parsing it back is a fixed point."""
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{f.name}={rendered}")
    return "\n".join(lines) + "\n"
