"""Experiment configuration files (YAML) and their validation."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

import yaml

from .ensembles import MCMCConfig, ModelSpec
from .potential import Potential, PotentialError
from .sao import SAOConfig

KINDS = ("edge_universality", "field_clt", "tw_reference", "bound_checks", "equilibrium_tables")


class ConfigError(ValueError):
    """Invalid experiment file; ``problems`` lists (field path, message) pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


@dataclass
class ModelConfig:
    potential: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.25])
    beta: float = 2.0
    n: int = 200

    def spec(self) -> ModelSpec:
        return ModelSpec(Potential(tuple(self.potential)), float(self.beta), int(self.n))


@dataclass
class ChecksConfig:
    """Tolerances for pass/fail; None disables a check."""

    ks_max: float | None = None
    mean_tol: float | None = None
    rel_tol: float | None = 0.05
    min_ess: float = 50.0


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    output: str = "out"
    samples: int = 1000
    model: ModelConfig = field(default_factory=ModelConfig)
    sao: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    options: dict = field(default_factory=dict)

    def sao_config(self) -> SAOConfig:
        kw = dict(self.sao)
        kw.setdefault("beta", self.model.beta)
        kw.setdefault("seed", self.seed + 1)
        return SAOConfig(**kw)

    def mcmc_config(self) -> MCMCConfig:
        kw = dict(self.mcmc)
        kw.setdefault("seed", self.seed)
        return MCMCConfig(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _take(raw: dict, cls, path: str, problems: list):
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            problems.append((f"{path}.{key}" if path else key, "unknown field"))
    return {k: v for k, v in raw.items() if k in known}


def parse_config(raw) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed YAML mapping."""
    problems: list[tuple[str, str]] = []
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "expected a mapping")])
    for key in ("kind", "seed"):
        if key not in raw:
            problems.append((key, "missing"))
    if problems:
        raise ConfigError(problems)
    top = _take(raw, ExperimentConfig, "", problems)
    if top["kind"] not in KINDS:
        problems.append(("kind", f"unknown experiment kind {top['kind']!r}; expected one of {', '.join(KINDS)}"))
    if not isinstance(top["seed"], int) or isinstance(top["seed"], bool) or top["seed"] < 0:
        problems.append(("seed", "must be a nonnegative integer"))
    model = ModelConfig(**_take(top.pop("model", {}) or {}, ModelConfig, "model", problems))
    checks = ChecksConfig(**_take(top.pop("checks", {}) or {}, ChecksConfig, "checks", problems))
    model.beta = math.inf if str(model.beta).lower() in ("inf", "infinity") else model.beta
    try:
        model.spec()
    except (PotentialError, ValueError, TypeError) as exc:
        problems.append(("model", str(exc)))
    cfg = None
    try:
        cfg = ExperimentConfig(model=model, checks=checks, **top)
    except TypeError as exc:
        problems.append(("<root>", str(exc)))
    if cfg is not None:
        if not isinstance(cfg.samples, int) or cfg.samples < 1:
            problems.append(("samples", "must be a positive integer"))
        for name, build in (("sao", cfg.sao_config), ("mcmc", cfg.mcmc_config)):
            try:
                build()
            except (TypeError, ValueError) as exc:
                problems.append((name, str(exc)))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([("<file>", f"not valid YAML: {exc}")]) from exc
    return parse_config(raw)
