"""Experiment configuration: a versioned YAML file validated into an immutable dataclass."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .phy import LINK_KINDS, LinkModel, PhyParams
from .tessellation import RHO_CONVENTIONS

CONFIG_SCHEMA_VERSION = 1
POLICIES = ("pi1", "pi2")
ROUTINGS = ("straight", "arbitrary")
LAMBDA_MODES = ("lemma4-cap", "fixed", "load")
PI2_ONLY = ("r_form", "beta_n")
LINK_KEYS = ("kind", "kappa", "p_fixed", "retransmissions", "beta")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = f"{source or '<config>'}:{line}: " if line else (f"{source}: " if source else "")
        super().__init__(where + message)


@dataclass(frozen=True)
class ExperimentConfig:
    n_grid: tuple = (1024,)
    policy: str = "pi1"
    routing: str = "straight"
    alpha: float = 4.0
    link: dict = field(default_factory=lambda: {"kind": "continuous", "kappa": 1.0, "p_fixed": 1.0,
                                                "retransmissions": 0, "beta": 10.0})
    replications: int = 1
    connections: int = 2000
    seed: int = 0
    lambda_mode: str = "lemma4-cap"
    lambda_fixed: float | None = None
    bandwidth_w: float = 1.0
    c5: float = 1.0
    epsilon: float = 0.05
    rho_convention: str = "standard"
    rho_coef: float | None = None
    pi1_range_mult: float = 12.0
    r_form: str = "proof"
    beta_n: float | None = None
    noise: float = 0.0
    power: float = 1.0
    max_rejections: int = 10_000
    min_cells: int = 8
    greed: float = 0.5
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    # ---------------------------------------------------------- validation

    def __post_init__(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        grid = tuple(int(v) for v in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            bad("n_grid", "must list at least one node count")
        if any(v < 3 for v in grid):
            bad("n_grid", "node counts must be at least 3")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            bad("n_grid", "must be strictly ascending")
        if self.policy not in POLICIES:
            bad("policy", f"must be one of {POLICIES}")
        if self.routing not in ROUTINGS:
            bad("routing", f"must be one of {ROUTINGS}")
        if self.replications < 1:
            bad("replications", "must be >= 1")
        if self.connections < 1:
            bad("connections", "must be >= 1")
        if self.lambda_mode not in LAMBDA_MODES:
            bad("lambda_mode", f"must be one of {LAMBDA_MODES}")
        if self.lambda_mode == "fixed" and not (self.lambda_fixed and self.lambda_fixed > 0):
            bad("lambda_fixed", "a positive rate is required when lambda_mode is 'fixed'")
        if self.lambda_mode != "fixed" and self.lambda_fixed is not None:
            bad("lambda_fixed", "only valid when lambda_mode is 'fixed'")
        if not 0 < self.epsilon < 1:
            bad("epsilon", "must lie in (0, 1)")
        if self.rho_convention not in RHO_CONVENTIONS and self.rho_coef is None:
            bad("rho_convention", f"must be one of {tuple(RHO_CONVENTIONS)} unless rho_coef is given")
        if self.rho_coef is not None and not self.rho_coef > 0:
            bad("rho_coef", "must be positive")
        if self.r_form not in ("proof", "printed"):
            bad("r_form", "must be 'proof' or 'printed'")
        if self.max_rejections < 1:
            bad("max_rejections", "must be >= 1")
        if not 0 < self.greed <= 1:
            bad("greed", "must lie in (0, 1]")
        for key in PI2_ONLY:
            if self.policy != "pi2" and key in self.explicit:
                bad(key, "only valid with policy 'pi2'")
        link = dict(LinkModel().__dict__)
        unknown = set(self.link) - set(LINK_KEYS)
        if unknown:
            bad("link", f"unknown key(s) {sorted(unknown)}")
        link.update(self.link)
        if link["kind"] not in LINK_KINDS:
            bad("link.kind", f"must be one of {LINK_KINDS}")
        object.__setattr__(self, "link", link)
        try:
            self.link_model()
            self.phy_params()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    # ---------------------------------------------------------- derived objects

    def link_model(self) -> LinkModel:
        return LinkModel(**self.link)

    def phy_params(self) -> PhyParams:
        return PhyParams(alpha=self.alpha, power_p=self.power, noise_n=self.noise,
                         beta_threshold=self.link["beta"])

    @property
    def coef(self) -> float:
        return self.rho_coef if self.rho_coef is not None else RHO_CONVENTIONS[self.rho_convention]

    def rho_n(self, n: float) -> float:
        return self.coef * math.sqrt(math.log(n))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "explicit"}
        d["n_grid"] = list(self.n_grid)
        d["schema_version"] = CONFIG_SCHEMA_VERSION
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "link" in kw:
            kw["link"] = {**self.link, **kw["link"]}
        d = self.to_dict()
        d.pop("schema_version")
        d.update(kw)
        return ExperimentConfig(**d, explicit=self.explicit | frozenset(kw))

    # ---------------------------------------------------------- parsing

    @classmethod
    def from_mapping(cls, doc: dict, lines: dict | None = None, source: str | None = None) -> "ExperimentConfig":
        lines = lines or {}
        if not isinstance(doc, dict):
            raise ConfigError("top level must be a mapping", 1, source)
        version = doc.get("schema_version")
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}",
                              lines.get("schema_version", 1), source)
        names = {f.name for f in dataclasses.fields(cls)} - {"explicit"}
        kw = {}
        for key, value in doc.items():
            if key == "schema_version":
                continue
            if key not in names:
                raise ConfigError(f"unknown key {key!r}", lines.get(key), source)
            kw[key] = value
        try:
            return cls(**kw, explicit=frozenset(kw))
        except ConfigError as e:
            key = str(e).split(":", 1)[0]
            raise ConfigError(str(e), lines.get(key.split(".")[0]), source) from None
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), None, source) from None

    @classmethod
    def from_yaml_text(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        try:
            node = yaml.compose(text)
            doc = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}",
                              mark.line + 1 if mark else None, source) from None
        lines = {}
        if isinstance(node, yaml.MappingNode):
            for k, _ in node.value:
                lines[k.value] = k.start_mark.line + 1
        return cls.from_mapping(doc if doc is not None else {}, lines, source)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_yaml_text(path.read_text(), str(path))

    def to_yaml(self) -> str:
        d = self.to_dict()
        if self.policy != "pi2":
            for key in PI2_ONLY:
                d.pop(key)
        return yaml.safe_dump({"schema_version": d.pop("schema_version"), **d}, sort_keys=False)
