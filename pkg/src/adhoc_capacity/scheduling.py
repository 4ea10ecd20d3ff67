"""TDMA schedules from greedy colourings of cell conflict graphs.

pi1 colours the graph joining cells within a fixed multiple of rho_n, so its length does
not grow with n. pi2 joins cells within the exclusion radius R_n, which keeps every
receiver's SINR above beta_n = ln n under saturated same-slot transmission.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .sphere import GeometryDomainError
from .tessellation import Tessellation

SCHEMA_VERSION = 1
R_FORMS = ("proof", "printed")


@dataclass(frozen=True)
class ScheduleParams:
    pi1_range_mult: float = 12.0
    c1: float | None = None

    def __post_init__(self):
        if self.pi1_range_mult < 0:
            raise ValueError("pi1_range_mult must be non-negative")


@dataclass(frozen=True, eq=False)
class Schedule:
    policy: str
    color_of: np.ndarray
    exclusion_radius: float
    fallback: bool = False
    params: dict = field(default_factory=dict)

    @property
    def num_colors(self) -> int:
        return int(self.color_of.max()) + 1 if self.color_of.size else 0

    @property
    def c1(self) -> int:
        """Operational colour-budget constant: measured K - 1."""
        return self.num_colors - 1

    def color_classes(self) -> tuple[np.ndarray, np.ndarray]:
        return self._classes

    @cached_property
    def _classes(self):
        cells = np.argsort(self.color_of, kind="stable").astype(np.int64)
        ptr = np.zeros(self.num_colors + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.color_of, minlength=self.num_colors), out=ptr[1:])
        return ptr, cells

    def recolored(self, cell: int, color: int) -> "Schedule":
        c = self.color_of.copy()
        c[cell] = color
        return Schedule(self.policy, c, self.exclusion_radius, self.fallback, dict(self.params))

    def to_dict(self) -> dict:
        return {"schema": "adhoc_capacity.schedule", "version": SCHEMA_VERSION, "policy": self.policy,
                "color_of": self.color_of.tolist(), "num_colors": self.num_colors,
                "exclusion_radius": self.exclusion_radius, "fallback": self.fallback, "params": self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        if d.get("schema") != "adhoc_capacity.schedule" or d.get("version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 schedule document")
        s = cls(d["policy"], np.array(d["color_of"], dtype=np.int64), float(d["exclusion_radius"]),
                bool(d["fallback"]), dict(d["params"]))
        if s.num_colors != d["num_colors"]:
            raise ValueError("num_colors does not match the colour map")
        return s


# -------------------------------------------------------------- formulas

def _check(n: float, alpha: float) -> None:
    if not alpha > 2:
        raise GeometryDomainError("alpha must exceed 2")
    if not n > 1:
        raise GeometryDomainError("n must exceed 1 so that ln n > 0")


def exclusion_factor(n: float, alpha: float, beta_n: float | None = None, form: str = "proof") -> float:
    """1 + 4 (256 beta_n / (alpha - 2))^(1/(alpha - 2)); the printed form drops the leading 1."""
    _check(n, alpha)
    if form not in R_FORMS:
        raise ValueError(f"form must be one of {R_FORMS}")
    beta = math.log(n) if beta_n is None else beta_n
    core = 4.0 * (256.0 * beta / (alpha - 2.0)) ** (1.0 / (alpha - 2.0))
    return 1.0 + core if form == "proof" else core


def exclusion_radius(n: float, alpha: float, rho_n: float | None = None, beta_n: float | None = None,
                     form: str = "proof") -> float:
    """R_n = 2 rho_n (1 + 4 (256 beta_n / (alpha - 2))^(1/(alpha - 2))), rho_n = 10 sqrt(ln n) by default."""
    rho = 10.0 * math.sqrt(math.log(n)) if rho_n is None else rho_n
    return 2.0 * rho * exclusion_factor(n, alpha, beta_n, form)


def max_degree_bound(n: float, alpha: float, beta_n: float | None = None, form: str = "proof") -> float:
    """V_n = 8 (1 + 4 (256 ln n / (alpha - 2))^(1/(alpha - 2)))^2."""
    x = exclusion_factor(n, alpha, beta_n, form)
    return 8.0 * x * x


def required_sinr(n: float) -> float:
    if not n > 1:
        raise GeometryDomainError("n must exceed 1 so that ln n > 0")
    return math.log(n)


def worst_case_interference_bound(R: float, alpha: float, P: float, rho_n: float) -> float:
    """Saturated interference from cells beyond R, each of area >= pi rho_n^2 / 2 and one transmitter."""
    if not alpha > 2:
        raise GeometryDomainError("alpha must exceed 2 for the interference integral to converge")
    if not R > 0:
        raise GeometryDomainError("R must be positive")
    return 4.0 * P * R ** (2.0 - alpha) / (rho_n ** 2 * (alpha - 2.0))


# -------------------------------------------------------------- colouring

def greedy_coloring(n_vertices: int, edges: np.ndarray) -> np.ndarray:
    """Greedy colouring by descending degree, ties by vertex id; uses at most max-degree + 1 colours."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    both = np.concatenate([edges, edges[:, ::-1]])
    both = both[np.argsort(both[:, 0], kind="stable")]
    deg = np.bincount(both[:, 0], minlength=n_vertices)
    ptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.cumsum(deg, out=ptr[1:])
    nbr = both[:, 1]
    order = np.lexsort((np.arange(n_vertices), -deg))
    color = np.full(n_vertices, -1, dtype=np.int64)
    for v in order:
        used = color[nbr[ptr[v]:ptr[v + 1]]]
        used = used[used >= 0]
        if used.size == 0:
            color[v] = 0
            continue
        taken = np.zeros(used.size + 1, dtype=bool)
        taken[used[used <= used.size]] = True
        color[v] = int(np.argmin(taken))
    return color


def conflict_degrees(t: Tessellation, d: float) -> np.ndarray:
    p = t.pairs_within(d)
    return np.bincount(p.ravel(), minlength=t.n_cells)


def _build(t: Tessellation, policy: str, d: float, params: dict) -> Schedule:
    if d >= t.sp.half_circumference:
        color = np.arange(t.n_cells, dtype=np.int64)
        fallback = True
    else:
        color = greedy_coloring(t.n_cells, t.pairs_within(d))
        fallback = False
    color.setflags(write=False)
    return Schedule(policy, color, float(d), fallback, params)


def build_pi1(t: Tessellation, sp: ScheduleParams = ScheduleParams()) -> Schedule:
    d = sp.pi1_range_mult * t.rho_n
    s = _build(t, "pi1", d, {"pi1_range_mult": sp.pi1_range_mult})
    if sp.c1 is not None and s.num_colors > 1 + sp.c1:
        raise ValueError(f"pi1 needs {s.num_colors} colours, above the configured budget 1 + c1 = {1 + sp.c1}")
    return s


def build_pi2(t: Tessellation, n: float, alpha: float, beta_n: float | None = None,
              form: str = "proof") -> Schedule:
    R = exclusion_radius(n, alpha, t.rho_n, beta_n, form)
    return _build(t, "pi2", R, {"alpha": alpha, "beta_n": math.log(n) if beta_n is None else beta_n,
                                "r_form": form})


def verify_schedule(s: Schedule, t: Tessellation, radius: float) -> list[tuple[int, int]]:
    """Same-colour cell pairs within `radius` of each other; empty means the schedule is proper."""
    p = t.pairs_within(radius)
    same = s.color_of[p[:, 0]] == s.color_of[p[:, 1]]
    return [(int(a), int(b)) for a, b in p[same]]
