"""Geometry on the sphere of area n: sampling, geodesics, caps and the pair-distance law.

Points are stored as unit vectors; every length is a geodesic length on the sphere of
radius sqrt(n / 4pi). Batched helpers work on (m, 3) arrays of unit vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import point_arc_angles


class GeometryDomainError(ValueError):
    """An argument lies outside the domain of a geometric formula."""


@dataclass(frozen=True)
class SphereParams:
    area_n: float

    def __post_init__(self):
        if not (self.area_n > 0 and math.isfinite(self.area_n)):
            raise GeometryDomainError(f"sphere area must be positive and finite, got {self.area_n}")

    @property
    def radius(self) -> float:
        return math.sqrt(self.area_n / (4.0 * math.pi))

    @property
    def half_circumference(self) -> float:
        """Largest possible geodesic distance, sqrt(pi n) / 2."""
        return math.sqrt(math.pi * self.area_n) / 2.0


@dataclass(frozen=True)
class SpherePoint:
    unit_vector: tuple[float, float, float]

    def __post_init__(self):
        v = tuple(float(x) for x in self.unit_vector)
        if len(v) != 3:
            raise GeometryDomainError("a sphere point needs three components")
        norm = math.sqrt(sum(x * x for x in v))
        if abs(norm - 1.0) > 1e-12:
            raise GeometryDomainError(f"unit_vector has norm {norm!r}")
        object.__setattr__(self, "unit_vector", v)

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        """Normalise an arbitrary non-zero 3-vector onto the sphere."""
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise GeometryDomainError("cannot normalise the zero vector")
        return cls(tuple(v / n))

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.unit_vector)

    def position(self, sp: SphereParams) -> np.ndarray:
        return sp.radius * self.vec


@dataclass(frozen=True)
class GeodesicSegment:
    start: SpherePoint
    end: SpherePoint
    length: float

    @classmethod
    def between(cls, a: SpherePoint, b: SpherePoint, sp: SphereParams) -> "GeodesicSegment":
        return cls(a, b, geodesic_distance(a, b, sp))


# ---------------------------------------------------------------- batched kernels

def unit_rows(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Central angle between unit vectors, via atan2(|a x b|, a.b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.cross(a, b)
    return np.arctan2(np.linalg.norm(c, axis=-1), np.einsum("...i,...i->...", a, b))


def sample_uniform_units(rng: np.random.Generator, m: int) -> np.ndarray:
    """m i.i.d. uniform unit vectors (normalised Gaussian triples)."""
    v = rng.standard_normal((m, 3))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0.0):  # probability zero, but keep the contract
        bad = norms == 0.0
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def point_arc_lengths(p, a, b, sp: SphereParams) -> np.ndarray:
    """Geodesic distance from each point p[k] to the minor arc a[k]-b[k]."""
    p, a, b = np.broadcast_arrays(*(np.atleast_2d(np.asarray(x, dtype=float)) for x in (p, a, b)))
    return sp.radius * point_arc_angles(np.ascontiguousarray(p), np.ascontiguousarray(a),
                                        np.ascontiguousarray(b))


# ---------------------------------------------------------------- public operations

def sample_uniform_point(rng: np.random.Generator) -> SpherePoint:
    return SpherePoint(tuple(sample_uniform_units(rng, 1)[0]))


def geodesic_distance(a: SpherePoint, b: SpherePoint, sp: SphereParams) -> float:
    return sp.radius * float(angles(a.vec, b.vec))


def _check_length(l: float, sp: SphereParams) -> None:
    if not (0.0 <= l <= sp.half_circumference * (1 + 1e-12)):
        raise GeometryDomainError(
            f"geodesic length {l} outside [0, {sp.half_circumference}] for n={sp.area_n}")


def cap_area(l: float, sp: SphereParams) -> float:
    """Area of the geodesic disk of radius l: n sin^2(sqrt(pi/n) l)."""
    _check_length(l, sp)
    return sp.area_n * math.sin(math.sqrt(math.pi / sp.area_n) * l) ** 2


def pair_distance_cdf(l: float, sp: SphereParams) -> float:
    """P(L <= l) for the geodesic distance L between two uniform points."""
    _check_length(l, sp)
    return math.sin(math.sqrt(math.pi / sp.area_n) * l) ** 2


def pair_distance_pdf(l, sp: SphereParams):
    """Density of L: sqrt(pi/n) sin(2 sqrt(pi/n) l) on [0, sqrt(pi n)/2]."""
    k = math.sqrt(math.pi / sp.area_n)
    return k * np.sin(2.0 * k * np.asarray(l, dtype=float))


def point_to_segment_distance(p: SpherePoint, seg: GeodesicSegment, sp: SphereParams) -> float:
    return float(point_arc_lengths(p.vec, seg.start.vec, seg.end.vec, sp)[0])


def great_circle_points(a: np.ndarray, b: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Points at fractions ts along the minor arc from a to b (slerp)."""
    theta = float(angles(a, b))
    ts = np.asarray(ts, dtype=float)
    if theta == 0.0:
        return np.repeat(np.asarray(a, float)[None, :], ts.shape[0], axis=0)
    s = math.sin(theta)
    return (np.sin((1 - ts) * theta)[:, None] * a + np.sin(ts * theta)[:, None] * b) / s
