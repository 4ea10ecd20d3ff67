"""Voronoi tessellation of the sphere with every cell between a rho-disk and a 2rho-disk.

Generators are a maximal 2rho-separated set: random sequential packing until a run of
consecutive rejected candidates, then any Voronoi vertex farther than 2rho from its
generators is promoted to a generator until none is left. Separation gives each cell an
inscribed rho-disk around its generator; maximality puts every point within 2rho of it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, SphericalVoronoi, cKDTree

from .kernels import point_arc_angles, polygon_pair_angles
from .sphere import GeometryDomainError, SphereParams, SpherePoint, angles, cap_area, sample_uniform_units

SCHEMA_VERSION = 1
RHO_CONVENTIONS = {
    "standard": 10.0,                   # rho_n = 10 sqrt(ln n)
    "area100": 10.0 / math.sqrt(math.pi),  # radius of a disk of area 100 ln n
}


class TessellationError(RuntimeError):
    pass


def _chord(angle: float) -> float:
    return 2.0 * math.sin(min(angle, math.pi) / 2.0)


@dataclass(frozen=True)
class CellGeometry:
    n: float
    rho_n: float

    def __post_init__(self):
        if self.n <= 1:
            raise GeometryDomainError("n must exceed 1")
        limit = math.sqrt(math.pi * self.n) / 4.0
        if not (0 < self.rho_n < limit):
            raise GeometryDomainError(
                f"rho_n={self.rho_n:.4g} must lie in (0, sqrt(pi n)/4={limit:.4g}) for n={self.n}")

    @classmethod
    def for_n(cls, n: float, convention: str = "standard", coef: float | None = None) -> "CellGeometry":
        """rho_n = coef * sqrt(ln n); coef comes from the named convention unless given."""
        if coef is None:
            try:
                coef = RHO_CONVENTIONS[convention]
            except KeyError:
                raise ValueError(f"unknown rho convention {convention!r}") from None
        return cls(n, coef * math.sqrt(math.log(n)))


@dataclass(frozen=True, eq=False)
class Tessellation:
    sp: SphereParams
    rho_n: float
    generators: np.ndarray      # (N, 3) unit vectors
    vertices: np.ndarray        # (V, 3) unit vectors
    poly_ptr: np.ndarray        # CSR over counter-clockwise region vertex ids
    poly_verts: np.ndarray
    nbr_ptr: np.ndarray         # CSR adjacency, neighbour ids sorted
    nbr_idx: np.ndarray
    areas: np.ndarray
    in_radius: np.ndarray
    circum_radius: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return self.generators.shape[0]

    def neighbors(self, c: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[c]:self.nbr_ptr[c + 1]]

    def region(self, c: int) -> np.ndarray:
        return self.vertices[self.poly_verts[self.poly_ptr[c]:self.poly_ptr[c + 1]]]

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.generators)

    @cached_property
    def _adjacent_pairs(self) -> set:
        out = set()
        for c in range(self.n_cells):
            for j in self.neighbors(c):
                if c < j:
                    out.add((c, int(j)))
        return out

    def are_adjacent(self, a: int, b: int) -> bool:
        a, b = (a, b) if a < b else (b, a)
        return (a, b) in self._adjacent_pairs

    @cached_property
    def boundary_length(self) -> float:
        """Total length of all cell edges (each edge counted once)."""
        a = self.vertices[self.poly_verts]
        nxt = np.arange(self.poly_verts.shape[0]) + 1
        ends = np.repeat(self.poly_ptr[1:], np.diff(self.poly_ptr))
        nxt[nxt == ends] = self.poly_ptr[:-1][np.diff(self.poly_ptr) > 0]
        return 0.5 * self.sp.radius * float(angles(a, self.vertices[self.poly_verts[nxt]]).sum())

    # ---------------------------------------------------------- construction

    @classmethod
    def from_generators(cls, generators, sp: SphereParams, rho_n: float, meta=None) -> "Tessellation":
        g = np.ascontiguousarray(np.asarray(generators, dtype=float))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        # leave unit rows untouched so a serialised tessellation reloads bit for bit
        g = np.where(np.abs(norms - 1.0) > 1e-14, g / norms, g)
        if g.shape[0] < 4:
            raise TessellationError(f"need at least 4 generators, got {g.shape[0]}")
        sv = SphericalVoronoi(g, radius=1.0, center=np.zeros(3))
        sv.sort_vertices_of_regions()
        sizes = np.array([len(r) for r in sv.regions], dtype=np.int64)
        poly_ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=poly_ptr[1:])
        poly_verts = np.concatenate([np.asarray(r, dtype=np.int64) for r in sv.regions])
        verts = np.ascontiguousarray(sv.vertices / np.linalg.norm(sv.vertices, axis=1, keepdims=True))

        hull = ConvexHull(g)
        e = np.concatenate([hull.simplices[:, [0, 1]], hull.simplices[:, [1, 2]], hull.simplices[:, [2, 0]]])
        e = np.unique(np.sort(e, axis=1), axis=0)
        both = np.concatenate([e, e[:, ::-1]])
        both = both[np.lexsort((both[:, 1], both[:, 0]))]
        nbr_ptr = np.zeros(g.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(both[:, 0], minlength=g.shape[0]), out=nbr_ptr[1:])
        nbr_idx = np.ascontiguousarray(both[:, 1].astype(np.int64))

        areas = sv.calculate_areas() * sp.radius ** 2
        owner = np.repeat(np.arange(g.shape[0]), sizes)
        vr = verts[poly_verts]
        nxt = np.arange(poly_verts.shape[0]) + 1
        ends = np.repeat(poly_ptr[1:], sizes)
        nxt[nxt == ends] = poly_ptr[:-1][sizes > 0]
        edge_d = point_arc_angles(np.ascontiguousarray(g[owner]), np.ascontiguousarray(vr),
                                  np.ascontiguousarray(verts[poly_verts[nxt]]))
        vert_d = angles(g[owner], vr)
        in_r = np.minimum.reduceat(edge_d, poly_ptr[:-1]) * sp.radius
        circ_r = np.maximum.reduceat(vert_d, poly_ptr[:-1]) * sp.radius
        arrays = dict(generators=g, vertices=verts, poly_ptr=poly_ptr, poly_verts=poly_verts,
                      nbr_ptr=nbr_ptr, nbr_idx=nbr_idx, areas=areas, in_radius=in_r, circum_radius=circ_r)
        for a in arrays.values():
            a.setflags(write=False)
        return cls(sp=sp, rho_n=float(rho_n), meta=dict(meta or {}), **arrays)

    # ---------------------------------------------------------- queries

    def locate_units(self, units: np.ndarray) -> np.ndarray:
        """Nearest-generator cell for each unit vector; exact ties go to the lowest id."""
        units = np.atleast_2d(np.asarray(units, dtype=float))
        k = min(4, self.n_cells)
        _, idx = self._tree.query(units, k=k)
        idx = np.asarray(idx).reshape(units.shape[0], k)
        ang = angles(units[:, None, :], self.generators[idx])
        best = ang.min(axis=1, keepdims=True)
        tied = ang <= best + 1e-12 * np.maximum(best, 1.0)
        return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1).astype(np.int64)

    def cell_pair_distances(self, pairs) -> np.ndarray:
        """Minimum geodesic distance between the closed cells of each pair (0 if touching)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        out = np.zeros(pairs.shape[0])
        if pairs.shape[0] == 0:
            return out
        same = pairs[:, 0] == pairs[:, 1]
        adj = np.array([self.are_adjacent(int(a), int(b)) for a, b in pairs]) if pairs.shape[0] < 64 else \
            self._adjacent_mask(pairs)
        todo = ~(same | adj)
        if todo.any():
            out[todo] = self.sp.radius * polygon_pair_angles(
                self.vertices, self.poly_ptr, self.poly_verts, np.ascontiguousarray(pairs[todo]))
        return out

    def _adjacent_mask(self, pairs: np.ndarray) -> np.ndarray:
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        key = lo * self.n_cells + hi
        rows = np.repeat(np.arange(self.n_cells), np.diff(self.nbr_ptr))
        akey = rows * self.n_cells + self.nbr_idx
        return np.isin(key, akey)

    def pairs_within(self, d: float) -> np.ndarray:
        """All cell pairs (i < j) whose cell-to-cell distance is <= d, sorted."""
        if d >= self.sp.half_circumference:
            i, j = np.triu_indices(self.n_cells, k=1)
            return np.stack([i, j], axis=1).astype(np.int64)
        reach = (d + 2.0 * float(self.circum_radius.max())) / self.sp.radius
        cand = self._tree.query_pairs(_chord(reach) * (1 + 1e-12), output_type="ndarray").astype(np.int64)
        if cand.shape[0] == 0:
            return cand.reshape(0, 2)
        cand = np.sort(cand, axis=1)
        gd = angles(self.generators[cand[:, 0]], self.generators[cand[:, 1]]) * self.sp.radius
        lower = gd - self.circum_radius[cand[:, 0]] - self.circum_radius[cand[:, 1]]
        cand = cand[lower <= d]
        gd = angles(self.generators[cand[:, 0]], self.generators[cand[:, 1]]) * self.sp.radius
        sure = gd <= d
        keep = sure.copy()
        if (~sure).any():
            keep[~sure] = self.cell_pair_distances(cand[~sure]) <= d
        # adjacency always counts, whatever the prefilter said
        out = np.concatenate([cand[keep], self._adjacency_pairs_array()])
        out = np.unique(out, axis=0)
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    def _adjacency_pairs_array(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n_cells), np.diff(self.nbr_ptr))
        p = np.stack([rows, self.nbr_idx], axis=1)
        return p[p[:, 0] < p[:, 1]].astype(np.int64)

    # ---------------------------------------------------------- serialisation

    def to_dict(self) -> dict:
        adjacency = [self.neighbors(c).tolist() for c in range(self.n_cells)]
        return {
            "schema": "adhoc_capacity.tessellation",
            "version": SCHEMA_VERSION,
            "area_n": self.sp.area_n,
            "rho_n": self.rho_n,
            "generators": self.generators.tolist(),
            "adjacency": adjacency,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Tessellation":
        if doc.get("schema") != "adhoc_capacity.tessellation":
            raise ValueError("not a tessellation document")
        if doc.get("version") != SCHEMA_VERSION:
            raise ValueError(f"tessellation schema version {doc.get('version')} != {SCHEMA_VERSION}")
        t = cls.from_generators(np.array(doc["generators"]), SphereParams(doc["area_n"]), doc["rho_n"],
                                meta=doc.get("meta"))
        stored = [sorted(a) for a in doc["adjacency"]]
        if stored != [t.neighbors(c).tolist() for c in range(t.n_cells)]:
            raise ValueError("stored adjacency does not match the generators")
        return t

    @classmethod
    def from_json(cls, text: str) -> "Tessellation":
        return cls.from_dict(json.loads(text))


# -------------------------------------------------------------- operations

def _rsa_pack(rng: np.random.Generator, min_angle: float, max_rejections: int, batch: int) -> np.ndarray:
    chord = _chord(min_angle)
    gens = np.empty((0, 3))
    run = 0
    tree = None
    while run < max_rejections:
        cand = sample_uniform_units(rng, batch)
        if tree is not None:
            dist, _ = tree.query(cand, k=1)
            ok = dist >= chord
        else:
            ok = np.ones(batch, dtype=bool)
        surv = np.flatnonzero(ok)
        accepted = []
        if surv.size:
            close = cKDTree(cand[surv]).query_pairs(chord * (1 - 1e-15), output_type="ndarray")
            conflicts = [[] for _ in range(surv.size)]
            for a, b in close:
                lo, hi = (a, b) if a < b else (b, a)
                conflicts[hi].append(lo)
            taken = np.zeros(surv.size, dtype=bool)
            for k in range(surv.size):
                if not any(taken[j] for j in conflicts[k]):
                    taken[k] = True
            accepted = surv[taken].tolist()
        # stop at the exact candidate where the rejection run reaches the threshold
        prev = -1
        keep = []
        for pos in accepted:
            if run + (pos - prev - 1) >= max_rejections:
                break
            keep.append(pos)
            run = 0
            prev = pos
        else:
            run += batch - prev - 1
        if keep:
            gens = np.concatenate([gens, cand[keep]])
            tree = cKDTree(gens)
    return gens


def _complete_packing(gens: np.ndarray, min_angle: float) -> tuple[np.ndarray, int]:
    """Promote Voronoi vertices farther than min_angle from their generators until none remain."""
    added = 0
    while True:
        sv = SphericalVoronoi(gens, radius=1.0, center=np.zeros(3))
        v = sv.vertices / np.linalg.norm(sv.vertices, axis=1, keepdims=True)
        d, _ = cKDTree(gens).query(v, k=1)
        far = np.flatnonzero(d > _chord(min_angle))
        if far.size == 0:
            return gens, added
        far = far[np.lexsort((far, -d[far]))]
        picked = []
        for k in far:
            if all(angles(v[k], v[j]) >= min_angle for j in picked):
                picked.append(k)
        gens = np.concatenate([gens, v[picked]])
        added += len(picked)


def build_tessellation(sp: SphereParams, cg: CellGeometry, rng: np.random.Generator, *,
                       max_rejections: int = 10_000, min_cells: int = 8, batch: int = 4096) -> Tessellation:
    """Tessellation whose cells contain a rho_n-disk and sit inside a 2 rho_n-disk."""
    rho = cg.rho_n
    if abs(cg.n - sp.area_n) > 1e-9 * sp.area_n:
        raise TessellationError("cell geometry and sphere disagree on n")
    if 2 * rho >= sp.half_circumference:
        raise TessellationError(f"rho_n={rho:.4g} too large for a sphere of area {sp.area_n}")
    upper = sp.area_n / cap_area(rho, sp)
    if upper < min_cells:
        raise TessellationError(
            f"at most {upper:.1f} disjoint rho-disks fit; need {min_cells} cells (raise n or lower rho_n)")
    min_angle = 2 * rho / sp.radius
    gens = _rsa_pack(rng, min_angle, max_rejections, batch)
    if gens.shape[0] < 4:
        raise TessellationError(f"packing produced only {gens.shape[0]} generators")
    gens, added = _complete_packing(gens, min_angle)
    if gens.shape[0] < min_cells:
        raise TessellationError(f"packing produced {gens.shape[0]} < {min_cells} cells")
    return Tessellation.from_generators(gens, sp, rho, meta={"completion_added": added,
                                                               "max_rejections": max_rejections})


def locate_cell(p: SpherePoint, t: Tessellation) -> int:
    return int(t.locate_units(p.vec)[0])


def cells_within(c: int, d: float, t: Tessellation) -> set[int]:
    """Cells whose distance to cell c is at most d (c and its touching neighbours included)."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    others = np.delete(np.arange(t.n_cells), c)
    reach = (d + t.circum_radius[c] + t.circum_radius.max()) / t.sp.radius
    gd = angles(t.generators[c], t.generators[others])
    cand = others[gd <= reach + 1e-12]
    dist = t.cell_pair_distances(np.stack([np.full(cand.shape, c), cand], axis=1))
    return {int(c)} | {int(j) for j in cand[dist <= d]} | {int(j) for j in t.neighbors(c)}


@dataclass
class TessellationReport:
    violations: list = field(default_factory=list)
    area_sum: float = 0.0
    area_target: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_tessellation(t: Tessellation, cg: CellGeometry, rel_tol: float = 1e-9) -> TessellationReport:
    rho = cg.rho_n
    rep = TessellationReport(area_sum=float(t.areas.sum()), area_target=t.sp.area_n)
    min_area = math.pi * rho ** 2 / 2
    for c in range(t.n_cells):
        if t.in_radius[c] < rho * (1 - rel_tol):
            rep.violations.append({"cell": c, "check": "in_radius", "value": float(t.in_radius[c]), "bound": rho})
        if t.circum_radius[c] > 2 * rho * (1 + rel_tol):
            rep.violations.append({"cell": c, "check": "circum_radius", "value": float(t.circum_radius[c]),
                                   "bound": 2 * rho})
        if t.areas[c] < min_area * (1 - rel_tol):
            rep.violations.append({"cell": c, "check": "area", "value": float(t.areas[c]), "bound": min_area})
    if abs(rep.area_sum - rep.area_target) > 1e-6 * rep.area_target:
        rep.violations.append({"cell": None, "check": "area_sum", "value": rep.area_sum, "bound": rep.area_target})
    return rep
