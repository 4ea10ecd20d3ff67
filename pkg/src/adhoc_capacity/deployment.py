"""Node placement, destination assignment and injection rates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .sphere import GeometryDomainError, sample_uniform_units
from .tessellation import Tessellation

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class NodeSet:
    positions: np.ndarray   # (n, 3) unit vectors
    cell_of: np.ndarray     # (n,) cell id per node
    cell_ptr: np.ndarray    # CSR: nodes of cell c are cell_nodes[cell_ptr[c]:cell_ptr[c+1]]
    cell_nodes: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def nodes_in(self, c: int) -> np.ndarray:
        return self.cell_nodes[self.cell_ptr[c]:self.cell_ptr[c + 1]]

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.cell_ptr)

    @classmethod
    def bind(cls, positions: np.ndarray, t: Tessellation) -> "NodeSet":
        positions = np.ascontiguousarray(positions, dtype=float)
        cell_of = t.locate_units(positions)
        cell_nodes = np.argsort(cell_of, kind="stable").astype(np.int64)
        cell_ptr = np.zeros(t.n_cells + 1, dtype=np.int64)
        np.cumsum(np.bincount(cell_of, minlength=t.n_cells), out=cell_ptr[1:])
        for a in (positions, cell_of, cell_ptr, cell_nodes):
            a.setflags(write=False)
        return cls(positions, cell_of, cell_ptr, cell_nodes)

    def min_occupancy_ok(self) -> bool:
        """Whether every cell holds at least 50 ln n nodes (reported, never asserted)."""
        return bool(self.counts.min() >= 50.0 * math.log(self.n))

    def to_dict(self) -> dict:
        return {"schema": "adhoc_capacity.nodeset", "version": SCHEMA_VERSION,
                "positions": self.positions.tolist(), "cell_of": self.cell_of.tolist()}

    @classmethod
    def from_dict(cls, doc: dict, t: Tessellation) -> "NodeSet":
        if doc.get("schema") != "adhoc_capacity.nodeset" or doc.get("version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 node set document")
        ns = cls.bind(np.array(doc["positions"], dtype=float), t)
        if ns.cell_of.tolist() != list(doc["cell_of"]):
            raise ValueError("stored cell binding does not match the tessellation")
        return ns


@dataclass(frozen=True, eq=False)
class TrafficMatrix:
    dest_of: np.ndarray
    lambda_n: float
    bandwidth_w: float = 1.0

    def to_dict(self) -> dict:
        return {"schema": "adhoc_capacity.traffic", "version": SCHEMA_VERSION,
                "dest_of": self.dest_of.tolist(), "lambda_n": self.lambda_n, "bandwidth_w": self.bandwidth_w}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrafficMatrix":
        if doc.get("schema") != "adhoc_capacity.traffic" or doc.get("version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 traffic document")
        return cls(np.array(doc["dest_of"], dtype=np.int64), float(doc["lambda_n"]), float(doc["bandwidth_w"]))


def deploy(n: int, t: Tessellation, rng: np.random.Generator) -> NodeSet:
    if n < 2:
        raise ValueError("need at least two nodes")
    return NodeSet.bind(sample_uniform_units(rng, n), t)


def max_injection_rate(n: float) -> float:
    if n <= math.e:
        raise GeometryDomainError(f"injection cap needs n > e, got {n}")
    return 1.0 / (50.0 * math.log(n))


def assign_destinations(ns: NodeSet, rng: np.random.Generator, *, lambda_n: float | None = None,
                        bandwidth_w: float = 1.0, cap: bool = True) -> TrafficMatrix:
    """Uniform destination != self for every node, by resampling self-hits."""
    n = ns.n
    if n < 2:
        raise ValueError("need at least two nodes")
    dest = rng.integers(0, n, size=n)
    bad = np.flatnonzero(dest == np.arange(n))
    while bad.size:
        dest[bad] = rng.integers(0, n, size=bad.size)
        bad = bad[dest[bad] == bad]
    if lambda_n is None:
        lambda_n = max_injection_rate(n) if n > math.e else 1.0
    if cap and n > math.e and lambda_n > max_injection_rate(n) * (1 + 1e-12):
        raise ValueError(f"lambda_n={lambda_n} exceeds the cap 1/(50 ln n)")
    dest.setflags(write=False)
    return TrafficMatrix(dest.astype(np.int64), float(lambda_n), float(bandwidth_w))


def dump_deployment(t: Tessellation, ns: NodeSet, tm: TrafficMatrix) -> str:
    return json.dumps({"tessellation": t.to_dict(), "nodes": ns.to_dict(), "traffic": tm.to_dict()})


def load_deployment(text: str) -> tuple[Tessellation, NodeSet, TrafficMatrix]:
    doc = json.loads(text)
    t = Tessellation.from_dict(doc["tessellation"])
    return t, NodeSet.from_dict(doc["nodes"], t), TrafficMatrix.from_dict(doc["traffic"])
