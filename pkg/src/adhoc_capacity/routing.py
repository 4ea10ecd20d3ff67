"""Straight-line and random valid routes through relay cells, with per-route hop statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .deployment import NodeSet
from .kernels import hop_interference, walk_routes
from .sphere import angles
from .tessellation import Tessellation

HOP_CAP = 8.0  # hop lengths never exceed 8 rho_n between adjacent cells


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RouteValidationParams:
    w_window: int = 40
    t_frac: float = 0.01

    def __post_init__(self):
        if not 0 < self.t_frac < 1:
            raise ValueError("t_frac must lie in (0, 1)")
        if self.w_window < 1:
            raise ValueError("w_window must be >= 1")


@dataclass(frozen=True)
class Route:
    connection_id: int
    src: int
    dst: int
    cells: tuple
    nodes: tuple            # transmitting chain: src, one relay per intermediate cell, dst
    hop_lengths: tuple
    straight_length: float
    rho_n: float
    kind: str = "straight"

    @property
    def relays(self) -> tuple:
        return self.nodes[1:-1]

    @property
    def hops(self) -> int:
        return len(self.hop_lengths)

    @property
    def path_length(self) -> float:
        return float(sum(self.hop_lengths))

    @property
    def hop_tx_cells(self) -> tuple:
        return self.cells[:1] if len(self.cells) == 1 else self.cells[:-1]

    def to_dict(self) -> dict:
        return {"connection_id": self.connection_id, "src": self.src, "dst": self.dst, "kind": self.kind,
                "cells": list(self.cells), "nodes": list(self.nodes), "hop_lengths": list(self.hop_lengths),
                "straight_length": self.straight_length, "rho_n": self.rho_n}

    @classmethod
    def from_dict(cls, d: dict) -> "Route":
        return cls(int(d["connection_id"]), int(d["src"]), int(d["dst"]), tuple(d["cells"]), tuple(d["nodes"]),
                   tuple(d["hop_lengths"]), float(d["straight_length"]), float(d["rho_n"]), d.get("kind", "straight"))


@dataclass
class RouteBatch:
    """Routes of many connections in flat hop arrays; hops of route k are hop_ptr[k]:hop_ptr[k+1]."""

    connection_ids: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    straight_length: np.ndarray
    hop_ptr: np.ndarray
    hop_tx_node: np.ndarray
    hop_rx_node: np.ndarray
    hop_tx_cell: np.ndarray
    hop_length: np.ndarray
    cell_ptr: np.ndarray
    cells: np.ndarray
    rho_n: float
    kind: str = "straight"
    dropped: dict = field(default_factory=dict)   # connection id -> reason

    def __len__(self) -> int:
        return self.src.shape[0]

    @property
    def hops(self) -> np.ndarray:
        return np.diff(self.hop_ptr)

    def route(self, k: int) -> Route:
        h0, h1 = self.hop_ptr[k], self.hop_ptr[k + 1]
        nodes = tuple(int(x) for x in self.hop_tx_node[h0:h1]) + (int(self.hop_rx_node[h1 - 1]),)
        return Route(int(self.connection_ids[k]), int(self.src[k]), int(self.dst[k]),
                     tuple(int(c) for c in self.cells[self.cell_ptr[k]:self.cell_ptr[k + 1]]), nodes,
                     tuple(float(x) for x in self.hop_length[h0:h1]), float(self.straight_length[k]),
                     self.rho_n, self.kind)

    def routes(self) -> list[Route]:
        return [self.route(k) for k in range(len(self))]

    @classmethod
    def from_routes(cls, routes: list[Route], ns: NodeSet, rho_n: float, kind: str = "straight") -> "RouteBatch":
        hop_ptr = np.zeros(len(routes) + 1, dtype=np.int64)
        np.cumsum([r.hops for r in routes], out=hop_ptr[1:])
        cell_ptr = np.zeros(len(routes) + 1, dtype=np.int64)
        np.cumsum([len(r.cells) for r in routes], out=cell_ptr[1:])
        tx = np.array([n for r in routes for n in r.nodes[:-1]], dtype=np.int64)
        rx = np.array([n for r in routes for n in r.nodes[1:]], dtype=np.int64)
        return cls(np.array([r.connection_id for r in routes], dtype=np.int64),
                   np.array([r.src for r in routes], dtype=np.int64),
                   np.array([r.dst for r in routes], dtype=np.int64),
                   np.array([r.straight_length for r in routes]), hop_ptr, tx, rx,
                   ns.cell_of[tx] if tx.size else tx,
                   np.array([h for r in routes for h in r.hop_lengths]), cell_ptr,
                   np.array([c for r in routes for c in r.cells], dtype=np.int64), rho_n, kind)


# -------------------------------------------------------------- construction

def _assemble(conn, src, dst, cell_ptr, cells, ns: NodeSet, t: Tessellation, rng, kind) -> RouteBatch:
    """Pick relays in intermediate cells and compute hop geometry for walked cell sequences."""
    m = src.shape[0]
    ncell = np.diff(cell_ptr)
    counts = ns.counts
    # one uniform per intermediate cell, in route order
    inter = np.ones(cells.shape[0], dtype=bool)
    inter[cell_ptr[:-1]] = False
    inter[cell_ptr[1:] - 1] = False
    ic = cells[inter]
    u = rng.random(ic.shape[0])
    cnt = counts[ic]
    empty = cnt == 0
    pick = np.minimum((u * cnt).astype(np.int64), np.maximum(cnt - 1, 0))
    relay = ns.cell_nodes[np.minimum(ns.cell_ptr[ic] + pick, ns.n - 1)]

    owner = np.repeat(np.arange(m), ncell)
    bad = np.zeros(m, dtype=bool)
    bad[owner[inter][empty]] = True
    dropped = {int(conn[k]): "empty relay cell" for k in np.flatnonzero(bad)}
    walk_miss = cells[cell_ptr[1:] - 1] != ns.cell_of[dst]
    for k in np.flatnonzero(walk_miss & ~bad):
        dropped[int(conn[k])] = "walk ended outside the destination cell"
    keep = ~(bad | walk_miss)

    chain = np.empty(cells.shape[0], dtype=np.int64)
    chain[inter] = relay
    chain[cell_ptr[:-1]] = src
    chain[cell_ptr[1:] - 1] = dst
    single = ncell == 1
    # single-cell routes still take one hop, src -> dst
    hops = np.where(single, 1, ncell - 1)
    kept = np.flatnonzero(keep)
    hop_ptr = np.zeros(kept.size + 1, dtype=np.int64)
    np.cumsum(hops[kept], out=hop_ptr[1:])
    tx, rx = [], []
    for k in kept:
        seg = chain[cell_ptr[k]:cell_ptr[k + 1]]
        if single[k]:
            tx.append(src[k:k + 1])
            rx.append(dst[k:k + 1])
        else:
            tx.append(seg[:-1])
            rx.append(seg[1:])
    tx = np.concatenate(tx) if tx else np.empty(0, dtype=np.int64)
    rx = np.concatenate(rx) if rx else np.empty(0, dtype=np.int64)
    hop_len = t.sp.radius * angles(ns.positions[tx], ns.positions[rx]) if tx.size else np.empty(0)
    L = t.sp.radius * angles(ns.positions[src[kept]], ns.positions[dst[kept]])
    new_cell_ptr = np.zeros(kept.size + 1, dtype=np.int64)
    np.cumsum(ncell[kept], out=new_cell_ptr[1:])
    kept_cells = cells[np.repeat(keep, ncell)]
    return RouteBatch(conn[kept], src[kept], dst[kept], np.atleast_1d(L), hop_ptr, tx, rx,
                      ns.cell_of[tx] if tx.size else tx, hop_len, new_cell_ptr, kept_cells, t.rho_n, kind, dropped)


def straight_line_routes(src, dst, ns: NodeSet, t: Tessellation, rng: np.random.Generator,
                         connection_ids=None) -> RouteBatch:
    """Routes relayed by every cell the src->dst geodesic crosses, in crossing order."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if np.any(src == dst):
        raise ValueError("a connection needs src != dst")
    conn = np.arange(src.shape[0], dtype=np.int64) if connection_ids is None else np.asarray(connection_ids)
    ptr, cells = walk_routes(t.generators, t.nbr_ptr, t.nbr_idx, np.ascontiguousarray(ns.cell_of[src]),
                             np.ascontiguousarray(ns.positions[src]), np.ascontiguousarray(ns.positions[dst]),
                             4 * t.n_cells)
    return _assemble(conn, src, dst, ptr, cells, ns, t, rng, "straight")


def straight_line_route(src: int, dst: int, ns: NodeSet, t: Tessellation, rng: np.random.Generator,
                        connection_id: int = 0) -> Route:
    b = straight_line_routes([src], [dst], ns, t, rng, connection_ids=[connection_id])
    if len(b) == 0:
        raise RoutingError(b.dropped.get(connection_id, "route construction failed"))
    return b.route(0)


def _loop_erase(path: list) -> list:
    out, pos = [], {}
    for c in path:
        if c in pos:
            for d in out[pos[c] + 1:]:
                del pos[d]
            del out[pos[c] + 1:]
        else:
            pos[c] = len(out)
            out.append(c)
    return out


def random_cell_path(a: int, b: int, t: Tessellation, rng: np.random.Generator, greed: float = 0.5) -> list:
    """Loop-erased walk on the adjacency graph; each step is greedy toward b with probability `greed`."""
    if not 0 < greed <= 1:
        raise ValueError("greed must lie in (0, 1]")
    path = [a]
    cur = a
    target = t.generators[b]
    while cur != b:
        nb = t.neighbors(cur)
        if rng.random() < greed:
            cur = int(nb[np.argmin(angles(t.generators[nb], target))])
        else:
            cur = int(nb[rng.integers(nb.shape[0])])
        path.append(cur)
    return _loop_erase(path)


def random_valid_routes(src, dst, ns: NodeSet, t: Tessellation, rng: np.random.Generator,
                        greed: float = 0.5, connection_ids=None) -> RouteBatch:
    """Routes obeying adjacency (R1) and no loops (R2) along random cell paths."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    conn = np.arange(src.shape[0], dtype=np.int64) if connection_ids is None else np.asarray(connection_ids)
    paths = [random_cell_path(int(ns.cell_of[s]), int(ns.cell_of[d]), t, rng, greed) for s, d in zip(src, dst)]
    ptr = np.zeros(len(paths) + 1, dtype=np.int64)
    np.cumsum([len(p) for p in paths], out=ptr[1:])
    cells = np.array([c for p in paths for c in p], dtype=np.int64)
    return _assemble(conn, src, dst, ptr, cells, ns, t, rng, "arbitrary")


# -------------------------------------------------------------- checks and statistics

def validate_route(r: Route, t: Tessellation) -> list[dict]:
    """Violations of adjacency (R1), no repeated cell (R2) and the 8 rho_n hop cap; empty if valid."""
    out = []
    for k in range(len(r.cells) - 1):
        a, b = r.cells[k], r.cells[k + 1]
        if not t.are_adjacent(a, b):
            out.append({"rule": "R1", "hop": k, "cells": (a, b)})
    seen = set()
    for k, c in enumerate(r.cells):
        if c in seen:
            out.append({"rule": "R2", "position": k, "cell": c})
        seen.add(c)
    cap = HOP_CAP * r.rho_n * (1 + 1e-9)
    for k, h in enumerate(r.hop_lengths):
        if h > cap:
            out.append({"rule": "hop_cap", "hop": k, "length": h, "cap": HOP_CAP * r.rho_n})
    return out


def long_hop_count(r: Route, t_frac: float) -> int:
    """H_i - h_i: hops of length at least t_frac * rho_n."""
    return int(sum(h >= t_frac * r.rho_n for h in r.hop_lengths))


def max_short_hop_run(r: Route, params: RouteValidationParams = RouteValidationParams()) -> int:
    best = run = 0
    for h in r.hop_lengths:
        run = run + 1 if h < params.t_frac * r.rho_n else 0
        best = max(best, run)
    return best


def interior_hop_mask(batch: RouteBatch) -> np.ndarray:
    """True for hops that are neither the first nor the last of their route."""
    m = np.ones(batch.hop_length.shape[0], dtype=bool)
    if m.size:
        m[batch.hop_ptr[:-1][batch.hops > 0]] = False
        m[batch.hop_ptr[1:][batch.hops > 0] - 1] = False
    return m


def hop_interferer_gap_counts(batch: RouteBatch, sched, t: Tessellation, m_mult: float, ns: NodeSet,
                              rng: np.random.Generator) -> np.ndarray:
    """N_i per route: interior hops whose receiver sees no same-slot transmitter within (M + 8) rho_n.

    Every cell of the hop's colour except the transmitting one is assumed to transmit from
    a uniformly chosen node.
    """
    hops = np.flatnonzero(interior_hop_mask(batch))
    if hops.size == 0:
        return np.zeros(len(batch), dtype=np.int64)
    col = sched.color_of[batch.hop_tx_cell[hops]]
    color_ptr, color_cells = sched.color_classes()
    u = rng.random(int(np.diff(color_ptr)[col].sum()))
    _, nearest = hop_interference(ns.positions, ns.cell_ptr, ns.cell_nodes, color_ptr, color_cells,
                                  np.ascontiguousarray(col), np.ascontiguousarray(batch.hop_tx_cell[hops]),
                                  np.ascontiguousarray(batch.hop_rx_node[hops]), u, t.sp.radius, 2.0)
    gap = nearest > (m_mult + 8.0) * t.rho_n
    owner = np.repeat(np.arange(len(batch)), batch.hops)[hops]
    return np.bincount(owner[gap], minlength=len(batch)).astype(np.int64)


def hop_interferer_gap_count(r: Route, sched, t: Tessellation, m_mult: float, ns: NodeSet,
                             rng: np.random.Generator) -> int:
    batch = RouteBatch.from_routes([r], ns, r.rho_n, r.kind)
    return int(hop_interferer_gap_counts(batch, sched, t, m_mult, ns, rng)[0])


def dump_routes_jsonl(routes, fh) -> None:
    for r in routes:
        fh.write(json.dumps(r.to_dict()) + "\n")


def load_routes_jsonl(fh) -> list[Route]:
    return [Route.from_dict(json.loads(line)) for line in fh if line.strip()]
