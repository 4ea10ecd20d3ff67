"""Pure numpy versions of the compiled kernels (same signatures, same semantics)."""

import numpy as np

ARC_TOL = 1e-12
_CHUNK = 1 << 21  # max elements in a temporary (rows x cols) block


def _angle(a, b):
    c = np.cross(a, b)
    return np.arctan2(np.sqrt(np.einsum("...i,...i->...", c, c)), np.einsum("...i,...i->...", a, b))


def _point_arc(p, a, b):
    n = np.cross(a, b)
    nn = np.sqrt(np.einsum("...i,...i->...", n, n))
    da = _angle(p, a)
    db = _angle(p, b)
    end = np.minimum(da, db)
    safe = nn >= 1e-15
    n = n / np.where(safe, nn, 1.0)[..., None]
    h = np.einsum("...i,...i->...", p, n)
    q = p - h[..., None] * n
    qn = np.sqrt(np.einsum("...i,...i->...", q, q))
    s1 = np.einsum("...i,...i->...", np.cross(a, q), n)
    s2 = np.einsum("...i,...i->...", np.cross(q, b), n)
    inside = safe & (s1 >= 0.0) & (s2 >= 0.0) & (qn > 0.0)
    return np.where(inside, np.arctan2(np.abs(h), qn), end)


def point_arc_angles(p, a, b):
    return _point_arc(np.asarray(p, float), np.asarray(a, float), np.asarray(b, float))


def walk_routes(gens, nbr_ptr, nbr_idx, start, src, dst, max_steps):
    """Cells crossed by each src->dst minor arc, in order, as (ptr, cells).

    All routes advance one cell per iteration; the neighbour table is padded to the
    maximum degree with -1.
    """
    gens = np.asarray(gens, float)
    nbr_ptr = np.asarray(nbr_ptr, np.int64)
    nbr_idx = np.asarray(nbr_idx, np.int64)
    start = np.asarray(start, np.int64)
    src = np.asarray(src, float)
    dst = np.asarray(dst, float)
    m = start.shape[0]
    deg = np.diff(nbr_ptr)
    dmax = int(deg.max()) if deg.size else 0
    pad = np.full((gens.shape[0], max(dmax, 1)), -1, dtype=np.int64)
    rows = np.repeat(np.arange(gens.shape[0]), deg)
    cols = np.arange(nbr_idx.shape[0]) - np.repeat(nbr_ptr[:-1], deg)
    pad[rows, cols] = nbr_idx

    theta = _angle(src, dst)
    dot = np.einsum("ij,ij->i", src, dst)
    u = dst - dot[:, None] * src
    un = np.linalg.norm(u, axis=1)
    active = (un > 0.0) & (theta > 0.0)
    u = u / np.where(un > 0.0, un, 1.0)[:, None]

    cur = start.copy()
    s_cur = np.zeros(m)
    rec_route = [np.arange(m)]
    rec_cell = [cur.copy()]
    steps = 0
    idx = np.flatnonzero(active)
    while idx.size and steps < max_steps:
        steps += 1
        c = cur[idx]
        nb = pad[c]
        valid = nb >= 0
        w = gens[c][:, None, :] - gens[np.where(valid, nb, 0)]
        A = np.einsum("ijk,ik->ij", w, src[idx])
        B = np.einsum("ijk,ik->ij", w, u[idx])
        s = np.fmod(np.arctan2(B, A) + 0.5 * np.pi + 2.0 * np.pi, 2.0 * np.pi)
        ok = valid & (s > (s_cur[idx] + ARC_TOL)[:, None])
        s = np.where(ok, s, np.inf)
        # lowest s, ties to the lowest neighbour id
        key_nb = np.where(ok, nb, np.iinfo(np.int64).max)
        order = np.lexsort((key_nb, s), axis=-1) if s.shape[1] > 1 else np.zeros_like(nb)
        first = order[:, 0]
        s_best = s[np.arange(idx.size), first]
        nxt = nb[np.arange(idx.size), first]
        move = np.isfinite(s_best) & (s_best < theta[idx])
        moved = idx[move]
        cur[moved] = nxt[move]
        s_cur[moved] = s_best[move]
        rec_route.append(moved)
        rec_cell.append(nxt[move])
        idx = moved
    routes = np.concatenate(rec_route)
    cells = np.concatenate(rec_cell)
    order = np.argsort(routes, kind="stable")
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(routes, minlength=m), out=ptr[1:])
    return ptr, cells[order]


def hop_interference(node_unit, cell_ptr, cell_nodes, color_ptr, color_cells,
                     hop_color, hop_tx_cell, hop_rx_node, u, radius, alpha):
    node_unit = np.asarray(node_unit, float)
    cell_ptr = np.asarray(cell_ptr, np.int64)
    cell_nodes = np.asarray(cell_nodes, np.int64)
    color_ptr = np.asarray(color_ptr, np.int64)
    color_cells = np.asarray(color_cells, np.int64)
    hop_color = np.asarray(hop_color, np.int64)
    hop_tx_cell = np.asarray(hop_tx_cell, np.int64)
    hop_rx_node = np.asarray(hop_rx_node, np.int64)
    u = np.asarray(u, float)
    h = hop_color.shape[0]
    sizes = np.diff(color_ptr)[hop_color]
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    counts = np.diff(cell_ptr)
    total = np.zeros(h)
    nearest = np.full(h, np.inf)
    for col in np.unique(hop_color):
        hops = np.flatnonzero(hop_color == col)
        cells = color_cells[color_ptr[col]:color_ptr[col + 1]]
        k = cells.shape[0]
        if k == 0:
            continue
        cnt = counts[cells]
        step = max(1, _CHUNK // k)
        for lo in range(0, hops.shape[0], step):
            hb = hops[lo:lo + step]
            uu = u[offsets[hb][:, None] + np.arange(k)[None, :]]
            pick = np.minimum(np.floor(uu * cnt).astype(np.int64), np.maximum(cnt - 1, 0))
            node = cell_nodes[np.minimum(cell_ptr[cells] + pick, cell_nodes.shape[0] - 1)]
            rx = hop_rx_node[hb]
            use = (cells[None, :] != hop_tx_cell[hb][:, None]) & (cnt[None, :] > 0) & (node != rx[:, None])
            d = radius * _angle(node_unit[rx][:, None, :], node_unit[node])
            with np.errstate(divide="ignore"):
                contrib = np.where(d > 0.0, np.power(np.where(d > 0.0, d, 1.0), -alpha), np.inf)
            total[hb] = np.where(use, contrib, 0.0).sum(axis=1)
            nearest[hb] = np.where(use, d, np.inf).min(axis=1)
    return total, nearest


def polygon_pair_angles(verts, poly_ptr, poly_verts, pairs):
    verts = np.asarray(verts, float)
    poly_ptr = np.asarray(poly_ptr, np.int64)
    poly_verts = np.asarray(poly_verts, np.int64)
    pairs = np.asarray(pairs, np.int64).reshape(-1, 2)
    m = pairs.shape[0]
    if m == 0:
        return np.empty(0)
    sizes = np.diff(poly_ptr)
    vmax = int(sizes.max())
    # padded vertex table; padding repeats the first vertex, harmless for a minimum
    slot = np.arange(vmax)[None, :]
    base = poly_ptr[:-1][:, None]
    table = poly_verts[base + np.minimum(slot, sizes[:, None] - 1)]
    nxt = poly_verts[base + (slot % sizes[:, None])]
    nxt2 = poly_verts[base + ((slot + 1) % sizes[:, None])]
    edge_a = np.where(slot < sizes[:, None], nxt, table[:, :1])
    edge_b = np.where(slot < sizes[:, None], nxt2, table[:, :1])
    out = np.empty(m)
    step = max(1, _CHUNK // (vmax * vmax))
    for lo in range(0, m, step):
        pr = pairs[lo:lo + step]
        best = np.full(pr.shape[0], np.inf)
        for P, Q in ((pr[:, 0], pr[:, 1]), (pr[:, 1], pr[:, 0])):
            p = verts[table[P]][:, :, None, :]
            a = verts[edge_a[Q]][:, None, :, :]
            b = verts[edge_b[Q]][:, None, :, :]
            p, a, b = np.broadcast_arrays(p, a, b)
            d = _point_arc(p, a, b)
            best = np.minimum(best, d.reshape(d.shape[0], -1).min(axis=1))
        out[lo:lo + step] = best
    return out
