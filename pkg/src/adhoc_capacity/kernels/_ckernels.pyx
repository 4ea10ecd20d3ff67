# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Must stay numerically in step with ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, fmod, fabs, floor, pow, M_PI, INFINITY

cnp.import_array()

cdef double ARC_TOL = 1e-12


cdef inline double _angle(double ax, double ay, double az,
                          double bx, double by, double bz) nogil:
    cdef double cx = ay * bz - az * by
    cdef double cy = az * bx - ax * bz
    cdef double cz = ax * by - ay * bx
    return atan2(sqrt(cx * cx + cy * cy + cz * cz), ax * bx + ay * by + az * bz)


cdef inline double _point_arc(double px, double py, double pz,
                              double ax, double ay, double az,
                              double bx, double by, double bz) nogil:
    cdef double nx = ay * bz - az * by
    cdef double ny = az * bx - ax * bz
    cdef double nz = ax * by - ay * bx
    cdef double nn = sqrt(nx * nx + ny * ny + nz * nz)
    cdef double da, db, h, qx, qy, qz, qn, s1, s2
    da = _angle(px, py, pz, ax, ay, az)
    db = _angle(px, py, pz, bx, by, bz)
    if nn < 1e-15:
        return da if da < db else db
    nx /= nn
    ny /= nn
    nz /= nn
    h = px * nx + py * ny + pz * nz
    qx = px - h * nx
    qy = py - h * ny
    qz = pz - h * nz
    qn = sqrt(qx * qx + qy * qy + qz * qz)
    # q inside the minor arc iff (a x q).n >= 0 and (q x b).n >= 0
    s1 = (ay * qz - az * qy) * nx + (az * qx - ax * qz) * ny + (ax * qy - ay * qx) * nz
    s2 = (qy * bz - qz * by) * nx + (qz * bx - qx * bz) * ny + (qx * by - qy * bx) * nz
    if s1 >= 0.0 and s2 >= 0.0 and qn > 0.0:
        return atan2(fabs(h), qn)
    return da if da < db else db


def point_arc_angles(const double[:, ::1] p, const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = p.shape[0], k
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(m):
            o[k] = _point_arc(p[k, 0], p[k, 1], p[k, 2], a[k, 0], a[k, 1], a[k, 2],
                              b[k, 0], b[k, 1], b[k, 2])
    return out


def walk_routes(const double[:, ::1] gens, const long[::1] nbr_ptr, const long[::1] nbr_idx,
                const long[::1] start, const double[:, ::1] src, const double[:, ::1] dst, long max_steps):
    """Cells crossed by each src->dst minor arc, in order, as (ptr, cells)."""
    cdef Py_ssize_t m = start.shape[0], r, j, e
    cdef long cur, nxt, steps, count = 0
    cdef double ax, ay, az, bx, by, bz, ux, uy, uz, un, dot, theta
    cdef double wx, wy, wz, A, B, phi, s, s_cur, s_best
    ptr = np.zeros(m + 1, dtype=np.int64)
    cdef long[::1] p = ptr
    cdef long cap = max(16, 4 * m)
    cells = np.empty(cap, dtype=np.int64)
    cdef long[::1] c = cells
    for r in range(m):
        ax = src[r, 0]; ay = src[r, 1]; az = src[r, 2]
        bx = dst[r, 0]; by = dst[r, 1]; bz = dst[r, 2]
        theta = _angle(ax, ay, az, bx, by, bz)
        dot = ax * bx + ay * by + az * bz
        ux = bx - dot * ax; uy = by - dot * ay; uz = bz - dot * az
        un = sqrt(ux * ux + uy * uy + uz * uz)
        cur = start[r]
        s_cur = 0.0
        if count >= cap:
            cap *= 2
            cells = np.resize(cells, cap)
            c = cells
        c[count] = cur
        count += 1
        if un > 0.0 and theta > 0.0:
            ux /= un; uy /= un; uz /= un
            steps = 0
            while steps < max_steps:
                steps += 1
                s_best = INFINITY
                nxt = -1
                for e in range(nbr_ptr[cur], nbr_ptr[cur + 1]):
                    j = nbr_idx[e]
                    wx = gens[cur, 0] - gens[j, 0]
                    wy = gens[cur, 1] - gens[j, 1]
                    wz = gens[cur, 2] - gens[j, 2]
                    A = wx * ax + wy * ay + wz * az
                    B = wx * ux + wy * uy + wz * uz
                    phi = atan2(B, A)
                    s = fmod(phi + 0.5 * M_PI + 2.0 * M_PI, 2.0 * M_PI)
                    if s > s_cur + ARC_TOL and (s < s_best or (s == s_best and j < nxt)):
                        s_best = s
                        nxt = j
                if nxt < 0 or s_best >= theta:
                    break
                cur = nxt
                s_cur = s_best
                if count >= cap:
                    cap *= 2
                    cells = np.resize(cells, cap)
                    c = cells
                c[count] = cur
                count += 1
        p[r + 1] = count
    return ptr, cells[:count].copy()


def hop_interference(const double[:, ::1] node_unit, const long[::1] cell_ptr, const long[::1] cell_nodes,
                     const long[::1] color_ptr, const long[::1] color_cells,
                     const long[::1] hop_color, const long[::1] hop_tx_cell, const long[::1] hop_rx_node,
                     const double[::1] u, double radius, double alpha):
    """Saturated same-slot interference (unit power) and nearest interferer distance per hop.

    One uniform is consumed per (hop, cell of the hop's color) in hop order, cell order.
    """
    cdef Py_ssize_t h = hop_color.shape[0], k, e
    cdef long col, cell, cnt, pick, node, rx, off = 0
    cdef double rxx, rxy, rxz, d, acc, dmin
    total = np.zeros(h, dtype=np.float64)
    nearest = np.full(h, np.inf, dtype=np.float64)
    cdef double[::1] tot = total
    cdef double[::1] near = nearest
    with nogil:
        for k in range(h):
            col = hop_color[k]
            rx = hop_rx_node[k]
            rxx = node_unit[rx, 0]; rxy = node_unit[rx, 1]; rxz = node_unit[rx, 2]
            acc = 0.0
            dmin = INFINITY
            for e in range(color_ptr[col], color_ptr[col + 1]):
                cell = color_cells[e]
                cnt = cell_ptr[cell + 1] - cell_ptr[cell]
                if cell != hop_tx_cell[k] and cnt > 0:
                    pick = <long> floor(u[off] * cnt)
                    if pick >= cnt:
                        pick = cnt - 1
                    node = cell_nodes[cell_ptr[cell] + pick]
                    if node != rx:
                        d = radius * _angle(rxx, rxy, rxz, node_unit[node, 0],
                                            node_unit[node, 1], node_unit[node, 2])
                        if d <= 0.0:
                            acc = INFINITY
                        else:
                            acc += pow(d, -alpha)
                        if d < dmin:
                            dmin = d
                off += 1
            tot[k] = acc
            near[k] = dmin
    return total, nearest


def polygon_pair_angles(const double[:, ::1] verts, const long[::1] poly_ptr, const long[::1] poly_verts,
                        const long[:, ::1] pairs):
    """Minimum angular distance between boundaries of disjoint convex spherical polygons."""
    cdef Py_ssize_t m = pairs.shape[0], k, side, vi, ei, P, Q
    cdef long a0, a1, b0, b1, na, nb, v, e0, e1
    cdef double best, d
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(m):
            best = INFINITY
            for side in range(2):
                P = pairs[k, side]
                Q = pairs[k, 1 - side]
                a0 = poly_ptr[P]; a1 = poly_ptr[P + 1]
                b0 = poly_ptr[Q]; b1 = poly_ptr[Q + 1]
                nb = b1 - b0
                for vi in range(a0, a1):
                    v = poly_verts[vi]
                    for ei in range(nb):
                        e0 = poly_verts[b0 + ei]
                        e1 = poly_verts[b0 + (ei + 1) % nb]
                        d = _point_arc(verts[v, 0], verts[v, 1], verts[v, 2],
                                       verts[e0, 0], verts[e0, 1], verts[e0, 2],
                                       verts[e1, 0], verts[e1, 1], verts[e1, 2])
                        if d < best:
                            best = d
            o[k] = best
    return out
