# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled image-source traversal (depth-first, explicit stack)."""
import numpy as np
from libc.math cimport sqrt


cdef inline double _dot(const double[:, ::1] n, int f, double x, double y, double z) nogil:
    return n[f, 0] * x + n[f, 1] * y + n[f, 2] * z


cdef bint _visible(int k, double[:, ::1] pos, long[::1] face,
                   const double[:, ::1] normals, const double[::1] offsets,
                   const double[:, :, ::1] edge_n, const double[:, ::1] edge_o,
                   const int[::1] nverts, double rx, double ry, double rz,
                   double eps) nogil:
    cdef double px = rx, py = ry, pz = rz
    cdef double sp, si, t, qx, qy, qz, d
    cdef int j, f, e
    for j in range(k, 0, -1):
        f = <int>face[j]
        sp = _dot(normals, f, px, py, pz) + offsets[f]
        si = _dot(normals, f, pos[j, 0], pos[j, 1], pos[j, 2]) + offsets[f]
        if not (sp > 0.0 and si < 0.0):
            return False
        t = sp / (sp - si)
        qx = px + t * (pos[j, 0] - px)
        qy = py + t * (pos[j, 1] - py)
        qz = pz + t * (pos[j, 2] - pz)
        for e in range(nverts[f]):
            d = (edge_n[f, e, 0] * qx + edge_n[f, e, 1] * qy
                 + edge_n[f, e, 2] * qz + edge_o[f, e])
            if d < -eps:
                return False
        px = qx
        py = qy
        pz = qz
    return True


def ism_traverse(const double[:, ::1] normals, const double[::1] offsets,
                 const double[:, :, ::1] edge_n, const double[:, ::1] edge_o,
                 const int[::1] nverts, const double[::1] factors,
                 const double[::1] source, const double[::1] receiver,
                 int max_order, double max_dist, double min_amp,
                 int invisible_limit, double eps=1e-9):
    cdef int n_faces = normals.shape[0]
    cdef int width = max_order if max_order > 0 else 1
    cdef int depth_cap = max_order + 1
    pos_arr = np.zeros((depth_cap, 3))
    face_arr = np.full(depth_cap, -1, dtype=np.int64)
    nxt_arr = np.zeros(depth_cap, dtype=np.int64)
    fac_arr = np.zeros(depth_cap)
    run_arr = np.zeros(depth_cap, dtype=np.int64)
    cdef double[:, ::1] pos = pos_arr
    cdef long[::1] face = face_arr
    cdef long[::1] nxt = nxt_arr
    cdef double[::1] fac = fac_arr
    cdef long[::1] run = run_arr

    cdef double rx = receiver[0], ry = receiver[1], rz = receiver[2]
    cdef double s, cx, cy, cz, dist, cf
    cdef int depth, f, k, j
    cdef bint vis

    out_pos = [(source[0], source[1], source[2])]
    out_order = [0]
    out_seq = [()]
    out_amp = [1.0]

    pos[0, 0] = source[0]
    pos[0, 1] = source[1]
    pos[0, 2] = source[2]
    fac[0] = 1.0
    depth = 0
    while depth >= 0:
        if depth == max_order or run[depth] > invisible_limit or nxt[depth] >= n_faces:
            depth -= 1
            continue
        f = <int>nxt[depth]
        nxt[depth] = f + 1
        if f == face[depth]:
            continue
        s = _dot(normals, f, pos[depth, 0], pos[depth, 1], pos[depth, 2]) + offsets[f]
        if s <= eps:
            continue
        cx = pos[depth, 0] - 2.0 * s * normals[f, 0]
        cy = pos[depth, 1] - 2.0 * s * normals[f, 1]
        cz = pos[depth, 2] - 2.0 * s * normals[f, 2]
        dist = sqrt((cx - rx) * (cx - rx) + (cy - ry) * (cy - ry) + (cz - rz) * (cz - rz))
        if dist > max_dist:
            continue
        cf = fac[depth] * factors[f]
        if not (cf > min_amp * dist):
            continue
        k = depth + 1
        pos[k, 0] = cx
        pos[k, 1] = cy
        pos[k, 2] = cz
        face[k] = f
        fac[k] = cf
        nxt[k] = 0
        vis = _visible(k, pos, face, normals, offsets, edge_n, edge_o, nverts,
                       rx, ry, rz, eps)
        if vis:
            run[k] = 0
            out_pos.append((cx, cy, cz))
            out_order.append(k)
            out_seq.append(tuple([face[j] for j in range(1, k + 1)]))
            out_amp.append(cf)
        else:
            run[k] = run[depth] + 1
        depth = k

    m = len(out_pos)
    seq = np.full((m, width), -1, dtype=np.int64)
    for j in range(m):
        for k in range(len(out_seq[j])):
            seq[j, k] = out_seq[j][k]
    return (np.asarray(out_pos, dtype=float), np.asarray(out_order, dtype=np.int64),
            seq, np.asarray(out_amp, dtype=float))
