"""Pure numpy image-source traversal (fallback for the compiled kernel).

Breadth-first: every order is expanded as one vectorized batch, and the
backtracking visibility test walks the parent pointers of the whole batch
at once.  The pruning rules are identical to ``_ism_ext.ism_traverse``.
"""
import numpy as np


def _visible(level_pos, level_face, level_parent, idx, receiver, normals,
             offsets, edge_n, edge_o, nverts, eps):
    """Backtracking visibility for the nodes ``idx`` of the deepest level."""
    n = len(idx)
    ok = np.ones(n, dtype=bool)
    p = np.broadcast_to(receiver, (n, 3)).copy()
    depth = len(level_pos) - 1
    cur = idx
    for j in range(depth, 0, -1):
        img = level_pos[j][cur]
        f = level_face[j][cur]
        nf = normals[f]
        sp = np.einsum("ij,ij->i", nf, p) + offsets[f]
        si = np.einsum("ij,ij->i", nf, img) + offsets[f]
        good = (sp > 0.0) & (si < 0.0)
        denom = np.where(good, sp - si, 1.0)
        t = np.where(good, sp / denom, 0.0)
        q = p + t[:, None] * (img - p)
        inside = np.ones(n, dtype=bool)
        for e in range(edge_n.shape[1]):
            active = e < nverts[f]
            d = np.einsum("ij,ij->i", edge_n[f, e], q) + edge_o[f, e]
            inside &= ~active | (d >= -eps)
        ok &= good & inside
        p = q
        cur = level_parent[j][cur]
    return ok


def ism_traverse(normals, offsets, edge_n, edge_o, nverts, factors, source,
                 receiver, max_order, max_dist, min_amp, invisible_limit,
                 eps=1e-9):
    """Enumerate visible image sources.

    Returns
    -------
    positions : (M, 3) ndarray
    orders : (M,) ndarray of int
    sequences : (M, max(max_order, 1)) ndarray of int, -1 padded, source side first
    amplitudes : (M,) ndarray, cumulative reflection factor
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    factors = np.asarray(factors, dtype=float)
    source = np.asarray(source, dtype=float)
    receiver = np.asarray(receiver, dtype=float)
    n_faces = normals.shape[0]
    width = max(max_order, 1)

    level_pos = [source[None, :].copy()]
    level_face = [np.array([-1])]
    level_parent = [np.array([-1])]
    level_fac = [np.array([1.0])]
    level_run = [np.array([0])]
    level_vis = [np.array([True])]

    for k in range(1, max_order + 1):
        prev_pos = level_pos[-1]
        expand = np.nonzero(level_run[-1] <= invisible_limit)[0]
        if expand.size == 0:
            break
        pp = prev_pos[expand]
        pface = level_face[-1][expand]
        pfac = level_fac[-1][expand]
        chunks = []
        # faces in ascending order per parent keeps the same child order as the DFS kernel
        for f in range(n_faces):
            s = pp @ normals[f] + offsets[f]
            keep = (s > eps) & (pface != f)
            if not keep.any():
                continue
            sel = np.nonzero(keep)[0]
            child = pp[sel] - 2.0 * s[sel, None] * normals[f]
            dist = np.linalg.norm(child - receiver, axis=1)
            cf = pfac[sel] * factors[f]
            ok = (dist <= max_dist) & (cf > min_amp * dist)
            sel = sel[ok]
            if sel.size:
                chunks.append((expand[sel], np.full(sel.size, f), child[ok], cf[ok]))
        if not chunks:
            break
        parent = np.concatenate([c[0] for c in chunks])
        face = np.concatenate([c[1] for c in chunks])
        pos = np.concatenate([c[2] for c in chunks])
        fac = np.concatenate([c[3] for c in chunks])
        # stable order: by parent, then face
        order = np.lexsort((face, parent))
        parent, face, pos, fac = parent[order], face[order], pos[order], fac[order]
        level_pos.append(pos)
        level_face.append(face)
        level_parent.append(parent)
        level_fac.append(fac)
        vis = _visible(level_pos, level_face, level_parent, np.arange(len(pos)),
                       receiver, normals, offsets, edge_n, edge_o, nverts, eps)
        run = np.where(vis, 0, level_run[-1][parent] + 1)
        level_vis.append(vis)
        level_run.append(run)

    positions, orders, seqs, amps = [], [], [], []
    for k in range(len(level_pos)):
        sel = np.nonzero(level_vis[k])[0]
        if sel.size == 0:
            continue
        seq = np.full((sel.size, width), -1, dtype=np.int64)
        cur = sel
        for j in range(k, 0, -1):
            seq[:, j - 1] = level_face[j][cur]
            cur = level_parent[j][cur]
        positions.append(level_pos[k][sel])
        orders.append(np.full(sel.size, k, dtype=np.int64))
        seqs.append(seq)
        amps.append(level_fac[k][sel])
    return (np.concatenate(positions), np.concatenate(orders),
            np.concatenate(seqs), np.concatenate(amps))
