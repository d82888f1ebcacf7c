"""Compiled random-walk kernels.

Every kernel draws from a numpy ``Generator`` passed in by the caller, so
results are a deterministic function of the generator state.  Vertex
tables follow the HexDomain layout: ``nbr[v]`` holds the three neighbours of
an interior vertex (rows of boundary vertices are unused).
"""

import numpy as np
from numba import njit as _njit


def njit(**kw):
    return _njit(nogil=True, **kw)


@njit(cache=True)
def _grow(buf, size):
    out = np.empty(max(2 * buf.shape[0], size), dtype=buf.dtype)
    out[: buf.shape[0]] = buf
    return out


@njit(cache=True)
def _step(cum, v, u):
    if u < cum[v, 0]:
        return 0
    if u < cum[v, 1]:
        return 1
    return 2


@njit(cache=True)
def walk_until(nbr, cum, stop, start, rng):
    """Walk from ``start`` with transition table ``cum`` until a stop vertex."""
    path = np.empty(64, dtype=np.int64)
    path[0] = start
    n = 1
    v = start
    while not stop[v]:
        w = nbr[v, _step(cum, v, rng.random())]
        if n == path.shape[0]:
            path = _grow(path, n + 1)
        path[n] = w
        n += 1
        v = w
    return path[:n]


@njit(cache=True)
def loop_erase(path, n_vertices):
    """Last-exit recursion: next vertex follows the last visit of the current one."""
    last = np.full(n_vertices, -1, dtype=np.int64)
    for i in range(path.shape[0]):
        last[path[i]] = i
    out = np.empty(path.shape[0], dtype=np.int64)
    m = 0
    i = 0
    while True:
        out[m] = path[i]
        m += 1
        j = last[path[i]]
        if j == path.shape[0] - 1:
            break
        i = j + 1
    return out[:m]


@njit(cache=True)
def wilson(nbr, interior, order, rng):
    """Wired UST by Wilson's algorithm; ``parent[v]`` is the tree step from v."""
    n = interior.shape[0]
    in_tree = np.empty(n, dtype=np.bool_)
    for v in range(n):
        in_tree[v] = not interior[v]
    nxt = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    for s in order:
        u = s
        while not in_tree[u]:
            nxt[u] = nbr[u, int(rng.random() * 3.0)]
            u = nxt[u]
        u = s
        while not in_tree[u]:
            in_tree[u] = True
            parent[u] = nxt[u]
            u = nxt[u]
    return parent


@njit(cache=True)
def wilson_codes(nbr, interior, order, n_samples, rng):
    """Encode each sampled tree by its base-3 vector of parent directions."""
    iv = np.flatnonzero(interior)
    codes = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        parent = wilson(nbr, interior, order, rng)
        c = 0
        for v in iv:
            k = 0
            while nbr[v, k] != parent[v]:
                k += 1
            c = 3 * c + k
        codes[i] = c
    return codes


@njit(cache=True)
def exit_batch(nbr, cum, stop, start, n_samples, rng):
    """Last interior and first stop vertex of independent walks from ``start``."""
    out = np.empty((n_samples, 2), dtype=np.int64)
    for i in range(n_samples):
        prev = start
        v = start
        while not stop[v]:
            prev = v
            v = nbr[v, _step(cum, v, rng.random())]
        out[i, 0] = prev
        out[i, 1] = v
    return out


@njit(cache=True)
def _uniform_walk(nbr, stop, start, rng):
    path = np.empty(64, dtype=np.int64)
    path[0] = start
    n = 1
    v = start
    while not stop[v]:
        w = nbr[v, int(rng.random() * 3.0)]
        if n == path.shape[0]:
            path = _grow(path, n + 1)
        path[n] = w
        n += 1
        v = w
    return path[:n]


@njit(cache=True)
def _branch_to(nbr, stop, start, rng, n_vertices):
    """Loop-erased uniform walk from ``start`` until a stop vertex."""
    return loop_erase(_uniform_walk(nbr, stop, start, rng), n_vertices)


@njit(cache=True)
def _append(flat, used, seg):
    if used + seg.shape[0] > flat.shape[0]:
        flat = _grow(flat, used + seg.shape[0])
    flat[used: used + seg.shape[0]] = seg
    return flat, used + seg.shape[0]


@njit(cache=True)
def tripod_rejection_batch(nbr, interior, x1, x2, e3_in, e3_out, n_samples, max_trials, rng):
    """Wilson sweep from x1 then x2; keep the pair when both branches exit via e3.

    Returns (eta1 flat, eta1 offsets, eta2 flat, eta2 offsets, trials used);
    when the budget runs out the last entry is -(accepted + 1).
    """
    n = interior.shape[0]
    stop = np.empty(n, dtype=np.bool_)
    f1 = np.empty(1024, dtype=np.int64)
    f2 = np.empty(1024, dtype=np.int64)
    o1 = np.zeros(n_samples + 1, dtype=np.int64)
    o2 = np.zeros(n_samples + 1, dtype=np.int64)
    u1 = 0
    u2 = 0
    trials = 0
    for i in range(n_samples):
        while True:
            trials += 1
            if trials > max_trials:
                return f1[:u1], o1, f2[:u2], o2, -(i + 1)
            for v in range(n):
                stop[v] = not interior[v]
            eta1 = _branch_to(nbr, stop, x1, rng, n)
            m = eta1.shape[0]
            if eta1[m - 2] != e3_in or eta1[m - 1] != e3_out:
                continue
            for k in range(m - 1):
                stop[eta1[k]] = True
            if stop[x2]:
                eta2 = np.array([x2], dtype=np.int64)
            else:
                eta2 = _branch_to(nbr, stop, x2, rng, n)
                if not interior[eta2[eta2.shape[0] - 1]]:
                    continue
            break
        f1, u1 = _append(f1, u1, eta1)
        f2, u2 = _append(f2, u2, eta2)
        o1[i + 1] = u1
        o2[i + 1] = u2
    return f1[:u1], o1, f2[:u2], o2, trials


@njit(cache=True)
def tripod_htransform_batch(nbr, cum1, interior, x1, x2, n_samples, max_trials, rng):
    """First branch from the e3-conditioned walk, then a uniform walk from x2
    that must hit it; a miss discards both, which reweights the first branch
    by its probability of being hit."""
    n = interior.shape[0]
    stop = np.empty(n, dtype=np.bool_)
    f1 = np.empty(1024, dtype=np.int64)
    f2 = np.empty(1024, dtype=np.int64)
    o1 = np.zeros(n_samples + 1, dtype=np.int64)
    o2 = np.zeros(n_samples + 1, dtype=np.int64)
    u1 = 0
    u2 = 0
    trials = 0
    for i in range(n_samples):
        while True:
            trials += 1
            if trials > max_trials:
                return f1[:u1], o1, f2[:u2], o2, -(i + 1)
            for v in range(n):
                stop[v] = not interior[v]
            eta1 = loop_erase(walk_until(nbr, cum1, stop, x1, rng), n)
            for k in range(eta1.shape[0] - 1):
                stop[eta1[k]] = True
            if stop[x2]:
                eta2 = np.array([x2], dtype=np.int64)
                break
            walk = _uniform_walk(nbr, stop, x2, rng)
            if interior[walk[walk.shape[0] - 1]]:
                eta2 = loop_erase(walk, n)
                break
        f1, u1 = _append(f1, u1, eta1)
        f2, u2 = _append(f2, u2, eta2)
        o1[i + 1] = u1
        o2[i + 1] = u2
    return f1[:u1], o1, f2[:u2], o2, trials


@njit(cache=True)
def joins_branch_batch(nbr, cum1, interior, x1, z, n_samples, rng):
    """Count samples in which the branch from z merges into the e3-conditioned
    branch from x1 (equivalently, z's branch exits through e3)."""
    n = interior.shape[0]
    stop = np.empty(n, dtype=np.bool_)
    hits = 0
    for i in range(n_samples):
        for v in range(n):
            stop[v] = not interior[v]
        eta1 = loop_erase(walk_until(nbr, cum1, stop, x1, rng), n)
        for k in range(eta1.shape[0] - 1):
            stop[eta1[k]] = True
        v = z
        while not stop[v]:
            v = nbr[v, int(rng.random() * 3.0)]
        if interior[v]:
            hits += 1
    return hits
