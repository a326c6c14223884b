"""Exact network simplex for dense transportation problems.

Solves  min sum_ij C[i,j] f[i,j]  over  f >= 0  with row sums a and
column sums b (sum a == sum b).  The solver keeps the classical
spanning-tree basis over the bipartite node set, prices candidate cells
in rotating blocks, and updates only the re-rooted subtree after each
pivot.  It returns the optimal basic flows together with the dual
potentials, which certify optimality through complementary slackness.

Degeneracy is handled by the leaving-arc rule "last blocking arc along
the cycle walk"; a generous pivot cap turns any pathological cycling
into a hard error instead of a silent hang.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_ITERATION_LIMIT = 1
STATUS_BAD_BASIS = 2


@njit(cache=True)
def _northwest_basis(a, b, bi, bj, bf):  # pragma: no cover - numba
    n = a.shape[0]
    m = b.shape[0]
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    for t in range(n + m - 1):
        bi[t] = i
        bj[t] = j
        f = ra[i] if ra[i] <= rb[j] else rb[j]
        bf[t] = f
        ra[i] -= f
        rb[j] -= f
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= 0.0:
            i += 1
        else:
            j += 1


@njit(cache=True, inline="always")
def _detach(v, parent, first_child, next_sib, prev_sib):  # pragma: no cover - numba
    p = parent[v]
    if p >= 0:
        if prev_sib[v] == -1:
            first_child[p] = next_sib[v]
        else:
            next_sib[prev_sib[v]] = next_sib[v]
        if next_sib[v] != -1:
            prev_sib[next_sib[v]] = prev_sib[v]
    next_sib[v] = -1
    prev_sib[v] = -1


@njit(cache=True, inline="always")
def _attach(v, p, parent, first_child, next_sib, prev_sib):  # pragma: no cover - numba
    parent[v] = p
    c = first_child[p]
    next_sib[v] = c
    prev_sib[v] = -1
    if c != -1:
        prev_sib[c] = v
    first_child[p] = v


@njit(cache=True)
def _build_tree(
    n, m, C, bi, bj, parent, parc, depth, pot, first_child, next_sib, prev_sib, deg, off,
    nbr_node, nbr_arc, stack,
):  # pragma: no cover - numba
    V = n + m
    E = V - 1
    for v in range(V):
        deg[v] = 0
        first_child[v] = -1
        next_sib[v] = -1
        prev_sib[v] = -1
    for t in range(E):
        deg[bi[t]] += 1
        deg[n + bj[t]] += 1
    acc = 0
    for v in range(V):
        off[v] = acc
        acc += deg[v]
        deg[v] = 0
    for t in range(E):
        u = bi[t]
        w = n + bj[t]
        nbr_node[off[u] + deg[u]] = w
        nbr_arc[off[u] + deg[u]] = t
        deg[u] += 1
        nbr_node[off[w] + deg[w]] = u
        nbr_arc[off[w] + deg[w]] = t
        deg[w] += 1
    for v in range(V):
        parent[v] = -2  # unvisited marker
    parent[0] = -1
    parc[0] = -1
    depth[0] = 0
    pot[0] = 0.0
    stack[0] = 0
    top = 1
    seen = 1
    while top > 0:
        top -= 1
        v = stack[top]
        for q in range(off[v], off[v] + deg[v]):
            w = nbr_node[q]
            if parent[w] == -2:
                t = nbr_arc[q]
                parent[w] = -3  # claimed; real parent set by _attach
                _attach(w, v, parent, first_child, next_sib, prev_sib)
                parc[w] = t
                depth[w] = depth[v] + 1
                pot[w] = C[bi[t], bj[t]] - pot[v]
                stack[top] = w
                top += 1
                seen += 1
    return seen == V


@njit(cache=True)
def network_simplex(a, b, C, block_size, max_pivots, tol):  # pragma: no cover - numba
    """Return (flows bi, bj, bf, potentials, status, pivots)."""
    n = a.shape[0]
    m = b.shape[0]
    V = n + m
    E = V - 1
    nm = n * m

    bi = np.empty(E, np.int64)
    bj = np.empty(E, np.int64)
    bf = np.empty(E, np.float64)
    _northwest_basis(a, b, bi, bj, bf)

    parent = np.empty(V, np.int64)
    parc = np.empty(V, np.int64)
    depth = np.empty(V, np.int64)
    pot = np.empty(V, np.float64)  # pot[row i] = u_i, pot[n + j] = v_j
    first_child = np.empty(V, np.int64)
    next_sib = np.empty(V, np.int64)
    prev_sib = np.empty(V, np.int64)
    deg = np.empty(V, np.int64)
    off = np.empty(V, np.int64)
    nbr_node = np.empty(2 * E, np.int64)
    nbr_arc = np.empty(2 * E, np.int64)
    stack = np.empty(V, np.int64)
    cyc_arc = np.empty(V + 1, np.int64)
    cyc_sign = np.empty(V + 1, np.int64)
    patha = np.empty(V, np.int64)
    pathb = np.empty(V, np.int64)
    chain = np.empty(V, np.int64)

    ok = _build_tree(
        n, m, C, bi, bj, parent, parc, depth, pot, first_child, next_sib, prev_sib,
        deg, off, nbr_node, nbr_arc, stack,
    )
    if not ok:
        return bi, bj, bf, pot, STATUS_BAD_BASIS, 0

    cursor = 0
    pivots = 0
    while True:
        # --- pricing: rotating block search for a violated cell
        best = -tol
        ei = -1
        ej = -1
        scanned = 0
        while scanned < nm:
            count = block_size if block_size < nm - scanned else nm - scanned
            for q in range(count):
                idx = cursor + q
                if idx >= nm:
                    idx -= nm
                i = idx // m
                j = idx - i * m
                r = C[i, j] - pot[i] - pot[n + j]
                if r < best:
                    best = r
                    ei = i
                    ej = j
            cursor += count
            if cursor >= nm:
                cursor -= nm
            scanned += count
            if ei >= 0:
                break
        if ei < 0:
            return bi, bj, bf, pot, STATUS_OPTIMAL, pivots

        pivots += 1
        if pivots > max_pivots:
            return bi, bj, bf, pot, STATUS_ITERATION_LIMIT, pivots

        # --- unique cycle closed by the entering cell (ei, ej)
        x = ei
        y = n + ej
        na = 0
        nb = 0
        while depth[x] > depth[y]:
            patha[na] = parc[x]
            na += 1
            x = parent[x]
        while depth[y] > depth[x]:
            pathb[nb] = parc[y]
            nb += 1
            y = parent[y]
        while x != y:
            patha[na] = parc[x]
            na += 1
            x = parent[x]
            pathb[nb] = parc[y]
            nb += 1
            y = parent[y]

        # loop walk: entering cell, then up from the column side, then down
        # to the row side; tree arcs alternate signs starting with -.
        ncyc = 0
        for q in range(nb):
            cyc_arc[ncyc] = pathb[q]
            cyc_sign[ncyc] = -1 if (ncyc % 2 == 0) else 1
            ncyc += 1
        for q in range(na - 1, -1, -1):
            cyc_arc[ncyc] = patha[q]
            cyc_sign[ncyc] = -1 if (ncyc % 2 == 0) else 1
            ncyc += 1

        theta = np.inf
        leave = -1
        for q in range(ncyc):
            if cyc_sign[q] < 0:
                f = bf[cyc_arc[q]]
                if f < theta:
                    theta = f
        for q in range(ncyc):
            if cyc_sign[q] < 0 and bf[cyc_arc[q]] <= theta:
                leave = q  # last blocking arc along the walk
        if leave < 0:
            return bi, bj, bf, pot, STATUS_BAD_BASIS, pivots

        slot = cyc_arc[leave]
        for q in range(ncyc):
            t = cyc_arc[q]
            if cyc_sign[q] < 0:
                bf[t] -= theta
            else:
                bf[t] += theta

        # --- structural update: re-root the detached subtree
        # child endpoint of the leaving arc (the side that gets detached)
        ri = bi[slot]
        cj = n + bj[slot]
        z = ri if parc[ri] == slot else cj
        # entering endpoint inside the detached part / in the main tree
        if leave < nb:
            w = n + ej
            rmain = ei
        else:
            w = ei
            rmain = n + ej

        bi[slot] = ei
        bj[slot] = ej
        bf[slot] = theta

        # collect the chain w -> ... -> z (parents inside the detached part)
        k = 0
        node = w
        while node != z:
            chain[k] = node
            k += 1
            node = parent[node]
        chain[k] = z

        _detach(z, parent, first_child, next_sib, prev_sib)
        for q in range(k):
            _detach(chain[q], parent, first_child, next_sib, prev_sib)
        # reverse parent pointers along the chain; the entering arc takes
        # the basis slot of the leaving arc
        old_arc_prev = parc[w]
        _attach(w, rmain, parent, first_child, next_sib, prev_sib)
        parc[w] = slot
        for q in range(1, k + 1):
            node = chain[q]
            tmp = parc[node]
            _attach(node, chain[q - 1], parent, first_child, next_sib, prev_sib)
            parc[node] = old_arc_prev
            old_arc_prev = tmp

        # recompute depth and potentials on the re-rooted subtree only
        top = 0
        stack[top] = w
        top += 1
        while top > 0:
            top -= 1
            v2 = stack[top]
            p2 = parent[v2]
            t2 = parc[v2]
            depth[v2] = depth[p2] + 1
            pot[v2] = C[bi[t2], bj[t2]] - pot[p2]
            c2 = first_child[v2]
            while c2 != -1:
                stack[top] = c2
                top += 1
                c2 = next_sib[c2]


def solve_dense(
    a: np.ndarray,
    b: np.ndarray,
    C: np.ndarray,
    block_size: int | None = None,
    max_pivots: int | None = None,
    tol: float | None = None,
    row_key: np.ndarray | None = None,
    col_key: np.ndarray | None = None,
):
    """Python-facing wrapper; returns (flows_i, flows_j, flows, u, v, cost).

    ``row_key`` / ``col_key`` (any 1-d sort keys, e.g. a coordinate of the
    underlying points) warm-start the basis with a monotone matching
    along the keys, which typically cuts the pivot count several-fold.
    The solution itself does not depend on them.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, m = C.shape
    if a.shape[0] != n or b.shape[0] != m:
        raise ValueError("marginal sizes must match the cost matrix")
    if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
        raise ValueError("marginals must carry equal total mass")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("marginal weights must be positive")
    rperm = None
    cperm = None
    if row_key is not None and col_key is not None:
        rperm = np.argsort(np.asarray(row_key), kind="stable")
        cperm = np.argsort(np.asarray(col_key), kind="stable")
        a = a[rperm]
        b = b[cperm]
        C = np.ascontiguousarray(C[np.ix_(rperm, cperm)])
    nm = n * m
    if block_size is None:
        block_size = min(nm, max(256, int(np.sqrt(nm))))
    if max_pivots is None:
        max_pivots = 400 * (n + m) + 40000
    if tol is None:
        tol = 1e-11 * (1.0 + float(np.abs(C).max()))
    bi, bj, bf, pot, status, pivots = network_simplex(
        a, b, C, block_size, max_pivots, tol
    )
    if status == STATUS_ITERATION_LIMIT:
        raise RuntimeError(f"network simplex hit the pivot cap ({pivots} pivots)")
    if status == STATUS_BAD_BASIS:
        raise RuntimeError("network simplex lost tree connectivity (degenerate basis)")
    cost = float(np.sum(bf * C[bi, bj]))
    u = pot[:n].copy()
    v = pot[n:].copy()
    if rperm is not None:
        bi = rperm[bi]
        bj = cperm[bj]
        u_full = np.empty(n)
        v_full = np.empty(m)
        u_full[rperm] = u
        v_full[cperm] = v
        u, v = u_full, v_full
    return bi, bj, bf, u, v, cost
