"""Pure-Python reference versions of the hot kernels.

Must stay behaviourally identical to ``_ckernels.pyx``; the test suite runs
both and compares.
"""
from __future__ import annotations

import numpy as np


class PebbleGame:
    """Incremental (k, l) pebble game on a growing vertex set.

    Each accepted multi-edge carries a tail vertex.  Throughout the game
    ``pebbles[v] + outdegree(v) == k`` for every vertex.
    """

    def __init__(self, n, k, l=0):
        if k < 1 or l < 0:
            raise ValueError("need k >= 1 and l >= 0")
        self.k = k
        self.l = l
        self.pebbles = [k] * n
        self.edges = []
        self.tails = []
        self._out = [[] for _ in range(n)]

    @property
    def n(self):
        return len(self.pebbles)

    def add_vertex(self, pebbles=None):
        self.pebbles.append(self.k if pebbles is None else pebbles)
        self._out.append([])
        return len(self.pebbles) - 1

    def free_pebbles(self):
        return sum(self.pebbles)

    def _fetch(self, root, blocked):
        # DFS along out-edges for a pebble outside ``blocked``; reverse the path on success
        pebbles, out, edges = self.pebbles, self._out, self.edges
        visited = set(blocked)
        visited.add(root)
        pred = {}
        stack = [root]
        while stack:
            u = stack.pop()
            for f in out[u]:
                for w in edges[f]:
                    if w in visited:
                        continue
                    visited.add(w)
                    pred[w] = (u, f)
                    if pebbles[w] > 0:
                        cur = w
                        while cur != root:
                            u2, f2 = pred[cur]
                            out[u2].remove(f2)
                            out[cur].append(f2)
                            self.tails[f2] = cur
                            cur = u2
                        pebbles[w] -= 1
                        pebbles[root] += 1
                        return True
                    stack.append(w)
        return False

    def gather(self, verts, need):
        """Move pebbles onto ``verts`` until they hold ``need``; False if impossible."""
        verts = tuple(verts)
        pebbles = self.pebbles
        while sum(pebbles[v] for v in verts) < need:
            for v in verts:
                if self._fetch(v, verts):
                    break
            else:
                return False
        return True

    def add_edge(self, verts, copies=1):
        """Try to insert ``copies`` parallel multi-edges on ``verts``."""
        verts = tuple(sorted(verts))
        if not self.gather(verts, self.l + copies):
            return False
        for _ in range(copies):
            for v in verts:
                if self.pebbles[v] > 0:
                    break
            self.pebbles[v] -= 1
            self.edges.append(verts)
            self.tails.append(v)
            self._out[v].append(len(self.edges) - 1)
        return True

    def out_edges(self, v):
        return list(self._out[v])

    def copy(self):
        g = PebbleGame.__new__(PebbleGame)
        g.k, g.l = self.k, self.l
        g.pebbles = list(self.pebbles)
        g.edges = list(self.edges)
        g.tails = list(self.tails)
        g._out = [list(o) for o in self._out]
        return g


def rank_mod_p(a, p):
    """Exact rank of an integer matrix over GF(p)."""
    rows = [[int(x) % p for x in r] for r in np.asarray(a).tolist()]
    if not rows:
        return 0
    ncols = len(rows[0])
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(rows)):
            if rows[i][c]:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][c], p - 2, p)
        pr = [(x * inv) % p for x in rows[r]]
        rows[r] = pr
        for i in range(r + 1, len(rows)):
            f = rows[i][c]
            if f:
                ri = rows[i]
                rows[i] = [(x - f * y) % p for x, y in zip(ri, pr)]
        r += 1
        if r == len(rows):
            break
    return r


def _det_cof(A):
    s = A.shape[0]
    if s == 1:
        return float(A[0, 0]), np.ones((1, 1))
    if s == 2:
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        return float(det), np.array([[A[1, 1], -A[1, 0]], [-A[0, 1], A[0, 0]]])
    C = np.empty_like(A)
    for i in range(s):
        for j in range(s):
            minor = np.delete(np.delete(A, i, axis=0), j, axis=1)
            C[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return float(A[0] @ C[0]), C


def incidence_minors(P, e_ptr, e_idx, X, x_ptr, d, col_of, ncols, with_jac):
    """Incidence minors det((P[e] - x)[:, C(t)]) and their Jacobian.

    Hyperedge ``k`` has vertices ``e_idx[e_ptr[k]:e_ptr[k+1]]`` and pins
    ``X[x_ptr[k]:x_ptr[k+1]]``; rows run over k, then t, then pin.
    ``col_of[v]`` is the free-vertex slot of ``v`` or -1.
    """
    if len(e_idx) and (np.min(e_idx) < 0 or np.max(e_idx) >= len(P) or len(col_of) < len(P)):
        raise ValueError("vertex index out of range")
    if with_jac and len(col_of) and (np.max(col_of) + 1) * (d - 1) > ncols:
        raise ValueError("free-vertex slot beyond the Jacobian width")
    dim = d - 1
    nrows = 0
    for k in range(len(e_ptr) - 1):
        nrows += (d - (e_ptr[k + 1] - e_ptr[k])) * (x_ptr[k + 1] - x_ptr[k])
    F = np.empty(nrows)
    J = np.zeros((nrows, ncols)) if with_jac else None
    r = 0
    for k in range(len(e_ptr) - 1):
        e = e_idx[e_ptr[k]:e_ptr[k + 1]]
        s = len(e)
        Pe = P[e]
        for t in range(d - s):
            cols = list(range(s - 1)) + [s - 1 + t]
            for q in range(x_ptr[k], x_ptr[k + 1]):
                E = (Pe - X[q])[:, cols]
                det, C = _det_cof(E)
                F[r] = det
                if with_jac:
                    for i, v in enumerate(e):
                        slot = col_of[v]
                        if slot >= 0:
                            for c, j in enumerate(cols):
                                J[r, slot * dim + j] = C[i, c]
                r += 1
    return F, J
