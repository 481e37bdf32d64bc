# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled pebble game and GF(p) rank; mirrors _pykernels move for move."""

from libcpp.vector cimport vector
from libc.stdint cimport uint64_t, int64_t

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    static inline unsigned long long rk_mulmod(unsigned long long a, unsigned long long b,
                                               unsigned long long p) {
        return (unsigned long long)(((unsigned __int128)a * b) % p);
    }
    """
    unsigned long long rk_mulmod(unsigned long long a, unsigned long long b, unsigned long long p) nogil


cdef class PebbleGame:
    cdef public int k, l
    cdef vector[int] _pebbles
    cdef vector[vector[int]] _edges
    cdef vector[int] _tails
    cdef vector[vector[int]] _out
    # scratch space for the search
    cdef vector[int] _mark, _pred_v, _pred_e
    cdef int _stamp

    def __init__(self, int n, int k, int l=0):
        if k < 1 or l < 0:
            raise ValueError("need k >= 1 and l >= 0")
        self.k = k
        self.l = l
        self._stamp = 0
        cdef int i
        for i in range(n):
            self._push_vertex(k)

    cdef void _push_vertex(self, int peb):
        cdef vector[int] empty
        self._pebbles.push_back(peb)
        self._out.push_back(empty)
        self._mark.push_back(0)
        self._pred_v.push_back(-1)
        self._pred_e.push_back(-1)

    @property
    def n(self):
        return self._pebbles.size()

    @property
    def pebbles(self):
        return [self._pebbles[i] for i in range(self._pebbles.size())]

    @property
    def tails(self):
        return [self._tails[i] for i in range(self._tails.size())]

    @property
    def edges(self):
        return [tuple(self._edges[i]) for i in range(self._edges.size())]

    def add_vertex(self, pebbles=None):
        self._push_vertex(self.k if pebbles is None else pebbles)
        return self._pebbles.size() - 1

    def free_pebbles(self):
        cdef long s = 0
        cdef size_t i
        for i in range(self._pebbles.size()):
            s += self._pebbles[i]
        return s

    def out_edges(self, int v):
        return [self._out[v][i] for i in range(self._out[v].size())]

    cdef bint _fetch(self, int root, vector[int]& blocked):
        cdef vector[int] stack
        cdef int u, f, w, cur, u2, f2
        cdef size_t i, j, q
        self._stamp += 1
        cdef int stamp = self._stamp
        for i in range(blocked.size()):
            self._mark[blocked[i]] = stamp
        self._mark[root] = stamp
        stack.push_back(root)
        while stack.size() > 0:
            u = stack.back()
            stack.pop_back()
            for i in range(self._out[u].size()):
                f = self._out[u][i]
                for j in range(self._edges[f].size()):
                    w = self._edges[f][j]
                    if self._mark[w] == stamp:
                        continue
                    self._mark[w] = stamp
                    self._pred_v[w] = u
                    self._pred_e[w] = f
                    if self._pebbles[w] > 0:
                        cur = w
                        while cur != root:
                            u2 = self._pred_v[cur]
                            f2 = self._pred_e[cur]
                            for q in range(self._out[u2].size()):
                                if self._out[u2][q] == f2:
                                    self._out[u2].erase(self._out[u2].begin() + q)
                                    break
                            self._out[cur].push_back(f2)
                            self._tails[f2] = cur
                            cur = u2
                        self._pebbles[w] -= 1
                        self._pebbles[root] += 1
                        return True
                    stack.push_back(w)
        return False

    cdef bint _gather(self, vector[int]& verts, int need):
        cdef int have
        cdef size_t i
        cdef bint moved
        while True:
            have = 0
            for i in range(verts.size()):
                have += self._pebbles[verts[i]]
            if have >= need:
                return True
            moved = False
            for i in range(verts.size()):
                if self._fetch(verts[i], verts):
                    moved = True
                    break
            if not moved:
                return False

    def gather(self, verts, int need):
        cdef vector[int] vv = list(verts)
        return self._gather(vv, need)

    def add_edge(self, verts, int copies=1):
        cdef vector[int] vv = sorted(verts)
        cdef int c, v = -1
        cdef size_t i
        if not self._gather(vv, self.l + copies):
            return False
        for c in range(copies):
            for i in range(vv.size()):
                if self._pebbles[vv[i]] > 0:
                    v = vv[i]
                    break
            self._pebbles[v] -= 1
            self._edges.push_back(vv)
            self._tails.push_back(v)
            self._out[v].push_back(self._edges.size() - 1)
        return True

    def copy(self):
        cdef PebbleGame g = PebbleGame.__new__(PebbleGame, 0, self.k, self.l)
        g.k = self.k
        g.l = self.l
        g._pebbles = self._pebbles
        g._edges = self._edges
        g._tails = self._tails
        g._out = self._out
        g._mark = self._mark
        g._pred_v = self._pred_v
        g._pred_e = self._pred_e
        g._stamp = self._stamp
        return g


cdef uint64_t _powmod(uint64_t a, uint64_t e, uint64_t p) nogil:
    cdef uint64_t r = 1
    a %= p
    while e:
        if e & 1:
            r = rk_mulmod(r, a, p)
        a = rk_mulmod(a, a, p)
        e >>= 1
    return r


def rank_mod_p(a, p):
    """Exact rank of an integer matrix over GF(p), p < 2**63."""
    cdef uint64_t P = p
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        return 0
    if arr.dtype == object or arr.dtype.kind not in "iu":
        arr = np.array([[int(x) % p for x in row] for row in arr.tolist()], dtype=np.uint64)
    else:
        arr = np.mod(arr.astype(np.int64) if arr.dtype.kind == "i" else arr, p).astype(np.uint64)
    cdef uint64_t[:, ::1] m = np.ascontiguousarray(arr)
    cdef Py_ssize_t nr = m.shape[0], nc = m.shape[1]
    cdef Py_ssize_t r = 0, c, i, j, piv
    cdef uint64_t inv, f, t
    with nogil:
        for c in range(nc):
            piv = -1
            for i in range(r, nr):
                if m[i, c] != 0:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != r:
                for j in range(nc):
                    t = m[r, j]
                    m[r, j] = m[piv, j]
                    m[piv, j] = t
            inv = _powmod(m[r, c], P - 2, P)
            for j in range(nc):
                m[r, j] = rk_mulmod(m[r, j], inv, P)
            for i in range(r + 1, nr):
                f = m[i, c]
                if f != 0:
                    for j in range(c, nc):
                        m[i, j] = (m[i, j] + P - rk_mulmod(f, m[r, j], P)) % P
            r += 1
            if r == nr:
                break
    return r


cdef double _det_small(double* A, int s, int lda) nogil:
    # Gaussian elimination with partial pivoting on a scratch copy
    cdef double M[16 * 16]
    cdef int i, j, c, piv
    cdef double det = 1.0, f, tmp, best
    for i in range(s):
        for j in range(s):
            M[i * 16 + j] = A[i * lda + j]
    for c in range(s):
        piv = c
        best = M[c * 16 + c] if M[c * 16 + c] >= 0 else -M[c * 16 + c]
        for i in range(c + 1, s):
            tmp = M[i * 16 + c] if M[i * 16 + c] >= 0 else -M[i * 16 + c]
            if tmp > best:
                best = tmp
                piv = i
        if best == 0.0:
            return 0.0
        if piv != c:
            for j in range(s):
                tmp = M[c * 16 + j]
                M[c * 16 + j] = M[piv * 16 + j]
                M[piv * 16 + j] = tmp
            det = -det
        det *= M[c * 16 + c]
        for i in range(c + 1, s):
            f = M[i * 16 + c] / M[c * 16 + c]
            for j in range(c, s):
                M[i * 16 + j] -= f * M[c * 16 + j]
    return det


cdef void _det_cof_small(double* E, int s, double* det, double* C) nogil:
    cdef double minor[16 * 16]
    cdef int i, j, a, b, ra, cb
    if s == 1:
        det[0] = E[0]
        C[0] = 1.0
        return
    if s == 2:
        det[0] = E[0] * E[17] - E[1] * E[16]
        C[0] = E[17]
        C[1] = -E[16]
        C[16] = -E[1]
        C[17] = E[0]
        return
    for i in range(s):
        for j in range(s):
            ra = 0
            for a in range(s):
                if a == i:
                    continue
                cb = 0
                for b in range(s):
                    if b == j:
                        continue
                    minor[ra * 16 + cb] = E[a * 16 + b]
                    cb += 1
                ra += 1
            C[i * 16 + j] = _det_small(minor, s - 1, 16) * (1.0 if (i + j) % 2 == 0 else -1.0)
    det[0] = 0.0
    for j in range(s):
        det[0] += E[j] * C[j]


def incidence_minors(P, e_ptr, e_idx, X, x_ptr, int d, col_of, Py_ssize_t ncols, bint with_jac):
    """Compiled twin of the pure-Python ``incidence_minors``."""
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, d - 1)
    cdef long[::1] ep = np.ascontiguousarray(e_ptr, dtype=np.int64)
    cdef long[::1] ei = np.ascontiguousarray(e_idx, dtype=np.int64)
    cdef long[::1] xp = np.ascontiguousarray(x_ptr, dtype=np.int64)
    cdef long[::1] co = np.ascontiguousarray(col_of, dtype=np.int64)
    cdef int dim = d - 1
    cdef Py_ssize_t nedges = ep.shape[0] - 1, k, q, r = 0, nrows = 0
    cdef int s, t, i, c, v, slot, j
    for k in range(nedges):
        nrows += (d - (ep[k + 1] - ep[k])) * (xp[k + 1] - xp[k])
    if d - 1 > 16:
        raise ValueError("compiled kernel supports d <= 17")
    if len(e_idx) and (np.min(e_idx) < 0 or np.max(e_idx) >= len(P) or len(col_of) < len(P)):
        raise ValueError("vertex index out of range")
    if with_jac and len(col_of) and (np.max(col_of) + 1) * (d - 1) > ncols:
        raise ValueError("free-vertex slot beyond the Jacobian width")
    F = np.empty(nrows)
    cdef double[::1] Fv = F
    J = np.zeros((nrows, ncols)) if with_jac else np.zeros((0, 0))
    cdef double[:, ::1] Jv = J
    cdef double E[16 * 16]
    cdef double C[16 * 16]
    cdef int cols[16]
    cdef double det
    with nogil:
        for k in range(nedges):
            s = <int>(ep[k + 1] - ep[k])
            for t in range(d - s):
                for c in range(s - 1):
                    cols[c] = c
                cols[s - 1] = s - 1 + t
                for q in range(xp[k], xp[k + 1]):
                    for i in range(s):
                        v = <int>ei[ep[k] + i]
                        for c in range(s):
                            E[i * 16 + c] = Pv[v, cols[c]] - Xv[q, cols[c]]
                    _det_cof_small(E, s, &det, C)
                    if with_jac:
                        for i in range(s):
                            v = <int>ei[ep[k] + i]
                            slot = <int>co[v]
                            if slot >= 0:
                                for c in range(s):
                                    Jv[r, slot * dim + cols[c]] = C[i * 16 + c]
                    Fv[r] = det
                    r += 1
    return F, (J if with_jac else None)
