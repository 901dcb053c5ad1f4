"""Sparse symmetric-indefinite LDL^T factorization for KKT systems.

Up-looking factorization without pivoting (qdldl-style).  Interior-point
KKT matrices are made quasi-definite through primal/dual regularization
before factoring, in which case the factorization exists and the signs of
D expose the matrix inertia, which drives the regularization loop.

The pattern of a KKT matrix is fixed across interior-point iterations, so
the symbolic analysis (ordering, elimination tree, fill pattern) runs once
and only the numeric sweep repeats.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.sparse import csc_matrix, coo_matrix
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = ["KktMatrix", "FactorizationError"]


class FactorizationError(RuntimeError):
    pass


@njit(cache=True)
def _etree_and_counts(n, Ap, Ai, work, Lnz, parent):
    for i in range(n):
        work[i] = -1
        Lnz[i] = 0
        parent[i] = -1
    for j in range(n):
        work[j] = j
        for p in range(Ap[j], Ap[j + 1]):
            i = Ai[p]
            if i > j:
                return -1  # not upper triangular
            while work[i] != j:
                if parent[i] == -1:
                    parent[i] = j
                Lnz[i] += 1
                work[i] = j
                i = parent[i]
    return 0


@njit(cache=True)
def _factor(n, Ap, Ai, Ax, parent, Lp, Li, Lx, D, Dinv,
            y_vals, y_markers, y_idx, elim, l_next, pivot_floor):
    """Numeric LDL^T of an upper CSC matrix with full diagonal.

    Returns (status, n_positive): status 0 on success, k+1 if pivot k
    collapsed below the floor.
    """
    for i in range(n):
        y_vals[i] = 0.0
        y_markers[i] = 0
        l_next[i] = Lp[i]
    n_pos = 0
    for k in range(n):
        dk = 0.0
        nnz_y = 0
        for p in range(Ap[k], Ap[k + 1]):
            bidx = Ai[p]
            if bidx == k:
                dk = Ax[p]
                continue
            y_vals[bidx] = Ax[p]
            if y_markers[bidx] == 0:
                y_markers[bidx] = 1
                elim[0] = bidx
                nnz_e = 1
                nxt = parent[bidx]
                while nxt != -1 and nxt < k:
                    if y_markers[nxt] == 1:
                        break
                    y_markers[nxt] = 1
                    elim[nnz_e] = nxt
                    nnz_e += 1
                    nxt = parent[nxt]
                while nnz_e > 0:
                    nnz_e -= 1
                    y_idx[nnz_y] = elim[nnz_e]
                    nnz_y += 1
        for i in range(nnz_y - 1, -1, -1):
            cidx = y_idx[i]
            tmp = l_next[cidx]
            yv = y_vals[cidx]
            for j in range(Lp[cidx], tmp):
                y_vals[Li[j]] -= Lx[j] * yv
            Li[tmp] = k
            ljk = yv * Dinv[cidx]
            Lx[tmp] = ljk
            dk -= yv * ljk
            l_next[cidx] = tmp + 1
            y_vals[cidx] = 0.0
            y_markers[cidx] = 0
        if abs(dk) < pivot_floor:
            return k + 1, n_pos
        D[k] = dk
        Dinv[k] = 1.0 / dk
        if dk > 0.0:
            n_pos += 1
    return 0, n_pos


@njit(cache=True)
def _solve_inplace(n, Lp, Li, Lx, Dinv, x):
    for j in range(n):
        xj = x[j]
        if xj != 0.0:
            for p in range(Lp[j], Lp[j + 1]):
                x[Li[p]] -= Lx[p] * xj
    for i in range(n):
        x[i] *= Dinv[i]
    for j in range(n - 1, -1, -1):
        acc = x[j]
        for p in range(Lp[j], Lp[j + 1]):
            acc -= Lx[p] * x[Li[p]]
        x[j] = acc


class KktMatrix:
    """Symmetric sparse matrix with a fixed pattern and refactorable values.

    Built from COO triplets.  (i, j) and (j, i) address the same stored
    entry, so each logical off-diagonal entry must be supplied once (e.g.
    pass only the upper triangle of a symmetric block, but either side of
    a constraint-Jacobian block).  Duplicate triplets are summed, which is
    how diagonal regularization is layered on top of Hessian diagonals.
    ``set_values`` scatters a value vector aligned with the original
    triplets, so callers update values every iteration without
    re-allocating.
    """

    def __init__(self, rows, cols, dim):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) != len(cols):
            raise ValueError("rows/cols length mismatch")
        self.dim = int(dim)
        self.n_src = len(rows)

        # fill-reducing ordering on the symmetrized pattern
        ones = np.ones(len(rows), dtype=np.int8)
        sym = coo_matrix((np.concatenate([ones, ones]),
                          (np.concatenate([rows, cols]),
                           np.concatenate([cols, rows]))),
                         shape=(dim, dim)).tocsr()
        perm = np.asarray(reverse_cuthill_mckee(sym, symmetric_mode=True),
                          dtype=np.int64)
        iperm = np.empty(dim, dtype=np.int64)
        iperm[perm] = np.arange(dim, dtype=np.int64)
        self.perm = perm
        self.iperm = iperm

        # map each source triplet into the upper triangle of the permuted matrix
        pi = iperm[rows]
        pj = iperm[cols]
        ur = np.minimum(pi, pj)
        uc = np.maximum(pi, pj)
        # ensure a full diagonal is present (zero slots are fine)
        ur_full = np.concatenate([ur, np.arange(dim, dtype=np.int64)])
        uc_full = np.concatenate([uc, np.arange(dim, dtype=np.int64)])
        keys = uc_full * dim + ur_full
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.nnz = len(uniq)
        self._src_pos = inverse[:self.n_src].astype(np.int64)
        ui = (uniq % dim).astype(np.int32)
        uj = (uniq // dim).astype(np.int32)
        indptr = np.zeros(dim + 1, dtype=np.int64)
        np.add.at(indptr, uj + 1, 1)
        indptr = np.cumsum(indptr)
        self.Ap = indptr.astype(np.int64)
        self.Ai = ui
        self.Ax = np.zeros(self.nnz, dtype=np.float64)

        # symbolic factorization
        work = np.empty(dim, dtype=np.int64)
        Lnz = np.empty(dim, dtype=np.int64)
        parent = np.empty(dim, dtype=np.int64)
        status = _etree_and_counts(dim, self.Ap, self.Ai, work, Lnz, parent)
        if status != 0:
            raise FactorizationError("internal: pattern not upper triangular")
        self.parent = parent
        self.Lp = np.zeros(dim + 1, dtype=np.int64)
        self.Lp[1:] = np.cumsum(Lnz)
        nnz_l = int(self.Lp[-1])
        self.Li = np.zeros(nnz_l, dtype=np.int32)
        self.Lx = np.zeros(nnz_l, dtype=np.float64)
        self.D = np.zeros(dim, dtype=np.float64)
        self.Dinv = np.zeros(dim, dtype=np.float64)
        self._yv = np.zeros(dim, dtype=np.float64)
        self._ym = np.zeros(dim, dtype=np.int8)
        self._yi = np.zeros(dim, dtype=np.int64)
        self._elim = np.zeros(dim, dtype=np.int64)
        self._lnext = np.zeros(dim, dtype=np.int64)
        self._factored = False
        # csc view sharing Ax for residual computation (permuted, upper)
        self._upper = csc_matrix((self.Ax, self.Ai, self.Ap),
                                 shape=(dim, dim))

    def set_values(self, src_values):
        """Scatter triplet-aligned values into the matrix (duplicates sum)."""
        if len(src_values) != self.n_src:
            raise ValueError("value vector does not match the triplet count")
        acc = np.bincount(self._src_pos, weights=src_values, minlength=self.nnz)
        self.Ax[:] = acc
        self._factored = False

    def factor(self, pivot_floor=1e-300):
        """LDL^T; returns (success, n_pos, n_neg)."""
        status, n_pos = _factor(
            self.dim, self.Ap, self.Ai, self.Ax, self.parent,
            self.Lp, self.Li, self.Lx, self.D, self.Dinv,
            self._yv, self._ym, self._yi, self._elim, self._lnext,
            pivot_floor,
        )
        if status != 0:
            self._factored = False
            return False, n_pos, 0
        self._factored = True
        return True, n_pos, self.dim - n_pos

    def solve(self, b, refine_steps=2, rtol=1e-10):
        """Solve K x = b with iterative refinement on the factored matrix."""
        if not self._factored:
            raise FactorizationError("matrix is not factored")
        b = np.asarray(b, dtype=np.float64)
        bp = b[self.perm]
        xp = bp.copy()
        _solve_inplace(self.dim, self.Lp, self.Li, self.Lx, self.Dinv, xp)
        bnorm = max(1e-30, float(np.max(np.abs(bp))))
        for _ in range(refine_steps):
            r = bp - self._matvec(xp)
            if float(np.max(np.abs(r))) <= rtol * bnorm:
                break
            dx = r.copy()
            _solve_inplace(self.dim, self.Lp, self.Li, self.Lx, self.Dinv, dx)
            xp += dx
        x = np.empty_like(xp)
        x[self.perm] = xp
        return x

    def residual_norm(self, x, b):
        xp = x[self.perm]
        bp = b[self.perm]
        r = bp - self._matvec(xp)
        return float(np.max(np.abs(r))) / max(1e-30, float(np.max(np.abs(bp))))

    def _matvec(self, xp):
        u = self._upper
        y = u @ xp
        # add strictly-lower contribution (stored transposed in upper)
        y += u.T @ xp
        diag = u.diagonal()
        y -= diag * xp
        return y
