"""Quasi-definite KKT system with a fixed sparsity pattern.

    [ H + reg   A' ] [dx]   [r1]
    [ A       -reg ] [dv] = [r2]

H is block diagonal (orthant diagonal, 3x3 cone blocks, regularised free
diagonal).  The upper triangle is assembled once; each iteration only the
numerical values are rewritten and refactorised.
"""

from __future__ import annotations

import numpy as np
import qdldl
import scipy.sparse as sp

from .program import NumericalError


class KKTSystem:
    def __init__(self, A, orthant, cones, free, reg=1e-7, refine=10, block_eps=1e-13):
        A = sp.csc_matrix(A)
        m, n = A.shape
        self.n, self.m = n, m
        self.reg = reg
        self.refine = refine
        self.block_eps = block_eps
        self.A = A
        self.At = A.T.tocsc()
        self.orthant, self.cones, self.free = orthant, cones, free

        # upper-triangular coordinates of every block
        ii = np.triu_indices(3)
        cone_rows = cones[:, ii[0]].ravel()
        cone_cols = cones[:, ii[1]].ravel()
        lo = np.minimum(cone_rows, cone_cols)
        hi = np.maximum(cone_rows, cone_cols)
        At = A.tocoo()
        rows = np.concatenate([orthant, free, lo, At.col, n + np.arange(m)])
        cols = np.concatenate([orthant, free, hi, n + At.row, n + np.arange(m)])
        self._tri = ii
        self._nh = orthant.size + free.size + lo.size
        self._a_data = At.data
        tag = np.arange(rows.size, dtype=float) + 1.0
        K = sp.csc_matrix((tag, (rows, cols)), shape=(n + m, n + m))
        K.sort_indices()
        self._perm = K.data.astype(np.int64) - 1
        self._K = K
        self._coo = np.empty(rows.size)
        self._coo[self._nh:self._nh + At.nnz] = At.data
        self._coo[self._nh + At.nnz:] = -reg
        self._nA = At.nnz
        self._solver = None
        self._h_orth = None
        self._h_cone = None

    def increase_regularisation(self, factor=100.0):
        self.reg *= factor
        self._coo[self._nh + self._nA:] = -self.reg

    def factor(self, h_orth, h_cone):
        """h_orth: diagonal for orthant entries; h_cone: (k, 3, 3) blocks."""
        no, nf = self.orthant.size, self.free.size
        self._h_orth, self._h_cone = h_orth, h_cone
        coo = self._coo
        coo[:no] = h_orth + self.reg
        coo[no:no + nf] = self.reg
        blk = h_cone[:, self._tri[0], self._tri[1]].copy()
        # rounding in a block of norm |H| is ~eps |H|; the shift must dominate it
        shift = self.reg + self.block_eps * np.abs(blk).max(axis=1, initial=0.0)
        blk[:, [0, 3, 5]] += shift[:, None]
        coo[no + nf:self._nh] = blk.ravel()
        self._K.data = coo[self._perm]
        if not np.all(np.isfinite(self._K.data)):
            raise NumericalError("non-finite KKT entries")
        try:
            if self._solver is None:
                self._solver = qdldl.Solver(self._K, upper=True)
            else:
                self._solver.update(self._K, upper=True)
        except Exception as exc:  # qdldl signals failure with a generic error
            raise NumericalError(f"KKT factorisation failed: {exc}") from exc

    def _matvec(self, x, v):
        """Unregularised K [x; v]."""
        hx = np.zeros(self.n)
        hx[self.orthant] = self._h_orth * x[self.orthant]
        if self.cones.size:
            hx[self.cones] = np.einsum("kij,kj->ki", self._h_cone, x[self.cones])
        top = hx + self.At @ v
        bottom = self.A @ x
        return top, bottom

    def solve(self, r1, r2):
        rhs = np.concatenate([r1, r2])
        sol = self._solver.solve(rhs)
        for _ in range(self.refine):
            top, bottom = self._matvec(sol[:self.n], sol[self.n:])
            res = rhs - np.concatenate([top, bottom])
            if np.linalg.norm(res, np.inf) <= 1e-14 * (1.0 + np.linalg.norm(rhs, np.inf)):
                break
            sol = sol + self._solver.solve(res)
        if not np.all(np.isfinite(sol)):
            raise NumericalError("non-finite KKT solution")
        return sol[:self.n], sol[self.n:]
