"""Symmetric sparse storage for the evolving working matrix.

The matrix is stored as one sorted (index, value) array pair per DOF,
mirrored so both (i, j) and (j, i) are present; the canonical row <= col
view is used for nonzero counts and Matrix Market export. An active flag
per DOF tracks which rows still participate; deactivation purges all
off-diagonal storage between the retired DOFs and the rest, which is what
enforces the block-diagonal structure of the factored-out levels.

Fill-in entries are stored even when exactly zero: dropping happens only
through the explicit truncation step of skeletonization, never by value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DenseBlock",
    "DofState",
    "SparseSymMatrix",
    "submatrix",
    "neighbor_set",
    "apply_block_update",
    "deactivate",
]

_EMPTY_I = np.empty(0, dtype=np.int32)
_EMPTY_F = np.empty(0, dtype=np.float64)


@dataclass
class DenseBlock:
    """Dense copy of a submatrix together with its row/column index sets."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        assert self.values.shape == (len(self.rows), len(self.cols))


class DofState:
    """Bookkeeping of when and how each DOF left the active set."""

    TAG_NONE = 0
    TAG_INTERIOR = 1
    TAG_SKELETON = 2
    TAG_REDUNDANT = 3

    def __init__(self, n: int):
        self.n = n
        self.elim_level = np.full(n, np.nan)
        self.tag = np.zeros(n, dtype=np.int8)

    def mark_eliminated(self, c: np.ndarray, level: float, tag: int) -> None:
        c = np.asarray(c, dtype=np.int64)
        if np.any(np.isfinite(self.elim_level[c])):
            raise ValueError("DOF eliminated twice")
        self.elim_level[c] = level
        self.tag[c] = tag

    def mark_skeleton(self, c: np.ndarray) -> None:
        self.tag[np.asarray(c, dtype=np.int64)] = self.TAG_SKELETON

    def eliminated_count(self) -> int:
        return int(np.isfinite(self.elim_level).sum())


class SparseSymMatrix:
    """Order-N symmetric sparse matrix over an active DOF set."""

    def __init__(self, n: int):
        self.n = n
        self.row_idx: list[np.ndarray] = [_EMPTY_I] * n
        self.row_val: list[np.ndarray] = [_EMPTY_F] * n
        self.active = np.ones(n, dtype=bool)
        # scratch for stamped position lookups (single-threaded use)
        self._pos = np.zeros(n, dtype=np.int64)
        self._tok = np.zeros(n, dtype=np.int64)
        self._cur = 0

    # -- construction ------------------------------------------------------

    @classmethod
    def from_scipy(cls, s) -> "SparseSymMatrix":
        s = sp.csr_matrix(s)
        s.sum_duplicates()
        s.sort_indices()
        if (s != s.T).nnz != 0:
            raise ValueError("matrix is not symmetric")
        a = cls(s.shape[0])
        indptr, indices, data = s.indptr, s.indices, s.data
        for i in range(a.n):
            lo, hi = indptr[i], indptr[i + 1]
            if hi > lo:
                a.row_idx[i] = indices[lo:hi].astype(np.int32)
                a.row_val[i] = data[lo:hi].astype(np.float64)
        return a

    def to_scipy(self) -> sp.csr_matrix:
        """Full symmetric CSR copy (active and inactive rows alike)."""
        rows = np.concatenate([np.full(len(ix), i, dtype=np.int64)
                               for i, ix in enumerate(self.row_idx)] or [_EMPTY_I])
        cols = np.concatenate([ix.astype(np.int64) for ix in self.row_idx] or [_EMPTY_I])
        vals = np.concatenate(self.row_val or [_EMPTY_F])
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, (ix, v) in enumerate(zip(self.row_idx, self.row_val)):
            out[i, ix] = v
        return out

    def copy(self) -> "SparseSymMatrix":
        a = SparseSymMatrix(self.n)
        a.row_idx = [ix.copy() for ix in self.row_idx]
        a.row_val = [v.copy() for v in self.row_val]
        a.active = self.active.copy()
        return a

    # -- queries -----------------------------------------------------------

    def nnz(self) -> int:
        """Number of stored entries in the canonical row <= col view."""
        total = sum(len(ix) for ix in self.row_idx)
        ndiag = sum(1 for i, ix in enumerate(self.row_idx)
                    if len(ix) and ix.searchsorted(i) < len(ix) and ix[ix.searchsorted(i)] == i)
        return (total + ndiag) // 2

    def _stamp(self, cols: np.ndarray) -> int:
        self._cur += 1
        self._pos[cols] = np.arange(len(cols))
        self._tok[cols] = self._cur
        return self._cur

    def gather(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense copy of the (rows, cols) submatrix."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if (len(rows) and (rows.min() < 0 or rows.max() >= self.n)) or \
           (len(cols) and (cols.min() < 0 or cols.max() >= self.n)):
            raise IndexError("submatrix index out of range")
        tok_val = self._stamp(cols)
        out = np.zeros((len(rows), len(cols)))
        if not len(rows) or not len(cols):
            return out
        parts = [self.row_idx[r] for r in rows]
        lens = np.fromiter((len(p) for p in parts), dtype=np.int64, count=len(parts))
        total = int(lens.sum())
        if total == 0:
            return out
        cat_i = np.concatenate(parts)
        cat_v = np.concatenate([self.row_val[r] for r in rows])
        row_rep = np.repeat(np.arange(len(rows)), lens)
        mask = self._tok[cat_i] == tok_val
        out[row_rep[mask], self._pos[cat_i[mask]]] = cat_v[mask]
        return out

    def neighbors(self, c: np.ndarray) -> np.ndarray:
        """Active DOFs outside c with a stored coupling to c, ascending."""
        c = np.asarray(c, dtype=np.int64)
        parts = [self.row_idx[i] for i in c if len(self.row_idx[i])]
        if not parts:
            return np.empty(0, dtype=np.int64)
        u = np.unique(np.concatenate(parts)).astype(np.int64)
        tok_val = self._stamp(c)
        keep = (self._tok[u] != tok_val) & self.active[u]
        return u[keep]

    # -- mutation ----------------------------------------------------------

    def add_block(self, q: np.ndarray, delta: np.ndarray) -> None:
        """A[q, q] += delta entrywise, creating entries as needed."""
        q = np.asarray(q, dtype=np.int64)
        if delta.shape != (len(q), len(q)):
            raise ValueError("block shape mismatch")
        tok_val = self._stamp(q)
        tok, pos = self._tok, self._pos
        q32 = q.astype(np.int32)
        for i, r in enumerate(q):
            ix = self.row_idx[r]
            drow = delta[i]
            if len(ix):
                mask = tok[ix] == tok_val
                hit = pos[ix[mask]]
                vals = self.row_val[r]
                vals[mask] += drow[hit]
                newmask = np.ones(len(q), dtype=bool)
                newmask[hit] = False
            else:
                newmask = np.ones(len(q), dtype=bool)
            if newmask.any():
                cat_i = np.concatenate([ix, q32[newmask]])
                cat_v = np.concatenate([self.row_val[r], drow[newmask]])
                order = np.argsort(cat_i, kind="stable")
                self.row_idx[r] = cat_i[order]
                self.row_val[r] = cat_v[order]

    def drop_cols(self, rows: np.ndarray, cols: np.ndarray) -> None:
        """Remove any stored (r, c) entries for r in rows, c in cols."""
        cols = np.asarray(cols, dtype=np.int64)
        tok_val = self._stamp(cols)
        tok = self._tok
        for r in np.asarray(rows, dtype=np.int64):
            ix = self.row_idx[r]
            if not len(ix):
                continue
            keep = tok[ix] != tok_val
            if not keep.all():
                self.row_idx[r] = ix[keep]
                self.row_val[r] = self.row_val[r][keep]

    def set_rows_block(self, rows: np.ndarray, cols: np.ndarray,
                       block: np.ndarray) -> None:
        """Overwrite the (rows, cols) block: old entries in cols are
        discarded and replaced by the dense block values."""
        self.replace_rows(rows, cols, cols, block)

    def replace_rows(self, rows: np.ndarray, drop: np.ndarray,
                     cols: np.ndarray, block: np.ndarray) -> None:
        """For each row r: remove stored entries with column in ``drop``,
        then insert the dense row (cols, block[i]). cols need not be
        disjoint from drop (replacement); block columns follow ascending
        cols order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        tok_val = self._stamp(np.asarray(drop, dtype=np.int64))
        tok = self._tok
        order = np.argsort(cols, kind="stable")
        if np.array_equal(order, np.arange(len(cols))):
            c32 = cols.astype(np.int32)
            blk = np.ascontiguousarray(block, dtype=float)
        else:
            c32 = cols[order].astype(np.int32)
            blk = np.ascontiguousarray(block[:, order], dtype=float)
        nnew = len(c32)
        for i, r in enumerate(rows):
            ix = self.row_idx[r]
            if len(ix):
                keep = tok[ix] != tok_val
                ix = ix[keep]
                vv = self.row_val[r][keep]
            else:
                vv = _EMPTY_F
            nold = len(ix)
            out_i = np.empty(nold + nnew, dtype=np.int32)
            out_v = np.empty(nold + nnew, dtype=np.float64)
            pos_new = np.searchsorted(ix, c32) + np.arange(nnew)
            out_i[pos_new] = c32
            out_v[pos_new] = blk[i]
            if nold:
                old_mask = np.ones(nold + nnew, dtype=bool)
                old_mask[pos_new] = False
                out_i[old_mask] = ix
                out_v[old_mask] = vv
            self.row_idx[r] = out_i
            self.row_val[r] = out_v

    def clear_rows(self, rows: np.ndarray) -> None:
        for r in np.asarray(rows, dtype=np.int64):
            self.row_idx[r] = _EMPTY_I
            self.row_val[r] = _EMPTY_F

    def deactivate(self, c: np.ndarray) -> None:
        """Retire the DOFs c: purge all storage coupling c to the rest."""
        c = np.asarray(c, dtype=np.int64)
        if not len(c):
            return
        if not self.active[c].all():
            raise ValueError("deactivating an already inactive DOF")
        others = self.neighbors(c)
        self.drop_cols(others, c)
        self.clear_rows(c)
        self.active[c] = False

    # -- persistence -------------------------------------------------------

    def save_matrix_market(self, path) -> None:
        from scipy.io import mmwrite
        mmwrite(path, sp.tril(self.to_scipy()), symmetry="symmetric")

    @classmethod
    def load_matrix_market(cls, path) -> "SparseSymMatrix":
        from scipy.io import mmread
        return cls.from_scipy(mmread(path))


# -- module-level operation names, matching the rest of the package --------

def submatrix(a: SparseSymMatrix, p, q) -> DenseBlock:
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    return DenseBlock(p, q, a.gather(p, q))


def neighbor_set(a: SparseSymMatrix, c) -> np.ndarray:
    return a.neighbors(c)


def apply_block_update(a: SparseSymMatrix, q, delta) -> None:
    a.add_block(np.asarray(q, dtype=np.int64), np.asarray(delta, dtype=float))


def deactivate(a: SparseSymMatrix, state: DofState, c, level_tag: float,
               tag: int = DofState.TAG_INTERIOR) -> None:
    c = np.asarray(c, dtype=np.int64)
    a.deactivate(c)
    state.mark_eliminated(c, level_tag, tag)
