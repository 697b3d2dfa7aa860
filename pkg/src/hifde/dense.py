"""Dense factorization and compression kernels.

Everything here operates on small dense blocks extracted from the sparse
working matrix: symmetric LDL/Cholesky factorization, triangular solves,
Schur complements, and the interpolative decomposition (ID) built on a
column-pivoted QR. These are the only places the package touches LAPACK.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import dtrsm as _dtrsm


def _tri_solve(tri: np.ndarray, b: np.ndarray, trans: bool) -> np.ndarray:
    """Unit-lower-triangular solve via BLAS trsm (thin wrapper, low overhead)."""
    vec = b.ndim == 1
    rhs = b[:, None] if vec else b
    out = _dtrsm(1.0, tri, rhs, side=0, lower=1, trans_a=1 if trans else 0, diag=1)
    return out[:, 0] if vec else out

__all__ = [
    "FactorizationError",
    "IndefiniteBlockError",
    "SingularBlockError",
    "BlockDiag",
    "LdlFactor",
    "IdResult",
    "ldl",
    "interpolative_decomposition",
    "schur_complement",
]

# Relative pivot threshold below which a diagonal block is reported singular.
SINGULAR_PIVOT_RTOL = 1e-14


class FactorizationError(Exception):
    """Base class for factorization failures."""


class IndefiniteBlockError(FactorizationError):
    """Cholesky requested on a block that is not positive definite."""


class SingularBlockError(FactorizationError):
    """A pivot fell below the singularity threshold."""


class BlockDiag:
    """Block-diagonal matrix with 1x1 and 2x2 blocks.

    Stores the diagonal and the positions/entries of any 2x2 pivot blocks
    produced by Bunch-Kaufman pivoting. Supports apply and solve on vectors
    or matrices without densifying.
    """

    def __init__(self, dense_d: np.ndarray):
        n = dense_d.shape[0]
        self.n = n
        self.diag = np.diagonal(dense_d).copy()
        if n > 1:
            sub = np.diagonal(dense_d, -1)
            starts = np.flatnonzero(sub)
            self.pairs = [(int(i), dense_d[i, i], dense_d[i + 1, i],
                           dense_d[i + 1, i + 1]) for i in starts]
        else:
            self.pairs = []

    @classmethod
    def from_parts(cls, diag: np.ndarray, pairs: list) -> "BlockDiag":
        out = cls.__new__(cls)
        out.n = len(diag)
        out.diag = np.asarray(diag, dtype=float)
        out.pairs = pairs
        return out

    @property
    def has_2x2(self) -> bool:
        return bool(self.pairs)

    def apply(self, b: np.ndarray) -> np.ndarray:
        out = (self.diag * b.T).T if b.ndim == 2 else self.diag * b
        for i, a, c, d in self.pairs:
            bi, bj = b[i].copy(), b[i + 1].copy()
            out[i] = a * bi + c * bj
            out[i + 1] = c * bi + d * bj
        return out

    def solve(self, b: np.ndarray) -> np.ndarray:
        out = (b.T / self.diag).T if b.ndim == 2 else b / self.diag
        for i, a, c, d in self.pairs:
            det = a * d - c * c
            bi, bj = b[i], b[i + 1]
            out[i] = (d * bi - c * bj) / det
            out[i + 1] = (a * bj - c * bi) / det
        return out

    def check_nonsingular(self, scale: float) -> None:
        thr = SINGULAR_PIVOT_RTOL * max(scale, 1e-300)
        mask = np.ones(self.n, dtype=bool)
        for i, a, c, d in self.pairs:
            mask[i] = mask[i + 1] = False
            # smallest singular value of the symmetric 2x2 pivot
            t = 0.5 * (a + d)
            r = np.hypot(0.5 * (a - d), c)
            if min(abs(t - r), abs(t + r)) <= thr:
                raise SingularBlockError("singular 2x2 pivot block")
        if mask.any() and np.min(np.abs(self.diag[mask])) <= thr:
            raise SingularBlockError("singular pivot")

    def nfloats(self) -> int:
        return self.n + 3 * len(self.pairs)


@dataclass
class LdlFactor:
    """Factored form A = L D L^T with L unit triangular up to row permutation.

    ``mode`` is "cholesky" (SPD path, no pivoting, positive 1x1 D) or "ldl"
    (Bunch-Kaufman partial pivoting, 1x1/2x2 pivot blocks). ``lower`` holds
    the possibly row-permuted unit factor; ``lower[perm]`` is triangular.
    """

    mode: str
    lower: np.ndarray
    d: BlockDiag
    perm: np.ndarray
    _tri: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # fixed memory layout so applies are bit-reproducible across
        # construction and reload
        self.lower = np.ascontiguousarray(self.lower)
        self._tri = np.ascontiguousarray(self.lower[self.perm])

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    # L and L^T act in factored coordinates; the permutation is internal.
    def solve_l(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0 or b.size == 0:
            return b.copy()
        return _tri_solve(self._tri, b[self.perm], trans=False)

    def solve_lt(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0 or b.size == 0:
            return b.copy()
        y = _tri_solve(self._tri, b, trans=True)
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def apply_l(self, b: np.ndarray) -> np.ndarray:
        return self.lower @ b

    def apply_lt(self, b: np.ndarray) -> np.ndarray:
        return self.lower.T @ b

    def solve_d(self, b: np.ndarray) -> np.ndarray:
        return self.d.solve(b)

    def apply_d(self, b: np.ndarray) -> np.ndarray:
        return self.d.apply(b)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """A^{-1} b via L, D, L^T solves."""
        return self.solve_lt(self.solve_d(self.solve_l(b)))

    def apply(self, b: np.ndarray) -> np.ndarray:
        """A b from the factored form."""
        return self.apply_l(self.apply_d(self.apply_lt(b)))

    def reconstruct(self) -> np.ndarray:
        return self.apply(np.eye(self.n))

    def nfloats(self) -> int:
        return self.lower.size + self.d.nfloats()


def ldl(block: np.ndarray, spd_mode: bool) -> LdlFactor:
    """Factor a symmetric block as L D L^T.

    In SPD mode a Cholesky factorization is used and normalized to unit
    diagonal (failure raises IndefiniteBlockError); otherwise Bunch-Kaufman
    partial pivoting with 1x1/2x2 pivots. Pivots below SINGULAR_PIVOT_RTOL
    times the diagonal scale raise SingularBlockError.
    """
    block = np.asarray(block, dtype=float)
    n = block.shape[0]
    if block.ndim != 2 or block.shape[1] != n:
        raise ValueError("block must be square")
    if n == 0:
        return LdlFactor("cholesky" if spd_mode else "ldl",
                         np.zeros((0, 0)), BlockDiag(np.zeros((0, 0))),
                         np.arange(0))
    scale = float(np.max(np.abs(np.diag(block))))
    if scale == 0.0:
        scale = float(np.max(np.abs(block)))
    if spd_mode:
        try:
            c = sla.cholesky(block, lower=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise IndefiniteBlockError(str(exc)) from exc
        dc = np.diagonal(c).copy()
        lower = c * (1.0 / dc)[None, :]
        d = BlockDiag.from_parts(dc * dc, [])
        fac = LdlFactor("cholesky", lower, d, np.arange(n))
    else:
        lu, dd, perm = sla.ldl(block, lower=True, check_finite=False)
        fac = LdlFactor("ldl", lu, BlockDiag(dd), np.asarray(perm))
    fac.d.check_nonsingular(scale)
    return fac


@dataclass
class IdResult:
    """Interpolative decomposition of the columns of a dense matrix.

    ``sk`` and ``rd`` are disjoint 0-based column index arrays partitioning
    range(n); ``t`` has shape (k, n - k) and satisfies
    M[:, rd] ~= M[:, sk] @ t. ``resid`` is the relative magnitude of the
    first rejected pivot (0 when the cut is exact).
    """

    sk: np.ndarray
    rd: np.ndarray
    t: np.ndarray
    k: int
    resid: float


def interpolative_decomposition(m: np.ndarray, eps: float) -> IdResult:
    """Column ID at relative precision ``eps`` via column-pivoted QR.

    The rank is the first index at which the pivot magnitude |R_kk| drops
    to eps * |R_11| (k = 0 for a zero matrix). eps = 0 selects the numerical
    exact rank, with the cutoff at max(m, n) machine epsilons.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected a 2-d array")
    ncols = m.shape[1]
    if m.size == 0 or not np.any(m):
        return IdResult(np.arange(0), np.arange(ncols), np.zeros((0, ncols)), 0, 0.0)
    _, r, piv = sla.qr(m, mode="economic", pivoting=True, check_finite=False)
    rdiag = np.abs(np.diag(r))
    r11 = rdiag[0]
    if eps > 0.0:
        thr = eps * r11
    else:
        thr = max(m.shape) * np.finfo(float).eps * r11
    below = np.nonzero(rdiag <= thr)[0]
    k = int(below[0]) if below.size else rdiag.size
    t = sla.solve_triangular(r[:k, :k], r[:k, k:], lower=False, check_finite=False) \
        if k else np.zeros((0, ncols))
    resid = float(rdiag[k] / r11) if k < rdiag.size else 0.0
    return IdResult(piv[:k].copy(), piv[k:].copy(), t, k, resid)


def schur_complement(a_qq: np.ndarray, a_qp: np.ndarray, ldl_pp: LdlFactor) -> np.ndarray:
    """B = A_qq - A_qp A_pp^{-1} A_qp^T using two triangular solves.

    The result is explicitly symmetrized to suppress rounding asymmetry.
    """
    if a_qp.size == 0:
        return np.array(a_qq, dtype=float, copy=True)
    y = ldl_pp.solve_l(np.asarray(a_qp, float).T)
    b = np.asarray(a_qq, float) - y.T @ ldl_pp.solve_d(y)
    return 0.5 * (b + b.T)
