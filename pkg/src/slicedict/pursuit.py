"""Sparse needle pursuit: batched LASSO via cyclic coordinate descent.

Each slice s contributes one small problem

    min_a  0.5 * ||b - D a||^2 + lam * ||a||_1,      b = s + u.

All slices share the dictionary, so one Gram matrix serves the whole
batch and each coordinate sweep is a handful of (m x num_slices) BLAS
operations. Solutions are certified through the first-order optimality
residual rather than trusted from the sweep count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PursuitConfig:
    """Settings for the LASSO solver.

    lam is the l1 weight of the subproblem itself (the training engine
    passes lambda/rho here). Sweeping stops once the largest coordinate
    change in a sweep falls below tol AND the optimality residual is
    below kkt_tol; max_sweeps bounds the work either way. max_nonzeros,
    when set, caps each solution's support to the k largest-magnitude
    coefficients (ties keep the lower index) followed by an
    unregularized least-squares refit on that support.
    """

    lam: float = 0.1
    max_sweeps: int = 200
    tol: float = 1e-6
    kkt_tol: float = 1e-6
    max_nonzeros: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.max_nonzeros is not None and self.max_nonzeros < 0:
            raise ValueError("max_nonzeros must be >= 0 when given")


@dataclass
class Needle:
    """Sparse coefficient vector stored as (indices, values).

    indices are strictly increasing positions into [0, dim); values are
    the matching nonzero coefficients. converged records whether the
    solver certificate (optimality residual <= kkt_tol) was met.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray
    converged: bool = True

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @classmethod
    def from_dense(cls, a, converged: bool = True) -> "Needle":
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        idx = np.flatnonzero(a)
        return cls(a.shape[0], idx, a[idx].copy(), converged)


def gram(D) -> np.ndarray:
    """D^T D, computed once per dictionary and reused across calls."""
    D = np.asarray(D, dtype=np.float64)
    return D.T @ D


def kkt_residual(D, b, alpha, lam) -> float:
    """Max violation of the LASSO first-order optimality conditions.

    With g = D^T (b - D alpha): on the support |g_j - lam*sign(a_j)|
    must vanish, off the support |g_j| must not exceed lam. Returns the
    largest violation across coordinates (0 for an exact solution).
    """
    D = np.asarray(D, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    g = D.T @ (b - D @ alpha)
    on = alpha != 0
    viol = np.maximum(np.abs(g) - lam, 0.0)
    viol[on] = np.abs(g[on] - lam * np.sign(alpha[on]))
    return float(viol.max()) if viol.size else 0.0


def _kkt_residual_batch(G, DTB, A, lam) -> float:
    g = DTB - G @ A
    on = A != 0
    viol = np.maximum(np.abs(g) - lam, 0.0)
    viol[on] = np.abs(g[on] - lam * np.sign(A[on]))
    return float(viol.max()) if viol.size else 0.0


def _partial_objective(G, dtb, a, lam):
    # the lasso objective minus the constant 0.5*||b||^2 term
    return 0.5 * float(a @ (G @ a)) - float(a @ dtb) + lam * float(np.abs(a).sum())


def _polish_stalled(G, DTB, A, lam, cols):
    """Exact stationarity solve on each column's current support.

    Coordinate descent converges slowly once the support is right but
    the values still creep; solving the support-restricted linear
    system jumps straight to the stationary point. A candidate is kept
    only when it does not increase the objective, so the sweep-wise
    monotonicity of the solver survives sign flips or bad conditioning.
    """
    for col in cols:
        start = A[:, col].copy()
        a = A[:, col]
        for _ in range(np.count_nonzero(a)):
            support = np.flatnonzero(a)
            if support.size == 0:
                break
            sub = G[np.ix_(support, support)]
            signs = np.sign(a[support])
            rhs = DTB[support, col] - lam * signs
            z, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
            flipped = np.sign(z) != signs
            if not flipped.any():
                # stationary with consistent signs: take the full step
                a[:] = 0.0
                a[support] = z
                break
            # walk toward z only until the first coefficient crosses zero,
            # then drop it; the objective is quadratic with a linear l1
            # term on this segment, so the partial step still descends
            cur = a[support]
            t = np.min(cur[flipped] / (cur[flipped] - z[flipped]))
            stepped = cur + t * (z - cur)
            stepped[np.abs(stepped) <= 1e-14] = 0.0
            crossing = np.flatnonzero(flipped)[
                np.argmin(cur[flipped] / (cur[flipped] - z[flipped]))
            ]
            stepped[crossing] = 0.0
            a[:] = 0.0
            a[support] = stepped
        # paranoia guard: never let a polish raise the objective
        if _partial_objective(G, DTB[:, col], a, lam) > _partial_objective(
            G, DTB[:, col], start, lam
        ):
            A[:, col] = start


def _truncate_and_refit(G, DTB, A, k):
    """Cap each column's support at k, refit least squares on what stays."""
    m = A.shape[0]
    if k == 0:
        A[:] = 0.0
        return
    nnz = np.count_nonzero(A, axis=0)
    for col in np.flatnonzero(nnz > k):
        a = A[:, col]
        # stable sort on -|a|: ties resolved toward the lower index
        order = np.argsort(-np.abs(a), kind="stable")
        keep = np.sort(order[:k])
        sub = G[np.ix_(keep, keep)]
        rhs = DTB[keep, col]
        try:
            sol = np.linalg.solve(sub, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        a[:] = 0.0
        a[keep] = sol


def lasso_solve_batch(D, B, config: PursuitConfig, G=None, warm=None):
    """Solve one LASSO per column of B with a shared dictionary.

    Parameters
    ----------
    D : array, shape (n, m)
    B : array, shape (n, k)
        Right-hand sides, one problem per column.
    config : PursuitConfig
    G : array, optional
        Precomputed gram(D); recomputed here when omitted.
    warm : array, shape (m, k), optional
        Starting coefficients (copied, not modified).

    Returns
    -------
    A : array, shape (m, k)
        Coefficients, one solution per column.
    converged : bool
        True when the optimality residual across the whole batch reached
        config.kkt_tol within config.max_sweeps sweeps.
    """
    D = np.asarray(D, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != D.shape[0]:
        raise ValueError("B must be (n, k) with n matching the dictionary")
    n, m = D.shape
    k = B.shape[1]
    if G is None:
        G = gram(D)
    DTB = D.T @ B
    if warm is not None:
        A = np.array(warm, dtype=np.float64, copy=True)
        if A.shape != (m, k):
            raise ValueError("warm start has wrong shape")
    else:
        A = np.zeros((m, k))
    lam = config.lam
    diag = np.diag(G)
    if np.any(diag <= 0):
        raise ValueError("dictionary has a zero column")

    converged = False
    for sweep in range(config.max_sweeps):
        delta = 0.0
        for j in range(m):
            # correlation of atom j with the residual, atom j's own
            # contribution added back
            c = DTB[j] - G[j] @ A + diag[j] * A[j]
            a_new = np.sign(c) * np.maximum(np.abs(c) - lam, 0.0) / diag[j]
            step = a_new - A[j]
            A[j] = a_new
            if k:
                d = float(np.abs(step).max())
                if d > delta:
                    delta = d
        # Certify on stall, and periodically even without one: coherent
        # atoms can trade magnitude in > tol steps for a long time while
        # the support is already final and one exact solve would finish.
        if delta < config.tol or (sweep + 1) % 10 == 0:
            g = DTB - G @ A
            on = A != 0
            viol = np.maximum(np.abs(g) - lam, 0.0)
            viol[on] = np.abs(g[on] - lam * np.sign(A[on]))
            per_col = viol.max(axis=0) if m else np.zeros(k)
            if not k or per_col.max() <= config.kkt_tol:
                converged = True
                break
            _polish_stalled(G, DTB, A, lam, np.flatnonzero(per_col > config.kkt_tol))
    if config.max_nonzeros is not None:
        _truncate_and_refit(G, DTB, A, config.max_nonzeros)
    return A, converged


def lasso_solve(D, b, config: PursuitConfig, G=None, warm=None) -> Needle:
    """Single-problem convenience wrapper around lasso_solve_batch."""
    b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
    w = None if warm is None else np.asarray(warm, dtype=np.float64).reshape(-1, 1)
    A, converged = lasso_solve_batch(D, b, config, G=G, warm=w)
    return Needle.from_dense(A[:, 0], converged)


def needles_to_matrix(needles, dim=None) -> np.ndarray:
    """Stack a sequence of needles as the columns of a dense (m, k) array."""
    needles = list(needles)
    if not needles:
        if dim is None:
            raise ValueError("dim required for an empty needle list")
        return np.zeros((dim, 0))
    m = needles[0].dim if dim is None else dim
    A = np.zeros((m, len(needles)))
    for i, nd in enumerate(needles):
        if nd.dim != m:
            raise ValueError("needles have inconsistent dimensions")
        A[nd.indices, i] = nd.values
    return A


def matrix_to_needles(A, converged: bool = True) -> list[Needle]:
    """Inverse of needles_to_matrix, one Needle per column."""
    A = np.asarray(A, dtype=np.float64)
    return [Needle.from_dense(A[:, i], converged) for i in range(A.shape[1])]
