"""Local dictionary initialization and K-SVD style refinement.

The dictionary is a dense (n, m) matrix of unit-norm vectorized filters.
The update pass visits atoms sequentially, each time solving a rank-1
approximation of the residual restricted to the slices that use the
atom; coefficients are refreshed in place, so needle supports never
grow. Unused atoms are re-seeded from the worst-represented target.
"""

from __future__ import annotations

import numpy as np

from .pursuit import Needle, matrix_to_needles, needles_to_matrix

_POWER_ITERS = 30
_POWER_TOL = 1e-10
_TINY = 1e-12


def normalize_columns(D) -> np.ndarray:
    """Scale every column to unit l2 norm (zero columns rejected)."""
    D = np.array(D, dtype=np.float64, copy=True)
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms <= _TINY):
        raise ValueError("dictionary has a (near-)zero column")
    return D / norms


def init_dictionary(n: int, m: int, seed: int) -> np.ndarray:
    """Seeded random dictionary: iid standard normal columns, normalized."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    return normalize_columns(rng.standard_normal((n, m)))


def canonicalize_signs(D, A=None):
    """Flip atoms so each one's first nonzero entry is positive.

    The rank-1 steps and the random init leave a per-atom sign
    ambiguity; pinning it keeps runs comparable and files byte-stable.
    When coefficients A are given, their rows are flipped along with the
    atoms so the product D @ A is unchanged.
    """
    D = np.array(D, dtype=np.float64, copy=True)
    A = None if A is None else np.array(A, dtype=np.float64, copy=True)
    for j in range(D.shape[1]):
        col = D[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            D[:, j] = -col
            if A is not None:
                A[j] = -A[j]
    return D if A is None else (D, A)


def _principal_direction(E, start):
    """Dominant left singular direction of E by power iteration on E E^T.

    Runs at most _POWER_ITERS rounds, stopping early when the iterate
    moves less than _POWER_TOL. Seeding with the current atom makes the
    Rayleigh quotient start at the atom's own value, so the returned
    direction never fits worse than the atom it replaces; if the seed is
    orthogonal to E's range, the largest-norm column of E serves
    instead.
    """
    u = np.asarray(start, dtype=np.float64)
    if np.linalg.norm(E.T @ u) <= _TINY:
        norms = np.linalg.norm(E, axis=0)
        if norms.max() <= _TINY:
            return None  # residual block is zero: nothing to fit
        u = E[:, int(np.argmax(norms))]
        u = u / np.linalg.norm(u)
    for _ in range(_POWER_ITERS):
        w = E @ (E.T @ u)
        nw = np.linalg.norm(w)
        if nw <= _TINY:
            break
        w /= nw
        if np.linalg.norm(w - u) < _POWER_TOL:
            u = w
            break
        u = w
    return u


def dictionary_update(D, targets, needles, sweeps: int = 1):
    """Refine atoms and coefficients against per-slice targets.

    Parameters
    ----------
    D : array, shape (n, m)
        Current dictionary; not modified.
    targets : array (n, k) or sequence of length-n vectors
        One regression target per slice.
    needles : array (m, k) or sequence of Needle
        Current coefficients, aligned with targets. Supports are kept;
        only values on existing supports change.
    sweeps : int
        Full passes over the atoms (default 1).

    Returns
    -------
    (D_new, needles_new)
        needles_new matches the container kind passed in (matrix in,
        matrix out; Needle list in, Needle list out).

    The fit sum_i ||t_i - D a_i||^2 never increases, per atom and per
    sweep. Atoms used by no slice are replaced with the normalized
    worst-represented target; within one sweep each replacement picks a
    distinct target. Atom signs are canonicalized after every sweep.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    D = np.array(D, dtype=np.float64, copy=True)
    n, m = D.shape
    if isinstance(targets, np.ndarray):
        T = np.asarray(targets, dtype=np.float64)
    else:
        T = np.column_stack([np.asarray(t, dtype=np.float64) for t in targets])
    if isinstance(needles, np.ndarray):
        A = np.array(needles, dtype=np.float64, copy=True)
        wants_needles = False
    else:
        A = needles_to_matrix(list(needles), dim=m)
        wants_needles = True
    if T.ndim != 2 or T.shape[0] != n:
        raise ValueError("targets must be (n, k)")
    if A.shape != (m, T.shape[1]):
        raise ValueError("needles must align with targets")
    if T.shape[1] == 0:
        raise ValueError("no targets to fit")

    for _ in range(sweeps):
        R = T - D @ A
        taken: set[int] = set()
        for j in range(m):
            used = np.flatnonzero(A[j])
            if used.size == 0:
                idx = _worst_target(T, R, taken)
                if idx is not None:
                    t = T[:, idx]
                    D[:, j] = t / np.linalg.norm(t)
                    taken.add(idx)
                continue
            E = R[:, used] + np.outer(D[:, j], A[j, used])
            u = _principal_direction(E, D[:, j])
            if u is None:
                # this atom's slices are exactly represented without it
                A[j, used] = 0.0
                continue
            beta = E.T @ u
            D[:, j] = u
            A[j, used] = beta
            R[:, used] = E - np.outer(u, beta)
        D, A = canonicalize_signs(D, A)
    return (D, matrix_to_needles(A)) if wants_needles else (D, A)


def _worst_target(T, R, taken):
    """Index of the target with the largest residual, skipping ones
    already claimed by another replacement this sweep; None if every
    candidate is zero."""
    score = np.linalg.norm(R, axis=0)
    tnorm = np.linalg.norm(T, axis=0)
    score = np.where(tnorm <= _TINY, -1.0, score)  # cannot normalize those
    for idx in taken:
        score[idx] = -1.0
    idx = int(np.argmax(score))
    return idx if score[idx] > _TINY else None
