"""Independent dense reference implementations used by the tests.

Everything here is built from first principles (explicit index
arithmetic, dense linear algebra, exhaustive enumeration) and never
calls the package's fast paths, so a bug in the library cannot hide in
its own oracle.
"""

import itertools

import numpy as np


def dense_extraction_matrix(height, width, filter_size):
    """Stacked patch-extraction operator as one dense 0/1 matrix.

    Returns E of shape (num_slices * n, height * width) such that
    E @ x.ravel() stacks the vectorized zero-padded patches of x in
    row-major grid order. Built by raw index arithmetic only.
    """
    f = filter_size
    p = f - 1
    n = f * f
    gh, gw = height + p, width + p
    E = np.zeros((gh * gw * n, height * width))
    for r in range(gh):
        for c in range(gw):
            i = r * gw + c
            for dy in range(f):
                for dx in range(f):
                    yy, xx = r + dy - p, c + dx - p
                    if 0 <= yy < height and 0 <= xx < width:
                        E[i * n + dy * f + dx, yy * width + xx] = 1.0
    return E


def dense_slice_blocks(E, n):
    """Split a stacked extraction matrix into its per-slice blocks R_i."""
    num = E.shape[0] // n
    return [E[i * n : (i + 1) * n] for i in range(num)]


def dense_slice_update(x, Z, rho, E):
    """Exact minimizer of  0.5*||x - E^T s||^2 + (rho/2)*||s - z||^2.

    x is the image (2-D), Z the per-slice targets stacked as columns
    (n, num_slices), E the dense extraction matrix. Solves the full
    normal equations (E E^T + rho I) s = E x + rho z over the stacked
    slice vector and returns the result reshaped like Z.
    """
    n, num = Z.shape
    z = Z.T.reshape(-1)  # stacked slice order matches E's row blocks
    A = E @ E.T + rho * np.eye(E.shape[0])
    rhs = E @ np.asarray(x, dtype=float).ravel() + rho * z
    s = np.linalg.solve(A, rhs)
    return s.reshape(num, n).T


def dense_masked_slice_update(y, mask, Z, rho, E):
    """Exact minimizer of 0.5*||y - M E^T s||^2 + (rho/2)*||s - z||^2.

    M is the diagonal observation mask (1 = kept pixel). No structural
    shortcuts: forms the full system with explicit diagonal matrices.
    """
    n, num = Z.shape
    z = Z.T.reshape(-1)
    M = np.diag(np.asarray(mask, dtype=float).ravel())
    B = M @ E.T
    A = B.T @ B + rho * np.eye(E.shape[0])
    rhs = B.T @ (M @ np.asarray(y, dtype=float).ravel()) + rho * z
    s = np.linalg.solve(A, rhs)
    return s.reshape(num, n).T


def dense_joint_update(x, Z, Q, rho, eta, E):
    """Exact joint minimizer over (slices, cartoon) of

        0.5*||x - E^T s - c||^2 + (rho/2)*||s - z||^2 + (eta/2)*||c - q||^2.

    Returns (S, C) with S shaped like Z and C shaped like x. Solves the
    full (n*num + N) x (n*num + N) normal equations densely.
    """
    n, num = Z.shape
    N = np.asarray(x).size
    z = Z.T.reshape(-1)
    q = np.asarray(Q, dtype=float).ravel()
    B = np.hstack([E.T, np.eye(N)])  # maps [s; c] -> image
    reg = np.concatenate([np.full(n * num, rho), np.full(N, eta)])
    A = B.T @ B + np.diag(reg)
    rhs = B.T @ np.asarray(x, dtype=float).ravel() + np.concatenate(
        [rho * z, eta * q]
    )
    u = np.linalg.solve(A, rhs)
    S = u[: n * num].reshape(num, n).T
    C = u[n * num :].reshape(np.asarray(x).shape)
    return S, C


def lasso_objective(D, b, lam, alpha):
    """0.5*||b - D a||^2 + lam*||a||_1, evaluated directly."""
    r = np.asarray(b, dtype=float) - np.asarray(D, dtype=float) @ alpha
    return 0.5 * float(r @ r) + lam * float(np.abs(alpha).sum())


def lasso_by_sign_enumeration(D, b, lam):
    """Global LASSO minimizer for small m by sign-pattern enumeration.

    For every sign pattern in {-1, 0, +1}^m, solves the stationarity
    system restricted to the support and keeps the candidate with the
    lowest true objective (the zero vector is always a candidate). Exact
    up to least-squares roundoff; intended for m <= 4.
    """
    D = np.asarray(D, dtype=float)
    m = D.shape[1]
    best = np.zeros(m)
    best_obj = lasso_objective(D, b, lam, best)
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=m):
        sigma = np.array(signs)
        support = np.flatnonzero(sigma)
        if support.size == 0:
            continue
        Ds = D[:, support]
        G = Ds.T @ Ds
        rhs = Ds.T @ b - lam * sigma[support]
        sol, *_ = np.linalg.lstsq(G, rhs, rcond=None)
        cand = np.zeros(m)
        cand[support] = sol
        obj = lasso_objective(D, b, lam, cand)
        if obj < best_obj:
            best_obj = obj
            best = cand
    return best, best_obj


def tv_value(v, weight, isotropic=True):
    """Total variation of a 2-D array with forward differences and a
    reflecting last row/column (gradient zero there)."""
    v = np.asarray(v, dtype=float)
    gy = np.zeros_like(v)
    gx = np.zeros_like(v)
    gy[:-1, :] = v[1:, :] - v[:-1, :]
    gx[:, :-1] = v[:, 1:] - v[:, :-1]
    if isotropic:
        return weight * float(np.sqrt(gy * gy + gx * gx).sum())
    return weight * float(np.abs(gy).sum() + np.abs(gx).sum())


def tv_objective(v, z, weight, isotropic=True):
    """0.5*||v - z||^2 + weight * TV(v)."""
    d = np.asarray(v, dtype=float) - np.asarray(z, dtype=float)
    return 0.5 * float((d * d).sum()) + tv_value(v, weight, isotropic)


def greedy_atom_match(D_learned, D_true):
    """Greedily pair learned atoms with ground-truth atoms.

    Repeatedly picks the global best remaining |inner product| pair.
    Returns the list of absolute inner products, one per true atom,
    sorted from best to worst.
    """
    C = np.abs(np.asarray(D_learned).T @ np.asarray(D_true))
    C = C.copy()
    scores = []
    for _ in range(min(C.shape)):
        i, j = np.unravel_index(np.argmax(C), C.shape)
        scores.append(float(C[i, j]))
        C[i, :] = -1.0
        C[:, j] = -1.0
    return scores
