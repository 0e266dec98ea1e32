"""ADMM training engine.

One outer iteration runs, in order: needle pursuit (LASSO per slice),
slice reconstruction, aggregation into a global estimate, the local
slice update that spreads the aggregation error back onto the patches,
a dual ascent step, and a dictionary refinement pass. All slice-wise
steps are batched as (n, num_slices) array operations, so per-iteration
cost is linear in the number of pixels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dictionary import dictionary_update
from .images import PatchGeometry, aggregate, extract_slices
from .pursuit import Needle, PursuitConfig, gram, lasso_solve_batch, matrix_to_needles

_UNIT_NORM_TOL = 1e-8


@dataclass
class SliceField:
    """Per-image ADMM state: slices, scaled duals, and needle coefficients.

    All three are dense arrays with one column per slice position.
    coefficients has zero rows until the first pursuit fixes the
    dictionary size.
    """

    geometry: PatchGeometry
    slices: np.ndarray
    duals: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        n, num = self.geometry.patch_dim, self.geometry.num_slices
        if self.slices.shape != (n, num):
            raise ValueError(f"slices must be ({n}, {num})")
        if self.duals.shape != (n, num):
            raise ValueError(f"duals must be ({n}, {num})")
        if self.coefficients.ndim != 2 or self.coefficients.shape[1] != num:
            raise ValueError(f"coefficients must have {num} columns")

    @property
    def needles(self) -> list[Needle]:
        """Coefficients as one sparse Needle per slice."""
        return matrix_to_needles(self.coefficients)


@dataclass
class TrainConfig:
    """Knobs of the training loop.

    lam weights the l1 term of the global objective; rho is the ADMM
    penalty; iters the outer iteration count; subsample the fraction of
    slices refreshed by pursuit each iteration (1.0 = all; slices left
    out keep their previous needles). pursuit.lam is overridden with
    lam/rho internally, the remaining pursuit fields apply as given.
    """

    lam: float = 1.0
    rho: float = 1.0
    iters: int = 300
    subsample: float = 1.0
    pursuit: PursuitConfig = field(default_factory=PursuitConfig)
    dict_sweeps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if self.dict_sweeps < 1:
            raise ValueError("dict_sweeps must be >= 1")


@dataclass
class MetricsRow:
    """Per-iteration objective decomposition.

    data_term and l1_term evaluate the global objective at the
    needle-feasible point (image minus the aggregated D @ coefficients);
    slice_data_term evaluates the same data fit at the raw slices, which
    are infeasible mid-run; max_primal_residual is the largest
    ||s_i - D a_i||_2 over slices; time_ms is wall-clock time since the
    start of the run.
    """

    iteration: int
    data_term: float
    l1_term: float
    objective: float
    slice_data_term: float
    max_primal_residual: float
    time_ms: float


def _check_dictionary(D) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[1] < 1:
        raise ValueError("dictionary must be a (n, m) matrix")
    f = int(round(D.shape[0] ** 0.5))
    if f * f != D.shape[0]:
        raise ValueError("dictionary rows must be a square filter size")
    norms = np.linalg.norm(D, axis=0)
    if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
        raise ValueError("dictionary columns must be unit norm")
    return D


def _coef_matrix(fieldstate: SliceField, m: int) -> np.ndarray:
    A = fieldstate.coefficients
    if A.shape[0] == m:
        return A
    if A.shape[0] == 0:
        return np.zeros((m, fieldstate.geometry.num_slices))
    raise ValueError(
        f"field carries coefficients for {A.shape[0]} atoms, dictionary has {m}"
    )


def init_slicefield(x, geometry: PatchGeometry) -> SliceField:
    """Fresh ADMM state: slices = patches / n, zero duals, no needles.

    Dividing by the per-pixel cover count n makes the initial slices
    aggregate back to the image exactly.
    """
    S = extract_slices(x, geometry) / geometry.patch_dim
    return SliceField(
        geometry=geometry,
        slices=S,
        duals=np.zeros_like(S),
        coefficients=np.zeros((0, geometry.num_slices)),
    )


def _slice_update_core(target_slices_over_rho, fieldstate, D, rho, mask=None):
    """Shared implementation of the (masked) exact slice minimizer.

    Solves min over all slices jointly of
        0.5*||x - sum_i R_i^T s_i||^2 + (rho/2)*sum_i ||s_i - D a_i + u_i||^2
    via the local recipe: form per-slice estimates p_i, aggregate them,
    and subtract the re-extracted aggregate scaled by 1/(rho + n). With
    a mask, the aggregate is masked before re-extraction, which is the
    exact minimizer of the masked data term for a binary mask and
    pre-masked input. mask=None follows the identical code path (the
    masked variant with an all-ones mask multiplies by 1.0 and is
    bit-identical).
    """
    g = fieldstate.geometry
    A = _coef_matrix(fieldstate, D.shape[1])
    P = target_slices_over_rho + D @ A - fieldstate.duals
    estimate = aggregate(P, g)
    if mask is not None:
        estimate = estimate * mask
    return P - extract_slices(estimate, g) / (rho + g.patch_dim)


def slice_update(fieldstate: SliceField, x, D, rho: float) -> SliceField:
    """Exact joint minimizer over the slices, computed locally.

    Returns a new SliceField with fresh slices; duals and coefficients
    are carried over unchanged (same arrays).
    """
    if rho <= 0:
        raise ValueError("rho must be > 0")
    D = _check_dictionary(D)
    g = fieldstate.geometry
    S = _slice_update_core(extract_slices(x, g) / rho, fieldstate, D, rho)
    return SliceField(g, S, fieldstate.duals, fieldstate.coefficients)


def masked_slice_update(fieldstate: SliceField, y, mask, D, rho: float) -> SliceField:
    """Slice update against a partially observed image.

    mask is binary (1 = observed); y must already be zero at unobserved
    pixels. With mask all ones this reproduces slice_update bit for bit.
    """
    if rho <= 0:
        raise ValueError("rho must be > 0")
    D = _check_dictionary(D)
    g = fieldstate.geometry
    mask = _check_mask(mask, (g.height, g.width))
    S = _slice_update_core(extract_slices(y, g) / rho, fieldstate, D, rho, mask=mask)
    return SliceField(g, S, fieldstate.duals, fieldstate.coefficients)


def _check_mask(mask, shape) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise ValueError("mask entries must be 0 or 1")
    return mask


def dual_update(fieldstate: SliceField, D) -> SliceField:
    """Scaled dual ascent: u <- u + s - D a."""
    D = _check_dictionary(D)
    A = _coef_matrix(fieldstate, D.shape[1])
    U = fieldstate.duals + fieldstate.slices - D @ A
    return SliceField(
        fieldstate.geometry, fieldstate.slices, U, fieldstate.coefficients
    )


def csc_objective(x, fieldstate: SliceField, D, lam: float) -> MetricsRow:
    """Objective decomposition at the current state (iteration/time 0).

    The headline data term and objective are evaluated at the
    needle-feasible reconstruction; the slice-based data fit and the
    primal residual report ADMM consistency.
    """
    D = _check_dictionary(D)
    g = fieldstate.geometry
    x = np.asarray(x, dtype=np.float64)
    A = _coef_matrix(fieldstate, D.shape[1])
    DA = D @ A
    recon_err = x - aggregate(DA, g)
    data = 0.5 * float(np.sum(recon_err * recon_err))
    l1 = lam * float(np.abs(A).sum())
    slice_err = x - aggregate(fieldstate.slices, g)
    slice_data = 0.5 * float(np.sum(slice_err * slice_err))
    R = fieldstate.slices - DA
    prim = float(np.sqrt(np.max(np.sum(R * R, axis=0)))) if R.size else 0.0
    return MetricsRow(0, data, l1, data + l1, slice_data, prim, 0.0)


def _combine_rows(rows, iteration, time_ms) -> MetricsRow:
    return MetricsRow(
        iteration=iteration,
        data_term=sum(r.data_term for r in rows),
        l1_term=sum(r.l1_term for r in rows),
        objective=sum(r.objective for r in rows),
        slice_data_term=sum(r.slice_data_term for r in rows),
        max_primal_residual=max(r.max_primal_residual for r in rows),
        time_ms=time_ms,
    )


def _as_image_list(images):
    if isinstance(images, np.ndarray) and images.ndim == 2:
        images = [images]
    out = []
    for x in images:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("images must be 2-D arrays")
        if not np.isfinite(x).all():
            raise ValueError("images must be finite")
        out.append(x)
    if not out:
        raise ValueError("no images given")
    return out


def train(images, cfg: TrainConfig, D0, on_metrics=None):
    """Learn a local dictionary from one or more images.

    Parameters
    ----------
    images : 2-D array or list of 2-D arrays
    cfg : TrainConfig
    D0 : array, shape (n, m)
        Starting dictionary, unit-norm columns, n a square.
    on_metrics : callable, optional
        Called with each MetricsRow as it is produced.

    Returns
    -------
    (D, fields, metrics)
        The trained dictionary, the final per-image SliceField list, and
        the list of per-iteration MetricsRow (summed over images).

    With cfg.iters = 0 the initial dictionary and freshly initialized
    fields are returned untouched and metrics is empty.
    """
    D = _check_dictionary(D0).copy()
    images = _as_image_list(images)
    f = int(round(D.shape[0] ** 0.5))
    m = D.shape[1]
    for x in images:
        if x.shape[0] < f or x.shape[1] < f:
            raise ValueError(f"image {x.shape} smaller than the {f}x{f} filter")

    geoms = [PatchGeometry(x.shape[0], x.shape[1], f) for x in images]
    fields = [init_slicefield(x, g) for x, g in zip(images, geoms)]
    metrics: list[MetricsRow] = []
    if cfg.iters == 0:
        return D, fields, metrics

    rng = np.random.default_rng(cfg.seed)
    pursuit_cfg = replace(cfg.pursuit, lam=cfg.lam / cfg.rho)
    # the data-dependent halves of the slice estimates never change
    targets_over_rho = [extract_slices(x, g) / cfg.rho for x, g in zip(images, geoms)]
    coefs = [np.zeros((m, g.num_slices)) for g in geoms]
    start = time.perf_counter()

    for it in range(cfg.iters):
        G = gram(D)
        for idx, (x, g) in enumerate(zip(images, geoms)):
            fld = fields[idx]
            A = coefs[idx]
            B = fld.slices + fld.duals
            if cfg.subsample < 1.0:
                count = max(1, round(cfg.subsample * g.num_slices))
                chosen = np.sort(rng.choice(g.num_slices, size=count, replace=False))
                sub, _ = lasso_solve_batch(
                    D, B[:, chosen], pursuit_cfg, G=G, warm=A[:, chosen]
                )
                A[:, chosen] = sub
            else:
                A, _ = lasso_solve_batch(D, B, pursuit_cfg, G=G, warm=A)
                coefs[idx] = A
            fld = SliceField(g, fld.slices, fld.duals, A)
            S = _slice_update_core(targets_over_rho[idx], fld, D, cfg.rho)
            U = fld.duals + S - D @ A
            fields[idx] = SliceField(g, S, U, A)

        # Measure the splitting state here, with the needles the pursuit
        # produced and the dictionary they were computed against. The
        # dictionary update below re-fits coefficient values on their
        # supports, which absorbs the scaled dual into D@A and would make
        # the primal residual read as the dual magnitude instead of the
        # actual slice feasibility gap.
        rows = [
            csc_objective(x, fld, D, cfg.lam) for x, fld in zip(images, fields)
        ]

        pooled_targets = np.hstack([f2.slices + f2.duals for f2 in fields])
        pooled_coefs = np.hstack(coefs)
        D, pooled_coefs = dictionary_update(
            D, pooled_targets, pooled_coefs, sweeps=cfg.dict_sweeps
        )
        offset = 0
        for idx, g in enumerate(geoms):
            span = g.num_slices
            coefs[idx] = pooled_coefs[:, offset : offset + span]
            fields[idx] = SliceField(
                g, fields[idx].slices, fields[idx].duals, coefs[idx]
            )
            offset += span

        elapsed_ms = (time.perf_counter() - start) * 1e3
        row = _combine_rows(rows, it, elapsed_ms)
        metrics.append(row)
        if on_metrics is not None:
            on_metrics(row)
    return D, fields, metrics


def inpaint(y, mask, D, cfg: TrainConfig, learn_on_corrupted: bool = False,
            on_metrics=None):
    """Fill unobserved pixels by sparse coding against the mask.

    y is the corrupted image and mask its binary observation pattern
    (1 = trusted pixel). y is multiplied by the mask on entry, so
    whatever values the corrupted pixels carry are ignored. When
    learn_on_corrupted is set the dictionary is refined each iteration
    on the masked data itself; otherwise D is used as given. Returns the
    full needle reconstruction (observed pixels included).
    """
    D = _check_dictionary(D).copy()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or not np.isfinite(y).all():
        raise ValueError("corrupted image must be a finite 2-D array")
    mask = _check_mask(mask, y.shape)
    y = y * mask
    f = int(round(D.shape[0] ** 0.5))
    m = D.shape[1]
    if y.shape[0] < f or y.shape[1] < f:
        raise ValueError(f"image {y.shape} smaller than the {f}x{f} filter")

    g = PatchGeometry(y.shape[0], y.shape[1], f)
    fld = init_slicefield(y, g)
    A = np.zeros((m, g.num_slices))
    rng = np.random.default_rng(cfg.seed)
    pursuit_cfg = replace(cfg.pursuit, lam=cfg.lam / cfg.rho)
    target_over_rho = extract_slices(y, g) / cfg.rho
    start = time.perf_counter()

    for it in range(cfg.iters):
        G = gram(D)
        B = fld.slices + fld.duals
        if cfg.subsample < 1.0:
            count = max(1, round(cfg.subsample * g.num_slices))
            chosen = np.sort(rng.choice(g.num_slices, size=count, replace=False))
            sub, _ = lasso_solve_batch(D, B[:, chosen], pursuit_cfg, G=G,
                                       warm=A[:, chosen])
            A[:, chosen] = sub
        else:
            A, _ = lasso_solve_batch(D, B, pursuit_cfg, G=G, warm=A)
        fld = SliceField(g, fld.slices, fld.duals, A)
        S = _slice_update_core(target_over_rho, fld, D, cfg.rho, mask=mask)
        U = fld.duals + S - D @ A
        fld = SliceField(g, S, U, A)
        # Metrics reflect the splitting state before the dictionary
        # refit, for the same reason as in train().
        row = _masked_objective(y, mask, fld, D, cfg.lam) if on_metrics else None
        if learn_on_corrupted:
            D, A = dictionary_update(D, S + U, A, sweeps=cfg.dict_sweeps)
            fld = SliceField(g, S, U, A)
        if on_metrics is not None:
            elapsed_ms = (time.perf_counter() - start) * 1e3
            on_metrics(replace(row, iteration=it, time_ms=elapsed_ms))
    return aggregate(D @ A, g)


def _masked_objective(y, mask, fieldstate, D, lam) -> MetricsRow:
    """Objective decomposition with the data terms restricted to
    observed pixels (the reconstruction is free elsewhere)."""
    g = fieldstate.geometry
    A = _coef_matrix(fieldstate, D.shape[1])
    DA = D @ A
    err = mask * (y - aggregate(DA, g))
    data = 0.5 * float(np.sum(err * err))
    l1 = lam * float(np.abs(A).sum())
    serr = mask * (y - aggregate(fieldstate.slices, g))
    slice_data = 0.5 * float(np.sum(serr * serr))
    R = fieldstate.slices - DA
    prim = float(np.sqrt(np.max(np.sum(R * R, axis=0)))) if R.size else 0.0
    return MetricsRow(0, data, l1, data + l1, slice_data, prim, 0.0)
