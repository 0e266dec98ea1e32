"""Controlled test-bed generators: planted dictionaries, sparse needle
fields, oscillatory textures and blocky cartoons, plus the matching
helper used to score recovered atoms against the planted ones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import normalize_columns
from .images import PatchGeometry, aggregate


def planted_dictionary(filter_size: int, num_atoms: int, rng) -> np.ndarray:
    """Random unit-norm ground-truth dictionary (n = filter_size**2)."""
    D = rng.standard_normal((filter_size * filter_size, num_atoms))
    return normalize_columns(D)


def sparse_needle_field(
    geometry: PatchGeometry,
    num_atoms: int,
    rng,
    active_fraction: float = 0.05,
    nonzeros: int = 2,
    amplitude_range: tuple[float, float] = (0.5, 1.5),
) -> np.ndarray:
    """Coefficient matrix with a few active slices, each exactly
    `nonzeros`-sparse with random signs and magnitudes."""
    if not 0 < active_fraction <= 1:
        raise ValueError("active_fraction must be in (0, 1]")
    if not 1 <= nonzeros <= num_atoms:
        raise ValueError("nonzeros must be in [1, num_atoms]")
    num = geometry.num_slices
    A = np.zeros((num_atoms, num))
    count = max(1, round(active_fraction * num))
    active = rng.choice(num, size=count, replace=False)
    lo, hi = amplitude_range
    for i in active:
        atoms = rng.choice(num_atoms, size=nonzeros, replace=False)
        amps = rng.uniform(lo, hi, size=nonzeros) * rng.choice([-1.0, 1.0], size=nonzeros)
        A[atoms, i] = amps
    return A


def compose_image(D, A, geometry: PatchGeometry) -> np.ndarray:
    """Render the global image sum_i R_i^T D a_i from planted needles."""
    return aggregate(np.asarray(D) @ np.asarray(A), geometry)


def _border_shares(atom: np.ndarray, filter_size: int) -> np.ndarray:
    """Fraction of squared mass in each border row/column of the atom."""
    sq = atom.reshape(filter_size, filter_size) ** 2
    total = sq.sum()
    return np.array(
        [sq[0].sum(), sq[-1].sum(), sq[:, 0].sum(), sq[:, -1].sum()]
    ) / total


def incoherent_balanced_atoms(
    filter_size: int,
    num_atoms: int,
    rng,
    max_coherence: float = 0.3,
    border_mass: tuple[float, float] = (0.17, 0.23),
    max_draws: int = 20000,
) -> np.ndarray:
    """Random unit-norm atoms that are pairwise incoherent and carry a
    calibrated energy share on every border row and column.

    Bounded mutual coherence keeps distinct atoms separable by sparse
    pursuit. The border-mass window pins how much energy a one-pixel
    shift sheds, so a shifted copy of an atom scores predictably lower
    than the atom itself in any patch-energy ranking — distinctions a
    learner needs when the same filter reappears at every offset of a
    sliding window.
    """
    if filter_size < 3:
        raise ValueError("balanced atoms need filter_size >= 3")
    lo, hi = border_mass
    n = filter_size * filter_size
    atoms: list[np.ndarray] = []
    for _ in range(max_draws):
        a = rng.standard_normal(n)
        a /= np.linalg.norm(a)
        shares = _border_shares(a, filter_size)
        if shares.min() < lo or shares.max() > hi:
            continue
        if all(abs(a @ b) <= max_coherence for b in atoms):
            atoms.append(a)
            if len(atoms) == num_atoms:
                return np.column_stack(atoms)
    raise RuntimeError(
        f"found only {len(atoms)}/{num_atoms} admissible atoms "
        f"in {max_draws} draws"
    )


@dataclass(frozen=True)
class RecoveryInstance:
    """A planted sparse-coding problem with a known answer."""

    dictionary: np.ndarray
    geometry: PatchGeometry
    needles: np.ndarray
    image: np.ndarray


def recovery_instance(
    height: int = 64,
    width: int = 64,
    filter_size: int = 5,
    num_atoms: int = 8,
    seed: int = 14,
    num_sites: int = 104,
    site_amplitudes: tuple[float, float] = (0.7, 1.1),
    anchor_amplitude: float = 2.0,
    anchor_partner: float = 0.2,
) -> RecoveryInstance:
    """Planted instance designed so dictionary learning can identify
    every atom from a cold start.

    Active slices sit on a stride-f grid of fully interior windows, so
    their supports are disjoint, nothing is clipped by the image
    border, and the slice decomposition of the image is unambiguous.
    Every needle is 2-sparse. Each atom gets one "anchor" occurrence —
    a dominant amplitude paired with a faint second atom — placed on a
    doubly-spaced subgrid so no patch window straddles two anchors.
    Amplitudes are calibrated so every window among the image's
    highest-energy ones shows a single anchored atom (centered, or a
    slightly shifted view of it) rather than a background mixture: a
    learner that seeds atoms from high-energy patches then starts on
    planted-atom content. The remaining sites mix random atom pairs at
    moderate amplitudes.
    """
    rng = np.random.default_rng(seed)
    f, m = filter_size, num_atoms
    D_true = incoherent_balanced_atoms(f, m, rng)
    g = PatchGeometry(height, width, f)
    gh, gw = g.grid_shape
    # A window with top-left grid corner (r, c) spans padded rows
    # r..r+f-1; it lies inside the original image iff f-1 <= r < height
    # (same for columns).
    anchor_sites = [
        (r, c)
        for r in np.arange(f - 1, height, 2 * f)
        for c in np.arange(f - 1, width, 2 * f)
    ]
    if len(anchor_sites) < m:
        raise ValueError("image too small to anchor every atom")
    picked = rng.choice(len(anchor_sites), size=m, replace=False)
    taken = set()
    A_true = np.zeros((m, g.num_slices))
    for j in range(m):
        r, c = anchor_sites[picked[j]]
        taken.add((r, c))
        i = r * gw + c
        partner = (j + int(rng.integers(1, m))) % m
        s1, s2 = rng.choice([-1.0, 1.0], size=2)
        A_true[j, i] = anchor_amplitude * s1
        A_true[partner, i] = anchor_partner * s2
    regular_sites = [
        (r, c)
        for r in np.arange(f - 1, height, f)
        for c in np.arange(f - 1, width, f)
        if (r, c) not in taken
    ]
    if num_sites > len(regular_sites):
        raise ValueError("not enough disjoint sites for num_sites")
    lo, hi = site_amplitudes
    for idx in rng.choice(len(regular_sites), size=num_sites, replace=False):
        r, c = regular_sites[idx]
        i = r * gw + c
        atoms = rng.choice(m, size=2, replace=False)
        amps = rng.uniform(lo, hi, size=2) * rng.choice([-1.0, 1.0], size=2)
        A_true[atoms, i] = amps
    x = compose_image(D_true, A_true, g)
    return RecoveryInstance(D_true, g, A_true, x)


def oscillating_atoms(filter_size: int, count: int = 4) -> np.ndarray:
    """Deterministic bank of oriented, zero-mean sinusoid filters.

    Orientations are spread uniformly over half a turn; the spatial
    frequency is fixed near the Nyquist band so the atoms read as
    texture rather than structure. Columns are unit norm.
    """
    f = filter_size
    yy, xx = np.mgrid[0:f, 0:f].astype(np.float64)
    yy -= (f - 1) / 2
    xx -= (f - 1) / 2
    cols = []
    for k in range(count):
        theta = np.pi * k / count
        carrier = np.cos(theta) * xx + np.sin(theta) * yy
        phase = 0.0 if k % 2 == 0 else np.pi / 2
        wave = np.cos(2.0 * np.pi * carrier / 2.5 + phase)
        wave -= wave.mean()
        cols.append(wave.ravel())
    return normalize_columns(np.column_stack(cols))


def blocky_cartoon(height: int, width: int, rng, cells: int = 4,
                   levels: tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Piecewise-constant image: a coarse random grid of flat cells."""
    lo, hi = levels
    grid = rng.uniform(lo, hi, size=(cells, cells))
    ys = np.linspace(0, cells, height, endpoint=False).astype(int)
    xs = np.linspace(0, cells, width, endpoint=False).astype(int)
    return grid[np.ix_(ys, xs)]


@dataclass(frozen=True)
class SeparationInstance:
    """A composite image with known cartoon and texture layers."""

    cartoon: np.ndarray
    texture: np.ndarray
    filters: np.ndarray
    image: np.ndarray


def textured_composite(
    height: int = 64,
    width: int = 64,
    filter_size: int = 8,
    seed: int = 0,
    cells: int = 4,
    amplitude: float = 2.5,
) -> SeparationInstance:
    """Piecewise-constant blocks plus a quadrant-tiled oscillatory layer.

    The texture tiles the interior stride-f lattice with occurrences of
    a four-filter sinusoid bank, one filter per image quadrant with
    random signs. Tiling (rather than scattering a few occurrences)
    keeps the oscillatory energy dominant in the patch statistics, so a
    texture dictionary refined during separation stays oscillatory
    instead of drifting onto the cartoon's edges.
    """
    rng = np.random.default_rng(seed)
    cartoon = blocky_cartoon(height, width, rng, cells=cells)
    filters = oscillating_atoms(filter_size, count=4)
    f = filter_size
    g = PatchGeometry(height, width, f)
    _, gw = g.grid_shape
    A = np.zeros((4, g.num_slices))
    for r in np.arange(f - 1, height, f):
        for c in np.arange(f - 1, width, f):
            quad = (0 if r < height // 2 else 2) + (0 if c < width // 2 else 1)
            A[quad, r * gw + c] = amplitude * rng.choice([-1.0, 1.0])
    texture = compose_image(filters, A, g)
    return SeparationInstance(cartoon, texture, filters, cartoon + texture)


def match_atoms(D_learned, D_true) -> list[tuple[int, int, float]]:
    """Greedy one-to-one pairing by largest |inner product|.

    Returns (learned_index, true_index, |ip|) triples, best first, one
    per true atom (assuming at least as many learned atoms).
    """
    C = np.abs(np.asarray(D_learned).T @ np.asarray(D_true))
    C = C.copy()
    pairs = []
    for _ in range(min(C.shape)):
        i, j = np.unravel_index(np.argmax(C), C.shape)
        pairs.append((int(i), int(j), float(C[i, j])))
        C[i, :] = -1.0
        C[:, j] = -1.0
    return pairs
