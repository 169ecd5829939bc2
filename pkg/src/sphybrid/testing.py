"""Random system generators for property tests and benchmarks.

Flow matrices are built in slow-first coordinates from a Hurwitz reduced
block ``A0`` and a Hurwitz fast block ``A22`` so that both decoupled blocks
are Hurwitz by construction; a random slow/fast mask then scrambles the
coordinate order.
"""

import numpy as np

from .model import HybridSystemSpec, Mode, Transition


def random_hurwitz(rng, n, rate_range=(0.5, 3.0), coupling=0.5):
    """Upper-triangular-plus-noise matrix with spectral abscissa at most ``-rate_range[0]``.

    Built as ``V T V^{-1}`` with ``T`` upper triangular (negative diagonal)
    and ``V`` a well-conditioned random matrix.
    """
    d = -rng.uniform(*rate_range, size=n)
    T = np.diag(d) + np.triu(rng.normal(scale=coupling, size=(n, n)), 1)
    V = np.eye(n) + 0.3 * rng.normal(size=(n, n)) / max(1, n)
    return V @ T @ np.linalg.inv(V)


def random_reordered_flow(rng, n_x, n_z, coupling=1.0):
    A0 = random_hurwitz(rng, n_x)
    A22 = random_hurwitz(rng, n_z, rate_range=(1.0, 4.0))
    L = rng.normal(scale=coupling * 0.5, size=(n_z, n_x))
    A12 = rng.normal(scale=coupling * 0.5, size=(n_x, n_z))
    A11 = A0 + A12 @ L
    A21 = A22 @ L
    return np.block([[A11, A12], [A21, A22]])


def random_mask(rng, n_x, n_z):
    mask = np.array([False] * n_x + [True] * n_z)
    rng.shuffle(mask)
    return tuple(bool(m) for m in mask)


def _scramble(A, mask):
    mask = np.asarray(mask)
    order = np.concatenate([np.flatnonzero(~mask), np.flatnonzero(mask)])
    S = np.eye(mask.size)[order]
    return S.T @ A @ S


def random_two_mode_spec(rng, n_x=None, n_z=None, epsilon=1e-2, jump_scale=(0.3, 1.2), max_dim=3, coupling=1.0):
    """Two modes with the same slow/fast counts and one jump in each direction.

    ``jump_scale`` bounds the spectral norm of each jump matrix and
    ``coupling`` scales the slow/fast interconnection.
    """
    n_x = int(rng.integers(1, max_dim + 1)) if n_x is None else n_x
    n_z = int(rng.integers(1, max_dim + 1)) if n_z is None else n_z
    n = n_x + n_z
    modes = []
    for _ in range(2):
        mask = random_mask(rng, n_x, n_z)
        modes.append(Mode(_scramble(random_reordered_flow(rng, n_x, n_z, coupling), mask), mask))
    jumps = []
    for _ in range(2):
        J = rng.normal(size=(n, n))
        J *= rng.uniform(*jump_scale) / np.linalg.norm(J, 2)
        jumps.append(J)
    return HybridSystemSpec(
        epsilon=epsilon,
        modes=tuple(modes),
        jumps=tuple(jumps),
        transitions=(Transition(0, 0, 1), Transition(1, 1, 0)),
    )


def random_variable_dim_spec(rng, n_modes=None, max_dim=3, epsilon=1e-2):
    """Modes with different slow/fast counts, a jump between every ordered pair of distinct modes."""
    n_modes = int(rng.integers(2, 4)) if n_modes is None else n_modes
    counts = []
    while len(set(counts)) < 2:
        counts = [(int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1))) for _ in range(n_modes)]
    modes = []
    for nx, nz in counts:
        mask = random_mask(rng, nx, nz)
        modes.append(Mode(_scramble(random_reordered_flow(rng, nx, nz), mask), mask))
    jumps, trans = [], []
    for i, mi in enumerate(modes):
        for k, mk in enumerate(modes):
            if i == k:
                continue
            J = rng.normal(size=(mk.n, mi.n))
            J *= rng.uniform(0.3, 1.2) / np.linalg.norm(J, 2)
            trans.append(Transition(i, len(jumps), k))
            jumps.append(J)
    return HybridSystemSpec(epsilon=epsilon, modes=tuple(modes), jumps=tuple(jumps), transitions=tuple(trans), augment=True)
