"""Per-mode slow/fast decoupling of a reordered system.

With ``L_i = (A22^i)^{-1} A21^i`` the change of variable ``y = z + L_i x``
turns the mode-``i`` flow into::

    dx/dt     = A0 x + B1 y
    eps dy/dt = A22 y + eps (B2 x + B3 y)

where ``A0 = A11 - A12 L``, ``B1 = A12``, ``B2 = L A0`` and ``B3 = L A12``.
In ``(x, y)`` coordinates a jump from mode ``i`` to ``i'`` acts through
``R = P_{i'} J P_i^{-1}`` with ``P_i = [[I, 0], [L_i, I]]``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SingularA22Error
from .tolerances import A22_RELATIVE_DET


@dataclass(frozen=True)
class A22Report:
    """Invertibility report for the fast block of one mode.

    ``relative_det`` is ``|det A22|`` divided by the product of its row
    norms (Hadamard ratio, in ``[0, 1]``).
    """

    mode: int
    relative_det: float
    condition: float
    invertible: bool


def _relative_det(A22):
    # an exactly singular block is reported through the ratio below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A22, check_finite=False)
    logdet = np.sum(np.log(np.abs(np.diag(lu)))) if np.all(np.diag(lu) != 0) else -np.inf
    rows = np.linalg.norm(A22, axis=1)
    if np.any(rows == 0):
        return 0.0, (lu, piv)
    return float(np.exp(logdet - np.sum(np.log(rows)))), (lu, piv)


def check_A22(reordered, raise_on_singular=True):
    """Check that every fast block ``A22^i`` is invertible.

    Returns
    -------
    list of A22Report

    Raises
    ------
    SingularA22Error
        For the first mode whose relative determinant is below
        ``A22_RELATIVE_DET`` (only when ``raise_on_singular``).
    """
    reports = []
    for i in range(reordered.n_modes):
        A22 = reordered.block(i, "A22")
        with np.errstate(divide="ignore"):
            rel, _ = _relative_det(A22)
        ok = rel >= A22_RELATIVE_DET
        cond = float(np.linalg.cond(A22)) if ok else np.inf
        reports.append(A22Report(i, rel, cond, ok))
        if not ok and raise_on_singular:
            raise SingularA22Error(i, rel)
    return reports


@dataclass(frozen=True)
class ModeBlocks:
    L: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    A0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    A22: np.ndarray

    def generator(self, epsilon):
        """Flow matrix of ``(x, y)``: ``d(x, y)/dt = G (x, y)``."""
        return np.block([[self.A0, self.B1], [self.B2, self.A22 / epsilon + self.B3]])


@dataclass(frozen=True)
class RBlocks:
    R11: np.ndarray
    R12: np.ndarray
    R21: np.ndarray
    R22: np.ndarray

    @property
    def full(self):
        return np.block([[self.R11, self.R12], [self.R21, self.R22]])


@dataclass(frozen=True)
class DecoupledSystem:
    """Decoupled blocks of every mode and every declared transition.

    None of the blocks depends on epsilon; it only enters the flow through
    ``A22 / epsilon``.
    """

    epsilon: float
    n_x: int
    n_z: int
    modes: tuple
    R: dict
    transitions: tuple
    reordered: object = field(repr=False, default=None)

    @property
    def n_modes(self):
        return len(self.modes)

    def generator(self, i):
        return self.modes[i].generator(self.epsilon)

    def to_xy(self, i, xz):
        """Map reordered coordinates ``(x, z)`` of mode ``i`` to ``(x, y)``."""
        return self.modes[i].P @ xz

    def to_xz(self, i, xy):
        return self.modes[i].P_inv @ xy


def decouple_mode(A, n_x, lu=None):
    """Blocks of one mode from its reordered flow matrix ``A``."""
    A11, A12 = A[:n_x, :n_x], A[:n_x, n_x:]
    A21, A22 = A[n_x:, :n_x], A[n_x:, n_x:]
    if lu is None:
        lu = scipy.linalg.lu_factor(A22, check_finite=False)
    L = scipy.linalg.lu_solve(lu, A21, check_finite=False)
    n_z = A22.shape[0]
    Ix, Iz = np.eye(n_x), np.eye(n_z)
    Zxz = np.zeros((n_x, n_z))
    P = np.block([[Ix, Zxz], [L, Iz]])
    P_inv = np.block([[Ix, Zxz], [-L, Iz]])
    A0 = A11 - A12 @ L
    return ModeBlocks(
        L=L, P=P, P_inv=P_inv, A0=A0, B1=A12.copy(), B2=L @ A0, B3=L @ A12, A22=A22.copy()
    )


def r_blocks(J, L_src, L_dst, n_x):
    """R-blocks of ``P_dst J P_src^{-1}`` written out block by block."""
    J11, J12 = J[:n_x, :n_x], J[:n_x, n_x:]
    J21, J22 = J[n_x:, :n_x], J[n_x:, n_x:]
    R11 = J11 - J12 @ L_src
    return RBlocks(
        R11=R11,
        R12=J12.copy(),
        R21=L_dst @ R11 + J21 - J22 @ L_src,
        R22=L_dst @ J12 + J22,
    )


def r_product(J, P_src_inv, P_dst, n_x):
    """Same blocks as :func:`r_blocks`, by forming the triple product."""
    R = P_dst @ J @ P_src_inv
    return RBlocks(R[:n_x, :n_x], R[:n_x, n_x:], R[n_x:, :n_x], R[n_x:, n_x:])


def build_decoupled(reordered):
    """Decouple every mode and transition of a :class:`~sphybrid.model.ReorderedSystem`.

    Raises
    ------
    SingularA22Error
        If some ``A22^i`` is singular.
    """
    check_A22(reordered)
    nx = reordered.n_x
    modes = tuple(decouple_mode(A, nx) for A in reordered.A)
    R = {
        t: r_blocks(J, modes[t.source].L, modes[t.target].L, nx)
        for t, J in reordered.jumps.items()
    }
    return DecoupledSystem(
        epsilon=reordered.epsilon,
        n_x=nx,
        n_z=reordered.n_z,
        modes=modes,
        R=R,
        transitions=reordered.transitions,
        reordered=reordered,
    )


@dataclass(frozen=True)
class ReducedOrderModel:
    """Slow-only hybrid system: flow ``dx/dt = A0^i x``, jumps ``x <- R11 x``."""

    A0: tuple
    R11: dict
    transitions: tuple

    @property
    def n_modes(self):
        return len(self.A0)

    def generator(self, i):
        return self.A0[i]


def reduced_order_model(decoupled):
    return ReducedOrderModel(
        A0=tuple(m.A0 for m in decoupled.modes),
        R11={t: r.R11 for t, r in decoupled.R.items()},
        transitions=decoupled.transitions,
    )
