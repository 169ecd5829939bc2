"""Dense real-matrix kernels shared by the rest of the package.

All functions are pure and work on small dense ``numpy`` arrays.
"""

import numpy as np
import scipy.linalg

from . import _backend
from .errors import (
    ExpmOverflowError,
    IllConditionedError,
    NegativeEntryError,
    NotHurwitzError,
    NotPDError,
    NotSymmetricError,
)
from .tolerances import (
    HURWITZ_MARGIN,
    LYAPUNOV_RESIDUAL_RTOL,
    SCHUR_MARGIN,
    SYMMETRY_RTOL,
)


def as_square(A, name="matrix"):
    """Return ``A`` as a finite float square array or raise ``ValueError``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def eigvals(A):
    """Eigenvalues of a square real matrix (LAPACK ``geev``)."""
    A = as_square(A)
    if A.shape[0] == 0:
        return np.empty(0, dtype=complex)
    return scipy.linalg.eigvals(A, check_finite=False)


def spectral_abscissa(A):
    """Largest real part among the eigenvalues of ``A``."""
    ev = eigvals(A)
    return float(np.max(ev.real)) if ev.size else -np.inf


def is_hurwitz(A):
    """True when every eigenvalue of ``A`` has real part below ``-HURWITZ_MARGIN``."""
    return spectral_abscissa(A) < -HURWITZ_MARGIN


def spectral_radius(M):
    """Largest eigenvalue modulus of a square matrix."""
    ev = eigvals(M)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def spectral_norm(M):
    """Largest singular value (induced 2-norm); 0 for empty matrices."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def check_symmetric(Q, name="matrix"):
    Q = as_square(Q, name)
    scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
    if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise NotSymmetricError(f"{name} is not symmetric")
    return 0.5 * (Q + Q.T)


def _sym_eig_pd(Q, name):
    Q = check_symmetric(Q, name)
    w, V = np.linalg.eigh(Q)
    if w.size and w[0] <= 0.0:
        raise NotPDError(f"{name} is not positive definite (min eigenvalue {w[0]:.3g})")
    return w, V


def principal_sqrt(Q):
    """Symmetric positive definite square root of an SPD matrix.

    Parameters
    ----------
    Q : array_like, shape (n, n)
        Symmetric positive definite.

    Returns
    -------
    ndarray
        ``B`` with ``B @ B == Q`` and ``B`` SPD.
    """
    w, V = _sym_eig_pd(Q, "Q")
    B = (V * np.sqrt(w)) @ V.T
    return 0.5 * (B + B.T)


def inv_sqrt(Q):
    """Inverse of :func:`principal_sqrt`."""
    w, V = _sym_eig_pd(Q, "Q")
    B = (V / np.sqrt(w)) @ V.T
    return 0.5 * (B + B.T)


def min_eig_sym(Q):
    """Smallest eigenvalue of a symmetric matrix."""
    Q = check_symmetric(Q)
    return float(np.linalg.eigvalsh(Q)[0]) if Q.size else np.inf


def solve_lyapunov(A, C):
    """Solve ``A.T @ Q + Q @ A = -C`` for symmetric ``Q``.

    The equation is vectorised as ``(I kron A.T + A.T kron I) vec(Q) = -vec(C)``
    and solved densely, which is fine at the sizes used here.

    Raises
    ------
    NotHurwitzError
        If ``A`` has an eigenvalue with non-negative real part.
    IllConditionedError
        If the residual check fails.
    """
    A = as_square(A, "A")
    C = check_symmetric(C, "C")
    n = A.shape[0]
    if C.shape != A.shape:
        raise ValueError("A and C must have the same shape")
    if not is_hurwitz(A):
        raise NotHurwitzError("A is not Hurwitz", mode=None, block=None)
    eye = np.eye(n)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    # vec is column-major; C and Q are symmetric so either ordering works,
    # but keep it explicit.
    q = np.linalg.solve(K, -C.reshape(-1, order="F"))
    Q = q.reshape((n, n), order="F")
    Q = 0.5 * (Q + Q.T)
    res = np.linalg.norm(A.T @ Q + Q @ A + C)
    bound = LYAPUNOV_RESIDUAL_RTOL * (np.linalg.norm(A, 2) * np.linalg.norm(Q, 2) + np.linalg.norm(C, 2))
    if not res <= bound:
        raise IllConditionedError(f"Lyapunov residual {res:.3g} exceeds {bound:.3g}")
    return Q


def is_schur_positive(M, margin=SCHUR_MARGIN):
    """Schur test for an entrywise nonnegative matrix, with a positive witness.

    Returns
    -------
    verdict : bool
        ``spectral_radius(M) < 1 - margin``.
    p : ndarray or None
        When the verdict is true, ``p = (I - M.T)^{-1} 1``. It is strictly
        positive and satisfies ``M.T @ p = p - 1 < p``.
    """
    M = as_square(M, "M")
    if np.any(M < 0):
        raise NegativeEntryError("matrix has negative entries")
    if spectral_radius(M) >= 1.0 - margin:
        return False, None
    n = M.shape[0]
    p = np.linalg.solve(np.eye(n) - M.T, np.ones(n))
    return True, p


def expm(A, t=1.0):
    """Matrix exponential ``exp(t*A)`` by scaling and squaring with Pade approximants.

    Raises
    ------
    ExpmOverflowError
        If the result is not finite.
    """
    A = as_square(A, "A")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    E = _backend.expm(A, float(t))
    if not np.all(np.isfinite(E)):
        raise ExpmOverflowError(f"exp(tA) overflowed for t={t}")
    return E
