"""NumPy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation and are used when the
compiled module is unavailable (or when ``SPHYBRID_PURE_PYTHON`` is set).
"""

import math

import numpy as np

# Scaling-and-squaring with diagonal Pade approximants of degree 3..13.
PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}
THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_low(A, m, ident):
    c = PADE_COEFFS[m]
    A2 = A @ A
    powers = [ident, A2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ A2)
    U = np.zeros_like(A)
    V = np.zeros_like(A)
    for j in range(m, 0, -2):
        U += c[j] * powers[j // 2]
    U = A @ U
    for j in range(m - 1, -1, -2):
        V += c[j] * powers[j // 2]
    return U, V


def _pade13(A, ident):
    c = PADE_COEFFS[13]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (c[13] * A6 + c[11] * A4 + c[9] * A2)
             + c[7] * A6 + c[5] * A4 + c[3] * A2 + c[1] * ident)
    V = (A6 @ (c[12] * A6 + c[10] * A4 + c[8] * A2)
         + c[6] * A6 + c[4] * A4 + c[2] * A2 + c[0] * ident)
    return U, V


def expm(A, t=1.0):
    """Return ``exp(t*A)`` for a square float array."""
    A = np.asarray(A, dtype=float) * t
    n = A.shape[0]
    ident = np.eye(n)
    if n == 0:
        return ident
    norm1 = float(np.abs(A).sum(axis=0).max())
    if not math.isfinite(norm1):
        return np.full((n, n), np.nan)
    for m in (3, 5, 7, 9):
        if norm1 <= THETA[m]:
            U, V = _pade_low(A, m, ident)
            return np.linalg.solve(V - U, V + U)
    s = 0
    if norm1 > THETA[13]:
        frac, s = math.frexp(norm1 / THETA[13])
        s -= frac == 0.5
        A = A / 2.0**s
    U, V = _pade13(A, ident)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def propagate(gens, modes, dts, jumps, jump_mats, x0, blowup):
    """Step a state through a list of (mode, duration, jump) records.

    Parameters
    ----------
    gens : ndarray, shape (n_modes, n, n)
        Generator ``G`` of each mode (``dX/dt = G X``).
    modes, dts, jumps : ndarray, shape (K,)
        Step ``k`` flows for ``dts[k]`` under ``modes[k]`` and then applies
        ``jump_mats[jumps[k]]`` unless ``jumps[k] < 0``.
    x0 : ndarray, shape (n,)
    blowup : float
        Stop as soon as the state norm exceeds this value or stops being finite.

    Returns
    -------
    pre, post : ndarray, shape (K, n)
        State at the end of each flow step, before and after the jump.
    count : int
        Number of steps actually taken.
    stopped : bool
        True when the run ended early because of ``blowup``.
    """
    K = len(modes)
    n = x0.shape[0]
    pre = np.empty((K, n))
    post = np.empty((K, n))
    cache = {}
    x = np.array(x0, dtype=float)
    limit = blowup * blowup
    for k in range(K):
        key = (int(modes[k]), float(dts[k]))
        phi = cache.get(key)
        if phi is None:
            phi = expm(gens[key[0]], key[1])
            cache[key] = phi
        x = phi @ x
        pre[k] = x
        if jumps[k] >= 0:
            x = jump_mats[jumps[k]] @ x
        post[k] = x
        sq = float(x @ x)
        sq_pre = float(pre[k] @ pre[k])
        if not (sq <= limit and sq_pre <= limit):
            return pre, post, k + 1, True
    return pre, post, K, False
