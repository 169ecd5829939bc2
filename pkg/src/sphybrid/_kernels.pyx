# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: small dense matrix exponential and event propagation.

Same algorithms as ``_pykernels``; matrices are row-major C buffers.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, frexp, ldexp, isfinite, NAN, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

cnp.import_array()

cdef double[14] C13 = [
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
]
cdef double[4] C3 = [120.0, 60.0, 12.0, 1.0]
cdef double[6] C5 = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]
cdef double[8] C7 = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0]
cdef double[10] C9 = [
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
    2162160.0, 110880.0, 3960.0, 90.0, 1.0,
]
cdef double[5] THETA = [
    1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
    2.097847961257068e0, 5.371920351148152e0,
]

# scratch layout, in units of n*n doubles
cdef enum:
    N_WORK = 9


cdef inline void matmul(const double* A, const double* B, double* C, int n) noexcept nogil:
    cdef int i, j, k
    cdef double a
    memset(C, 0, n * n * sizeof(double))
    for i in range(n):
        for k in range(n):
            a = A[i * n + k]
            if a != 0.0:
                for j in range(n):
                    C[i * n + j] += a * B[k * n + j]


cdef int solve_inplace(double* P, double* Q, int n) noexcept nogil:
    """Overwrite Q with P^{-1} Q (partial pivoting); P is destroyed."""
    cdef int i, j, k, p
    cdef double big, f, tmp
    for k in range(n):
        p = k
        big = fabs(P[k * n + k])
        for i in range(k + 1, n):
            if fabs(P[i * n + k]) > big:
                big = fabs(P[i * n + k])
                p = i
        if big == 0.0:
            return -1
        if p != k:
            for j in range(n):
                tmp = P[k * n + j]; P[k * n + j] = P[p * n + j]; P[p * n + j] = tmp
                tmp = Q[k * n + j]; Q[k * n + j] = Q[p * n + j]; Q[p * n + j] = tmp
        for i in range(k + 1, n):
            f = P[i * n + k] / P[k * n + k]
            if f != 0.0:
                for j in range(k, n):
                    P[i * n + j] -= f * P[k * n + j]
                for j in range(n):
                    Q[i * n + j] -= f * Q[k * n + j]
    for k in range(n - 1, -1, -1):
        for j in range(n):
            tmp = Q[k * n + j]
            for i in range(k + 1, n):
                tmp -= P[k * n + i] * Q[i * n + j]
            Q[k * n + j] = tmp / P[k * n + k]
    return 0


cdef void pade_low(const double* A, int m, double* U, double* V, double* work, int n) noexcept nogil:
    cdef int nn = n * n
    cdef double* A2 = work
    cdef double* P = work + nn          # current even power
    cdef double* T = work + 2 * nn
    cdef const double* c
    cdef int i, j, top
    if m == 3:
        c = C3
    elif m == 5:
        c = C5
    elif m == 7:
        c = C7
    else:
        c = C9
    matmul(A, A, A2, n)
    memset(U, 0, nn * sizeof(double))
    memset(V, 0, nn * sizeof(double))
    # power index 0 is the identity
    for i in range(n):
        U[i * n + i] += c[1]
        V[i * n + i] += c[0]
    memcpy(P, A2, nn * sizeof(double))
    top = (m - 1) // 2
    for j in range(1, top + 1):
        for i in range(nn):
            U[i] += c[2 * j + 1] * P[i]
            V[i] += c[2 * j] * P[i]
        if j < top:
            matmul(P, A2, T, n)
            memcpy(P, T, nn * sizeof(double))
    matmul(A, U, T, n)
    memcpy(U, T, nn * sizeof(double))


cdef void pade13(const double* A, double* U, double* V, double* work, int n) noexcept nogil:
    cdef int nn = n * n
    cdef double* A2 = work
    cdef double* A4 = work + nn
    cdef double* A6 = work + 2 * nn
    cdef double* T = work + 3 * nn
    cdef double* T2 = work + 4 * nn
    cdef int i
    matmul(A, A, A2, n)
    matmul(A2, A2, A4, n)
    matmul(A2, A4, A6, n)
    for i in range(nn):
        T[i] = C13[13] * A6[i] + C13[11] * A4[i] + C13[9] * A2[i]
    matmul(A6, T, T2, n)
    for i in range(nn):
        T2[i] += C13[7] * A6[i] + C13[5] * A4[i] + C13[3] * A2[i]
    for i in range(n):
        T2[i * n + i] += C13[1]
    matmul(A, T2, U, n)
    for i in range(nn):
        T[i] = C13[12] * A6[i] + C13[10] * A4[i] + C13[8] * A2[i]
    matmul(A6, T, V, n)
    for i in range(nn):
        V[i] += C13[6] * A6[i] + C13[4] * A4[i] + C13[2] * A2[i]
    for i in range(n):
        V[i * n + i] += C13[0]


cdef int expm_c(const double* G, double t, double* out, double* work, int n) noexcept nogil:
    """out = exp(t*G); ``work`` holds N_WORK*n*n doubles. Returns -1 on failure."""
    cdef int nn = n * n
    cdef double* A = work
    cdef double* U = work + nn
    cdef double* V = work + 2 * nn
    cdef double* scratch = work + 3 * nn
    cdef double norm1 = 0.0, colsum, frac
    cdef int i, j, m, s = 0, mi
    cdef int[4] lows = [3, 5, 7, 9]
    for i in range(nn):
        A[i] = G[i] * t
    for j in range(n):
        colsum = 0.0
        for i in range(n):
            colsum += fabs(A[i * n + j])
        if colsum > norm1:
            norm1 = colsum
    if not isfinite(norm1):
        for i in range(nn):
            out[i] = NAN
        return -1
    m = 13
    for mi in range(4):
        if norm1 <= THETA[mi]:
            m = lows[mi]
            break
    if m == 13:
        if norm1 > THETA[4]:
            frac = frexp(norm1 / THETA[4], &s)
            if frac == 0.5:
                s -= 1
            for i in range(nn):
                A[i] = ldexp(A[i], -s)
        pade13(A, U, V, scratch, n)
    else:
        pade_low(A, m, U, V, scratch, n)
    # solve (V - U) F = (V + U)
    for i in range(nn):
        scratch[i] = V[i] - U[i]
        out[i] = V[i] + U[i]
    if solve_inplace(scratch, out, n) != 0:
        return -1
    for i in range(s):
        matmul(out, out, scratch, n)
        memcpy(out, scratch, nn * sizeof(double))
    return 0


def expm(A, double t=1.0):
    """Return ``exp(t*A)`` for a square float array."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef int n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((n, n))
    if n == 0:
        return out
    cdef double* work = <double*> malloc(N_WORK * n * n * sizeof(double))
    cdef int status
    try:
        status = expm_c(&a[0, 0], t, &out[0, 0], work, n)
    finally:
        free(work)
    if status != 0:
        out.fill(np.nan)
    return out


cdef enum:
    CACHE_SLOTS = 4


def propagate(gens, modes, dts, jumps, jump_mats, x0, double blowup):
    """Step a state through (mode, duration, jump) records; see ``_pykernels.propagate``."""
    cdef double[:, :, ::1] G = np.ascontiguousarray(gens, dtype=np.float64)
    cdef Py_ssize_t[::1] md = np.ascontiguousarray(modes, dtype=np.intp)
    cdef double[::1] dt = np.ascontiguousarray(dts, dtype=np.float64)
    cdef Py_ssize_t[::1] jp = np.ascontiguousarray(jumps, dtype=np.intp)
    cdef double[:, :, ::1] J = np.ascontiguousarray(jump_mats, dtype=np.float64)
    cdef Py_ssize_t K = md.shape[0]
    cdef int n = G.shape[1]
    cdef Py_ssize_t n_modes = G.shape[0]
    pre_arr = np.empty((K, n))
    post_arr = np.empty((K, n))
    cdef double[:, ::1] pre = pre_arr
    cdef double[:, ::1] post = post_arr
    cdef double[:, ::1] cache_dt = np.full((max(n_modes, 1), CACHE_SLOTS), np.nan)
    cdef double[:, :, ::1] cache_phi = np.zeros((max(n_modes, 1) * CACHE_SLOTS, n, n))
    cdef Py_ssize_t[::1] cache_next = np.zeros(max(n_modes, 1), dtype=np.intp)
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.empty(n)
    cdef double* work = <double*> malloc(N_WORK * n * n * sizeof(double) + 1)
    cdef Py_ssize_t k, slot, m, c
    cdef int i, j
    cdef double acc, sq, sq_pre
    cdef double limit = blowup * blowup
    cdef double* phi
    cdef bint stopped = False
    cdef Py_ssize_t count = K
    try:
        with nogil:
            for k in range(K):
                m = md[k]
                slot = -1
                for c in range(CACHE_SLOTS):
                    if cache_dt[m, c] == dt[k]:
                        slot = c
                        break
                if slot < 0:
                    slot = cache_next[m]
                    cache_next[m] = (slot + 1) % CACHE_SLOTS
                    phi = &cache_phi[m * CACHE_SLOTS + slot, 0, 0]
                    if expm_c(&G[m, 0, 0], dt[k], phi, work, n) != 0:
                        for i in range(n * n):
                            phi[i] = INFINITY
                    cache_dt[m, slot] = dt[k]
                phi = &cache_phi[m * CACHE_SLOTS + slot, 0, 0]
                sq_pre = 0.0
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc = acc + phi[i * n + j] * x[j]
                    y[i] = acc
                    pre[k, i] = acc
                    sq_pre = sq_pre + acc * acc
                sq = 0.0
                if jp[k] >= 0:
                    for i in range(n):
                        acc = 0.0
                        for j in range(n):
                            acc = acc + J[jp[k], i, j] * y[j]
                        x[i] = acc
                        post[k, i] = acc
                        sq = sq + acc * acc
                else:
                    for i in range(n):
                        x[i] = y[i]
                        post[k, i] = y[i]
                    sq = sq_pre
                if not (sq <= limit and sq_pre <= limit):
                    stopped = True
                    count = k + 1
                    break
    finally:
        free(work)
    return pre_arr, post_arr, count, bool(stopped)
