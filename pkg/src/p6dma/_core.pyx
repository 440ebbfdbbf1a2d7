# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: codebook projection, precoder bisection, 2x2 solves
and a complete block-coordinate sweep of the PDD inner loop.

All routines mirror ``_core_py`` (and ``wmmse_pdd.bcd_sweep``) operation for
operation; the test-suite checks both backends against each other.
"""
import numpy as np

from libc.math cimport atan2, cos, sin, fabs, fmod, log, sqrt, M_PI, NAN
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport zheev

ctypedef double complex cplx

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _abs2(cplx x) noexcept nogil:
    return x.real * x.real + x.imag * x.imag


cdef inline cplx _conj(cplx x) noexcept nogil:
    return x.real - 1j * x.imag


cdef inline double _circ(double a) noexcept nogil:
    # |a| wrapped to [0, pi], same formula as the numpy fallback
    cdef double r = fmod(a + M_PI, TWO_PI)
    if r < 0:
        r += TWO_PI
    return fabs(r - M_PI)


cdef inline cplx _project_one(cplx x, const double[::1] phases, const double[::1] amps) noexcept nogil:
    cdef Py_ssize_t i, best = 0
    cdef double ang = atan2(x.imag, x.real)
    cdef double d, bestd = _circ(ang - phases[0])
    for i in range(1, phases.shape[0]):
        d = _circ(ang - phases[i])
        if d < bestd:
            bestd = d
            best = i
    cdef double ph = phases[best]
    cdef double cp = cos(ph), sp = sin(ph)
    cdef double proj = x.real * cp + x.imag * sp
    best = 0
    bestd = (amps[0] - proj) * (amps[0] - proj)
    for i in range(1, amps.shape[0]):
        d = (amps[i] - proj) * (amps[i] - proj)
        if d < bestd:
            bestd = d
            best = i
    return amps[best] * cp + 1j * (amps[best] * sp)


def project_codebook(const cplx[::1] targets, const double[::1] phases, const double[::1] amps):
    cdef Py_ssize_t n = targets.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _project_one(targets[i], phases, amps)
    return out


cdef double _eta(const double *lam, const double *p, Py_ssize_t n, double zeta, int max_iter) noexcept nogil:
    cdef Py_ssize_t i
    cdef double total = 0.0, pw = 0.0, lo = 0.0, hi, mid
    cdef bint all_pos = True
    for i in range(n):
        total += p[i]
        if lam[i] > 0:
            pw += p[i] / (lam[i] * lam[i])
        else:
            all_pos = False
    if total <= 0.0:
        return 0.0
    if all_pos and pw <= zeta:
        return 0.0
    hi = sqrt(total / zeta)
    cdef int it
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        pw = 0.0
        for i in range(n):
            pw += p[i] / ((lam[i] + mid) * (lam[i] + mid))
        if pw > zeta:
            lo = mid
        else:
            hi = mid
    return hi


def precoder_eta(const double[::1] lam, const double[::1] p, double zeta, int max_iter=200):
    if lam.shape[0] == 0:
        return 0.0
    return _eta(&lam[0], &p[0], lam.shape[0], zeta, max_iter)


def solve_2x2(const cplx[:, :, :] C, const cplx[:, :] b):
    cdef Py_ssize_t k, K = b.shape[0]
    out = np.empty((K, 2), dtype=np.complex128)
    cdef cplx[:, ::1] o = out
    cdef cplx det
    with nogil:
        for k in range(K):
            det = C[k, 0, 0] * C[k, 1, 1] - C[k, 0, 1] * C[k, 1, 0]
            o[k, 0] = (C[k, 1, 1] * b[k, 0] - C[k, 0, 1] * b[k, 1]) / det
            o[k, 1] = (C[k, 0, 0] * b[k, 1] - C[k, 1, 0] * b[k, 0]) / det
    return out


cdef void _cross(const cplx[:, ::1] hlos, const cplx[:, ::1] c, cplx *E, Py_ssize_t K, Py_ssize_t N) noexcept nogil:
    # E[k*K + j] = h_los_k^H c_j
    cdef Py_ssize_t k, j, n
    cdef cplx acc
    for k in range(K):
        for j in range(K):
            acc = 0
            for n in range(N):
                acc = acc + _conj(hlos[k, n]) * c[j, n]
            E[k * K + j] = acc


cdef void _polar_gains(const double[:, :, ::1] A, const cplx[:, ::1] w, const cplx[::1] v,
                       cplx *s, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t k
    cdef cplx m0, m1
    for k in range(K):
        m0 = A[k, 0, 0] * w[k, 0] + A[k, 0, 1] * w[k, 1]
        m1 = A[k, 1, 0] * w[k, 0] + A[k, 1, 1] * w[k, 1]
        s[k] = _conj(v[0]) * m0 + _conj(v[1]) * m1


cdef int _mse(const cplx *E, const cplx *s, const cplx[::1] xi, double noise, double *e,
              double *total, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t k, j
    cdef cplx xkk
    cdef double tot, a2 = 0
    for k in range(K):
        tot = noise
        for j in range(K):
            tot += _abs2(s[k]) * _abs2(E[k * K + j])
        xkk = _conj(s[k]) * E[k * K + k]
        total[k] = tot
        e[k] = _abs2(xi[k]) * tot - 2.0 * (_conj(xi[k]) * xkk).real + 1.0
    return 0


def pdd_sweep(const cplx[:, ::1] hlos, const double[:, :, ::1] depol, const double[::1] weights,
              cplx[:, ::1] w, cplx[:, ::1] w_bar, cplx[::1] v, cplx[::1] v_bar,
              cplx[::1] xi, double[::1] eps, cplx[:, ::1] c,
              const cplx[:, ::1] t, const cplx[::1] t_bar, double mu,
              double noise, double power, const double[::1] phases, const double[::1] amps,
              double bs_scale, bint update_c=True):
    """One in-place sweep over w, w_bar, v, v_bar, xi, eps, c; returns the new Lagrangian.

    Returns ``nan`` if a non-positive MSE is met (the caller raises).
    """
    cdef Py_ssize_t K = hlos.shape[0], N = hlos.shape[1]
    cdef Py_ssize_t k, j, n, i, m
    cdef double inv_mu = 1.0 / mu
    cdef double *spread = <double *> malloc(K * sizeof(double))
    cdef double *e = <double *> malloc(K * sizeof(double))
    cdef double *total = <double *> malloc(K * sizeof(double))
    cdef double *a = <double *> malloc(K * sizeof(double))
    cdef cplx *E = <cplx *> malloc(K * K * sizeof(cplx))
    cdef cplx *s = <cplx *> malloc(K * sizeof(cplx))
    cdef double *lam = NULL
    cdef double *rwork = NULL
    cdef double *pw = NULL
    cdef cplx *B = NULL
    cdef cplx *work = NULL
    cdef cplx *P = NULL
    cdef cplx *G = NULL
    cdef cplx *y = NULL
    cdef double *sd = NULL
    cdef cplx q0, q1, m0, m1, b0, b1, c00, c01, c10, c11, det, x, bb0, bb1
    cdef double alpha, lagr = 0.0, d, lam_max, eta
    cdef int nn, lwork, info
    cdef Py_ssize_t nkeep
    cdef cplx acc
    cdef bint any_rhs
    cdef bint bad = False
    info = 0
    try:
        with nogil:
            for k in range(K):
                a[k] = weights[k] * eps[k]
            _cross(hlos, c, E, K, N)
            for k in range(K):
                d = 0
                for j in range(K):
                    d += _abs2(E[k * K + j])
                spread[k] = d

            # user polarformers: (alpha q q^H + I/mu) w = 2 a conj(xi) E_kk q + (w_bar - mu t)/mu
            for k in range(K):
                q0 = depol[k, 0, 0] * v[0] + depol[k, 1, 0] * v[1]
                q1 = depol[k, 0, 1] * v[0] + depol[k, 1, 1] * v[1]
                alpha = 2.0 * a[k] * _abs2(xi[k]) * spread[k]
                c00 = alpha * _abs2(q0) + inv_mu
                c01 = alpha * q0 * _conj(q1)
                c10 = alpha * q1 * _conj(q0)
                c11 = alpha * _abs2(q1) + inv_mu
                x = 2.0 * a[k] * _conj(xi[k]) * E[k * K + k]
                b0 = x * q0 + (w_bar[k, 0] - mu * t[k, 0]) * inv_mu
                b1 = x * q1 + (w_bar[k, 1] - mu * t[k, 1]) * inv_mu
                det = c00 * c11 - c01 * c10
                w[k, 0] = (c11 * b0 - c01 * b1) / det
                w[k, 1] = (c00 * b1 - c10 * b0) / det
            for k in range(K):
                w_bar[k, 0] = _project_one(w[k, 0] + mu * t[k, 0], phases, amps)
                w_bar[k, 1] = _project_one(w[k, 1] + mu * t[k, 1], phases, amps)

            # BS polarformer
            c00 = inv_mu
            c01 = 0
            c10 = 0
            c11 = inv_mu
            bb0 = (v_bar[0] - mu * t_bar[0]) * inv_mu
            bb1 = (v_bar[1] - mu * t_bar[1]) * inv_mu
            for k in range(K):
                m0 = depol[k, 0, 0] * w[k, 0] + depol[k, 0, 1] * w[k, 1]
                m1 = depol[k, 1, 0] * w[k, 0] + depol[k, 1, 1] * w[k, 1]
                alpha = 2.0 * a[k] * _abs2(xi[k]) * spread[k]
                c00 = c00 + alpha * _abs2(m0)
                c01 = c01 + alpha * m0 * _conj(m1)
                c10 = c10 + alpha * m1 * _conj(m0)
                c11 = c11 + alpha * _abs2(m1)
                x = 2.0 * a[k] * xi[k] * _conj(E[k * K + k])
                bb0 = bb0 + x * m0
                bb1 = bb1 + x * m1
            det = c00 * c11 - c01 * c10
            v[0] = (c11 * bb0 - c01 * bb1) / det
            v[1] = (c00 * bb1 - c10 * bb0) / det
            v_bar[0] = bs_scale * _project_one((v[0] + mu * t_bar[0]) / bs_scale, phases, amps)
            v_bar[1] = bs_scale * _project_one((v[1] + mu * t_bar[1]) / bs_scale, phases, amps)

            # equalizers and weights
            _polar_gains(depol, w, v, s, K)
            for k in range(K):
                total[k] = noise
                for j in range(K):
                    total[k] += _abs2(s[k]) * _abs2(E[k * K + j])
                xi[k] = _conj(s[k]) * E[k * K + k] / total[k]
            _mse(E, s, xi, noise, e, total, K)
            for k in range(K):
                if not (e[k] > 0):
                    bad = True
                    break
                eps[k] = 1.0 / e[k]
                a[k] = weights[k] * eps[k]

            # precoders
            if update_c and not bad:
                any_rhs = False
                for k in range(K):
                    if a[k] * _abs2(xi[k]) * _abs2(s[k]) > 0:
                        any_rhs = True
                if power <= 0 or not any_rhs:
                    for k in range(K):
                        for n in range(N):
                            c[k, n] = 0
                else:
                    # B = G G^H with G = [sqrt(d_j) h_j] has rank <= K: diagonalise the
                    # K x K Gram matrix instead (column-major, M[j + k K] = g_j^H g_k)
                    B = <cplx *> malloc(K * K * sizeof(cplx))
                    G = <cplx *> malloc(K * K * sizeof(cplx))
                    lam = <double *> malloc(K * sizeof(double))
                    rwork = <double *> malloc((3 * K) * sizeof(double))
                    pw = <double *> malloc(K * sizeof(double))
                    sd = <double *> malloc(K * sizeof(double))
                    y = <cplx *> malloc(K * sizeof(cplx))
                    P = <cplx *> malloc(K * K * sizeof(cplx))
                    for k in range(K):
                        sd[k] = sqrt(a[k] * _abs2(xi[k]))
                    # G[j + k K] = h_j^H h_k with h_k = h_los_k s_k
                    for k in range(K):
                        for j in range(k + 1):
                            acc = 0
                            for n in range(N):
                                acc = acc + _conj(hlos[j, n]) * hlos[k, n]
                            acc = acc * _conj(s[j]) * s[k]
                            G[j + k * K] = acc
                            G[k + j * K] = _conj(acc)
                    for k in range(K):
                        for j in range(K):
                            B[j + k * K] = sd[j] * sd[k] * G[j + k * K]
                    nn = <int> K
                    lwork = -1
                    work = <cplx *> malloc(sizeof(cplx))
                    zheev(b"V", b"L", &nn, B, &nn, lam, work, &lwork, rwork, &info)
                    lwork = <int> work[0].real
                    free(work)
                    work = <cplx *> malloc(lwork * sizeof(cplx))
                    zheev(b"V", b"L", &nn, B, &nn, lam, work, &lwork, rwork, &info)
                    if info != 0:
                        bad = True
                    lam_max = lam[K - 1]
                    if lam_max < 2.2250738585072014e-308:
                        lam_max = 2.2250738585072014e-308
                    # compact kept eigenpairs to the front
                    nkeep = 0
                    for i in range(K if info == 0 else 0):
                        if lam[i] > 1e-12 * lam_max:
                            if nkeep != i:
                                lam[nkeep] = lam[i]
                                for j in range(K):
                                    B[j + nkeep * K] = B[j + i * K]
                            nkeep += 1
                    for i in range(nkeep):
                        pw[i] = 0
                    # P[k K + i] = u_i^H (a_k xi_k h_k), u_i = G V[:, i] / sqrt(lam_i)
                    for k in range(K):
                        x = a[k] * xi[k]
                        for i in range(nkeep):
                            acc = 0
                            for j in range(K):
                                acc = acc + _conj(B[j + i * K]) * sd[j] * G[j + k * K]
                            P[k * K + i] = x * acc / sqrt(lam[i])
                            pw[i] += _abs2(P[k * K + i])
                    eta = _eta(lam, pw, nkeep, power, 200) if nkeep > 0 else 0.0
                    for k in range(K):
                        for j in range(K):
                            acc = 0
                            for i in range(nkeep):
                                acc = acc + P[k * K + i] * B[j + i * K] / (sqrt(lam[i]) * (lam[i] + eta))
                            y[j] = acc * sd[j] * s[j]
                        for n in range(N):
                            acc = 0
                            for j in range(K):
                                acc = acc + y[j] * hlos[j, n]
                            c[k, n] = acc

            # Lagrangian at the new point
            if bad:
                lagr = NAN
            else:
                _cross(hlos, c, E, K, N)
                _mse(E, s, xi, noise, e, total, K)
                for k in range(K):
                    lagr += weights[k] * (eps[k] * e[k] - log(eps[k]))
                d = 0
                for k in range(K):
                    for m in range(2):
                        d += _abs2(w[k, m] - w_bar[k, m] + mu * t[k, m])
                for m in range(2):
                    d += _abs2(v[m] - v_bar[m] + mu * t_bar[m])
                lagr += d / (2.0 * mu)
    finally:
        free(spread); free(e); free(total); free(a); free(E); free(s)
        free(lam); free(rwork); free(pw); free(B); free(work); free(P)
        free(G); free(y); free(sd)
    return lagr
