# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Sequential minimal optimization inner loop over a precomputed Gram matrix.

Working-set selection: i is the maximal KKT violator; j maximizes the
second-order objective decrease among violating partners (the pair is the
standard LIBSVM-style selection). Stopping: max violation gap <= tol.
The pure-numpy fallback mirrors every choice, including first-index
tie-breaking, so both paths produce identical duals.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF ETA_MIN = 1e-12


def solve_gram(double[:, ::1] K, double[::1] y, double[::1] C,
               double tol, long max_iter, alpha0=None):
    """Minimize 0.5*a'Qa - 1'a  s.t. 0 <= a_i <= C_i, y'a = 0, Q_ij = y_i y_j K_ij.

    ``alpha0`` warm-starts the solve (it must satisfy the box and equality
    constraints). Returns (alpha, bias, iterations, final KKT gap); the gap
    exceeds tol when the iteration budget ran out.
    """
    cdef Py_ssize_t n = K.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_arr
    if alpha0 is None:
        alpha_arr = np.zeros(n)
        grad_arr = np.full(n, -1.0)
    else:
        alpha_arr = np.array(alpha0, dtype=np.float64)
        ka = np.asarray(K) @ (alpha_arr * np.asarray(y))
        grad_arr = np.asarray(y) * ka - 1.0
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t it, k, i, j
    cdef double m_up, m_low, crit, eta, lam, bound, d_i, d_j, gap
    cdef double yi, yj, ai, aj, b_k, score, best_score
    cdef bint in_low

    for it in range(max_iter):
        i = -1
        m_up = -1e300
        m_low = 1e300
        for k in range(n):
            crit = -y[k] * grad[k]
            if (y[k] > 0 and alpha[k] < C[k]) or (y[k] < 0 and alpha[k] > 0.0):
                if crit > m_up:
                    m_up = crit
                    i = k
            if (y[k] > 0 and alpha[k] > 0.0) or (y[k] < 0 and alpha[k] < C[k]):
                if crit < m_low:
                    m_low = crit
        gap = m_up - m_low
        if i < 0 or gap <= tol:
            return alpha_arr, 0.5 * (m_up + m_low), it, gap

        # second-order partner: maximal decrease -(m_up - crit_k)^2 / (2 eta)
        j = -1
        best_score = -1.0
        for k in range(n):
            in_low = (y[k] > 0 and alpha[k] > 0.0) or (y[k] < 0 and alpha[k] < C[k])
            if not in_low:
                continue
            crit = -y[k] * grad[k]
            b_k = m_up - crit
            if b_k <= 0.0:
                continue
            eta = K[i, i] + K[k, k] - 2.0 * K[i, k]
            if eta < ETA_MIN:
                eta = ETA_MIN
            score = b_k * b_k / eta
            if score > best_score:
                best_score = score
                j = k
        if j < 0:
            return alpha_arr, 0.5 * (m_up + m_low), it, gap

        yi = y[i]
        yj = y[j]
        ai = alpha[i]
        aj = alpha[j]
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < ETA_MIN:
            eta = ETA_MIN
        lam = (m_up - (-yj * grad[j])) / eta
        bound = (C[i] - ai) if yi > 0 else ai
        if bound < lam:
            lam = bound
        bound = aj if yj > 0 else (C[j] - aj)
        if bound < lam:
            lam = bound
        if lam <= 0.0:
            return alpha_arr, 0.5 * (m_up + m_low), it, gap

        d_i = yi * lam
        d_j = -yj * lam
        alpha[i] = ai + d_i
        alpha[j] = aj + d_j
        if alpha[i] < 0.0:
            alpha[i] = 0.0
        elif alpha[i] > C[i]:
            alpha[i] = C[i]
        if alpha[j] < 0.0:
            alpha[j] = 0.0
        elif alpha[j] > C[j]:
            alpha[j] = C[j]
        for k in range(n):
            grad[k] += y[k] * (yi * K[i, k] * d_i + yj * K[j, k] * d_j)

    # budget exhausted: report the current state and its violation gap
    m_up = -1e300
    m_low = 1e300
    for k in range(n):
        crit = -y[k] * grad[k]
        if (y[k] > 0 and alpha[k] < C[k]) or (y[k] < 0 and alpha[k] > 0.0):
            if crit > m_up:
                m_up = crit
        if (y[k] > 0 and alpha[k] > 0.0) or (y[k] < 0 and alpha[k] < C[k]):
            if crit < m_low:
                m_low = crit
    return alpha_arr, 0.5 * (m_up + m_low), max_iter, m_up - m_low
