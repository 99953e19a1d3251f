# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SMO and SGD inner loops. Mirrors ``_kernels_py`` operation for
operation so both backends agree to the last bit."""

from libc.math cimport INFINITY, exp, fabs


def smo_loop(row_fn, const double[::1] diag, const long long[::1] sample,
             const long long[::1] kidx, const double[::1] y, const double[::1] box,
             double[::1] alpha, double[::1] grad, double tol, long long max_iter):
    cdef Py_ssize_t N = alpha.shape[0]
    cdef Py_ssize_t a, i, j
    cdef long long it = 0
    cdef long long si, sj, ki, kj
    cdef double v, gmax, gmin, eta, t, tmax_i, tmax_j, tmax, kij, yt, di, dj
    cdef const double[::1] Ki
    cdef const double[::1] Kj
    cdef bint converged = False
    gmax = -INFINITY
    gmin = INFINITY
    while True:
        gmax = -INFINITY
        gmin = INFINITY
        i = -1
        j = -1
        for a in range(N):
            v = -y[a] * grad[a]
            if y[a] > 0:
                if alpha[a] < box[a] and v > gmax:
                    gmax = v
                    i = a
                if alpha[a] > 0 and v < gmin:
                    gmin = v
                    j = a
            else:
                if alpha[a] > 0 and v > gmax:
                    gmax = v
                    i = a
                if alpha[a] < box[a] and v < gmin:
                    gmin = v
                    j = a
        if i < 0 or j < 0 or gmax - gmin < tol or i == j:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        si = sample[i]
        sj = sample[j]
        ki = kidx[i]
        kj = kidx[j]
        Ki = row_fn(si)
        Kj = row_fn(sj)
        kij = Ki[sj] + (1.0 if ki == kj else 0.0)
        eta = (diag[si] + 1.0) + (diag[sj] + 1.0) - 2.0 * kij
        tmax_i = box[i] - alpha[i] if y[i] > 0 else alpha[i]
        tmax_j = alpha[j] if y[j] > 0 else box[j] - alpha[j]
        tmax = tmax_i if tmax_i < tmax_j else tmax_j
        if eta > 1e-12:
            t = (gmax - gmin) / eta
            if t > tmax:
                t = tmax
        else:
            t = tmax
        if t == tmax_i:
            alpha[i] = box[i] if y[i] > 0 else 0.0
        else:
            alpha[i] = alpha[i] + y[i] * t
        if t == tmax_j:
            alpha[j] = 0.0 if y[j] > 0 else box[j]
        else:
            alpha[j] = alpha[j] - y[j] * t
        for a in range(N):
            di = 1.0 if kidx[a] == ki else 0.0
            dj = 1.0 if kidx[a] == kj else 0.0
            yt = y[a] * t
            grad[a] = grad[a] + yt * (((Ki[sample[a]] + di) - Kj[sample[a]]) - dj)
    return it, converged, gmax - gmin


cdef inline double _dloss(int code, double yv, double a) nogil:
    cdef double m = yv * a
    if code == 0:
        return -yv if m < 1.0 else 0.0
    if code == 1:
        return -2.0 * yv * (1.0 - m) if m < 1.0 else 0.0
    if code == 2:
        if m > 700.0:
            m = 700.0
        elif m < -700.0:
            m = -700.0
        return -yv / (1.0 + exp(m))
    if code == 3:
        return 2.0 * (a - yv)
    if a > yv:
        return 1.0
    if a < yv:
        return -1.0
    return 0.0


def sgd_epoch(const int[::1] indptr, const int[::1] indices, const double[::1] data,
              const long long[::1] order, const long long[::1] sample,
              const long long[::1] kidx, const double[::1] y, const double[::1] weight,
              double[::1] v, double scale, double[::1] theta, double b,
              long long t, double lam, double step_scale, int loss_code):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t q, p, a, s, k
    cdef double dot, score, eta, shrink, g, step
    for q in range(n):
        a = order[q]
        s = sample[a]
        k = kidx[a]
        t += 1
        dot = 0.0
        for p in range(indptr[s], indptr[s + 1]):
            dot = dot + v[indices[p]] * data[p]
        score = scale * dot - theta[k] - b
        g = _dloss(loss_code, y[a], score)
        eta = step_scale / (lam * t)
        shrink = 1.0 - eta * lam
        if shrink <= 0.0:
            for p in range(v.shape[0]):
                v[p] = 0.0
            for p in range(theta.shape[0]):
                theta[p] = 0.0
            scale = 1.0
        else:
            scale = scale * shrink
            for p in range(theta.shape[0]):
                theta[p] = theta[p] * shrink
        step = eta * weight[a] * g
        if step != 0.0:
            for p in range(indptr[s], indptr[s + 1]):
                v[indices[p]] = v[indices[p]] - step * data[p] / scale
            theta[k] = theta[k] + step
            b = b + step
        if scale < 1e-100:
            for p in range(v.shape[0]):
                v[p] = v[p] * scale
            scale = 1.0
    return scale, b, t
