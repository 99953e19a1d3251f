"""Pure-NumPy versions of the compiled inner loops in ``_smo_ext``."""
import math

import numpy as np


def smo_loop(row_fn, diag, sample, kidx, y, box, alpha, grad, tol, max_iter):
    """Maximal-violating-pair SMO on ``min 1/2 a'Qa - sum(a)``.

    ``Q[a, b] = y_a y_b (K[s_a, s_b] + [k_a == k_b])`` is never formed; rows of
    the base kernel come from ``row_fn``. ``alpha`` and ``grad`` (``Qa - 1``)
    are updated in place. Returns ``(iterations, converged, gap)``.
    """
    pos = y > 0
    it = 0
    while True:
        v = -y * grad
        at_lo = alpha > 0
        at_hi = alpha < box
        up = np.where(pos, at_hi, at_lo)
        low = np.where(pos, at_lo, at_hi)
        if not up.any() or not low.any():
            return it, True, -np.inf
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        gmax, gmin = v[i], v[j]
        if gmax - gmin < tol or i == j:
            return it, True, gmax - gmin
        if it >= max_iter:
            return it, False, gmax - gmin
        it += 1
        si, sj, ki, kj = sample[i], sample[j], kidx[i], kidx[j]
        Ki = row_fn(si)
        Kj = row_fn(sj)
        kij = Ki[sj] + (1.0 if ki == kj else 0.0)
        eta = (diag[si] + 1.0) + (diag[sj] + 1.0) - 2.0 * kij
        tmax_i = box[i] - alpha[i] if y[i] > 0 else alpha[i]
        tmax_j = alpha[j] if y[j] > 0 else box[j] - alpha[j]
        tmax = min(tmax_i, tmax_j)
        if eta > 1e-12:
            t = min((gmax - gmin) / eta, tmax)
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
        di = (kidx == ki).astype(np.float64)
        dj = (kidx == kj).astype(np.float64)
        grad += (y * t) * (((Ki[sample] + di) - Kj[sample]) - dj)


def _dloss(code, yv, a):
    m = yv * a
    if code == 0:
        return -yv if m < 1.0 else 0.0
    if code == 1:
        return -2.0 * yv * (1.0 - m) if m < 1.0 else 0.0
    if code == 2:
        m = min(max(m, -700.0), 700.0)
        return -yv / (1.0 + math.exp(m))
    if code == 3:
        return 2.0 * (a - yv)
    if a > yv:
        return 1.0
    if a < yv:
        return -1.0
    return 0.0


def sgd_epoch(indptr, indices, data, order, sample, kidx, y, weight,
              v, scale, theta, b, t, lam, step_scale, loss_code):
    """One pass of regularised SGD over augmented instances in ``order``.

    The feature weight is ``scale * v`` (lazy shrinking); ``v`` and ``theta``
    are updated in place. Returns ``(scale, b, t)``.
    """
    for a in order:
        s = sample[a]
        k = kidx[a]
        t += 1
        lo, hi = indptr[s], indptr[s + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        dot = 0.0
        for p in range(hi - lo):
            dot = dot + v[cols[p]] * vals[p]
        score = scale * dot - theta[k] - b
        g = _dloss(loss_code, y[a], score)
        eta = step_scale / (lam * t)
        shrink = 1.0 - eta * lam
        if shrink <= 0.0:
            v[:] = 0.0
            theta[:] = 0.0
            scale = 1.0
        else:
            scale = scale * shrink
            for p in range(theta.shape[0]):
                theta[p] = theta[p] * shrink
        step = eta * weight[a] * g
        if step != 0.0:
            for p in range(hi - lo):
                v[cols[p]] = v[cols[p]] - step * vals[p] / scale
            theta[k] = theta[k] + step
            b = b + step
        if scale < 1e-100:
            v *= scale
            scale = 1.0
    return scale, b, t
