# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched filter/likelihood recursion (stationary-thinning family).

Semantics match ggssm._kernels._ref.batch_filter_loglik; expression order is
kept identical so the two backends agree to rounding.
"""

from libc.math cimport isfinite, lgamma, log

import numpy as np

cimport numpy as cnp

STATE_FLOOR = 1e-300
cdef double _FLOOR = 1e-300

BACKEND_NAME = "compiled"


def batch_filter_loglik(v, mu, y, starts, double a_init, double psi, double delta):
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    mu_arr = np.ascontiguousarray(mu, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    starts_arr = np.ascontiguousarray(starts, dtype=np.int64)

    cdef const double[::1] vv = v_arr
    cdef const double[::1] mm = mu_arr
    cdef const double[::1] yy = y_arr
    cdef const cnp.int64_t[::1] ss = starts_arr

    cdef Py_ssize_t m = ss.shape[0] - 1
    ll_arr = np.zeros(m, dtype=np.float64)
    an_arr = np.empty(m, dtype=np.float64)
    bn_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] ll = ll_arr
    cdef double[::1] an = an_arr
    cdef double[::1] bn = bn_arr

    cdef double d2 = delta * delta
    cdef double kappa = (1.0 - delta) / delta
    cdef Py_ssize_t i, j
    cdef double a_pred, b_pred, acc, vp, u, s, a_post, b_post, q, p

    for i in range(m):
        a_pred = a_init
        b_pred = a_init
        acc = 0.0
        for j in range(ss[i], ss[i + 1]):
            if vv[j] > 0.0:
                vp = vv[j] / psi
                u = yy[j] / (mm[j] * psi)
                s = u + b_pred
                acc += (lgamma(vp + a_pred + 1.0)
                        - lgamma(vp)
                        - lgamma(a_pred + 1.0)
                        + vp * (log(u) - log(s))
                        + (a_pred + 1.0) * (log(b_pred) - log(s))
                        - log(yy[j]))
                a_post = a_pred + vp
                b_post = b_pred + u
            else:
                a_post = a_pred + 0.0
                b_post = b_pred + 0.0
            q = delta * a_init / (a_post - d2 * a_post + d2 * a_init)
            p = kappa * q
            a_pred = (p + q) * a_post
            b_pred = p * a_post + q * b_post
            if not (a_pred >= _FLOOR and b_pred >= _FLOOR):
                raise ValueError("filter state fell below the numerical floor")
        if not (isfinite(acc) and isfinite(a_pred) and isfinite(b_pred)):
            raise ValueError("non-finite filter output; check parameters and data")
        ll[i] = acc
        an[i] = a_pred
        bn[i] = b_pred
    return ll_arr, an_arr, bn_arr
