"""NumPy reference implementation of the batched filter/likelihood recursion.

Covers the stationary-thinning family (constant delta; delta = 1 is the
static/Buhlmann boundary).  Vectorizes across trajectories and steps through
periods, so it is the fallback when the compiled kernel is unavailable and
the correctness reference in the kernel parity tests.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

STATE_FLOOR = 1e-300

BACKEND_NAME = "numpy"


def batch_filter_loglik(v, mu, y, starts, a_init, psi, delta):
    """Filter every trajectory and accumulate its conditional log-likelihood.

    Parameters are flat CSR-style arrays: trajectory i occupies slots
    starts[i]:starts[i+1] of v (float exposures), mu (NaN allowed where
    v == 0) and y.  Returns (loglik, a_next, b_next), one entry per
    trajectory, where (a_next, b_next) is the predictive pair for the period
    after the last observed one.
    """
    v = np.ascontiguousarray(v, dtype=float)
    mu = np.ascontiguousarray(mu, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    m = len(starts) - 1
    lengths = np.diff(starts)
    if m == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    n_periods = int(lengths.max())
    # Pad ragged trajectories with v = 0 periods; those are exact no-ops for
    # both the likelihood and the state recursion under this family.
    pos = np.arange(n_periods)[None, :]
    mask = pos < lengths[:, None]
    v2 = np.zeros((m, n_periods))
    mu2 = np.full((m, n_periods), np.nan)
    y2 = np.zeros((m, n_periods))
    v2[mask] = v
    mu2[mask] = mu
    y2[mask] = y

    d2 = delta * delta
    kappa = (1.0 - delta) / delta
    ll = np.zeros(m)
    a_pred = np.full(m, a_init)
    b_pred = np.full(m, a_init)
    for t in range(n_periods):
        vt = v2[:, t]
        open_t = vt > 0.0
        vp = vt / psi
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(open_t, y2[:, t] / (mu2[:, t] * psi), 0.0)
            s = u + b_pred
            ll += np.where(
                open_t,
                gammaln(vp + a_pred + 1.0)
                - gammaln(np.where(open_t, vp, 1.0))
                - gammaln(a_pred + 1.0)
                + vp * (np.log(np.where(open_t, u, 1.0)) - np.log(s))
                + (a_pred + 1.0) * (np.log(b_pred) - np.log(s))
                - np.log(np.where(open_t, y2[:, t], 1.0)),
                0.0,
            )
        a_post = a_pred + vp
        b_post = b_pred + u
        q = delta * a_init / (a_post - d2 * a_post + d2 * a_init)
        p = kappa * q
        a_pred = (p + q) * a_post
        b_pred = p * a_post + q * b_post
        if not (np.all(a_pred >= STATE_FLOOR) and np.all(b_pred >= STATE_FLOOR)):
            raise ValueError("filter state fell below the numerical floor")
    if not (np.all(np.isfinite(ll)) and np.all(np.isfinite(a_pred)) and np.all(np.isfinite(b_pred))):
        raise ValueError("non-finite filter output; check parameters and data")
    return ll, a_pred, b_pred
