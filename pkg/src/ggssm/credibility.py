"""One-step predictive means and their evolutionary-credibility decomposition.

The predictive mean of the next aggregate response admits three equivalent
forms: the ratio form v * mu * b_pred/a_pred of the predictive Gamma pair,
the blend delta_t * E[Theta_t^-1 | history] + (1 - delta_t) against the unit
prior mean, and the fully expanded weighted average over the whole history
with three-weight decomposition

    omega1 = delta_t * z_t,  omega2 = delta_t * (1 - z_t),  omega3 = 1 - delta_t,

where z_t = (v_t/psi) / (a_pred_t + v_t/psi) weighs the newest observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filtering import (
    FilterState,
    ModelParams,
    Trajectory,
    filter_update,
    init_state,
    resolve_coefficients,
    run_filter,
    state_update,
)

__all__ = [
    "CredibilityDecomposition",
    "predict_next",
    "decompose_weights",
    "expanded_prediction",
]


@dataclass(frozen=True)
class CredibilityDecomposition:
    """Weights of (newest observation, previous prediction, prior mean) and
    the resulting next-period mean."""

    z: float
    delta: float
    omega1: float
    omega2: float
    omega3: float
    predicted_mean: float


def predict_next(params: ModelParams, state: FilterState, v_next: int, mu_next: float) -> float:
    """E[Y_next | history] = v_next * mu_next * b_pred'/a_pred'.

    ``state`` is the filter state after the last observed period; a state
    without a posterior pair (no data yet) predicts from the prior,
    v_next * mu_next * 1.
    """
    if v_next < 0 or v_next != int(v_next):
        raise ValueError(f"v_next must be a nonnegative integer, got {v_next!r}")
    if v_next == 0:
        return 0.0
    if not (math.isfinite(mu_next) and mu_next > 0):
        raise ValueError(f"mu_next must be finite and > 0, got {mu_next!r}")
    if state.has_posterior:
        p, q, _ = resolve_coefficients(params, state)
        nxt = state_update(state, p, q)
    else:
        nxt = state
    return v_next * mu_next * nxt.b_pred / nxt.a_pred


def decompose_weights(
    a_pred: float,
    v_t: int,
    psi: float,
    delta_t: float,
    y_t: float,
    mu_t: float,
    prior_unit_mean: float,
    v_next: int,
    mu_next: float,
) -> CredibilityDecomposition:
    """Three-weight decomposition of the next-period predictive mean.

    ``prior_unit_mean`` is the per-unit prior prediction
    E[Theta_t^-1 | Y_{1:t-1}] = b_pred/a_pred, i.e. the previous aggregate
    prediction divided by v_t * mu_t on periods with exposure (it stays well
    defined on empty periods, where the aggregate form degenerates to 0/0).
    On an empty period z_t = 0, so the nonexistent claim gets no weight.
    """
    if v_t < 0 or v_t != int(v_t):
        raise ValueError(f"v_t must be a nonnegative integer, got {v_t!r}")
    if (y_t > 0) != (v_t > 0):
        raise ValueError("y_t = 0 exactly when v_t = 0 is violated")
    z = (v_t / psi) / (a_pred + v_t / psi) if v_t > 0 else 0.0
    omega1 = delta_t * z
    omega2 = delta_t * (1.0 - z)
    omega3 = 1.0 - delta_t
    x_t = y_t / (mu_t * v_t) if v_t > 0 else 0.0
    mean = v_next * mu_next * (omega1 * x_t + omega2 * prior_unit_mean + omega3)
    return CredibilityDecomposition(z=z, delta=delta_t, omega1=omega1,
                                    omega2=omega2, omega3=omega3, predicted_mean=mean)


def expanded_prediction(params: ModelParams, traj: Trajectory, v_next: int, mu_next: float) -> float:
    """Next-period mean via the fully expanded seniority-weighted average.

    Expands the one-step recursion over s = 0..t (with delta_0 = 0 and a
    zero period-0 pseudo-observation, so the s = 0 term carries the prior
    mean through the product of omega2 weights):

        v * mu * sum_s [prod_{k>s} omega2_k] * (omega1_s * y_s/(mu_s v_s) + omega3_s)

    Empty products are 1, empty sums 0; must equal ``predict_next``.
    """
    if v_next < 0 or v_next != int(v_next):
        raise ValueError(f"v_next must be a nonnegative integer, got {v_next!r}")
    if v_next == 0:
        return 0.0
    psi = params.dispersion
    omega1 = [0.0]
    omega2 = [1.0]
    omega3 = [1.0]
    x = [0.0]
    state = init_state(params)
    for t in range(len(traj)):
        v_t = int(traj.v[t])
        state = filter_update(state, v_t, float(traj.mu[t]), float(traj.y[t]), psi)
        _, _, delta_t = resolve_coefficients(params, state)
        z = (v_t / psi) / (state.a_pred + v_t / psi) if v_t > 0 else 0.0
        omega1.append(delta_t * z)
        omega2.append(delta_t * (1.0 - z))
        omega3.append(1.0 - delta_t)
        x.append(float(traj.y[t]) / (float(traj.mu[t]) * v_t) if v_t > 0 else 0.0)
        if t + 1 < len(traj):
            p, q, _ = resolve_coefficients(params, state)
            state = state_update(state, p, q)
    total = 0.0
    t_last = len(traj)
    for s in range(t_last + 1):
        tail = 1.0
        for k in range(s + 1, t_last + 1):
            tail *= omega2[k]
        total += tail * (omega1[s] * x[s] + omega3[s])
    return v_next * mu_next * total
