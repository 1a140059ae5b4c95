"""Conjugate Gamma-Gamma state-space engine.

The latent positive process (Theta_t) drives positive responses

    Y_t | Theta_t ~ Gamma(v_t / psi, Theta_t / (mu_t * psi))   for exposure v_t > 0,
    Y_t = 0 almost surely when v_t = 0,

and both the filtering law Theta_t | Y_{1:t} and the one-step predictive law
Theta_{t+1} | Y_{1:t} stay Gamma with parameter pairs written Gamma(1 + a, b).
Observing period t updates (a, b) by

    a_post = a_pred + v_t / psi,        b_post = b_pred + y_t / (mu_t * psi),

and advancing to t+1 applies the linear thinning

    a_pred' = (p_t + q_t) * a_post,     b_pred' = p_t * a_post + q_t * b_post,

whose mean map is E[Theta^-1] -> delta_t * E[Theta^-1] + (1 - delta_t) with
delta_t = q_t / (p_t + q_t).  The choice of the (p_t, q_t) schedule is the
regime; it controls the long-run variance behavior of (Theta_t^-1) while the
mean stays pinned at 1.

Filtering is strictly sequential within a trajectory, but trajectories are
independent: every function here is pure, and samplers take an explicit
``numpy.random.Generator`` so callers own parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "STATE_FLOOR",
    "SmithMiller",
    "Stationary",
    "Decreasing",
    "Static",
    "Custom",
    "Regime",
    "ModelParams",
    "FilterState",
    "Trajectory",
    "AffineCoefficients",
    "init_state",
    "filter_update",
    "state_update",
    "resolve_coefficients",
    "affine_update",
    "run_filter",
    "simulate_trajectory",
    "simulate_panel",
    "inverse_mean",
    "inverse_variance",
]

# Reject state parameters at or below this magnitude instead of silently
# propagating denormals from pathological parameterizations.
STATE_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Regimes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmithMiller:
    """Classic multiplicative update: p_t = 0, q_t = (gamma*(a_t - 1) + 1) / a_t.

    Requires a_init > 1; produces a nondecreasing variance of Theta_t^-1,
    strictly increasing for gamma < 1.
    """

    gamma: float

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")


@dataclass(frozen=True)
class Stationary:
    """Variance-stationary schedule with constant thinning weight delta.

    q_t is chosen so Var(Theta_t^-1) stays at 1/(a_init - 1), and
    p_t = kappa * q_t with kappa = (1 - delta)/delta, which keeps
    q_t / (p_t + q_t) = delta for every t.  delta = 1 collapses to the
    static (Buhlmann) model.
    """

    delta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta!r}")

    @property
    def kappa(self) -> float:
        return (1.0 - self.delta) / self.delta


@dataclass(frozen=True)
class Decreasing:
    """Convex-combination update p_t + q_t = 1 with constant p.

    Variance of Theta_t^-1 is nonincreasing, strictly decreasing while p > 0,
    and vanishes when exposures keep arriving.
    """

    p: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p < 1.0):
            raise ValueError(f"p must lie in [0, 1), got {self.p!r}")

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class Static:
    """No state evolution: p_t = 0, q_t = 1 (static random effect)."""


@dataclass(frozen=True)
class Custom:
    """Explicit (p_t, q_t) schedules, indexed from period 1."""

    p: tuple
    q: tuple

    def __post_init__(self) -> None:
        p = tuple(float(x) for x in self.p)
        q = tuple(float(x) for x in self.q)
        if len(p) != len(q):
            raise ValueError("p and q schedules must have equal length")
        if any(not (0.0 <= x <= 1.0) for x in p):
            raise ValueError("custom p_t values must lie in [0, 1]")
        if any(not (x > 0.0) for x in q):
            raise ValueError("custom q_t values must be > 0")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def at(self, t: int) -> tuple:
        if not (1 <= t <= len(self.p)):
            raise ValueError(f"custom schedule has no entry for period {t}")
        return self.p[t - 1], self.q[t - 1]


Regime = Union[SmithMiller, Stationary, Decreasing, Static, Custom]


@dataclass(frozen=True)
class ModelParams:
    """Global model parameters: initialization a_init (= b_init), dispersion psi,
    and the state-update regime.

    a_init > 1 is required for the SmithMiller regime (its q_t formula relies
    on it) and for any finite-variance analysis, but the filter and the
    likelihood are well defined for all a_init > 0, so the Stationary regime
    only demands positivity here.
    """

    a_init: float
    dispersion: float
    regime: Regime

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a_init) and self.a_init > 0.0):
            raise ValueError(f"a_init must be a finite positive real, got {self.a_init!r}")
        if not (math.isfinite(self.dispersion) and self.dispersion > 0.0):
            raise ValueError(f"dispersion must be a finite positive real, got {self.dispersion!r}")
        if isinstance(self.regime, SmithMiller) and not self.a_init > 1.0:
            raise ValueError("SmithMiller regime requires a_init > 1")


# ---------------------------------------------------------------------------
# State and trajectory containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterState:
    """Predictive pair (a_pred, b_pred) for period t, plus the posterior pair
    (a_post, b_post) once period t has been observed."""

    t: int
    a_pred: float
    b_pred: float
    a_post: Optional[float] = None
    b_post: Optional[float] = None

    def __post_init__(self) -> None:
        _check_pair(self.a_pred, self.b_pred, "predictive")
        if (self.a_post is None) != (self.b_post is None):
            raise ValueError("a_post and b_post must be set together")
        if self.a_post is not None:
            _check_pair(self.a_post, self.b_post, "posterior")

    @property
    def has_posterior(self) -> bool:
        return self.a_post is not None


def _check_pair(a: float, b: float, label: str) -> None:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"{label} pair must be finite, got ({a!r}, {b!r})")
    if a < STATE_FLOOR or b < STATE_FLOOR:
        raise ValueError(
            f"{label} pair ({a!r}, {b!r}) fell below the numerical floor {STATE_FLOOR}"
        )


@dataclass(frozen=True)
class Trajectory:
    """One instance's exogenous and observed sequences over its periods.

    ``v`` are nonnegative integer exposures, ``mu`` the known per-unit mean
    severities (NaN on empty periods, where they are never used), and ``y``
    the nonnegative aggregate responses, with y_t = 0 exactly when v_t = 0.
    """

    traj_id: str
    v: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=float)
        mu = np.asarray(self.mu, dtype=float).copy()
        y = np.asarray(self.y, dtype=float)
        if not (v.ndim == mu.ndim == y.ndim == 1 and len(v) == len(mu) == len(y)):
            raise ValueError("v, mu, y must be 1-d sequences of equal length")
        if np.any(v < 0) or np.any(v != np.floor(v)):
            raise ValueError(f"trajectory {self.traj_id!r}: exposures must be nonnegative integers")
        if np.any(~np.isfinite(y)) or np.any(y < 0):
            raise ValueError(f"trajectory {self.traj_id!r}: responses must be finite and >= 0")
        open_periods = v > 0
        if np.any((y > 0) != open_periods):
            raise ValueError(f"trajectory {self.traj_id!r}: y_t = 0 exactly when v_t = 0 is violated")
        if np.any(~(mu[open_periods] > 0) | ~np.isfinite(mu[open_periods])):
            raise ValueError(f"trajectory {self.traj_id!r}: mu must be finite and > 0 wherever v > 0")
        mu[~open_periods] = np.nan
        if self.labels is not None and len(self.labels) != len(v):
            raise ValueError(f"trajectory {self.traj_id!r}: labels length mismatch")
        for name, arr in (("v", v), ("mu", mu), ("y", y)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class AffineCoefficients:
    """General positive affine state update:

    a_pred' = xi1 + xi2 * a_post + xi3 * b_post
    b_pred' = xi4 + xi5 * a_post + xi6 * b_post
    """

    xi1: float = 0.0
    xi2: float = 0.0
    xi3: float = 0.0
    xi4: float = 0.0
    xi5: float = 0.0
    xi6: float = 0.0


# ---------------------------------------------------------------------------
# Moments of Theta^-1 under Gamma(1 + a, b)
# ---------------------------------------------------------------------------


def inverse_mean(a: float, b: float) -> float:
    """E[Theta^-1] for Theta ~ Gamma(1 + a, b)."""
    return b / a


def inverse_variance(a: float, b: float) -> float:
    """Var(Theta^-1) for Theta ~ Gamma(1 + a, b); requires a > 1."""
    if not a > 1.0:
        raise ValueError(f"Var(Theta^-1) requires a > 1, got a = {a!r}")
    return b * b / (a * a * (a - 1.0))


# ---------------------------------------------------------------------------
# Filter steps
# ---------------------------------------------------------------------------


def init_state(params: ModelParams) -> FilterState:
    """Period-1 predictive state: a_pred = b_pred = a_init, so E[Theta_1^-1] = 1."""
    return FilterState(t=1, a_pred=params.a_init, b_pred=params.a_init)


def filter_update(state: FilterState, v_t: int, mu_t: float, y_t: float, psi: float) -> FilterState:
    """Absorb period t's observation into the posterior pair.

    a_post = a_pred + v_t/psi and b_post = b_pred + y_t/(mu_t*psi); an empty
    period (v_t = 0, y_t = 0) leaves the pair untouched.
    """
    if v_t < 0 or v_t != int(v_t):
        raise ValueError(f"exposure must be a nonnegative integer, got {v_t!r}")
    if y_t < 0 or not math.isfinite(y_t):
        raise ValueError(f"response must be finite and >= 0, got {y_t!r}")
    if (y_t > 0) != (v_t > 0):
        raise ValueError(
            f"inconsistent period at t={state.t}: y_t = 0 exactly when v_t = 0 "
            f"(got v={v_t!r}, y={y_t!r})"
        )
    if not psi > 0:
        raise ValueError(f"psi must be > 0, got {psi!r}")
    if v_t == 0:
        a_post, b_post = state.a_pred, state.b_pred
    else:
        if not (math.isfinite(mu_t) and mu_t > 0):
            raise ValueError(f"mu must be finite and > 0 on periods with v > 0, got {mu_t!r}")
        a_post = state.a_pred + v_t / psi
        b_post = state.b_pred + y_t / (mu_t * psi)
    return FilterState(t=state.t, a_pred=state.a_pred, b_pred=state.b_pred,
                       a_post=a_post, b_post=b_post)


def state_update(state: FilterState, p_t: float, q_t: float) -> FilterState:
    """Advance the posterior pair at t to the predictive pair at t+1."""
    if not state.has_posterior:
        raise ValueError("state_update needs a posterior pair; run filter_update first")
    if not (0.0 <= p_t and q_t > 0.0):
        raise ValueError(f"need p_t >= 0 and q_t > 0, got ({p_t!r}, {q_t!r})")
    a_next = (p_t + q_t) * state.a_post
    b_next = p_t * state.a_post + q_t * state.b_post
    return FilterState(t=state.t + 1, a_pred=a_next, b_pred=b_next)


def resolve_coefficients(params: ModelParams, state: FilterState) -> tuple:
    """Regime-resolved (p_t, q_t, delta_t) for the update leaving period t.

    Uses the posterior shape a_t of the given state; delta_t = q_t/(p_t+q_t).
    """
    if not state.has_posterior:
        raise ValueError("resolve_coefficients needs a posterior pair")
    p, q = _coefficients(params.regime, params.a_init, state.a_post, state.t)
    p, q = float(p), float(q)
    return p, q, q / (p + q)


def _coefficients(regime: Regime, a_init: float, a_post, t: int):
    """(p_t, q_t) for scalar or array posterior shapes a_post."""
    if isinstance(regime, Static):
        return 0.0, 1.0
    if isinstance(regime, SmithMiller):
        return 0.0, (regime.gamma * (a_post - 1.0) + 1.0) / a_post
    if isinstance(regime, Stationary):
        d = regime.delta
        q = (d * a_init) / (a_post - (d * d) * a_post + (d * d) * a_init)
        return regime.kappa * q, q
    if isinstance(regime, Decreasing):
        return regime.p, regime.q
    if isinstance(regime, Custom):
        return regime.at(t)
    raise TypeError(f"unknown regime {regime!r}")


def affine_update(state: FilterState, xi: AffineCoefficients) -> FilterState:
    """Advance via the general affine update; the result must stay positive."""
    if not state.has_posterior:
        raise ValueError("affine_update needs a posterior pair")
    a_next = xi.xi1 + xi.xi2 * state.a_post + xi.xi3 * state.b_post
    b_next = xi.xi4 + xi.xi5 * state.a_post + xi.xi6 * state.b_post
    if not (a_next > 0.0 and b_next > 0.0):
        raise ValueError(
            f"affine update left the positive cone: ({a_next!r}, {b_next!r})"
        )
    return FilterState(t=state.t + 1, a_pred=a_next, b_pred=b_next)


def run_filter(params: ModelParams, traj: Trajectory) -> list:
    """Sequential filter over a trajectory.

    Returns one FilterState per period, each carrying both the predictive
    pair (before the period's observation) and the posterior pair (after).
    The a-sequence depends only on the exposures, never on the responses.
    """
    states = []
    state = init_state(params)
    psi = params.dispersion
    for t in range(len(traj)):
        state = filter_update(state, int(traj.v[t]), float(traj.mu[t]), float(traj.y[t]), psi)
        states.append(state)
        if t + 1 < len(traj):
            p, q, _ = resolve_coefficients(params, state)
            state = state_update(state, p, q)
    return states


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def simulate_panel(params: ModelParams, v, mu, rng: np.random.Generator) -> tuple:
    """Simulate responses and latent draws for a panel of trajectories.

    ``v`` (integers) and ``mu`` are (n_paths, n_periods) arrays of exogenous
    exposures and severities.  For each path, Theta_t is drawn from its
    one-step predictive law Gamma(1 + a_pred, b_pred) given the realized
    history, Y_t from Gamma(v_t/psi, Theta_t/(mu_t*psi)) (zero when v_t = 0),
    and the filter is advanced on the realized response.  Returns (y, theta)
    arrays of the same shape.
    """
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if v.shape != mu.shape or v.ndim != 2:
        raise ValueError("v and mu must be 2-d arrays of equal shape")
    n_paths, n_periods = v.shape
    psi = params.dispersion
    y = np.zeros_like(v)
    theta = np.empty_like(v)
    a_pred = np.full(n_paths, params.a_init)
    b_pred = np.full(n_paths, params.a_init)
    for t in range(n_periods):
        th = rng.gamma(1.0 + a_pred, 1.0 / b_pred)
        theta[:, t] = th
        vt = v[:, t]
        open_t = vt > 0
        shape = np.where(open_t, vt / psi, 1.0)
        with np.errstate(invalid="ignore"):
            scale = np.where(open_t, mu[:, t] * psi / th, 1.0)
        y[:, t] = np.where(open_t, rng.gamma(shape, scale), 0.0)
        a_post = a_pred + vt / psi
        with np.errstate(invalid="ignore"):
            b_post = b_pred + np.where(open_t, y[:, t] / (mu[:, t] * psi), 0.0)
        p, q = _coefficients(params.regime, params.a_init, a_post, t + 1)
        a_pred = (p + q) * a_post
        b_pred = p * a_post + q * b_post
        if np.any(a_pred < STATE_FLOOR) or np.any(b_pred < STATE_FLOOR):
            raise ValueError("simulated state fell below the numerical floor")
    return y, theta


def simulate_trajectory(params: ModelParams, v, mu, rng: np.random.Generator,
                        traj_id: str = "sim") -> tuple:
    """Simulate a single trajectory; returns (Trajectory, latent Theta path)."""
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    y, theta = simulate_panel(params, v[None, :], mu[None, :], rng)
    return Trajectory(traj_id=traj_id, v=v, mu=mu, y=y[0]), theta[0]
