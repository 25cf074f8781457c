"""Hawkes-process analytics for the Heston-Hawkes benchmark.

The joint characteristic function of the intensity and the compensated
jump term solves an affine ODE system; it is integrated with a fixed-step
classical Runge-Kutta scheme in the remaining-time variable, with the
terminal conditions serving as initial values.  First-moment formulas are
shared with the Q-Hawkes process.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ParameterError

STEPS_PER_UNIT = 256


@dataclass(frozen=True)
class OdeConfig:
    """Fixed-step RK4 configuration.

    steps: total step count over the integration horizon (>= 16).
    """

    steps: int

    def __post_init__(self):
        if self.steps < 16:
            raise ParameterError(f"need at least 16 ODE steps, got {self.steps}")


def default_ode_config(tau):
    """Default step count: 256 per unit time, floor 16."""
    return OdeConfig(steps=max(16, int(np.ceil(STEPS_PER_UNIT * tau))))


def _rhs(a_state, b_state, psi_y, iv_mu_bar, jp):
    da = jp.beta * jp.lambda_star * b_state
    db = np.exp(jp.alpha * b_state) * psi_y - jp.beta * b_state - iv_mu_bar - 1.0
    return da, db


def cf_intensity_jumps_ab(u, v, tau, jp, jd, ode=None):
    """Affine exponents (A, B) of the joint CF of intensity and jump term.

    Integrates dA/dtau = beta*lambda_star*B and
    dB/dtau = exp(alpha*B)*psi_Y(v) - beta*B - i*v*mu_bar - 1
    from A=0, B=iu over the remaining-time interval [0, tau].

    Input
    -----
    u, v: float or ndarray (broadcastable)
       Transform variables of the intensity and the compensated jump term.
    tau: float
    jp: JumpParams
    jd: JumpSizeDist
    ode: OdeConfig, optional

    Output
    ------
    (A, B): complex ndarrays of the broadcast shape
    """
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(u.shape, v.shape)
    b_state = np.broadcast_to(1j * u, shape).astype(complex).copy()
    a_state = np.zeros(shape, dtype=complex)
    if tau == 0.0:
        return a_state, b_state
    if ode is None:
        ode = default_ode_config(tau)
    psi_y = np.broadcast_to(jd.cf(v), shape).astype(complex)
    iv_mu_bar = np.broadcast_to(1j * v * jd.mu_bar, shape).astype(complex)
    h = tau / ode.steps
    for _ in range(ode.steps):
        ka1, kb1 = _rhs(a_state, b_state, psi_y, iv_mu_bar, jp)
        ka2, kb2 = _rhs(a_state + 0.5 * h * ka1, b_state + 0.5 * h * kb1, psi_y, iv_mu_bar, jp)
        ka3, kb3 = _rhs(a_state + 0.5 * h * ka2, b_state + 0.5 * h * kb2, psi_y, iv_mu_bar, jp)
        ka4, kb4 = _rhs(a_state + h * ka3, b_state + h * kb3, psi_y, iv_mu_bar, jp)
        a_state += h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        b_state += h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
    if not (np.all(np.isfinite(a_state)) and np.all(np.isfinite(b_state))):
        raise IntegrationError("characteristic-function ODE produced non-finite state")
    return a_state, b_state


def cf_intensity_jumps(u, v, tau, jp, jd, ode=None):
    """Joint CF of the Hawkes intensity and the compensated jump term.

    E[exp(i u lambda_tau + i v M_tau)] = exp(A + B*lambda0).

    Input/Output as cf_intensity_jumps_ab; returns the complex CF values.
    """
    a_state, b_state = cf_intensity_jumps_ab(u, v, tau, jp, jd, ode)
    return np.exp(a_state + b_state * jp.lambda0)


def intensity_mean(tau, jp):
    """First moment of the intensity, shared by Hawkes and Q-Hawkes.

    E[lambda_tau] = lbar + (lambda0 - lbar) exp(-(beta - alpha) tau).
    """
    decay = jp.beta - jp.alpha
    return jp.lambda_mean + (jp.lambda0 - jp.lambda_mean) * np.exp(-decay * np.asarray(tau))


def intensity_mean_integral(tau, jp):
    """Exact integral of the mean intensity over [0, tau] (= E[N_tau])."""
    decay = jp.beta - jp.alpha
    tau = np.asarray(tau)
    return jp.lambda_mean * tau + (jp.lambda0 - jp.lambda_mean) * (-np.expm1(-decay * tau)) / decay


def intensity_stationary_variance(jp):
    """Stationary variance of the Hawkes intensity (exponential kernel)."""
    return jp.alpha**2 * jp.lambda_mean / (2.0 * (jp.beta - jp.alpha))


def intensity_transient_variance(tau, jp):
    """Variance of the Hawkes intensity at a finite horizon.

    Var(lambda_tau) = alpha^2 int_0^tau e^{-2 delta (tau-s)} E[lambda_s] ds
    with delta = beta - alpha; approaches the stationary value as tau grows.
    """
    delta = jp.beta - jp.alpha
    lbar = jp.lambda_mean
    e1 = np.exp(-delta * tau)
    e2 = np.exp(-2.0 * delta * tau)
    return jp.alpha**2 * (lbar * (1.0 - e2) / (2.0 * delta)
                          + (jp.lambda0 - lbar) * (e1 - e2) / delta)
