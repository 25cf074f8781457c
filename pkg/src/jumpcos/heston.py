"""Heston diffusion analytics and the Bates jump factor.

Contains the branch-stable characteristic function of the log-price
increment, the analytic partial inverse transform of the joint Heston CF
in the variance direction (a noncentral-chi-square-type kernel with a
complex-argument modified Bessel function), and the compound-Poisson jump
factor of the Bates model.
"""

import numpy as np
from scipy.special import ive, roots_jacobi

from .errors import IntegrationError, ParameterError


def bessel_iv_scaled(order, z):
    """Modified Bessel function of the first kind, exponent-scaled.

    Returns (value, scale) with I_order(z) = value * exp(scale); the scale
    equals |Re z| so the value stays bounded for large arguments.

    Input
    -----
    order: float
    z: complex ndarray

    Output
    ------
    (complex ndarray, float ndarray)
    """
    z = np.asarray(z, dtype=complex)
    val = ive(order, z)
    if not np.all(np.isfinite(val)):
        raise IntegrationError("Bessel evaluation overflowed after rescaling")
    return val, np.abs(z.real)


def _discriminant(u, hp):
    xi = hp.kappa - 1j * hp.rho * hp.eta * u
    return xi, np.sqrt(xi * xi + hp.eta**2 * (u * u + 1j * u))


def cf_heston(u, tau, hp):
    """CF of the log-price increment under the pure Heston model.

    E[exp(i u (r tau - 0.5 int V + int sqrt(V) dW^S))], i.e. the diffusion
    factor of the log-asset CF, excluding the initial log-price and any
    jumps.  Uses the branch-stable formulation that keeps the complex
    logarithm on its principal sheet for long maturities.

    Input
    -----
    u: float or ndarray
    tau: float (>= 0)
    hp: HestonParams

    Output
    ------
    complex ndarray
    """
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    u = np.asarray(u, dtype=float)
    if tau == 0.0:
        return np.ones_like(u, dtype=complex)
    xi, d = _discriminant(u, hp)
    g2 = (xi - d) / (xi + d)
    e_dec = np.exp(-d * tau)
    c_term = hp.kappa * hp.theta / hp.eta**2 * (
        (xi - d) * tau - 2.0 * np.log((1.0 - g2 * e_dec) / (1.0 - g2))
    )
    d_term = (xi - d) / hp.eta**2 * (1.0 - e_dec) / (1.0 - g2 * e_dec)
    return np.exp(1j * u * hp.r * tau + c_term + d_term * hp.v0)


def cir_moments(tau, hp, v_start=None):
    """Mean and variance of the variance process at horizon tau."""
    v0 = hp.v0 if v_start is None else v_start
    e = np.exp(-hp.kappa * tau)
    mean = hp.theta + (v0 - hp.theta) * e
    var = (v0 * hp.eta**2 * e * (1.0 - e) / hp.kappa
           + hp.theta * hp.eta**2 * (1.0 - e) ** 2 / (2.0 * hp.kappa))
    return mean, var


def variance_quad_domain(tau, hp, width=12.0):
    """Truncated variance domain [lo, hi] from the CIR moments at tau."""
    mean, var = cir_moments(tau, hp)
    sd = np.sqrt(var)
    return max(0.0, mean - width * sd), mean + width * sd


def variance_density_power(hp):
    """Exponent of the v^p vanishing rate of the CIR density at v = 0."""
    return 2.0 * hp.kappa * hp.theta / hp.eta**2 - 1.0


def psi_v(u, v_next, v_now, tau, hp, bessel_scaled=None):
    """Partial inverse of the joint Heston CF in the variance direction.

    Equals E[exp(i u X_incr) | V_end = v_next, V_start = v_now] times the
    CIR transition density of v_next given v_now, where X_incr is the
    log-price increment over tau (drift r*tau included).  Integrating over
    v_next recovers cf_heston(u, tau).

    Overflow in the Bessel factor is avoided by exponent extraction: the
    scaled Bessel value and all exponential terms are combined in a single
    complex exponent.

    Input
    -----
    u: float or ndarray
       Log-price transform variable.
    v_next, v_now: float or ndarray (> 0)
       Terminal and initial variance levels; broadcast against u.
    tau: float (> 0)
    hp: HestonParams
    bessel_scaled: complex ndarray, optional
       Precomputed exponent-scaled Bessel values for the broadcast shape
       (callers may exploit the symmetry of the Bessel argument in the
       variance pair).

    Output
    ------
    complex ndarray
    """
    if tau <= 0.0:
        raise ParameterError(f"horizon must be > 0, got {tau}")
    u = np.asarray(u, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    v_now = np.asarray(v_now, dtype=float)
    if np.any(v_next < 0.0) or np.any(v_now < 0.0):
        raise ParameterError("variance levels must be nonnegative")
    kappa, eta, theta, rho, r = hp.kappa, hp.eta, hp.theta, hp.rho, hp.r
    _, gam = _discriminant(u, hp)
    order = 2.0 * kappa * theta / eta**2 - 1.0

    e_k = np.exp(-kappa * tau)
    e_g = np.exp(-gam * tau)
    one_m_ek = -np.expm1(-kappa * tau)
    one_m_eg = 1.0 - e_g
    cbar = eta**2 * one_m_ek / (4.0 * kappa)

    # Leading rational factor of the endpoint-conditional CF of int V.
    lead = gam * np.exp(-0.5 * (gam - kappa) * tau) * one_m_ek / (kappa * one_m_eg)
    # Combined exponent: endpoint terms of the conditional CF merged with
    # the Gaussian part of the noncentral-chi-square density.
    expo = (kappa * (v_now - v_next) / eta**2
            - gam * (1.0 + e_g) * (v_now + v_next) / (eta**2 * one_m_eg))
    z_gam = 4.0 * gam * np.sqrt(v_now * v_next) * np.exp(-0.5 * gam * tau) / (eta**2 * one_m_eg)
    if bessel_scaled is None:
        bessel, scale = bessel_iv_scaled(order, z_gam)
    else:
        bessel, scale = bessel_scaled, np.abs(z_gam.real)
    dens_pow = (v_next / (v_now * e_k)) ** (0.5 * order) / (2.0 * cbar)
    drift = 1j * u * (r * tau + rho / eta * (v_next - v_now - kappa * theta * tau))
    return lead * dens_pow * bessel * np.exp(expo + scale + drift)


def variance_quadrature(tau, hp, n_nodes=64, domain=None):
    """Quadrature nodes and weights on the truncated variance domain.

    When the domain's lower edge is clipped at zero, the transition density
    vanishes like v^p with the fractional power p = 2*kappa*theta/eta^2 - 1,
    which stalls Gauss-Legendre; a Gauss-Jacobi rule with that endpoint
    weight restores spectral accuracy.  Away from zero, plain Legendre.
    """
    if domain is None:
        domain = variance_quad_domain(tau, hp)
    lo, hi = domain
    power = variance_density_power(hp)
    if lo <= 1e-12 and abs(power - round(power)) > 1e-9:
        x, w = roots_jacobi(n_nodes, 0.0, power)
        nodes = 0.5 * (hi - lo) * (x + 1.0) + lo
        weights = 0.5 * (hi - lo) * w / (1.0 + x) ** power
    else:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        nodes = 0.5 * (hi - lo) * (x + 1.0) + lo
        weights = 0.5 * (hi - lo) * w
    return nodes, weights


def cf_bates_jumps(v, tau, lambda_b, jd):
    """Compound-Poisson jump factor of the log-asset CF.

    exp(lambda_b * tau * (psi_Y(v) - 1 - i v mu_bar)), compensated so the
    asset drift is unchanged by the jumps.

    Input
    -----
    v: float or ndarray
    tau: float
    lambda_b: float (>= 0)
    jd: JumpSizeDist

    Output
    ------
    complex ndarray
    """
    if lambda_b < 0.0:
        raise ParameterError(f"jump intensity must be >= 0, got {lambda_b}")
    v = np.asarray(v, dtype=float)
    return np.exp(lambda_b * tau * (jd.cf(v) - 1.0 - 1j * v * jd.mu_bar))
