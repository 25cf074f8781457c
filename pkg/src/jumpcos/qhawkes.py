"""Closed-form Q-Hawkes analytics.

Joint characteristic functions of the activation number with the event
count and with the compensated jump term, the activation-number PMF, and
the analytic partial inverse Fourier transform over the activation axis
that powers the dimension-reduced cosine expansions.

All complex powers and square roots use the principal branch.  The
formulas divide by the clustering rate, so a degenerate compound-Poisson
branch handles clustering rates below ALPHA_POISSON_EPS.
"""

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError
from .models import ALPHA_POISSON_EPS


def _nb_log_coeff(x, r):
    """log of the generalized binomial C(x + r - 1, x) for real r > 0.

    Equals the integer binomial exactly (to rounding) when r is a positive
    integer, via the log-Gamma representation.
    """
    x = np.asarray(x)
    return gammaln(x + r) - gammaln(r) - gammaln(x + 1.0)


def _aux_fg(u, v, tau, jp, jd):
    """Shared building blocks of the joint characteristic functions.

    Returns (f, big_g, e_decay, denom, numer) with
    f = sqrt((beta + alpha(1 + i v mu_bar))^2 - 4 alpha beta psi_Y(v)),
    big_g = beta + alpha(1 + i v mu_bar),
    e_decay = exp(-tau f), and denom/numer the two rational-factor parts.
    """
    alpha, beta = jp.alpha, jp.beta
    psi = jd.cf(v) if jd is not None else np.exp(1j * np.asarray(v, dtype=complex))
    mu_bar = jd.mu_bar if jd is not None else 0.0
    vbar = 1j * np.asarray(v) * mu_bar if jd is not None else 0.0
    big_g = beta + alpha * (1.0 + vbar)
    f = np.sqrt(big_g * big_g - 4.0 * alpha * beta * psi + 0j)
    e_decay = np.exp(-tau * f)
    eiu = np.exp(1j * np.asarray(u))
    g_uv = big_g - 2.0 * alpha * psi * eiu
    denom = f + g_uv + e_decay * (f - g_uv)
    numer = (1.0 - e_decay) * (2.0 * beta - eiu * big_g) + eiu * f * (1.0 + e_decay)
    return f, big_g, e_decay, denom, numer, psi, vbar


def _cf_joint(u, v, tau, jp, jd):
    """Joint CF factorisation common to the counting and jump-term cases.

    jd=None encodes the pure counting case (events weighted by e^{iv}),
    otherwise events carry the log-jump CF and the compensator drift.
    """
    alpha, beta, lam_star = jp.alpha, jp.beta, jp.lambda_star
    f, _, e_decay, denom, numer, _, vbar = _aux_fg(u, v, tau, jp, jd)
    drift = 1j * np.asarray(v) * jd.mu_bar * alpha if jd is not None else 0.0
    pre = np.exp(lam_star * tau / (2.0 * alpha) * (beta - alpha - drift - f))
    base = 2.0 * f / denom
    factor_base = np.exp((lam_star / alpha) * np.log(base))
    return pre * factor_base * (numer / denom) ** jp.q0


def cf_activation_counting(u, v, tau, jp):
    """Joint CF of the activation number and the event count.

    E[exp(i(u Q_tau + v N_tau))] for the Q-Hawkes process started at the
    activation number q0.

    Input
    -----
    u, v: float or ndarray
       Transform variables of the activation number and the event count.
    tau: float
       Elapsed time (>= 0).
    jp: JumpParams

    Output
    ------
    complex ndarray (broadcast shape of u and v)
    """
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if tau == 0.0:
        return np.exp(1j * u * jp.q0) * np.ones_like(v, dtype=complex)
    if jp.is_poisson:
        # Events arrive at the constant baseline rate; the activation
        # number is frozen at q0 in this degenerate branch.
        return np.exp(1j * u * jp.q0) * np.exp(jp.lambda_star * tau * (np.exp(1j * v) - 1.0))
    return _cf_joint(u, v, tau, jp, None)


def cf_activation_jumps(u, v, tau, jp, jd):
    """Joint CF of the activation number and the compensated jump term.

    E[exp(i u Q_tau + i v M_tau)] where M_tau is the sum of log-jumps minus
    the compensator mu_bar * int lambda.  Setting u = 0 yields the jump
    factor of the log-asset characteristic function.

    Input
    -----
    u, v: float or ndarray
    tau: float
    jp: JumpParams
    jd: JumpSizeDist

    Output
    ------
    complex ndarray
    """
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if tau == 0.0:
        return np.exp(1j * u * jp.q0) * np.ones_like(v, dtype=complex)
    if jp.is_poisson:
        jump_exp = jd.cf(v) - 1.0 - 1j * v * jd.mu_bar
        return np.exp(1j * u * jp.q0) * np.exp(jp.lambda_star * tau * jump_exp)
    return _cf_joint(u, v, tau, jp, jd)


def _pmf_pg(tau, jp):
    """Mixture parameters of the activation-number law.

    p(tau) in (0, 1] and g(tau) in [0, 1) for tau >= 0 under stability.
    """
    decay = np.exp((jp.alpha - jp.beta) * tau)
    p = (jp.beta - jp.alpha) / (jp.beta - jp.alpha * decay)
    g = jp.beta * (1.0 - decay) / (jp.beta - jp.alpha)
    return p, g


def pmf_activation(x, tau, jp):
    """PMF of the activation number after elapsed time tau.

    Convolution of a negative binomial with lambda0/alpha successes and a
    binomial thinning of the q0 initially active events.  Generalized
    binomial coefficients are evaluated through log-Gamma.

    Input
    -----
    x: int or ndarray of ints (>= 0)
    tau: float (>= 0)
    jp: JumpParams (rejects the degenerate clustering rate 0)

    Output
    ------
    float ndarray of probabilities in [0, 1]
    """
    if jp.is_poisson:
        raise ParameterError("activation PMF is undefined for clustering rate 0; "
                             "use the compound-Poisson branch")
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    x = np.atleast_1d(np.asarray(x))
    if np.any(x < 0) or not np.issubdtype(x.dtype, np.integer):
        raise ParameterError("activation states must be nonnegative integers")
    if tau == 0.0:
        return np.where(x == jp.q0, 1.0, 0.0)
    p, g = _pmf_pg(tau, jp)
    r = jp.lambda0 / jp.alpha
    m = np.arange(int(x.max()) + 1)
    log_nb = _nb_log_coeff(m, r) + r * np.log(p) + m * np.log1p(-p)
    nb = np.exp(log_nb)
    # The mixing weight g exceeds 1 once tau > log(beta/alpha)/(beta-alpha),
    # so the binomial-type factor carries signed terms; the convolution still
    # sums to a proper PMF.  Evaluate it directly, not in log space.
    k = np.arange(jp.q0 + 1)
    comb = np.exp(gammaln(jp.q0 + 1.0) - gammaln(k + 1.0) - gammaln(jp.q0 - k + 1.0))
    binom = comb * (1.0 - g) ** k * g ** (jp.q0 - k)
    out = np.zeros(x.shape)
    for kk in k:
        valid = x >= kk
        out[valid] += binom[kk] * nb[x[valid] - kk]
    return out


def activation_slice_cf(x, v, tau, jp, jd):
    """Partial inverse Fourier transform of the joint CF over the activation axis.

    Returns E[exp(i v M_tau); Q_tau = x], i.e. the coefficient of e^{iux}
    in the joint CF of (Q, M).  At v = 0 this is the activation PMF.

    Input
    -----
    x: int or ndarray of ints, shape (nx,)
       Terminal activation states (>= 0).
    v: float or ndarray, shape (nv,)
       Transform variable of the compensated jump term.
    tau: float (>= 0)
    jp: JumpParams (rejects clustering rate 0)
    jd: JumpSizeDist

    Output
    ------
    complex ndarray, shape (nv, nx); axes are dropped for scalar inputs.
    """
    if jp.is_poisson:
        raise ParameterError("partial inversion is undefined for clustering rate 0")
    if tau < 0.0:
        raise ParameterError(f"elapsed time must be >= 0, got {tau}")
    x_scalar, v_scalar = np.ndim(x) == 0, np.ndim(v) == 0
    x = np.atleast_1d(np.asarray(x))
    if np.any(x < 0) or not np.issubdtype(x.dtype, np.integer):
        raise ParameterError("activation states must be nonnegative integers")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if tau == 0.0:
        out = np.tile(np.where(x == jp.q0, 1.0 + 0j, 0.0 + 0j), (v.size, 1))
    else:
        full = _slice_table(int(x.max()), v, tau, jp, jd)
        out = full[:, x]
    if x_scalar:
        out = out[:, 0]
    if v_scalar:
        out = out[0] if not x_scalar else out[()]
    return out


def _slice_table(x_max, v, tau, jp, jd):
    """Partial-inverse values for all activation states 0..x_max.

    Output shape (v.size, x_max + 1): the convolution of the complex
    negative-binomial factor with the binomial factor, the latter vanishing
    beyond the initial activation number.
    """
    alpha, beta, lam_star, q0 = jp.alpha, jp.beta, jp.lambda_star, jp.q0
    f, big_g, e_decay, _, _, psi, _ = _aux_fg(0.0, v, tau, jp, jd)
    h = (1.0 + e_decay) * f + (1.0 - e_decay) * big_g
    h_hat = (1.0 + e_decay) * f - (1.0 - e_decay) * big_g
    one_minus_p = 2.0 * alpha * psi * (1.0 - e_decay) / h
    r = lam_star / alpha + q0
    drift = 1j * v * jd.mu_bar * alpha
    log_pre = (lam_star * tau / (2.0 * alpha) * (beta - alpha - drift - f)
               + (lam_star / alpha) * np.log(2.0 * f) - r * np.log(h))
    m = np.arange(x_max + 1)
    # Fold the (1-p)^m factor into the exponent: the negative-binomial
    # prefactor alone overflows for vanishing clustering rates, where the
    # two terms cancel almost exactly.  Integer powers are branch-free.
    # Underflowed parameters pin the exponent at -inf so exp returns a
    # silent zero for every m >= 1.
    omp_zero = one_minus_p == 0.0
    log_omp = np.where(omp_zero, -np.inf, np.log(np.where(omp_zero, 1.0, one_minus_p)))
    with np.errstate(invalid="ignore"):
        m_term = m[None, :] * log_omp[:, None]
    m_term[:, 0] = 0.0   # 0 * (-inf) from the m = 0 column
    i1 = np.exp(log_pre[:, None] + _nb_log_coeff(m, r)[None, :] + m_term)
    k = np.arange(min(q0, x_max) + 1)
    log_bin = gammaln(q0 + 1.0) - gammaln(k + 1.0) - gammaln(q0 - k + 1.0)
    i2 = np.exp(log_bin)[None, :] * h_hat[:, None] ** k[None, :] \
        * (2.0 * beta * (1.0 - e_decay))[:, None] ** (q0 - k)[None, :]
    out = np.zeros((v.size, x_max + 1), dtype=complex)
    for kk in k:
        out[:, kk:] += i2[:, kk, None] * i1[:, : x_max + 1 - kk]
    return out


def complex_nb_parameter(v, tau, jp, jd):
    """The complex success-probability parameter of the partial inverse.

    Exposed to assert the branch condition |1 - p| <= 1 numerically.
    """
    f, big_g, e_decay, _, _, psi, _ = _aux_fg(0.0, v, tau, jp, jd)
    h = (1.0 + e_decay) * f + (1.0 - e_decay) * big_g
    return 1.0 - 2.0 * jp.alpha * psi * (1.0 - e_decay) / h


def mean_compensated_jumps(tau, jp, jd):
    """Closed-form mean of the compensated jump term.

    E[M_tau] = (mu_y - mu_bar) * int_0^tau E[lambda_s] ds, with the shared
    first moment E[lambda_s] = lbar + (lambda0 - lbar) e^{-(beta-alpha)s}.

    Input
    -----
    tau: float
    jp: JumpParams
    jd: JumpSizeDist

    Output
    ------
    float
    """
    decay = jp.beta - jp.alpha
    lbar = jp.lambda_mean
    integral = lbar * tau + (jp.lambda0 - lbar) * (-np.expm1(-decay * tau)) / decay
    return (jd.mu_y - jd.mu_bar) * integral
