"""Fourier-cosine pricing machinery.

Continuous COS pricing of European options, the discrete-distribution
variant (DCOS) with its exact aliasing-error identity, dimension-reduced
density recovery through analytic partial inverses, and the Bermudan
backward induction for all supported models.

The Bermudan recursion follows the early-exercise-point technique: the
value coefficients split at the exercise boundary into a closed-form
payoff part and a continuation part, the latter evaluated through
Hankel-plus-Toeplitz matrix-vector products computed with FFTs.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sp_fft

from . import hawkes as hk
from . import heston as hs
from . import qhawkes as qh
from .errors import GridError, ParameterError
from .models import BatesJumps, HawkesJumps, QHawkesJumps

log = logging.getLogger(__name__)

DEFAULT_N_TERMS = 1024
DEFAULT_TRUNC_WIDTH = 10.0
FFT_WORKERS = 2


@dataclass(frozen=True)
class CosGrid:
    """Truncation interval and term count of one cosine-expansion axis."""

    a: float
    b: float
    n_terms: int

    def __post_init__(self):
        if not (self.a < self.b):
            raise GridError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n_terms < 4:
            raise GridError(f"need at least 4 expansion terms, got {self.n_terms}")

    @property
    def frequencies(self):
        return np.arange(self.n_terms) * np.pi / (self.b - self.a)


def log_cf_cumulants(cf, step=1e-3):
    """First, second and fourth cumulants by finite differences of log cf.

    Fourth-order central stencils on a 7-point grid around the origin.

    Input
    -----
    cf: callable
       Vectorised characteristic function u -> complex.
    step: float, optional

    Output
    ------
    (c1, c2, c4) floats; c4 is clipped at zero against stencil noise.
    """
    u = step * np.arange(-3.0, 4.0)
    vals = np.asarray(cf(u), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise GridError("characteristic function returned non-finite values near 0")
    g = np.log(vals)
    d1 = (-g[5] + 8.0 * g[4] - 8.0 * g[2] + g[1]) / (12.0 * step)
    d2 = (-g[5] + 16.0 * g[4] - 30.0 * g[3] + 16.0 * g[2] - g[1]) / (12.0 * step**2)
    d4 = (-g[6] + 12.0 * g[5] - 39.0 * g[4] + 56.0 * g[3]
          - 39.0 * g[2] + 12.0 * g[1] - g[0]) / (6.0 * step**4)
    c1 = d1.imag
    c2 = -d2.real
    c4 = d4.real
    if not (np.isfinite(c1) and np.isfinite(c2) and np.isfinite(c4)):
        raise GridError("non-finite cumulants")
    return c1, c2, max(c4, 0.0)


def cos_truncation(c1, c2, c4, width=DEFAULT_TRUNC_WIDTH, n_terms=DEFAULT_N_TERMS):
    """Truncation interval from cumulants: c1 -/+ L*sqrt(c2 + sqrt(c4)).

    Input
    -----
    c1, c2, c4: floats (c2 > 0, c4 >= 0)
    width: float, optional
       The multiplier L.
    n_terms: int, optional

    Output
    ------
    CosGrid
    """
    if not (np.isfinite(c1) and np.isfinite(c2) and np.isfinite(c4)):
        raise GridError("non-finite cumulants")
    if c2 <= 0.0:
        raise GridError(f"second cumulant must be positive, got {c2}")
    half = width * np.sqrt(c2 + np.sqrt(max(c4, 0.0)))
    return CosGrid(c1 - half, c1 + half, n_terms)


# ---------------------------------------------------------------------------
# Discrete COS


def dcos_pmf(cf, n, n_terms):
    """PMF estimate of an integer-valued variable from its CF.

    p_hat(n) = sum'_k A_k cos(k pi (2n+1)/(2N)) with
    A_k = (2/N) Re(cf(k pi / N) exp(i k pi / (2N))); the first term carries
    weight one half.

    Input
    -----
    cf: callable
       Vectorised characteristic function.
    n: int or ndarray of ints
    n_terms: int
       Number of DCT terms N; also the implied support {0..N-1}.

    Output
    ------
    float ndarray of PMF estimates
    """
    scalar = np.ndim(n) == 0
    n = np.atleast_1d(np.asarray(n))
    k = np.arange(n_terms)
    freq = k * np.pi / n_terms
    coeff = 2.0 / n_terms * np.real(np.asarray(cf(freq)) * np.exp(0.5j * freq))
    coeff[0] *= 0.5
    cosines = np.cos(np.outer(freq, n.astype(float) + 0.5))
    out = coeff @ cosines
    return out[0] if scalar else out


def dcos_error_identity(pmf, n, n_terms, tail_tol=1e-18, max_wraps=10**6):
    """Exact aliasing error of the DCOS estimate at index n.

    sum_{l>=1} (p(2lN+n) + p(2lN-1-n)); nonnegative, and equal to
    dcos_pmf(n) - p(n) up to rounding.

    Input
    -----
    pmf: callable
       Exact PMF, vectorised over integer indices, with decaying tail.
    n: int
    n_terms: int
    tail_tol: float, optional
       Stop once both added terms fall below this level.
    max_wraps: int, optional

    Output
    ------
    float
    """
    total = 0.0
    for wrap in range(1, max_wraps + 1):
        terms = pmf(np.array([2 * wrap * n_terms + n, 2 * wrap * n_terms - 1 - n]))
        total += float(terms.sum())
        if np.all(terms < tail_tol):
            break
    return total


# ---------------------------------------------------------------------------
# Characteristic function assembly


def cf_jump_factor(model, tau):
    """Jump factor of the log-asset CF for any jump specification."""
    jumps = model.jumps
    if jumps is None:
        return lambda u: np.ones_like(np.asarray(u, dtype=float), dtype=complex)
    if isinstance(jumps, QHawkesJumps):
        if jumps.params.is_poisson:
            return lambda u: hs.cf_bates_jumps(u, tau, jumps.params.lambda_star, jumps.sizes)
        return lambda u: qh.cf_activation_jumps(0.0, u, tau, jumps.params, jumps.sizes)
    if isinstance(jumps, HawkesJumps):
        return lambda u: hk.cf_intensity_jumps(0.0, u, tau, jumps.params, jumps.sizes)
    if isinstance(jumps, BatesJumps):
        return lambda u: hs.cf_bates_jumps(u, tau, jumps.intensity, jumps.sizes)
    raise ParameterError(f"unknown jump specification {type(jumps).__name__}")


def cf_log_asset(model, tau):
    """CF of the terminal log-asset price, diffusion times jump factor."""
    jump_cf = cf_jump_factor(model, tau)
    x0 = np.log(model.heston.s0)

    def cf(u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * x0) * hs.cf_heston(u, tau, model.heston) * jump_cf(u)

    return cf


def asset_grid(model, tau, n_terms=DEFAULT_N_TERMS, width=DEFAULT_TRUNC_WIDTH):
    """Log-price truncation grid from the cumulants of the full CF."""
    c1, c2, c4 = log_cf_cumulants(cf_log_asset(model, tau))
    return cos_truncation(c1, c2, c4, width, n_terms)


# ---------------------------------------------------------------------------
# Payoff coefficients


def _chi_psi(a, b, k, x1, x2):
    """Cosine transforms of exp(x) and 1 over [x1, x2] within [a, b].

    chi_k = int_{x1}^{x2} e^x cos(k pi (x-a)/(b-a)) dx
    psi_k = int_{x1}^{x2}     cos(k pi (x-a)/(b-a)) dx

    x1/x2 may carry trailing state axes; k is broadcast along the leading
    axis.
    """
    omega = np.asarray(k) * np.pi / (b - a)
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    shape = (omega.shape[0],) + np.broadcast_shapes(x1.shape, x2.shape)
    om = omega.reshape((-1,) + (1,) * (len(shape) - 1))
    t1 = om * (x1 - a)
    t2 = om * (x2 - a)
    chi = (np.cos(t2) * np.exp(x2) - np.cos(t1) * np.exp(x1)
           + om * (np.sin(t2) * np.exp(x2) - np.sin(t1) * np.exp(x1))) / (1.0 + om * om)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = (np.sin(t2) - np.sin(t1)) / om
    psi = np.where(om == 0.0, (x2 - x1) * np.ones_like(psi), psi)
    return chi, psi


def payoff_coefficients(grid, strike, kind, x1=None, x2=None):
    """Scaled payoff cosine coefficients over a subinterval.

    (2/(b-a)) int g(x) cos(k pi (x-a)/(b-a)) dx for the put or call payoff
    restricted to [x1, x2] (defaulting to the payoff's support inside the
    grid).  x1/x2 may carry state axes.
    """
    a, b = grid.a, grid.b
    k = np.arange(grid.n_terms)
    log_k = np.log(strike)
    if kind == "put":
        lo = a if x1 is None else x1
        hi = min(log_k, b) if x2 is None else np.minimum(x2, min(log_k, b))
        lo = np.minimum(lo, hi)
        chi, psi = _chi_psi(a, b, k, lo, hi)
        return 2.0 / (b - a) * (strike * psi - chi)
    if kind == "call":
        lo = max(log_k, a) if x1 is None else np.maximum(x1, max(log_k, a))
        hi = b if x2 is None else x2
        lo = np.minimum(lo, hi)
        chi, psi = _chi_psi(a, b, k, lo, hi)
        return 2.0 / (b - a) * (chi - strike * psi)
    raise ParameterError(f"unknown option kind {kind!r}")


def _cos_series_sum(coeff, weights):
    """sum'_k coeff_k * weights_k with the first term halved."""
    total = coeff * weights
    return 0.5 * total[0] + total[1:].sum(axis=0)


# ---------------------------------------------------------------------------
# European pricing


def price_european(model, opt, grid=None, n_terms=DEFAULT_N_TERMS,
                   width=DEFAULT_TRUNC_WIDTH):
    """COS price of a European option under any supported model.

    Puts are priced from the payoff-coefficient series against the full
    log-asset CF; calls through put-call parity, which preserves precision
    for payoffs growing with the upper truncation edge.

    Input
    -----
    model: ModelSpec
    opt: OptionSpec with European exercise
    grid: CosGrid, optional
       Log-price truncation; derived from cumulants when omitted.
    n_terms, width: engine defaults used when grid is omitted.

    Output
    ------
    float price
    """
    if not opt.is_european:
        raise ParameterError("price_european requires a European exercise schedule")
    strike, tau = opt.strike, opt.maturity
    if grid is None:
        grid = asset_grid(model, tau, n_terms, width)
    if not (grid.a < np.log(strike) < grid.b):
        raise GridError(
            f"grid [{grid.a:.3f}, {grid.b:.3f}] clips the strike's log level {np.log(strike):.3f}"
        )
    put = _price_european_put(model, strike, tau, grid)
    if opt.kind == "put":
        return put
    hp = model.heston
    return put + hp.s0 - strike * np.exp(-hp.r * tau)


def _price_european_put(model, strike, tau, grid):
    cf = cf_log_asset(model, tau)
    u_k = grid.frequencies
    dens = np.real(cf(u_k) * np.exp(-1j * u_k * grid.a))
    coeff = payoff_coefficients(grid, strike, "put")
    return np.exp(-model.heston.r * tau) * float(_cos_series_sum(dens, coeff))


# ---------------------------------------------------------------------------
# Dimension-reduced joint density


@dataclass(frozen=True)
class JointCharFn:
    """A bivariate CF with an analytic partial inverse along the second axis.

    joint(u, v) -> complex and partial_inverse(u, y) -> complex, the latter
    equal to (1/2pi) int joint(u, v) exp(-i v y) dv.  second_axis_discrete
    marks an integer-valued second coordinate.
    """

    joint: callable
    partial_inverse: callable = None
    second_axis_discrete: bool = False


def reduced_density(cf2d, x, y, grid):
    """Joint density (or mixed density/PMF) via a one-axis cosine expansion.

    f(x, y) ~= sum'_k A_k(y) cos(k pi (x-a)/(b-a)) with
    A_k(y) = (2/(b-a)) Re(exp(-i k pi a/(b-a)) * partial_inverse(u_k, y)),
    requiring the analytic partial inverse along the second axis.

    Input
    -----
    cf2d: JointCharFn
    x: float or ndarray
       First-axis evaluation points.
    y: scalar second-axis value (integer when discrete).
    grid: CosGrid for the first axis.

    Output
    ------
    float ndarray matching x
    """
    if cf2d.partial_inverse is None:
        raise ParameterError("characteristic function has no registered partial inverse")
    u_k = grid.frequencies
    part = np.asarray(cf2d.partial_inverse(u_k, y))
    coeff = 2.0 / (grid.b - grid.a) * np.real(np.exp(-1j * u_k * grid.a) * part)
    coeff[0] *= 0.5
    cosines = np.cos(np.outer(u_k, np.atleast_1d(np.asarray(x, dtype=float)) - grid.a))
    out = coeff @ cosines
    return out[0] if np.ndim(x) == 0 else out


def hqh_joint_charfn(model, tau):
    """JointCharFn of (log-asset price, activation number) under HQH."""
    if not isinstance(model.jumps, QHawkesJumps):
        raise ParameterError("model must carry Q-Hawkes jumps")
    jp, jd = model.jumps.params, model.jumps.sizes
    hp = model.heston
    x0 = np.log(hp.s0)

    def joint(u, v):
        return (np.exp(1j * np.asarray(u) * x0) * hs.cf_heston(u, tau, hp)
                * qh.cf_activation_jumps(v, u, tau, jp, jd))

    def partial(u, y):
        return (np.exp(1j * np.asarray(u) * x0) * hs.cf_heston(u, tau, hp)
                * qh.activation_slice_cf(int(y), u, tau, jp, jd))

    return JointCharFn(joint=joint, partial_inverse=partial, second_axis_discrete=True)


def density_log_asset(model, tau, x, grid=None, n_terms=DEFAULT_N_TERMS,
                      width=DEFAULT_TRUNC_WIDTH):
    """Marginal density of the terminal log-asset price via 1-D COS."""
    if grid is None:
        grid = asset_grid(model, tau, n_terms, width)
    cf = cf_log_asset(model, tau)
    u_k = grid.frequencies
    coeff = 2.0 / (grid.b - grid.a) * np.real(cf(u_k) * np.exp(-1j * u_k * grid.a))
    coeff[0] *= 0.5
    cosines = np.cos(np.outer(u_k, np.atleast_1d(np.asarray(x, dtype=float)) - grid.a))
    out = coeff @ cosines
    return out[0] if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# Bermudan pricing


@dataclass(frozen=True)
class BermudanGrid:
    """Discretisation of the Bermudan backward induction.

    m_dates: number of exercise dates M (>= 1); dates equally spaced.
    x_grid: log-price cosine grid.
    v_nodes/v_weights: variance quadrature (shared by all models).
    n_activation: activation-state truncation (HQH only).
    lambda_grid: CosGrid of the intensity cosine expansion (HH only).
    h_nodes/h_weights: intensity quadrature (HH only).
    """

    m_dates: int
    x_grid: CosGrid
    v_nodes: np.ndarray
    v_weights: np.ndarray
    n_activation: int = None
    lambda_grid: CosGrid = None
    h_nodes: np.ndarray = None
    h_weights: np.ndarray = None

    def __post_init__(self):
        if self.m_dates < 1:
            raise ParameterError(f"need at least one exercise date, got {self.m_dates}")


DEFAULT_BERMUDAN_X_TERMS = 512
DEFAULT_N_VAR = 48
DEFAULT_VAR_WIDTH = 20.0
DEFAULT_N_ACT_CAP = 96
ACTIVATION_TAIL_TOL = 1e-10
DEFAULT_N_LAMBDA = 64
DEFAULT_N_INTENSITY = 64
INTENSITY_WIDTH = 10.0


def activation_truncation(jp, horizon, tail_tol=ACTIVATION_TAIL_TOL,
                          cap=DEFAULT_N_ACT_CAP):
    """Smallest activation-state count covering 1 - tail_tol of the PMF."""
    x = np.arange(cap)
    cum = np.cumsum(qh.pmf_activation(x, horizon, jp))
    hit = np.nonzero(cum > 1.0 - tail_tol)[0]
    return int(hit[0]) + 1 if hit.size else cap


def variance_grid_union(hp, m_dates, dt, n_nodes=DEFAULT_N_VAR, width=DEFAULT_VAR_WIDTH):
    """Variance quadrature covering every exercise horizon from V0."""
    horizons = dt * np.arange(1, m_dates + 1)
    lo, hi = np.inf, -np.inf
    for t in horizons:
        l, h = hs.variance_quad_domain(t, hp, width)
        lo, hi = min(lo, l), max(hi, h)
    return hs.variance_quadrature(dt, hp, n_nodes, (max(lo, 0.0), hi))


def intensity_grid(jp, horizon, n_lambda=DEFAULT_N_LAMBDA, n_nodes=DEFAULT_N_INTENSITY,
                   width=INTENSITY_WIDTH):
    """Intensity-axis cosine grid and midpoint quadrature for the HH model.

    The quadrature is the uniform midpoint rule: it integrates every cosine
    mode of the expansion exactly to zero except the constant one, which
    makes a single-date recursion collapse to the European price.  The node
    count must stay ahead of the mode count: the transition law carries a
    point mass at the no-jump intensity, whose non-decaying modes alias
    into the value recursion when under-sampled.

    The domain is sized from the transient intensity variance at the
    option horizon; slowly mean-reverting settings stay far below their
    stationary spread within one contract.
    """
    sd = np.sqrt(hk.intensity_transient_variance(horizon, jp))
    a_h = jp.lambda_star
    b_h = jp.lambda0 + width * sd
    grid = CosGrid(a_h, b_h, n_lambda)
    step = (b_h - a_h) / n_nodes
    nodes = a_h + (np.arange(n_nodes) + 0.5) * step
    weights = np.full(n_nodes, step)
    return grid, nodes, weights


def bermudan_grid(model, opt, m_dates, n_x=DEFAULT_BERMUDAN_X_TERMS,
                  x_width=DEFAULT_TRUNC_WIDTH, n_v=DEFAULT_N_VAR,
                  v_width=DEFAULT_VAR_WIDTH, n_activation=None,
                  n_lambda=DEFAULT_N_LAMBDA, n_intensity=DEFAULT_N_INTENSITY):
    """Assemble a BermudanGrid with engine defaults for the given model."""
    tau = opt.maturity
    dt = tau / m_dates
    x_grid = asset_grid(model, tau, n_x, x_width)
    hp = model.heston
    v_nodes, v_weights = variance_grid_union(hp, m_dates, dt, n_v, v_width)
    kwargs = {}
    if isinstance(model.jumps, QHawkesJumps) and not model.jumps.params.is_poisson:
        if n_activation is None:
            n_activation = activation_truncation(model.jumps.params, tau)
        kwargs["n_activation"] = n_activation
    if isinstance(model.jumps, HawkesJumps):
        lam_grid, h_nodes, h_weights = intensity_grid(model.jumps.params, tau,
                                                      n_lambda, n_intensity)
        kwargs.update(lambda_grid=lam_grid, h_nodes=h_nodes, h_weights=h_weights)
    return BermudanGrid(m_dates=m_dates, x_grid=x_grid, v_nodes=v_nodes,
                        v_weights=v_weights, **kwargs)


def _variance_tensors(u_k, bg, hp, dt, chunk=64):
    """Weighted variance transition tensor and the initial-state column.

    psi_var[k, j_next, j_prev] carries the quadrature weight of j_next.
    The Bessel argument depends on the node pair only through the product
    of the variances, so the expensive Bessel evaluations run on the upper
    triangle and are mirrored.
    """
    n_x, nv = u_k.size, bg.v_nodes.size
    out = np.empty((n_x, nv, nv), dtype=complex)
    out0 = np.empty((n_x, nv), dtype=complex)
    iu, ju = np.triu_indices(nv)
    sq = np.sqrt(bg.v_nodes)
    pair_sqrt = sq[iu] * sq[ju]
    order = hs.variance_density_power(hp)
    _, gam = hs._discriminant(u_k, hp)
    z_coef = 4.0 * gam * np.exp(-0.5 * gam * dt) / (hp.eta**2 * (1.0 - np.exp(-gam * dt)))
    vn = bg.v_nodes[None, :, None]
    vp = bg.v_nodes[None, None, :]
    bessel_full = np.empty((chunk, nv, nv), dtype=complex)
    for start in range(0, n_x, chunk):
        sl = slice(start, min(start + chunk, n_x))
        width = sl.stop - sl.start
        z_tri = z_coef[sl, None] * pair_sqrt[None, :]
        bes_tri, _ = hs.bessel_iv_scaled(order, z_tri)
        buf = bessel_full[:width]
        buf[:, iu, ju] = bes_tri
        buf[:, ju, iu] = bes_tri
        out[sl] = hs.psi_v(u_k[sl, None, None], vn, vp, dt, hp, bessel_scaled=buf)
        out0[sl] = hs.psi_v(u_k[sl, None], bg.v_nodes[None, :], hp.v0, dt, hp)
    out *= bg.v_weights[None, :, None]
    out0 *= bg.v_weights[None, :]
    return out, out0


def _qhawkes_tensors(u_k, bg, jp, jd, dt):
    """Activation transition tensor psi_jump[k, q_next, q_prev] and initial column."""
    nq = bg.n_activation
    states = np.arange(nq)
    tensor = np.empty((u_k.size, nq, nq), dtype=complex)
    for q_prev in range(nq):
        jp_state = replace(jp, q0=int(q_prev))
        tensor[:, :, q_prev] = qh.activation_slice_cf(states, u_k, dt, jp_state, jd)
    init = qh.activation_slice_cf(states, u_k, dt, jp, jd)
    return tensor, init


def _hawkes_tensors(u_k, bg, jp, jd, dt):
    """Weighted intensity transition tensor for the HH recursion.

    psi_jump[k, h_next, h_prev] = w_{h_next} * Psi_lambda(u_k, node_next,
    node_prev), where Psi_lambda is the cosine-series reconstruction of the
    density of the next intensity jointly with the jump-term transform.
    """
    lam = bg.lambda_grid
    n_lam = lam.n_terms
    a_h, width_h = lam.a, lam.b - lam.a
    w_freq = np.arange(n_lam) * np.pi / width_h
    # One ODE solve per (+/- intensity frequency, log-price frequency).
    a_pos, b_pos = hk.cf_intensity_jumps_ab(w_freq[:, None], u_k[None, :], dt, jp, jd)
    a_neg, b_neg = hk.cf_intensity_jumps_ab(-w_freq[:, None], u_k[None, :], dt, jp, jd)
    phase = np.exp(-1j * w_freq * a_h)

    def psi_lambda(lam_prev):
        cf_pos = np.exp(a_pos[:, :, None] + b_pos[:, :, None] * lam_prev[None, None, :]) \
            * phase[:, None, None]
        cf_neg = np.exp(a_neg[:, :, None] + b_neg[:, :, None] * lam_prev[None, None, :]) \
            * np.conj(phase)[:, None, None]
        both = cf_pos + cf_neg
        both[0] *= 0.5
        cosines = np.cos(np.outer(w_freq, bg.h_nodes - a_h))
        return np.einsum("wkp,wh->khp", both, cosines) / width_h

    tensor = psi_lambda(bg.h_nodes) * bg.h_weights[None, :, None]
    init = psi_lambda(np.array([jp.lambda0]))[:, :, 0] * bg.h_weights[None, :]
    return tensor, init


def _bates_tensors(u_k, lam_b, jd, dt):
    cf = hs.cf_bates_jumps(u_k, dt, lam_b, jd)
    return cf[:, None, None].copy(), cf[:, None].copy()


def _interval_exponentials(n_max, theta1, theta2):
    """E_m = int_{theta1}^{theta2} exp(i m theta) dtheta for m = 0..n_max.

    theta1 carries state axes; theta2 may be a scalar (constant edge), in
    which case its phase vector is computed once and broadcast.
    """
    theta1 = np.asarray(theta1)
    m_col = np.arange(n_max + 1).reshape((-1,) + (1,) * theta1.ndim)
    e1 = _geometric_phases(n_max + 1, theta1)
    if np.ndim(theta2) == 0:
        e2 = np.exp(1j * np.arange(n_max + 1) * float(theta2)).reshape(
            (n_max + 1,) + (1,) * theta1.ndim)
    else:
        e2 = _geometric_phases(n_max + 1, np.asarray(theta2))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (e2 - e1) / (1j * m_col)
    vals[0] = (theta2 - theta1) * np.ones_like(vals[0].real)
    return vals


def _continuation_coefficients(h_coeff, grid, x1, x2, disc):
    """Cosine coefficients of the continuation value over [x1, x2].

    C_k = disc/pi * sum'_l Re(H_l (E_{l+k} + E_{l-k})), evaluated with a
    Hankel and a Toeplitz FFT product over the frequency axis.

    h_coeff: (N,) + state axes; x1, x2: state axes (either may be the
    scalar interval edge).
    """
    n = grid.n_terms
    state_shape = h_coeff.shape[1:]
    span = grid.b - grid.a
    theta1 = np.pi * (np.asarray(x1) - grid.a) / span
    theta2 = np.pi * (np.asarray(x2) - grid.a) / span
    if np.ndim(theta1) == 0:
        theta1 = np.full(state_shape, float(theta1))
    e_pos = _interval_exponentials(2 * n - 2, theta1, theta2)

    h = h_coeff.copy()
    h[0] *= 0.5
    size = 2 * n
    h_pad = np.zeros((size,) + state_shape, dtype=complex)
    h_pad[:n] = h
    f_h = sp_fft.fft(h_pad, axis=0, workers=FFT_WORKERS)
    # The index-reversed value vector has the index-reversed spectrum.
    f_h_rev = np.roll(f_h[::-1], 1, axis=0)

    # Toeplitz part: sum_l H_l E_{l-k} via circular convolution with the
    # index-reversed kernel (E_{-m} = conj(E_m)).
    kernel_t = np.zeros((size,) + state_shape, dtype=complex)
    kernel_t[0] = e_pos[0]
    kernel_t[1:n] = np.conj(e_pos[1:n])
    kernel_t[size - n + 1:] = e_pos[1:n][::-1]
    toe = sp_fft.ifft(f_h * sp_fft.fft(kernel_t, axis=0, workers=FFT_WORKERS),
                      axis=0, workers=FFT_WORKERS)[:n]

    # Hankel part: sum_l H_l E_{k+l} via convolution with reversed H.
    kernel_h = np.zeros((size,) + state_shape, dtype=complex)
    kernel_h[: 2 * n - 1] = e_pos
    han = sp_fft.ifft(f_h_rev * sp_fft.fft(kernel_h, axis=0, workers=FFT_WORKERS),
                      axis=0, workers=FFT_WORKERS)[:n]

    return disc / np.pi * np.real(toe + han)


def _continuation_value(h_coeff, grid, x, disc):
    """Continuation value c(x) = disc * sum'_k Re(H_k exp(i u_k (x - a)))."""
    u_k = grid.frequencies
    phase = np.exp(1j * np.multiply.outer(u_k, np.asarray(x) - grid.a))
    total = np.real(h_coeff.reshape(h_coeff.shape + (1,) * (np.ndim(x))) * phase)
    return disc * (0.5 * total[0] + total[1:].sum(axis=0))


SPLIT_WIDTH_TOL = 1e-6


def _geometric_phases(n, theta):
    """exp(i m theta) for m = 0..n-1 by cumulative products (theta real)."""
    out = np.empty((n,) + np.asarray(theta).shape, dtype=complex)
    out[0] = 1.0
    if n > 1:
        w = np.exp(1j * np.asarray(theta))
        out[1:] = w
        np.cumprod(out[1:], axis=0, out=out[1:])
    return out


def _exercise_split(h_coeff, grid, strike, kind, disc, x_prev):
    """Early-exercise points where continuation meets intrinsic value.

    Bracketed Newton per state: the sign change of continuation-minus-payoff
    is maintained as a shrinking bracket and Newton steps leaving it fall
    back on bisection.  A split-point error eps perturbs the value
    coefficients only at O(eps^2), so iteration stops on bracket width.
    States without a sign change collapse to the matching boundary; any
    residual non-bracketed state is resolved by a dense scan (logged).
    """
    a, b = grid.a, grid.b
    log_k = np.log(strike)
    if kind == "put":
        lo_edge, hi_edge = a, min(log_k, b)
    else:
        lo_edge, hi_edge = max(log_k, a), b
    u_k = grid.frequencies
    n_flat = int(np.prod(x_prev.shape))
    h_flat = h_coeff.reshape(grid.n_terms, n_flat).copy()
    h_flat[0] *= 0.5

    def payoff(x):
        return np.maximum(strike - np.exp(x), 0.0) if kind == "put" else \
            np.maximum(np.exp(x) - strike, 0.0)

    def diff_and_slope(x, cols):
        phase = _geometric_phases(u_k.size, np.pi * (x - a) / (b - a))
        band = h_flat[:, cols] * phase
        c = disc * np.real(band.sum(axis=0))
        slope = disc * np.real((band * 1j * u_k[:, None]).sum(axis=0))
        g_slope = np.where(x <= log_k, -np.exp(x), 0.0) if kind == "put" else \
            np.where(x >= log_k, np.exp(x), 0.0)
        return c - payoff(x), slope - g_slope

    all_cols = np.arange(n_flat)
    lo = np.full(n_flat, lo_edge)
    hi = np.full(n_flat, hi_edge)
    f_lo, _ = diff_and_slope(lo, all_cols)
    f_hi, _ = diff_and_slope(hi, all_cols)
    no_root = (f_lo >= 0.0) & (f_hi >= 0.0)
    all_exercise = (f_lo < 0.0) & (f_hi < 0.0)
    bracketed = ~no_root & ~all_exercise
    x = np.clip(x_prev.reshape(n_flat).copy(), lo_edge, hi_edge)
    x[no_root] = lo_edge if kind == "put" else hi_edge
    x[all_exercise] = hi_edge if kind == "put" else lo_edge

    active = np.nonzero(bracketed)[0]
    for _ in range(64):
        if active.size == 0:
            break
        f, fp = diff_and_slope(x[active], active)
        neg = f < 0.0
        if kind == "put":
            lo[active] = np.where(neg, x[active], lo[active])
            hi[active] = np.where(neg, hi[active], x[active])
        else:
            # For calls the difference decreases through the root.
            lo[active] = np.where(neg, lo[active], x[active])
            hi[active] = np.where(neg, x[active], hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = x[active] - f / fp
        inner_lo = np.minimum(lo[active], hi[active])
        inner_hi = np.maximum(lo[active], hi[active])
        bad = ~np.isfinite(cand) | (cand <= inner_lo) | (cand >= inner_hi)
        cand = np.where(bad, 0.5 * (lo[active] + hi[active]), cand)
        # A small increment certifies convergence only for accepted Newton
        # steps; bisection steps terminate on bracket width alone.
        done = (~bad & (np.abs(cand - x[active]) < SPLIT_WIDTH_TOL)) | \
            (np.abs(hi[active] - lo[active]) < SPLIT_WIDTH_TOL)
        x[active] = cand
        active = active[~done]
    if active.size:
        log.warning("early-exercise search fell back to a dense scan for %d states",
                    active.size)
        xs = np.linspace(lo_edge, hi_edge, 4096)
        vals = disc * np.real(
            np.einsum("ks,kx->sx", h_flat[:, active], np.exp(1j * np.outer(u_k, xs - a)))
        ) - payoff(xs)[None, :]
        for row, col in enumerate(active):
            sign_change = np.nonzero(np.diff(np.sign(vals[row])))[0]
            x[col] = xs[sign_change[-1]] if sign_change.size else lo_edge
    return x.reshape(x_prev.shape)


def _bermudan_backbone(model, opt, bg, psi_jump, psi_jump0):
    """Backward induction shared by every jump specification.

    psi_jump[k, s_next, s_prev] is the jump-state transition tensor over
    one exercise interval (quadrature weights folded along s_next);
    psi_jump0[k, s_next] the transition out of the actual initial state.
    """
    hp = model.heston
    strike, kind = opt.strike, opt.kind
    m_dates = bg.m_dates
    dt = opt.maturity / m_dates
    disc = np.exp(-hp.r * dt)
    grid = bg.x_grid
    psi_var, psi_var0 = _variance_tensors(grid.frequencies, bg, hp, dt)
    n_x, n_v = grid.n_terms, bg.v_nodes.size
    n_s = psi_jump.shape[1]

    g_coeff = np.broadcast_to(
        payoff_coefficients(grid, strike, kind)[:, None, None], (n_x, n_v, n_s)
    ).copy()
    x_star = np.full((n_v, n_s), min(np.log(strike), grid.b) if kind == "put"
                     else max(np.log(strike), grid.a))
    wv_t = psi_var.transpose(0, 2, 1)
    for _ in range(m_dates - 1):
        h_coeff = wv_t @ (g_coeff @ psi_jump)
        x_star = _exercise_split(h_coeff, grid, strike, kind, disc, x_star)
        if kind == "put":
            pay = payoff_coefficients(grid, strike, kind, x1=None, x2=x_star)
            cont = _continuation_coefficients(h_coeff, grid, x_star,
                                              np.full_like(x_star, grid.b), disc)
        else:
            pay = payoff_coefficients(grid, strike, kind, x1=x_star, x2=None)
            cont = _continuation_coefficients(h_coeff, grid,
                                              np.full_like(x_star, grid.a), x_star, disc)
        g_coeff = pay + cont
    h0 = np.einsum("kj,kjs,ks->k", psi_var0, g_coeff, psi_jump0)
    value = _continuation_value(h0, grid, np.log(hp.s0), disc)
    return float(value)


def bermudan_price(model, opt, bg=None, **grid_kwargs):
    """Bermudan option price by COS backward induction.

    Dispatches on the model's jump specification: Q-Hawkes uses the
    analytic activation-state transition, Hawkes the intensity cosine
    expansion fed by ODE characteristic functions, Bates and pure Heston a
    single constant-intensity jump state.

    Input
    -----
    model: ModelSpec
    opt: OptionSpec with exercise_dates = M >= 1
    bg: BermudanGrid, optional; assembled with defaults when omitted.

    Output
    ------
    float price
    """
    if opt.is_european:
        raise ParameterError("bermudan_price requires an exercise schedule; "
                             "set exercise_dates")
    m_dates = opt.exercise_dates
    if bg is None:
        bg = bermudan_grid(model, opt, m_dates, **grid_kwargs)
    dt = opt.maturity / bg.m_dates
    jumps = model.jumps
    u_k = bg.x_grid.frequencies
    if isinstance(jumps, QHawkesJumps) and not jumps.params.is_poisson:
        psi_jump, psi_jump0 = _qhawkes_tensors(u_k, bg, jumps.params, jumps.sizes, dt)
    elif isinstance(jumps, HawkesJumps):
        psi_jump, psi_jump0 = _hawkes_tensors(u_k, bg, jumps.params, jumps.sizes, dt)
    elif isinstance(jumps, QHawkesJumps):
        psi_jump, psi_jump0 = _bates_tensors(u_k, jumps.params.lambda_star, jumps.sizes, dt)
    elif isinstance(jumps, BatesJumps):
        psi_jump, psi_jump0 = _bates_tensors(u_k, jumps.intensity, jumps.sizes, dt)
    elif jumps is None:
        ones = np.ones_like(u_k, dtype=complex)
        psi_jump, psi_jump0 = ones[:, None, None].copy(), ones[:, None].copy()
    else:
        raise ParameterError(f"unknown jump specification {type(jumps).__name__}")
    return _bermudan_backbone(model, opt, bg, psi_jump, psi_jump0)


def bermudan_hqh(model, opt, bg=None, **grid_kwargs):
    """Bermudan price under Q-Hawkes jumps (1-D cosine expansion)."""
    if not isinstance(model.jumps, QHawkesJumps):
        raise ParameterError("bermudan_hqh requires Q-Hawkes jumps")
    return bermudan_price(model, opt, bg, **grid_kwargs)


def bermudan_hh(model, opt, bg=None, **grid_kwargs):
    """Bermudan price under Hawkes jumps (cosine expansions in x and lambda)."""
    if not isinstance(model.jumps, HawkesJumps):
        raise ParameterError("bermudan_hh requires Hawkes jumps")
    return bermudan_price(model, opt, bg, **grid_kwargs)
