"""Black-Scholes pricing and implied-volatility inversion.

All model comparisons are expressed through the Black-Scholes implied
volatility, recovered with a safeguarded Newton iteration (bisection
fallback) from option prices.
"""

import math

import numpy as np
from scipy.special import ndtr

from .errors import OutOfBoundsError, ParameterError

SIGMA_LO = 1e-6
SIGMA_HI = 5.0


def bs_price(s0, strike, r, horizon, sigma, kind="put"):
    """Black-Scholes price of a European option.

    Input
    -----
    s0, strike: float
    r: float
    horizon: float (> 0)
    sigma: float (>= 0)
    kind: 'put' or 'call'

    Output
    ------
    float
    """
    if horizon <= 0.0:
        raise ParameterError(f"maturity must be > 0, got {horizon}")
    if sigma < 0.0:
        raise ParameterError(f"volatility must be >= 0, got {sigma}")
    disc = math.exp(-r * horizon)
    if sigma == 0.0:
        fwd = s0 / disc
        intrinsic = max(fwd - strike, 0.0) if kind == "call" else max(strike - fwd, 0.0)
        return disc * intrinsic
    st = sigma * math.sqrt(horizon)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma**2) * horizon) / st
    d2 = d1 - st
    if kind == "call":
        return s0 * ndtr(d1) - strike * disc * ndtr(d2)
    if kind == "put":
        return strike * disc * ndtr(-d2) - s0 * ndtr(-d1)
    raise ParameterError(f"unknown option kind {kind!r}")


def bs_vega(s0, strike, r, horizon, sigma):
    st = sigma * math.sqrt(horizon)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma**2) * horizon) / st
    return s0 * math.sqrt(horizon) * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)


def no_arbitrage_bounds(s0, strike, r, horizon, kind):
    """Static price bounds [lower, upper] for a European option."""
    disc = math.exp(-r * horizon)
    if kind == "call":
        return max(s0 - strike * disc, 0.0), s0
    return max(strike * disc - s0, 0.0), strike * disc


def implied_vol(price, s0, strike, r, horizon, kind="put", tol_scale=1e-10, max_iter=100):
    """Black-Scholes volatility reproducing a given option price.

    Safeguarded Newton from a Brenner-Subrahmanyam initial guess, falling
    back on bisection over [1e-6, 5] whenever a Newton step leaves the
    bracket.  Terminates when |bs_price(sigma) - price| < tol_scale * s0.

    Input
    -----
    price: float
       Target option price; must respect static no-arbitrage bounds.
    s0, strike, r, horizon: float
    kind: 'put' or 'call'

    Output
    ------
    float volatility

    Raises OutOfBoundsError when the price violates the arbitrage bounds,
    which signals an upstream pricing defect rather than a root failure.
    """
    lower, upper = no_arbitrage_bounds(s0, strike, r, horizon, kind)
    if not (lower <= price <= upper):
        raise OutOfBoundsError(
            f"{kind} price {price} outside no-arbitrage bounds [{lower}, {upper}]"
        )
    tol = tol_scale * s0
    lo, hi = SIGMA_LO, SIGMA_HI
    f_lo = bs_price(s0, strike, r, horizon, lo, kind) - price
    f_hi = bs_price(s0, strike, r, horizon, hi, kind) - price
    if f_lo > 0.0:
        return lo if abs(f_lo) <= tol else _raise_bracket(price, f_lo, lo)
    if f_hi < 0.0:
        return hi if abs(f_hi) <= tol else _raise_bracket(price, f_hi, hi)
    sigma = (price / s0) * math.sqrt(2.0 * math.pi / horizon)
    sigma = min(max(sigma, lo), hi)
    for _ in range(max_iter):
        diff = bs_price(s0, strike, r, horizon, sigma, kind) - price
        if abs(diff) < tol:
            return sigma
        if diff > 0.0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(s0, strike, r, horizon, sigma)
        step = diff / vega if vega > 1e-14 else math.inf
        candidate = sigma - step
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        sigma = candidate
    diff = bs_price(s0, strike, r, horizon, sigma, kind) - price
    if abs(diff) < tol:
        return sigma
    raise OutOfBoundsError(f"implied-vol iteration failed to converge (residual {diff})")


def _raise_bracket(price, residual, sigma):
    raise OutOfBoundsError(
        f"price {price} not attainable within volatility bracket (residual {residual} at sigma={sigma})"
    )


def implied_vol_vector(prices, s0, strikes, r, horizons, kind="put"):
    """Vectorised implied vols; inputs broadcast elementwise."""
    prices, strikes, horizons = np.broadcast_arrays(
        np.asarray(prices, dtype=float), np.asarray(strikes, dtype=float),
        np.asarray(horizons, dtype=float))
    out = np.empty(prices.shape)
    for idx in np.ndindex(prices.shape):
        out[idx] = implied_vol(prices[idx], s0, strikes[idx], r, horizons[idx], kind)
    return out
