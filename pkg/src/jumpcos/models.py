"""Model parameter containers, validation and scenario presets.

The asset follows a Heston diffusion with an independent jump component.
Three jump specifications are supported: the Q-Hawkes process (ephemeral
self-excitation through an integer activation number), the Hawkes process
with exponential memory kernel, and a constant-intensity compound Poisson
(Bates).  All containers are immutable and validated at construction.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError, StabilityError

# Clustering rates below this threshold are treated as zero: the jump
# process degenerates to a compound Poisson and the closed-form Q-Hawkes
# expressions (which divide by the clustering rate) must not be used.
ALPHA_POISSON_EPS = 1e-12


@dataclass(frozen=True)
class JumpParams:
    """Parameters of the self-exciting jump intensity.

    alpha: clustering rate (intensity increment per event, >= 0).
    beta: expiration rate (1/time, > 0); stability requires beta > alpha.
    lambda_star: baseline intensity (>= 0).
    q0: initial activation number (nonnegative integer).
    """

    alpha: float
    beta: float
    lambda_star: float
    q0: int

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ParameterError(f"clustering rate must be >= 0, got {self.alpha}")
        if not (self.beta > 0.0):
            raise ParameterError(f"expiration rate must be > 0, got {self.beta}")
        if not (self.beta > self.alpha):
            raise StabilityError(
                f"stability requires beta > alpha, got beta={self.beta}, alpha={self.alpha}"
            )
        if not (self.lambda_star >= 0.0):
            raise ParameterError(f"baseline intensity must be >= 0, got {self.lambda_star}")
        if self.q0 != int(self.q0) or self.q0 < 0:
            raise ParameterError(f"initial activation number must be a nonnegative integer, got {self.q0}")
        object.__setattr__(self, "q0", int(self.q0))

    @property
    def lambda0(self):
        """Initial intensity, affine in the activation number."""
        return self.lambda_star + self.alpha * self.q0

    @property
    def lambda_mean(self):
        """Stationary mean intensity beta*lambda_star/(beta-alpha)."""
        return self.beta * self.lambda_star / (self.beta - self.alpha)

    @property
    def is_poisson(self):
        """True when the clustering rate is numerically zero."""
        return self.alpha < ALPHA_POISSON_EPS


@dataclass(frozen=True)
class JumpSizeDist:
    """Normal distribution of the log-jump size.

    mu_y: mean of the log-jump.
    sigma_y: standard deviation of the log-jump (> 0).
    """

    mu_y: float
    sigma_y: float

    def __post_init__(self):
        if not (self.sigma_y > 0.0):
            raise ParameterError(f"log-jump std must be > 0, got {self.sigma_y}")

    @property
    def mu_bar(self):
        """Compensator mean E[exp(Y) - 1] of the relative jump size."""
        return math.exp(self.mu_y + 0.5 * self.sigma_y**2) - 1.0

    def cf(self, v):
        """Characteristic function E[exp(i v Y)] of the log-jump size."""
        return np.exp(1j * v * self.mu_y - 0.5 * v * v * self.sigma_y**2)


@dataclass(frozen=True)
class HestonParams:
    """Heston diffusion parameters.

    s0: spot (> 0); r: risk-free rate; v0: initial variance (>= 0);
    kappa: mean-reversion speed (> 0); theta: long-term variance (>= 0);
    eta: vol-of-vol (> 0); rho: Brownian correlation in [-1, 1].
    """

    s0: float
    r: float
    v0: float
    kappa: float
    theta: float
    eta: float
    rho: float

    def __post_init__(self):
        if not (self.s0 > 0.0):
            raise ParameterError(f"spot must be > 0, got {self.s0}")
        if not (self.v0 >= 0.0):
            raise ParameterError(f"initial variance must be >= 0, got {self.v0}")
        if not (self.kappa > 0.0):
            raise ParameterError(f"mean-reversion speed must be > 0, got {self.kappa}")
        if not (self.theta >= 0.0):
            raise ParameterError(f"long-term variance must be >= 0, got {self.theta}")
        if not (self.eta > 0.0):
            raise ParameterError(f"vol-of-vol must be > 0, got {self.eta}")
        if not (-1.0 <= self.rho <= 1.0):
            raise ParameterError(f"correlation must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class QHawkesJumps:
    params: JumpParams
    sizes: JumpSizeDist


@dataclass(frozen=True)
class HawkesJumps:
    params: JumpParams
    sizes: JumpSizeDist


@dataclass(frozen=True)
class BatesJumps:
    intensity: float
    sizes: JumpSizeDist

    def __post_init__(self):
        if not (self.intensity >= 0.0):
            raise ParameterError(f"jump intensity must be >= 0, got {self.intensity}")


@dataclass(frozen=True)
class ModelSpec:
    """A Heston diffusion paired with one jump component (or none)."""

    heston: HestonParams
    jumps: QHawkesJumps | HawkesJumps | BatesJumps | None = None

    @property
    def kind(self):
        if self.jumps is None:
            return "heston"
        return {QHawkesJumps: "hqh", HawkesJumps: "hh", BatesJumps: "bates"}[type(self.jumps)]


@dataclass(frozen=True)
class OptionSpec:
    """Payoff and exercise schedule of one option contract.

    kind: 'put' or 'call'.
    strike: strike price (> 0).
    maturity: time to expiry in years (> 0).
    exercise_dates: None for European exercise, otherwise the number M >= 1
       of equally spaced Bermudan exercise dates (the last at maturity).
    """

    kind: str
    strike: float
    maturity: float
    exercise_dates: int | None = None

    def __post_init__(self):
        if self.kind not in ("put", "call"):
            raise ParameterError(f"option kind must be 'put' or 'call', got {self.kind!r}")
        if not (self.strike > 0.0):
            raise ParameterError(f"strike must be > 0, got {self.strike}")
        if not (self.maturity > 0.0):
            raise ParameterError(f"maturity must be > 0, got {self.maturity}")
        if self.exercise_dates is not None and self.exercise_dates < 1:
            raise ParameterError(
                f"need at least one exercise date, got {self.exercise_dates}")

    @property
    def is_european(self):
        return self.exercise_dates is None


def bates_matching_intensity(jp, horizon=1.0):
    """Constant intensity matching the expected number of self-exciting jumps.

    The matching equates the expected event count over [0, horizon]:
    lambda_B = (1/h) * int_0^h E[lambda_t] dt with
    E[lambda_t] = lbar + (lambda0 - lbar) exp(-(beta-alpha) t) and
    lbar = beta*lambda_star/(beta-alpha).

    Input
    -----
    jp: JumpParams
       Stable jump parameters (beta > alpha enforced at construction).
    horizon: float, optional, default=1.0
       Averaging horizon in years.

    Output
    ------
    lambda_b: float
       Matched constant jump intensity.
    """
    if not (jp.beta > jp.alpha):
        raise StabilityError("matching intensity requires beta > alpha")
    if not (horizon > 0.0):
        raise ParameterError(f"horizon must be > 0, got {horizon}")
    decay = jp.beta - jp.alpha
    lbar = jp.lambda_mean
    return lbar + (jp.lambda0 - lbar) * (-math.expm1(-decay * horizon)) / (decay * horizon)


# Table-style scenario presets.  Field names follow the configuration schema.
SCENARIO_PARAMS = {
    "A": {
        "alpha": 2.0, "beta": 3.0, "lambda_star": 1.1, "q0": 2,
        "mu_y": -0.3, "sigma_y": 0.4,
        "s0": 9.0, "r": 0.1, "v0": 0.0625, "kappa": 5.0, "theta": 0.16,
        "eta": 0.9, "rho": 0.1,
    },
    "B": {
        "alpha": 2.9, "beta": 3.0, "lambda_star": 1.1, "q0": 2,
        "mu_y": 0.3, "sigma_y": 0.4,
        "s0": 9.0, "r": 0.1, "v0": 0.0625, "kappa": 5.0, "theta": 0.16,
        "eta": 0.9, "rho": 0.1,
    },
}

CONFIG_FIELDS = ("alpha", "beta", "lambda_star", "q0", "mu_y", "sigma_y",
                 "s0", "r", "v0", "kappa", "theta", "eta", "rho")


@dataclass(frozen=True)
class ScenarioModels:
    """The three jump models (plus pure Heston) built from one parameter set."""

    hqh: ModelSpec
    hh: ModelSpec
    bates: ModelSpec
    heston: ModelSpec

    def get(self, kind):
        try:
            return getattr(self, kind)
        except AttributeError:
            raise ParameterError(f"unknown model kind {kind!r}") from None


def build_models(params):
    """Assemble HQH, HH, Bates and pure-Heston model specs from one mapping.

    The mapping must provide every field in CONFIG_FIELDS.  The Hawkes
    variant takes lambda0 = lambda_star + alpha*q0 and the Bates variant
    the one-year matched intensity.
    """
    missing = [f for f in CONFIG_FIELDS if f not in params]
    if missing:
        raise ConfigError(f"missing configuration fields: {', '.join(missing)}")
    extra = [f for f in params if f not in CONFIG_FIELDS]
    if extra:
        raise ConfigError(f"unknown configuration fields: {', '.join(extra)}")
    try:
        jp = JumpParams(float(params["alpha"]), float(params["beta"]),
                        float(params["lambda_star"]), int(params["q0"]))
        jd = JumpSizeDist(float(params["mu_y"]), float(params["sigma_y"]))
        hp = HestonParams(float(params["s0"]), float(params["r"]), float(params["v0"]),
                          float(params["kappa"]), float(params["theta"]),
                          float(params["eta"]), float(params["rho"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    lam_b = bates_matching_intensity(jp)
    return ScenarioModels(
        hqh=ModelSpec(hp, QHawkesJumps(jp, jd)),
        hh=ModelSpec(hp, HawkesJumps(jp, jd)),
        bates=ModelSpec(hp, BatesJumps(lam_b, jd)),
        heston=ModelSpec(hp, None),
    )


def scenario(name):
    """Preset parameter sets as ScenarioModels.

    Input
    -----
    name: str
       Scenario label, 'A' or 'B'.
    """
    try:
        params = SCENARIO_PARAMS[name.upper()]
    except (KeyError, AttributeError):
        raise ParameterError(f"unknown scenario {name!r}; expected 'A' or 'B'") from None
    return build_models(params)


def load_config(path):
    """Read a JSON configuration file holding the CONFIG_FIELDS mapping.

    A file produced as a run sidecar is also accepted: the parameter
    mapping is then found under the 'config' key.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if isinstance(raw, dict) and "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return raw
