"""Monte Carlo simulation oracle.

Exact thinning of the Q-Hawkes and Hawkes event processes, full-truncation
Euler sampling of the Heston diffusion, and assembly of terminal asset
prices through the diffusion/jump factorisation S_t = D_t * J_t.  The jump
compensator integral is accumulated exactly between events (piecewise
constant intensity for Q-Hawkes, piecewise exponential for Hawkes), so the
compensated jump term carries no time-grid bias.

Paths are simulated in seed-stable chunks: each chunk draws from its own
Philox substream, so results are reproducible bit-for-bit for a given seed
and independent of how chunks would be dispatched across workers.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .models import BatesJumps, HawkesJumps, QHawkesJumps

DEFAULT_CHUNK = 1 << 17


def _chunk_rngs(seed, n_paths, chunk):
    """Independent Philox generators, one per path chunk."""
    n_chunks = (n_paths + chunk - 1) // chunk
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk, n_paths - i * chunk) for i in range(n_chunks)]
    return [(np.random.Generator(np.random.Philox(s)), m) for s, m in zip(seqs, sizes)]


@dataclass
class JumpSample:
    """Terminal statistics of one batch of simulated jump paths.

    count: number of events N_T per path.
    activation: activation number Q_T per path (Q-Hawkes; zeros otherwise).
    intensity: intensity at T per path.
    compensator: exact integral of the intensity over [0, T] per path.
    """

    count: np.ndarray
    activation: np.ndarray
    intensity: np.ndarray
    compensator: np.ndarray


@dataclass
class JumpPath:
    """Event bookkeeping of a single path for inspection and dumps.

    event_times: sorted times of asset-jump events.
    expiry_times: sorted times of activation-expiry events (Q-Hawkes).
    intensity_times/intensity_values: piecewise-constant (Q-Hawkes) or
       piecewise-exponential (Hawkes) intensity segments, anchored at the
       segment start times.
    """

    event_times: np.ndarray
    expiry_times: np.ndarray
    intensity_times: np.ndarray
    intensity_values: np.ndarray
    decay: float = 0.0
    baseline: float = 0.0

    def intensity_at(self, t):
        idx = np.searchsorted(self.intensity_times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.intensity_values) - 1)
        lam = self.intensity_values[idx]
        if self.decay > 0.0:
            dt = np.asarray(t) - self.intensity_times[idx]
            lam = self.baseline + (lam - self.baseline) * np.exp(-self.decay * dt)
        return lam


def thin_qhawkes(jp, horizon, seed, n_paths=1, chunk=DEFAULT_CHUNK):
    """Exact thinning of the Q-Hawkes process on [0, horizon].

    Event and expiry clocks compete with total rate lambda + beta*Q; the
    winner is selected with probability lambda/(lambda + beta*Q), after
    which the intensity is reset to lambda_star + alpha*Q.

    Input
    -----
    jp: JumpParams
    horizon: float
       Simulation end time.
    seed: int
       RNG seed; identical seeds give identical paths.
    n_paths: int, optional
    chunk: int, optional
       Paths per Philox substream.

    Output
    ------
    JumpSample with terminal count, activation, intensity and compensator.
    """
    out = JumpSample(
        count=np.empty(n_paths, dtype=np.int64),
        activation=np.empty(n_paths, dtype=np.int64),
        intensity=np.empty(n_paths),
        compensator=np.empty(n_paths),
    )
    pos = 0
    for rng, m in _chunk_rngs(seed, n_paths, chunk):
        res = _thin_qhawkes_chunk(jp, horizon, rng, m)
        for name in ("count", "activation", "intensity", "compensator"):
            getattr(out, name)[pos:pos + m] = res[name]
        pos += m
    return out


def _thin_qhawkes_chunk(jp, horizon, rng, m):
    alpha, beta, lam_star = jp.alpha, jp.beta, jp.lambda_star
    if jp.is_poisson and jp.q0 == 0:
        # Plain Poisson: no activation dynamics at all.
        n = rng.poisson(lam_star * horizon, size=m)
        return {"count": n, "activation": np.zeros(m, dtype=np.int64),
                "intensity": np.full(m, lam_star),
                "compensator": np.full(m, lam_star * horizon)}
    t = np.zeros(m)
    q = np.full(m, jp.q0, dtype=np.int64)
    n = np.zeros(m, dtype=np.int64)
    comp = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    while alive.any():
        idx = np.nonzero(alive)[0]
        lam = lam_star + alpha * q[idx]
        total = lam + beta * q[idx]
        gap = rng.exponential(size=idx.size) / total
        t_new = t[idx] + gap
        crossed = t_new > horizon
        # Compensator accrues the constant intensity up to the event or horizon.
        comp[idx] += lam * (np.minimum(t_new, horizon) - t[idx])
        t[idx] = np.minimum(t_new, horizon)
        alive[idx[crossed]] = False
        hit = idx[~crossed]
        if hit.size:
            lam_hit = lam_star + alpha * q[hit]
            is_event = rng.random(hit.size) * (lam_hit + beta * q[hit]) <= lam_hit
            n[hit] += is_event
            q[hit] += np.where(is_event, 1, -1)
    return {"count": n, "activation": q,
            "intensity": lam_star + alpha * q, "compensator": comp}


def thin_hawkes(jp, horizon, seed, n_paths=1, chunk=DEFAULT_CHUNK):
    """Ogata thinning of the exponential-kernel Hawkes process.

    Between events the intensity decays towards the baseline, so the value
    right after the previous event dominates the path and serves as the
    thinning bound.  The compensator integral over each inter-event segment
    uses the exponential closed form.

    Input/Output as in thin_qhawkes (activation is the rescaled intensity
    excess (lambda - lambda_star)/alpha, not an integer count).
    """
    out = JumpSample(
        count=np.empty(n_paths, dtype=np.int64),
        activation=np.zeros(n_paths, dtype=np.int64),
        intensity=np.empty(n_paths),
        compensator=np.empty(n_paths),
    )
    pos = 0
    for rng, m in _chunk_rngs(seed, n_paths, chunk):
        res = _thin_hawkes_chunk(jp, horizon, rng, m)
        for name in ("count", "intensity", "compensator"):
            getattr(out, name)[pos:pos + m] = res[name]
        pos += m
    return out


def _thin_hawkes_chunk(jp, horizon, rng, m):
    alpha, beta, lam_star = jp.alpha, jp.beta, jp.lambda_star
    if jp.is_poisson and jp.q0 == 0:
        n = rng.poisson(lam_star * horizon, size=m)
        return {"count": n, "intensity": np.full(m, lam_star),
                "compensator": np.full(m, lam_star * horizon)}
    t = np.zeros(m)
    lam = np.full(m, jp.lambda0)   # value right after the last accepted event
    n = np.zeros(m, dtype=np.int64)
    comp = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    while alive.any():
        idx = np.nonzero(alive)[0]
        bound = lam[idx]
        gap = rng.exponential(size=idx.size) / bound
        t_new = t[idx] + gap
        crossed = t_new > horizon
        dt_seg = np.minimum(t_new, horizon) - t[idx]
        decay = np.exp(-beta * dt_seg)
        excess = bound - lam_star
        # Exact integral of lambda over the segment.
        comp[idx] += lam_star * dt_seg + excess * (1.0 - decay) / beta
        lam_seg_end = lam_star + excess * decay
        t[idx] = np.minimum(t_new, horizon)
        lam[idx] = lam_seg_end
        alive[idx[crossed]] = False
        hit = idx[~crossed]
        if hit.size:
            accept = rng.random(hit.size) * bound[~crossed] <= lam[hit]
            n[hit] += accept
            lam[hit] += np.where(accept, alpha, 0.0)
    return {"count": n, "intensity": lam, "compensator": comp}


def sample_jump_terms(jumps, horizon, seed, n_paths, chunk=DEFAULT_CHUNK):
    """Terminal jump statistics for any jump specification.

    Output
    ------
    dict with per-path arrays: count N_T, activation Q_T, intensity at T,
    compensator integral, log-jump sum, and the compensated jump term
    m_t = sum(Y_j) - mu_bar * int lambda.
    """
    if jumps is None:
        z = np.zeros(n_paths)
        return {"count": z.astype(np.int64), "activation": z.astype(np.int64),
                "intensity": z, "compensator": z, "log_jump_sum": z, "m_t": z}
    if isinstance(jumps, BatesJumps):
        rngs = _chunk_rngs(seed, n_paths, chunk)
        count = np.empty(n_paths, dtype=np.int64)
        pos = 0
        for rng, m in rngs:
            count[pos:pos + m] = rng.poisson(jumps.intensity * horizon, size=m)
            pos += m
        comp = np.full(n_paths, jumps.intensity * horizon)
        lam = np.full(n_paths, jumps.intensity)
        q = np.zeros(n_paths, dtype=np.int64)
    elif isinstance(jumps, QHawkesJumps):
        s = thin_qhawkes(jumps.params, horizon, seed, n_paths, chunk)
        count, comp, lam, q = s.count, s.compensator, s.intensity, s.activation
    elif isinstance(jumps, HawkesJumps):
        s = thin_hawkes(jumps.params, horizon, seed, n_paths, chunk)
        count, comp, lam, q = s.count, s.compensator, s.intensity, s.activation
    else:
        raise ParameterError(f"unknown jump specification {type(jumps).__name__}")
    jd = jumps.sizes
    # Sum of N_T iid normal log-jumps has a known conditional law; sampling
    # it directly avoids storing individual jump marks.
    rngs = _chunk_rngs(np.random.SeedSequence([seed, 0x9E3779B9]).entropy, n_paths, chunk)
    ysum = np.empty(n_paths)
    pos = 0
    for rng, m in rngs:
        cnt = count[pos:pos + m]
        ysum[pos:pos + m] = jd.mu_y * cnt + jd.sigma_y * np.sqrt(cnt) * rng.standard_normal(m)
        pos += m
    m_t = ysum - jd.mu_bar * comp
    return {"count": count, "activation": q, "intensity": lam,
            "compensator": comp, "log_jump_sum": ysum, "m_t": m_t}


@dataclass
class AssetSample:
    """Terminal asset sample with its building blocks.

    s_t = d_t * j_t: diffusion factor times jump product factor.
    m_t: compensated jump term entering log(j_t) - compensator drift.
    """

    s_t: np.ndarray
    d_t: np.ndarray
    j_t: np.ndarray
    m_t: np.ndarray
    variance: np.ndarray = field(default=None)


def simulate_asset(model, horizon, n_paths, seed, n_steps=None, chunk=DEFAULT_CHUNK):
    """Terminal asset prices under any of the supported models.

    The diffusion factor D_t uses full-truncation Euler on (V, log D) with
    correlated Brownian increments; the jump compensator is folded into
    log D exactly from the thinned intensity path.  The jump factor J_t is
    exp(sum of log-jumps).

    Input
    -----
    model: ModelSpec
    horizon: float
    n_paths: int
    seed: int
    n_steps: int, optional
       Euler steps over [0, horizon]; default 500 per year, minimum 100.

    Output
    ------
    AssetSample
    """
    if n_steps is None:
        n_steps = max(100, int(round(500 * horizon)))
    if n_steps < 100:
        raise ParameterError(f"need at least 100 Euler steps, got {n_steps}")
    hp = model.heston
    dt = horizon / n_steps
    jump_stats = sample_jump_terms(model.jumps, horizon, seed, n_paths, chunk)

    log_d = np.empty(n_paths)
    v_term = np.empty(n_paths)
    pos = 0
    for rng, m in _chunk_rngs(np.random.SeedSequence([seed, 0x5DEECE66D]).entropy,
                              n_paths, chunk):
        v = np.full(m, hp.v0)
        x = np.zeros(m)
        for _ in range(n_steps):
            vp = np.maximum(v, 0.0)
            sq = np.sqrt(vp)
            dw_v = rng.standard_normal(m) * math.sqrt(dt)
            dw_perp = rng.standard_normal(m) * math.sqrt(dt)
            dw_s = hp.rho * dw_v + math.sqrt(1.0 - hp.rho**2) * dw_perp
            x += -0.5 * vp * dt + sq * dw_s
            v += hp.kappa * (hp.theta - vp) * dt + hp.eta * sq * dw_v
        log_d[pos:pos + m] = x
        v_term[pos:pos + m] = np.maximum(v, 0.0)
        pos += m

    mu_bar = model.jumps.sizes.mu_bar if model.jumps is not None else 0.0
    d_t = hp.s0 * np.exp(hp.r * horizon + log_d - mu_bar * jump_stats["compensator"])
    j_t = np.exp(jump_stats["log_jump_sum"])
    return AssetSample(s_t=d_t * j_t, d_t=d_t, j_t=j_t,
                       m_t=jump_stats["m_t"], variance=v_term)


def mc_price_european(samples, opt, r):
    """Discounted mean payoff with its standard error.

    Input
    -----
    samples: ndarray
       Terminal asset prices.
    opt: OptionSpec (European)
    r: float

    Output
    ------
    (price, standard_error)
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ParameterError("empty sample set")
    if opt.kind == "put":
        payoff = np.maximum(opt.strike - samples, 0.0)
    else:
        payoff = np.maximum(samples - opt.strike, 0.0)
    disc = math.exp(-r * opt.maturity)
    price = disc * payoff.mean()
    se = disc * payoff.std(ddof=1) / math.sqrt(payoff.size)
    return price, se


def qhawkes_path(jp, horizon, seed):
    """Single Q-Hawkes path with full event bookkeeping (for dumps/tests)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    alpha, beta, lam_star = jp.alpha, jp.beta, jp.lambda_star
    t, q = 0.0, jp.q0
    events, expiries, seg_t, seg_v = [], [], [0.0], [jp.lambda0]
    while True:
        lam = lam_star + alpha * q
        total = lam + beta * q
        if total <= 0.0:
            break
        t += rng.exponential() / total
        if t > horizon:
            break
        if rng.random() * total <= lam:
            events.append(t)
            q += 1
        else:
            expiries.append(t)
            q -= 1
        seg_t.append(t)
        seg_v.append(lam_star + alpha * q)
    return JumpPath(np.array(events), np.array(expiries),
                    np.array(seg_t), np.array(seg_v))


def hawkes_path(jp, horizon, seed):
    """Single Hawkes path with event bookkeeping (for dumps/tests)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    alpha, beta, lam_star = jp.alpha, jp.beta, jp.lambda_star
    t, lam = 0.0, jp.lambda0
    events, seg_t, seg_v = [], [0.0], [jp.lambda0]
    while True:
        bound = lam
        if bound <= 0.0:
            break
        gap = rng.exponential() / bound
        t_new = t + gap
        if t_new > horizon:
            break
        lam = lam_star + (lam - lam_star) * math.exp(-beta * gap)
        t = t_new
        if rng.random() * bound <= lam:
            events.append(t)
            lam += alpha
            seg_t.append(t)
            seg_v.append(lam)
    return JumpPath(np.array(events), np.array([]), np.array(seg_t),
                    np.array(seg_v), decay=beta, baseline=lam_star)
