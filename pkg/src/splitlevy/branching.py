"""Branching processes: CB via the additive time change, CBI with the
derived immigration mechanism, the two-type prolific/compact-mass process,
and its generator.

For exponents with beta > 0 and no jumps the one-step transitions are
sampled exactly (Poisson-Gamma mixtures); otherwise the Gaussian part is
mesh-stepped (default dt = 1e-3) and the jump channels use exact
exponential clocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import BudgetExceeded, SubcriticalInput

__all__ = [
    "BranchingPath",
    "TwoTypeState",
    "simulate_cb",
    "simulate_cb_batch",
    "simulate_cbi_batch",
    "simulate_twotype_batch",
    "simulate_twotype",
    "twotype_generator",
    "twotype_semigroup_functional",
    "cb_mean",
    "cb_laplace",
]

DEFAULT_DT = 1e-3
_MAX_ROUNDS = 100_000


@dataclass(frozen=True)
class TwoTypeState:
    """State (n, z): prolific count and compact mass."""

    n: int
    z: float

    def __post_init__(self):
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError("n must be a nonnegative integer")
        if self.z < 0:
            raise ValueError("z must be >= 0")


@dataclass
class BranchingPath:
    times: np.ndarray
    z: np.ndarray
    n: np.ndarray | None = None
    terminal_reason: str = "horizon"
    info: dict = field(default_factory=dict)


def cb_mean(exponent, x, t):
    """E_x Z_t = x * exp(-Psi'(0+) t) for kappa = 0."""
    return x * math.exp(-exponent.psi_prime(0.0) * t)


def cb_laplace(exponent, x, t, lam, psi=None):
    """E_x e**(-lam Z_t) = exp(-x u_t(lam))."""
    return math.exp(-x * exponent.semigroup_u(lam, t, psi=psi))


def _is_pure_quadratic(exponent):
    q = exponent.quartet
    return q.kappa == 0.0 and q.beta > 0.0 and not q.atoms and q.exp_mass == 0.0


def _feller_ab(alpha_lin, beta, dt):
    """Transition constants: E e**(-lam Z_dt) = exp(-z lam A/(1 + lam B))."""
    if alpha_lin == 0.0:
        return 1.0, beta * dt
    a = math.exp(-alpha_lin * dt)
    return a, beta * (1.0 - a) / alpha_lin


def feller_cb_step(z, dt, alpha_lin, beta, rng):
    """Exact CB(beta lam^2 + alpha lam) transition over dt (vectorised)."""
    a, bscale = _feller_ab(alpha_lin, beta, dt)
    z = np.asarray(z, dtype=float)
    counts = rng.poisson(z * (a / bscale))
    return rng.gamma(counts, bscale)


def feller_cbi_step(z, dt, alpha_lin, beta, shape, rng):
    """Exact CBI step: CB part plus Gamma(shape, B) continuous immigration
    (shape = 2n for n spines immigrating at rate 2 beta each)."""
    a, bscale = _feller_ab(alpha_lin, beta, dt)
    z = np.asarray(z, dtype=float)
    counts = rng.poisson(z * (a / bscale))
    shp = np.broadcast_to(np.asarray(shape, dtype=float), z.shape)
    return rng.gamma(counts, bscale) + rng.gamma(shp, bscale)


def _feller_steps_vec(z, dtv, alpha_lin, beta, shape, rng):
    """Exact CBI steps with per-path durations; dtv = 0 entries pass through."""
    out = np.array(z, dtype=float, copy=True)
    act = dtv > 1e-15
    if not np.any(act):
        return out
    a = np.exp(-alpha_lin * dtv[act])
    if alpha_lin == 0.0:
        bscale = beta * dtv[act]
    else:
        bscale = beta * (1.0 - a) / alpha_lin
    counts = rng.poisson(out[act] * a / bscale)
    shp = shape[act] if np.ndim(shape) else np.broadcast_to(float(shape), counts.shape)
    out[act] = rng.gamma(counts, bscale) + rng.gamma(shp, bscale)
    return out


# ---------------------------------------------------------------------------
# jump-size samplers
# ---------------------------------------------------------------------------


def _pi_sampler(quartet, rng, size):
    """iid sizes from the normalised jump measure."""
    masses = np.array([c for c, _ in quartet.atoms] + [quartet.exp_mass])
    total = masses.sum()
    probs = masses / total
    which = rng.choice(masses.size, size=size, p=probs)
    sizes = np.empty(size)
    n_atoms = len(quartet.atoms)
    for i, (_, x) in enumerate(quartet.atoms):
        sizes[which == i] = x
    m = which == n_atoms
    if m.any():
        sizes[m] = rng.exponential(1.0 / quartet.exp_rate, size=int(m.sum()))
    return sizes


def phi_jump_sampler(exponent, rng, size):
    """iid sizes from the normalised Phi jump intensity (1-e**(-b y))/b pi(dy)."""
    q, b = exponent.quartet, exponent.b
    w_atoms = [c * (1.0 - math.exp(-b * x)) / b for c, x in q.atoms]
    w_exp = q.exp_mass / (q.exp_rate + b) if q.exp_mass > 0 else 0.0
    weights = np.array(w_atoms + [w_exp])
    total = weights.sum()
    if total <= 0:
        raise ValueError("Phi has no jump component")
    which = rng.choice(weights.size, size=size, p=weights / total)
    sizes = np.empty(size)
    for i, (_, x) in enumerate(q.atoms):
        sizes[which == i] = x
    m = which == len(q.atoms)
    need = int(m.sum())
    if need:
        out = np.empty(need)
        got = 0
        while got < need:  # rejection from Exp(rho) with accept 1 - e**(-b y)
            cand = rng.exponential(1.0 / q.exp_rate, size=2 * (need - got) + 8)
            acc = cand[rng.random(cand.size) < 1.0 - np.exp(-b * cand)]
            take = min(acc.size, need - got)
            out[got: got + take] = acc[:take]
            got += take
        sizes[m] = out
    return sizes


def _poisson_ge1(mu, rng):
    """Poisson(mu) conditioned to be >= 1, by quantile inversion."""
    mu = np.asarray(mu, dtype=float)
    lo = np.exp(-mu)
    u = lo + (1.0 - lo) * rng.random(mu.shape)
    return sps.poisson.ppf(np.clip(u, 0.0, 1.0 - 1e-16), mu).astype(np.int64)


# ---------------------------------------------------------------------------
# CB via the additive time change
# ---------------------------------------------------------------------------


def simulate_cb_batch(exponent, x0, T, n_paths, rng, dt=DEFAULT_DT):
    """Terminal values Z_T of n_paths independent CB(Psi) started at x0.

    The construction reads the path through the additive time change: over
    a step dt the driving path advances by Z dt, contributing drift
    -alpha Z dt, Gaussian variance 2 beta Z dt and jumps at rate
    |pi| Z dt.  beta = 0 exponents use exact event-to-event formulas.
    """
    q = exponent.quartet
    if q.kappa > 0:
        raise ValueError("killed exponents are not supported")
    z = np.full(n_paths, float(x0))
    if q.beta == 0.0:
        return _cb_fv(exponent, z, T, rng)
    lam_tot = q.jump_mass
    nsteps = int(round(T / dt))
    for _ in range(nsteps):
        alive = z > 0.0
        if not np.any(alive):
            break
        za = z[alive]
        incr = -q.drift_delta * za * dt + np.sqrt(2.0 * q.beta * za * dt) * rng.normal(size=za.size)
        if lam_tot > 0:
            counts = rng.poisson(lam_tot * za * dt)
            tot = int(counts.sum())
            if tot:
                sizes = _pi_sampler(q, rng, tot)
                add = np.zeros(za.size)
                np.add.at(add, np.repeat(np.arange(za.size), counts), sizes)
                incr = incr + add
        za = za + incr
        za[za <= 0.0] = 0.0  # absorbed
        z[alive] = za
    return z


def _cb_fv(exponent, z, T, rng):
    """Event-exact Lamperti simulation for beta = 0 (no absorption)."""
    q = exponent.quartet
    alpha = q.drift_delta
    lam_tot = q.jump_mass
    t = np.zeros(z.size)
    active = z > 0.0
    if lam_tot == 0.0:
        return np.where(active, z * np.exp(-alpha * T), z)
    for _ in range(_MAX_ROUNDS):
        if not np.any(active):
            return z
        e = rng.exponential(1.0, size=int(active.sum()))
        za = z[active]
        ta = t[active]
        if alpha == 0.0:
            tj = e / (lam_tot * za)
        else:
            arg = 1.0 - alpha * e / (lam_tot * za)
            tj = np.where(arg > 0.0, -np.log(np.maximum(arg, 1e-300)) / alpha, np.inf)
        finishes = ta + tj >= T
        za_new = np.where(
            finishes,
            za * np.exp(-alpha * (T - ta)),
            za * np.exp(-alpha * np.where(np.isfinite(tj), tj, 0.0)),
        )
        idx = np.nonzero(active)[0]
        jumped = ~finishes
        if np.any(jumped):
            za_new[jumped] += _pi_sampler(q, rng, int(jumped.sum()))
        z[idx] = za_new
        t[idx] = np.where(finishes, T, ta + tj)
        still = np.zeros_like(active)
        still[idx[jumped]] = True
        active = still
    raise BudgetExceeded("event budget exhausted in the finite-variation CB")


def simulate_cb(exponent, x0, T, rng, dt=DEFAULT_DT, record=False):
    """Single-path CB(Psi); with record=True returns the mesh trajectory."""
    if not record:
        return BranchingPath(np.array([T]), simulate_cb_batch(exponent, x0, T, 1, rng, dt))
    q = exponent.quartet
    if q.kappa > 0:
        raise ValueError("killed exponents are not supported")
    nsteps = int(round(T / dt))
    zs = np.empty(nsteps + 1)
    zs[0] = x0
    lam_tot = q.jump_mass
    reason = "horizon"
    for k in range(nsteps):
        z = zs[k]
        if z <= 0.0:
            zs[k + 1:] = 0.0
            reason = "absorbed-at-0"
            break
        incr = -q.drift_delta * z * dt
        if q.beta > 0:
            incr += math.sqrt(2.0 * q.beta * z * dt) * rng.normal()
        if lam_tot > 0:
            cnt = rng.poisson(lam_tot * z * dt)
            if cnt:
                incr += _pi_sampler(q, rng, cnt).sum()
        zs[k + 1] = max(z + incr, 0.0)
    return BranchingPath(np.arange(nsteps + 1) * dt, zs, terminal_reason=reason)


# ---------------------------------------------------------------------------
# CBI and the two-type process
# ---------------------------------------------------------------------------


def simulate_cbi_batch(exponent, x0, T, n_paths, rng, n_spines=1, dt=DEFAULT_DT,
                       immigration=True):
    """Terminal values of CBI(Psi#, n_spines * Phi) started at x0.

    Continuous immigration at rate 2 beta per spine, jump immigration
    with intensity (1-e**(-b y))/b pi(dy) per spine; the branching part is
    CB(Psi#).
    """
    if not exponent.is_supercritical:
        raise SubcriticalInput("CBI requires the supercritical parent exponent")
    sharp = exponent.sharp()
    if not immigration or n_spines == 0:
        return simulate_cb_batch(sharp, x0, T, n_paths, rng, dt)
    q = exponent.quartet
    sq = sharp.quartet
    m_d = exponent.phi_jump_mass()
    z = np.full(n_paths, float(x0))
    if _is_pure_quadratic(exponent):
        # no jump channels: one exact transition to T
        return feller_cbi_step(z, T, sq.alpha, sq.beta, 2 * n_spines, rng)
    nsteps = int(round(T / dt))
    lam_sharp = sq.jump_mass
    for _ in range(nsteps):
        incr = (-sq.drift_delta * z + 2.0 * n_spines * q.beta) * dt
        if q.beta > 0:
            incr += np.sqrt(np.maximum(2.0 * q.beta * z * dt, 0.0)) * rng.normal(size=z.size)
        if lam_sharp > 0:
            counts = rng.poisson(lam_sharp * np.maximum(z, 0.0) * dt)
            tot = int(counts.sum())
            if tot:
                add = np.zeros(z.size)
                np.add.at(add, np.repeat(np.arange(z.size), counts), _pi_sampler(sq, rng, tot))
                incr = incr + add
        if m_d > 0:
            counts = rng.poisson(n_spines * m_d * dt, size=z.size)
            tot = int(counts.sum())
            if tot:
                add = np.zeros(z.size)
                np.add.at(add, np.repeat(np.arange(z.size), counts),
                          phi_jump_sampler(exponent, rng, tot))
                incr = incr + add
        z = np.maximum(z + incr, 0.0)
    return z


def simulate_twotype_batch(exponent, n0, z0, T, n_paths, rng, dt=DEFAULT_DT,
                           max_rounds=_MAX_ROUNDS, record_first_jump=False):
    """Terminal states (Z1_T, Z2_T) of the two-type process.

    Z1 jumps from j to j + k at rate j * (1{k=1} beta b + the pi-channel
    rates); each pi-channel event deposits its full underlying jump size
    into Z2, and between events Z2 evolves as CBI(Psi#, Z1 * Phi).
    With record_first_jump the first Z1 jump time and size per path are
    returned instead (nan/0 when no jump before T).
    """
    if not exponent.is_supercritical:
        raise SubcriticalInput("the two-type process requires b > 0")
    q = exponent.quartet
    sharp = exponent.sharp()
    sq = sharp.quartet
    b = exponent.b
    bb = q.beta * b  # binary prolific rate per line
    m_d = exponent.phi_jump_mass() if (q.atoms or q.exp_mass > 0) else 0.0
    rate_line = bb + m_d
    pure_quad = _is_pure_quadratic(exponent)

    n = np.full(n_paths, int(n0), dtype=np.int64)
    z = np.full(n_paths, float(z0))
    t = np.zeros(n_paths)
    done = np.zeros(n_paths, dtype=bool)
    first_jump_t = np.full(n_paths, np.nan)
    first_jump_k = np.zeros(n_paths, dtype=np.int64)

    for _ in range(max_rounds):
        if np.all(done):
            break
        rate = n * rate_line
        with np.errstate(divide="ignore"):
            tau = np.where(rate > 0, rng.exponential(1.0, n_paths) / np.maximum(rate, 1e-300),
                           np.inf)
        t_next = np.minimum(t + tau, T)
        dtv = np.where(done, 0.0, t_next - t)
        if pure_quad:
            z = _feller_steps_vec(z, dtv, sq.alpha, sq.beta, 2 * n, rng)
        else:
            z = _twotype_between_events(z, dtv, n, q, sq, rng, dt)
        event = (~done) & (t_next < T)
        t = np.where(done, t, t_next)
        done = done | (t >= T)
        if np.any(event):
            u = rng.random(n_paths)
            binary = event & (u < (bb / rate_line if rate_line > 0 else 0.0))
            pi_evt = event & ~binary
            if record_first_jump:
                newly = binary & np.isnan(first_jump_t)
                first_jump_t[newly] = t[newly]
                first_jump_k[newly] = 1
            n[binary] += 1
            if np.any(pi_evt):
                idx = np.nonzero(pi_evt)[0]
                y = phi_jump_sampler(exponent, rng, idx.size)
                m = _poisson_ge1(b * y, rng)
                k = m - 1
                n[idx] += k
                z[idx] += y
                if record_first_jump:
                    for j, kk, tt in zip(idx, k, t[idx]):
                        if kk >= 1 and math.isnan(first_jump_t[j]):
                            first_jump_t[j] = tt
                            first_jump_k[j] = kk
        if record_first_jump:
            done = done | ~np.isnan(first_jump_t)  # nothing further is read
    else:
        raise BudgetExceeded("two-type event budget exhausted")
    if record_first_jump:
        return first_jump_t, first_jump_k
    return n, z


def simulate_twotype(exponent, n0, z0, T, rng, dt=DEFAULT_DT):
    """Single two-type trajectory recorded at its Z1 event times."""
    times = [0.0]
    ns = [int(n0)]
    zs = [float(z0)]
    t = 0.0
    n = int(n0)
    z = float(z0)
    q = exponent.quartet
    sharp = exponent.sharp()
    sq = sharp.quartet
    b = exponent.b
    bb = q.beta * b
    m_d = exponent.phi_jump_mass() if (q.atoms or q.exp_mass > 0) else 0.0
    rate_line = bb + m_d
    pure_quad = _is_pure_quadratic(exponent)
    while t < T:
        rate = n * rate_line
        tau = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        t_next = min(t + tau, T)
        dtv = np.array([t_next - t])
        if pure_quad:
            z = float(_feller_steps_vec(np.array([z]), dtv, sq.alpha, sq.beta,
                                        np.array([2 * n]), rng)[0])
        else:
            z = float(_twotype_between_events(np.array([z]), dtv, np.array([n]),
                                              q, sq, rng, dt)[0])
        t = t_next
        if t >= T:
            break
        if rng.random() < (bb / rate_line if rate_line > 0 else 0.0):
            n += 1
        else:
            y = float(phi_jump_sampler(exponent, rng, 1)[0])
            k = int(_poisson_ge1(np.array([b * y]), rng)[0]) - 1
            n += k
            z += y
        times.append(t)
        ns.append(n)
        zs.append(z)
    times.append(T)
    ns.append(n)
    zs.append(z)
    return BranchingPath(np.array(times), np.array(zs), np.array(ns, dtype=np.int64))


def _twotype_between_events(z, dtv, n, q, sq, rng, dt):
    """Mesh evolution of the compact mass as CBI(Psi#, n Phi) without the
    Phi jump channel (those are the coupled events)."""
    z = np.array(z, dtype=float, copy=True)
    remaining = dtv.copy().astype(float)
    lam_sharp = sq.jump_mass
    while np.any(remaining > 1e-15):
        step = np.minimum(remaining, dt)
        act = step > 1e-15
        za = z[act]
        sa = step[act]
        na = n[act] if np.ndim(n) else n
        incr = (-sq.drift_delta * za + 2.0 * na * q.beta) * sa
        if q.beta > 0:
            incr += np.sqrt(np.maximum(2.0 * q.beta * za * sa, 0.0)) * rng.normal(size=za.size)
        if lam_sharp > 0:
            counts = rng.poisson(lam_sharp * np.maximum(za, 0.0) * sa)
            tot = int(counts.sum())
            if tot:
                add = np.zeros(za.size)
                np.add.at(add, np.repeat(np.arange(za.size), counts), _pi_sampler(sq, rng, tot))
                incr = incr + add
        z[act] = np.maximum(za + incr, 0.0)
        remaining = remaining - step
    return z


# ---------------------------------------------------------------------------
# generator formulas
# ---------------------------------------------------------------------------


def twotype_generator(exponent, n, z, s, lam):
    """d/dt at 0 of E_(n,z)[s**Z1_t e**(-lam Z2_t)], closed form."""
    if not exponent.is_supercritical:
        raise SubcriticalInput("generator requires b > 0")
    if not (0.0 < s <= 1.0):
        raise ValueError("s must lie in (0, 1]")
    b = exponent.b
    first = math.exp(-lam * z) * s**n * z * exponent.psi_sharp(lam)
    if n == 0:
        return first
    bracket = exponent.psi(lam + b * (1.0 - s)) - exponent.psi(lam + b)
    return first + math.exp(-lam * z) * s ** (n - 1) * n * bracket / b


def twotype_semigroup_functional(exponent, n, z, s, lam, t):
    """E_(n,z)[s**Z1_t e**(-lam Z2_t)] via the u_t flow representation."""
    b = exponent.b
    u_hi = exponent.semigroup_u(lam + b, t)
    u_lo = exponent.semigroup_u(lam + b * (1.0 - s), t)
    return math.exp(-z * (u_hi - b)) * ((u_hi - u_lo) / b) ** n


def twotype_generator_via_semigroup(exponent, n, z, s, lam, t=1e-4):
    """Numerical t -> 0 derivative of the flow-form semigroup (Richardson)."""
    f0 = s**n * math.exp(-lam * z)
    g1 = (twotype_semigroup_functional(exponent, n, z, s, lam, t) - f0) / t
    g2 = (twotype_semigroup_functional(exponent, n, z, s, lam, t / 2) - f0) / (t / 2)
    return 2.0 * g2 - g1
