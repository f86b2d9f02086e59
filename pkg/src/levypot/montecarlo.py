"""Monte Carlo machinery for subordinate Brownian motions.

Subordinator increments are drawn either by the exact positive-stable
generator (pure power-law Laplace exponents) or by small-jump
compensation: jumps above a cutoff come from a compound-Poisson draw with
inverse-transform sampling on a tabulated tail of the subordinator Levy
density, and the discarded small jumps enter through their deterministic
mean.  First-exit walks step at the natural time scale of the current
distance to the complement, h = theta / phi(delta^-2).

Reproducibility contract: paths are simulated in fixed-size blocks, each
block driven by a counter-based generator keyed by (seed, block index),
and aggregation runs in block order.  Identical (config, domain, phi)
therefore give bit-identical results, independent of how many paths other
runs requested for the shared prefix of blocks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as _gamma
from scipy.special import gammainc, gammaincc

from .bernstein import CompleteBernsteinFunction
from .errors import (DomainSpecError, TabulationRangeError,
                     UnsupportedKindError)
from .geometry import OpenSetSpec

__all__ = [
    "SubordinatorSampler", "PathConfig", "ExitSample", "ExitBatch",
    "sample_increment", "sample_sbm_increment", "simulate_exit",
    "simulate_exits", "estimate_harmonic", "estimate_green",
    "estimate_poisson_kernel", "HarmonicEstimate", "write_exits_csv",
    "EXITED", "HORIZON", "CUTOFF",
]

EXITED, HORIZON, CUTOFF = 0, 1, 2
_STATUS_NAMES = {EXITED: "exited", HORIZON: "horizon", CUTOFF: "cutoff"}


# -- subordinator Levy measure closed forms -------------------------------

def _levy_components(f: CompleteBernsteinFunction):
    """(beta, c, b) triples with mu(t) = sum c t^(-1-beta) e^(-b t)."""
    if f.kind == "stable":
        b = 0.5 * f.params[0]
        return [(b, b / _gamma(1.0 - b), 0.0)]
    if f.kind == "mixture":
        out = []
        for a, w in zip(f.params[0::2], f.params[1::2]):
            bb = 0.5 * a
            out.append((bb, w * bb / _gamma(1.0 - bb), 0.0))
        return out
    if f.kind == "relativistic":
        a, m = f.params
        bb = 0.5 * a
        return [(bb, bb / _gamma(1.0 - bb), m ** (1.0 / bb))]
    raise UnsupportedKindError(
        "tabulated entries carry no Levy density; sampling needs a "
        "closed-form catalog kind")


def _levy_tail(comps, t):
    """Lambda(t) = integral of mu over (t, inf)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for beta, c, b in comps:
        if b == 0.0:
            out = out + (c / beta) * t ** (-beta)
        else:
            # upper incomplete gamma of negative parameter via recurrence
            g1 = _gamma(1.0 - beta) * gammaincc(1.0 - beta, b * t)
            with np.errstate(under="ignore"):
                out = out + (c / beta) * (t ** (-beta) * np.exp(-b * t)
                                          - b ** beta * g1)
    return np.maximum(out, 0.0)


def _small_moment(comps, eps, k):
    """integral of t^k mu(t) over (0, eps), k in {1, 2}."""
    total = 0.0
    for beta, c, b in comps:
        p = k - beta
        if b == 0.0:
            total += c * eps ** p / p
        else:
            total += c * b ** (-p) * _gamma(p) * gammainc(p, b * eps)
    return total


# -- exact positive-stable generator --------------------------------------

def _kanter(beta, size, rng):
    """A with E e^(-lam A) = e^(-lam^beta), 0 < beta < 1."""
    u = rng.random(size)
    u = np.clip(u, 1e-16, 1.0 - 1e-16)
    e = rng.standard_exponential(size)
    pu = math.pi * u
    a = (np.sin((1.0 - beta) * pu)
         * np.sin(beta * pu) ** (beta / (1.0 - beta))
         / np.sin(pu) ** (1.0 / (1.0 - beta)))
    return (a / e) ** ((1.0 - beta) / beta)


class SubordinatorSampler:
    """Increment sampler for a catalog Laplace exponent.

    scheme "exact-stable" draws S_h = h^(1/beta) A with A from the
    positive-stable generator; valid for pure power-law entries only.
    scheme "jump-compensation" works for every closed-form catalog kind:
    jumps above eps arrive at rate Lambda(eps), sizes come from the
    tabulated inverse tail (4096 log nodes, monotone interpolation), and
    the small-jump mean h * int_0^eps t mu(t) dt is added exactly.

    The default eps makes the discarded small-jump variance at most 1e-6
    of the kept-jump variance accumulated up to the unit time scale.
    """

    def __init__(self, f: CompleteBernsteinFunction, scheme: str = "auto",
                 eps: Optional[float] = None, table_nodes: int = 16384):
        if scheme == "auto":
            scheme = "exact-stable" if f.kind == "stable" else \
                "jump-compensation"
        if scheme not in ("exact-stable", "jump-compensation"):
            raise DomainSpecError(f"unknown sampling scheme {scheme!r}")
        if scheme == "exact-stable" and f.kind != "stable":
            raise DomainSpecError(
                "exact-stable sampling needs a pure power-law entry; use "
                "jump-compensation instead")
        self.f = f
        self.scheme = scheme
        self.eps = None
        if scheme == "exact-stable":
            self.beta = 0.5 * f.params[0]
            return
        comps = _levy_components(f)
        if eps is None:
            # discarded variance <= 1e-6 * kept variance up to t = 1
            v2_unit = _small_moment(comps, 1.0, 2)

            def excess(log_eps):
                v_small = _small_moment(comps, math.exp(log_eps), 2)
                kept = max(v2_unit - v_small, 1e-300)
                return math.log(max(v_small, 1e-300)) - math.log(
                    1e-6 * kept)

            eps = math.exp(brentq(excess, math.log(1e-200), 0.0 - 1e-9,
                                  xtol=1e-10))
        self.eps = float(eps)
        self._comps = comps
        self.jump_rate = float(_levy_tail(comps, self.eps))
        self.compensator_rate = float(_small_moment(comps, self.eps, 1))
        self.discarded_var_rate = float(_small_moment(comps, self.eps, 2))
        # tail table out to relative mass 1e-14
        top = self.eps
        target = 1e-14 * self.jump_rate
        while _levy_tail(comps, top) > target:
            top *= 2.0
            if top > 1e300:
                break
        grid = np.logspace(math.log10(self.eps), math.log10(top),
                           table_nodes)
        tail = _levy_tail(comps, grid)
        good = tail > 0
        grid, tail = grid[good], tail[good]
        log_tail = np.log(tail)
        keep = np.concatenate([[True], np.diff(log_tail) < 0])
        grid, log_tail = grid[keep], log_tail[keep]
        self._log_rate = float(log_tail[0])
        self._log_tail_min = float(log_tail[-1])
        # dense log-log table; linear inversion keeps monotonicity and
        # runs at array speed for the large draw counts the walk needs
        self._inv_x = log_tail[::-1].copy()
        self._inv_y = np.log(grid)[::-1].copy()

    def sample_jump_sizes(self, count, rng):
        """Inverse-transform draws of single jump sizes above eps."""
        u = 1.0 - rng.random(count)
        target = self._log_rate + np.log(u)
        if np.any(target < self._log_tail_min):
            raise TabulationRangeError(
                "jump draw beyond the tabulated tail range")
        return np.exp(np.interp(target, self._inv_x, self._inv_y))

    def sample_increment(self, h, rng):
        """One subordinator increment per entry of h (h > 0)."""
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if np.any(h < 0):
            raise DomainSpecError("time increments must be positive")
        if self.scheme == "exact-stable":
            return h ** (1.0 / self.beta) * _kanter(self.beta, h.shape, rng)
        counts = rng.poisson(h * self.jump_rate)
        out = h * self.compensator_rate
        csum = np.cumsum(counts)
        total = int(csum[-1]) if h.size else 0
        if total == 0:
            return out
        jump_sum = np.zeros(h.size)
        # chunk by paths so the flat jump array stays bounded in memory
        start, base = 0, 0
        while start < h.size:
            end = int(np.searchsorted(csum, base + 4_000_000,
                                      side="right")) + 1
            end = min(max(end, start + 1), h.size)
            k = int(csum[end - 1] - base)
            if k:
                jumps = self.sample_jump_sizes(k, rng)
                owner = np.repeat(np.arange(end - start),
                                  counts[start:end])
                jump_sum[start:end] = np.bincount(owner, weights=jumps,
                                                  minlength=end - start)
            base = int(csum[end - 1])
            start = end
        return out + jump_sum


def sample_increment(sampler: SubordinatorSampler, h, rng):
    """One draw of S_h; h may be a scalar or an array of step lengths."""
    out = sampler.sample_increment(h, rng)
    if np.isscalar(h) or np.asarray(h).ndim == 0:
        return float(out[0])
    return out


def sample_sbm_increment(sampler: SubordinatorSampler, h, d, rng):
    """Displacement over time h: sqrt(2 S_h) Z with Z standard normal in
    d dimensions; the factor 2 matches the heat kernel normalization
    E e^(i xi . W_t) = e^(-t |xi|^2)."""
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    ds = sampler.sample_increment(h_arr, rng)
    z = rng.standard_normal((h_arr.size, d))
    disp = np.sqrt(2.0 * ds)[:, None] * z
    if np.isscalar(h) or np.asarray(h).ndim == 0:
        return disp[0]
    return disp


# -- path configuration and exit records ----------------------------------

@dataclass(frozen=True)
class PathConfig:
    """Walk parameters; identical config implies identical output."""

    seed: int
    n_paths: int = 10000
    theta: float = 0.1
    t_max: float = 1e9
    rho_max: float = 1e5
    scheme: str = "auto"
    eps: Optional[float] = None
    block_size: int = 8192
    max_steps: int = 200000

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise DomainSpecError("theta must lie in (0, 1]")
        if self.n_paths < 1:
            raise DomainSpecError("need at least one path")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainSpecError("seed must fit in 64 bits")

    def with_(self, **kw):
        d = self.__dict__.copy()
        d.update(kw)
        return PathConfig(**d)


@dataclass(frozen=True)
class ExitSample:
    position: tuple
    time: float
    status: int
    jump_exit: bool

    @property
    def censored(self):
        return self.status != EXITED


class ExitBatch:
    """Vector of exit records from a common starting point.

    occupation, when present, holds the per-path integral of a caller
    supplied function along the walk (see simulate_exits)."""

    def __init__(self, start, positions, times, status, jump_exit,
                 occupation=None):
        self.start = np.asarray(start, dtype=float)
        self.positions = positions
        self.times = times
        self.status = status
        self.jump_exit = jump_exit
        self.occupation = occupation

    @property
    def n(self):
        return self.status.size

    @property
    def exited(self):
        return self.status == EXITED

    def fraction(self, code):
        return float(np.mean(self.status == code))

    @property
    def censored_fraction(self):
        return float(np.mean(self.status != EXITED))

    def __getitem__(self, i):
        return ExitSample(tuple(self.positions[i]), float(self.times[i]),
                          int(self.status[i]), bool(self.jump_exit[i]))


def write_exits_csv(batch: ExitBatch, path):
    """One exit per row: coordinates, time, status name, jump flag."""
    d = batch.positions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)] + ["time", "status",
                                                  "jump_exit"])
        for i in range(batch.n):
            w.writerow([repr(float(v)) for v in batch.positions[i]]
                       + [repr(float(batch.times[i])),
                          _STATUS_NAMES[int(batch.status[i])],
                          int(batch.jump_exit[i])])


# -- first-exit walks ------------------------------------------------------

def _block_rng(seed, block):
    key = np.array([seed, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _walk_block(D, x, f, sampler, cfg, rng, n, occ_fn=None):
    d = D.dim
    x = np.asarray(x, dtype=float)
    pos = x.copy() if x.ndim == 2 else np.tile(x, (n, 1))
    time = np.zeros(n)
    out_pos = np.empty((n, d))
    out_t = np.empty(n)
    out_st = np.full(n, HORIZON, dtype=np.uint8)
    out_je = np.zeros(n, dtype=bool)
    occ = np.zeros(n) if occ_fn is not None else None
    idx = np.arange(n)
    eps_mach = np.finfo(float).eps
    for _ in range(cfg.max_steps):
        if idx.size == 0:
            break
        scale = 1.0 + np.sqrt(np.sum(pos * pos, axis=1))
        # distance floored at float resolution so steps stay representable
        delta = np.maximum(D.dist_to_complement(pos), 64.0 * eps_mach * scale)
        h_nat = cfg.theta / f.phi(delta ** -2.0)
        h = np.minimum(h_nat, cfg.t_max - time)
        if occ_fn is not None:
            # occupation integral against the pre-step position; the
            # O(theta) freeze bias matches the walk's own discretization
            occ[idx] += h * occ_fn(pos)
        ds = sampler.sample_increment(h, rng)
        pos = pos + np.sqrt(2.0 * ds)[:, None] * rng.standard_normal(
            (idx.size, d))
        time = time + h
        sd = D.signed_distance(pos)
        scale = 1.0 + np.sqrt(np.sum(pos * pos, axis=1))
        exited = sd >= 0.0
        horizon = (~exited) & (h < h_nat)
        cutoff = (~exited) & (~horizon) & (scale - 1.0 > cfg.rho_max)
        done = exited | horizon | cutoff
        if np.any(done):
            di = idx[done]
            out_pos[di] = pos[done]
            out_t[di] = time[done]
            out_st[di] = np.where(
                exited[done], EXITED,
                np.where(horizon[done], HORIZON, CUTOFF)).astype(np.uint8)
            out_je[di] = exited[done] & (sd[done] > 1e-12 * scale[done])
            keep = ~done
            pos, time, idx = pos[keep], time[keep], idx[keep]
    if idx.size:
        out_pos[idx] = pos
        out_t[idx] = time
    return out_pos, out_t, out_st, out_je, occ


def simulate_exits(D: OpenSetSpec, x, f: CompleteBernsteinFunction,
                   cfg: PathConfig, csv_path=None,
                   starts=None, occupation_of=None) -> ExitBatch:
    """First-exit records for cfg.n_paths walks started at x.

    starts, when given, is an (n_paths, d) array of per-path start
    points overriding the shared x (used by population estimators).
    occupation_of, when given, maps an (m, d) position array to per-path
    rates; the batch then carries the per-path integral of that rate
    along the walk, which turns indicator estimates of rare jump targets
    into smooth expected-value estimates."""
    x = np.asarray(x, dtype=float)
    if starts is not None:
        starts = np.asarray(starts, dtype=float)
        if starts.shape != (cfg.n_paths, D.dim):
            raise DomainSpecError("starts must be an (n_paths, dim) array")
        if np.any(D.signed_distance(starts) >= 0):
            raise DomainSpecError("a start point lies outside the domain")
    elif not D.contains(x):
        raise DomainSpecError("start point lies outside the domain")
    sampler = SubordinatorSampler(f, cfg.scheme, cfg.eps)
    n, d = cfg.n_paths, D.dim
    positions = np.empty((n, d))
    times = np.empty(n)
    status = np.empty(n, dtype=np.uint8)
    jump_exit = np.empty(n, dtype=bool)
    occ = np.empty(n) if occupation_of is not None else None
    for b0 in range(0, n, cfg.block_size):
        m = min(cfg.block_size, n - b0)
        rng = _block_rng(cfg.seed, b0 // cfg.block_size)
        xb = x if starts is None else starts[b0:b0 + m]
        p, t, s, j, o = _walk_block(D, xb, f, sampler, cfg, rng, m,
                                    occ_fn=occupation_of)
        positions[b0:b0 + m] = p
        times[b0:b0 + m] = t
        status[b0:b0 + m] = s
        jump_exit[b0:b0 + m] = j
        if occ is not None:
            occ[b0:b0 + m] = o
    batch = ExitBatch(x, positions, times, status, jump_exit, occ)
    if csv_path is not None:
        write_exits_csv(batch, csv_path)
    return batch


def simulate_exit(D: OpenSetSpec, x, f: CompleteBernsteinFunction,
                  cfg: PathConfig) -> ExitSample:
    """Single first-exit record (the first path of a one-path run)."""
    return simulate_exits(D, x, f, cfg.with_(n_paths=1))[0]


# -- estimators ------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicEstimate:
    """Monte Carlo estimate with its statistical and systematic errors.

    stderr is the sample standard deviation over paths divided by
    sqrt(N).  Censored paths are never dropped silently: their fraction
    is recorded, and any tail correction applied to them is reported in
    the correction field."""

    value: float
    stderr: float
    n_paths: int
    censored_fraction: float
    horizon_fraction: float
    cutoff_fraction: float
    correction: float = 0.0
    quad_err: float = 0.0
    notes: tuple = ()


def _finish(contrib, batch, correction, quad_err, notes):
    n = batch.n
    value = float(np.mean(contrib))
    stderr = float(np.std(contrib, ddof=1) / math.sqrt(n)) if n > 1 else \
        math.inf
    return HarmonicEstimate(
        value, stderr, n, batch.censored_fraction,
        batch.fraction(HORIZON), batch.fraction(CUTOFF),
        float(correction), float(quad_err), tuple(notes))


def estimate_harmonic(D, payoff: Callable, x, f, cfg,
                      tail_correction: Optional[Callable] = None,
                      batch: Optional[ExitBatch] = None) -> HarmonicEstimate:
    """E_x[payoff(X at first exit); exit observed].

    Censored paths contribute zero payoff, which is unbiased-from-below
    exactly when the payoff support is bounded and inside the cutoff
    radius; tail_correction(positions) may supply a per-path correction
    for cutoff-censored paths (recorded, never silent)."""
    if batch is None:
        batch = simulate_exits(D, x, f, cfg)
    contrib = np.zeros(batch.n)
    ex = batch.exited
    if np.any(ex):
        contrib[ex] = payoff(batch.positions[ex])
    correction = 0.0
    notes = []
    cut = batch.status == CUTOFF
    if tail_correction is not None and np.any(cut):
        extra = tail_correction(batch.positions[cut])
        contrib[cut] = extra
        correction = float(np.sum(extra) / batch.n)
        notes.append("cutoff tail correction applied")
    elif batch.censored_fraction > 0:
        notes.append("censored paths contribute zero payoff")
    return _finish(contrib, batch, correction, 0.0, notes)


def estimate_green(D, x, y, f, cfg,
                   batch: Optional[ExitBatch] = None) -> HarmonicEstimate:
    """G_D(x, y) as the free Green function minus the mean of the free
    Green function at the exit position.

    The statistical error covers the exit term only; the free-kernel
    tabulation error is reported separately in quad_err."""
    from .kernels import green_kernel_table
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r0 = float(np.linalg.norm(x - y))
    if r0 == 0.0:
        raise DomainSpecError("Green function is singular on the diagonal")
    gt = green_kernel_table(f, D.dim)
    free = float(gt(r0))
    if batch is None:
        batch = simulate_exits(D, x, f, cfg)
    term = np.zeros(batch.n)
    ex = batch.exited
    if np.any(ex):
        dist = np.sqrt(np.sum((batch.positions[ex] - y) ** 2, axis=1))
        term[ex] = gt(dist)
    contrib = free - term
    notes = []
    if batch.censored_fraction > 0:
        notes.append("censored paths contribute zero to the exit term")
    quad = gt.held_out_dev * (free + float(np.mean(np.abs(term))))
    return _finish(contrib, batch, 0.0, quad, notes)


def _radial_sphere_rule(d, n_polar=16, n_azimuth=12):
    if d != 3:
        raise DomainSpecError("mesh quadrature is implemented in d=3")
    c, wc = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    st = np.sqrt(1.0 - c ** 2)
    dirs = np.empty((n_polar * n_azimuth, 3))
    dirs[:, 0] = np.outer(st, np.cos(phi)).ravel()
    dirs[:, 1] = np.outer(st, np.sin(phi)).ravel()
    dirs[:, 2] = np.repeat(c, n_azimuth)
    w = np.repeat(wc, n_azimuth) * (2.0 * math.pi / n_azimuth)
    return dirs, w  # weights integrate to the full sphere area 4 pi


def _panel_nodes(edges, order=8):
    gl_x, gl_w = np.polynomial.legendre.leggauss(order)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halfs = 0.5 * np.diff(edges)
    rr = (mids[:, None] + halfs[:, None] * gl_x[None, :]).ravel()
    rw = (halfs[:, None] * gl_w[None, :]).ravel()
    return rr, rw


def _inner_radius(D):
    """Radius of an excluded central ball, when the domain has one."""
    r = getattr(D, "radius", None)
    if r is not None and not getattr(D, "bounded", True):
        return float(r)
    parts = getattr(D, "parts", None)
    if parts:
        vals = [_inner_radius(p) for p in parts]
        vals = [v for v in vals if v is not None]
        return max(vals) if vals else None
    return None


def _sphere_rule_panels(n_polar, m_az):
    """Sphere rule from composite Gauss panels in cos(theta) with a panel
    edge pinned at the equator, so a halfspace cut through a composite
    domain falls on a panel boundary instead of inside one."""
    cedges = np.unique(np.concatenate(
        [np.linspace(-1.0, 1.0, n_polar + 1), [0.0]]))
    cc, cw = _panel_nodes(cedges, order=4)
    phi = 2.0 * math.pi * np.arange(m_az) / m_az
    st = np.sqrt(np.maximum(1.0 - cc ** 2, 0.0))
    dirs = np.empty((cc.size * m_az, 3))
    dirs[:, 0] = np.outer(st, np.cos(phi)).ravel()
    dirs[:, 1] = np.outer(st, np.sin(phi)).ravel()
    dirs[:, 2] = np.repeat(cc, m_az)
    w = np.repeat(cw, m_az) * (2.0 * math.pi / m_az)
    return dirs, w


def _exit_term_mesh(D, n_radial, n_polar, r_out):
    """Origin-centered volume mesh over D, refined toward the boundary
    sphere of an excluded ball (the exit-averaged kernel has a mild
    singularity there)."""
    inner = _inner_radius(D)
    if inner is not None:
        edges = inner + np.concatenate(
            [[0.0], np.geomspace(1e-4 * inner, r_out - inner,
                                 n_radial)])
    elif getattr(D, "bounded", False):
        R = float(getattr(D, "radius", r_out))
        edges = R - np.concatenate(
            [[0.0], np.geomspace(1e-4 * R, R - 1e-9, n_radial)])
        edges = np.sort(edges)
    else:
        edges = np.geomspace(1e-3, r_out, n_radial + 1)
    rr, rw = _panel_nodes(edges)
    if getattr(D, "parts", None) is not None:
        dirs, dw = _sphere_rule_panels(n_polar, max(8, n_polar))
    else:
        dirs, dw = _radial_sphere_rule(3, n_polar, max(8, n_polar))
    pts = (rr[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    wts = ((rw * rr ** 2)[:, None] * dw[None, :]).ravel()
    inside = D.signed_distance(pts) < 0
    return pts[inside], wts[inside]


def _sphere_mean(kt, rho, R):
    """Mean of kt(|rho*u - R*e|) over unit directions u, for each rho.
    Equals (2 rho R)^-1 * int_{|rho-R|}^{rho+R} s kt(s) ds; the 1d
    integral runs in log s so the small-separation blowup of kt is
    resolved."""
    rho = np.asarray(rho, dtype=float)
    lo = np.maximum(np.abs(rho - R), 1e-9)
    hi = rho + R
    gx, gw = np.polynomial.legendre.leggauss(32)
    mid = 0.5 * (np.log(hi) + np.log(lo))
    half = 0.5 * (np.log(hi) - np.log(lo))
    s = np.exp(mid[:, None] + half[:, None] * gx[None, :])
    vals = np.sum(gw[None, :] * s ** 2 * kt(s), axis=1) * half
    return vals / (2.0 * rho * R)


def _radial_free_term(D, origin_kt, zonal_kt, R, n_radial, r_out):
    """int_D k0(|w|) kz(|w - R e|) dw for a ball or exterior-ball D
    centered at the origin; exact in angle via spherical means."""
    inner = _inner_radius(D)
    if inner is not None:
        a, b = inner, r_out
    else:
        a, b = 1e-6, float(D.radius)
    edges = [np.geomspace(a, b, 2 * n_radial + 1)]
    if a < R < b:
        ring = R + np.concatenate([-np.geomspace(1e-6 * R, R - a,
                                                 n_radial)[::-1],
                                   np.geomspace(1e-6 * R, b - R,
                                                n_radial)])
        edges.append(ring)
    e = np.unique(np.clip(np.concatenate(edges), a, b))
    rr, rw = _panel_nodes(e)
    vals = rr ** 2 * origin_kt(rr) * _sphere_mean(zonal_kt, rr, R)
    return 4.0 * math.pi * float(np.dot(rw, vals))


def _masked_free_term(D, x, z, gt, jt, n_radial, n_polar, r_out):
    """Fallback volume quadrature of g(|x-w|) j(|w-z|) over D for
    composite domains; origin-centered mesh with radial refinement at
    the Green-singularity ring |w| = |x| and polar refinement toward
    the direction of x."""
    Rx = float(np.linalg.norm(x))
    edges = [np.geomspace(1e-3, r_out, 2 * n_radial + 1)]
    inner = _inner_radius(D)
    if inner is not None:
        edges.append(inner + np.geomspace(1e-4 * inner, r_out - inner,
                                          n_radial))
    if 1e-3 < Rx < r_out:
        edges.append(Rx + np.concatenate(
            [-np.geomspace(1e-5 * Rx, Rx * 0.999, n_radial)[::-1],
             np.geomspace(1e-5 * Rx, r_out - Rx, n_radial)]))
    e = np.unique(np.clip(np.concatenate(edges), 1e-6, r_out))
    rr, rw = _panel_nodes(e, order=4)
    cx = x[2] / Rx if Rx > 0 else 1.0
    cedges = np.unique(np.clip(np.concatenate(
        [np.linspace(-1.0, 1.0, n_polar + 1), [0.0],
         cx + np.concatenate([-np.geomspace(1e-4, 1.0, n_polar)[::-1],
                              np.geomspace(1e-4, 1.0, n_polar)])]),
        -1.0, 1.0))
    cc, cw = _panel_nodes(cedges, order=4)
    # azimuth panels refined toward the azimuth of x, where the Green
    # factor blows up for off-axis x
    phix = math.atan2(x[1], x[0])
    m_az = max(8, n_polar)
    pedges = phix + np.unique(np.clip(np.concatenate(
        [np.linspace(-math.pi, math.pi, m_az + 1),
         -np.geomspace(1e-4, math.pi, n_polar)[::-1],
         np.geomspace(1e-4, math.pi, n_polar)]),
        -math.pi, math.pi))
    pp, pw = _panel_nodes(pedges, order=4)
    st = np.sqrt(np.maximum(1.0 - cc ** 2, 0.0))
    dirs = np.empty((cc.size * pp.size, 3))
    dirs[:, 0] = np.outer(st, np.cos(pp)).ravel()
    dirs[:, 1] = np.outer(st, np.sin(pp)).ravel()
    dirs[:, 2] = np.repeat(cc, pp.size)
    dw = (cw[:, None] * pw[None, :]).ravel()
    total = 0.0
    chunk = max(1, int(4e6 // dirs.shape[0]))
    for i0 in range(0, rr.size, chunk):
        r_s = rr[i0:i0 + chunk]
        pts = (r_s[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
        inside = D.signed_distance(pts) < 0
        gv = gt(np.sqrt(np.sum((pts - x) ** 2, axis=1)))
        jv = jt(np.sqrt(np.sum((pts - z) ** 2, axis=1)))
        wv = ((rw[i0:i0 + chunk] * r_s ** 2)[:, None]
              * dw[None, :]).ravel()
        total += float(np.sum(np.where(inside, wv * gv * jv, 0.0)))
    return total


def _poisson_quadrature(D, x, z, f, batch, gt, jt, n_radial, n_polar,
                        r_out):
    """K_D(x,z) as [free term] - [exit term].  The free term is exact in
    angle whenever the domain is a ball or exterior ball and one of x, z
    sits at the center; the exit term shares one batch."""
    Rx = float(np.linalg.norm(x))
    Rz = float(np.linalg.norm(z))
    radial = (getattr(D, "parts", None) is None
              and getattr(D, "radius", None) is not None)
    if radial and Rz < 1e-12:
        free_term = _radial_free_term(D, jt, gt, Rx, n_radial, r_out)
    elif radial and Rx < 1e-12:
        free_term = _radial_free_term(D, gt, jt, Rz, n_radial, r_out)
    else:
        free_term = _masked_free_term(D, x, z, gt, jt, n_radial,
                                      n_polar, r_out)
    # exit term, origin-centered boundary-refined mesh
    mpts, mwts = _exit_term_mesh(D, n_radial, n_polar, r_out)
    coef = mwts * jt(np.sqrt(np.sum((mpts - z) ** 2, axis=1)))
    exits = batch.positions[batch.exited]
    per_path = np.zeros(batch.n)
    acc = np.zeros(exits.shape[0])
    chunk = max(1, int(2e6 // max(mpts.shape[0], 1)))
    for i0 in range(0, acc.size, chunk):
        sub = exits[i0:i0 + chunk]
        dist = np.sqrt(np.sum((sub[:, None, :] - mpts[None, :, :]) ** 2,
                              axis=2))
        acc[i0:i0 + chunk] = np.dot(gt(dist), coef)
    per_path[batch.exited] = acc
    value = free_term - float(np.mean(per_path))
    stderr = float(np.std(per_path, ddof=1) / math.sqrt(batch.n))
    return value, stderr


def estimate_poisson_kernel(D, x, z, f, cfg, n_radial=24, n_polar=12,
                            r_out=40.0,
                            batch: Optional[ExitBatch] = None
                            ) -> HarmonicEstimate:
    """Poisson kernel K_D(x, z) for z outside the closure of D.

    Route (a): kernel-density estimate of the exit-position density at z
    over jump exits.  Route (b): quadrature of G_D(x, .) against the jump
    kernel over a volume mesh, with G_D evaluated from one shared exit
    batch.  The returned value is route (b); route (a) and the agreement
    gap are recorded in the notes.  Mesh refinement failure raises."""
    from .errors import UnstableRatioError
    from .kernels import green_kernel_table, jump_kernel_table
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if float(D.signed_distance(z)) < 0:
        raise DomainSpecError("evaluation point must lie outside the "
                              "closure of the domain")
    gt = green_kernel_table(f, D.dim)
    jt = jump_kernel_table(f, D.dim)
    if batch is None:
        batch = simulate_exits(D, x, f, cfg)
    # route (b) on the base mesh and on a doubled mesh
    vb, sb = _poisson_quadrature(D, x, z, f, batch, gt, jt, n_radial,
                                 n_polar, r_out)
    vb2, sb2 = _poisson_quadrature(D, x, z, f, batch, gt, jt,
                                   2 * n_radial, 2 * n_polar, r_out)
    mesh_delta = abs(vb2 - vb)
    if mesh_delta > max(0.05 * abs(vb2), 5.0 * sb2, 1e-12):
        raise UnstableRatioError(
            f"Poisson kernel mesh did not converge: {vb} vs {vb2}")
    # truncation tail for unbounded domains: G_D <= free G and j decays
    tail = 0.0
    if not getattr(D, "bounded", False):
        rr = np.geomspace(r_out, 1e4, 129)
        integ = gt(rr) * jt(np.maximum(rr - np.linalg.norm(z), rr * 0.5)) \
            * 4.0 * math.pi * rr ** 2
        tail = float(np.trapezoid(integ, rr))
    # route (a): product-Gaussian KDE over jump exits
    notes = []
    jumps = batch.positions[batch.exited & batch.jump_exit]
    if jumps.shape[0] >= 50:
        nj = jumps.shape[0]
        sig = np.std(jumps, axis=0, ddof=1)
        band = 1.06 * np.maximum(sig, 1e-12) * nj ** (-1.0 / 7.0)
        u = (jumps - z) / band
        kern = np.exp(-0.5 * np.sum(u * u, axis=1)) \
            / ((2.0 * math.pi) ** 1.5 * np.prod(band))
        # mean over all paths: non-jump paths contribute zero density at z
        ka = float(np.sum(kern) / batch.n)
        sa = float(np.std(np.concatenate(
            [kern, np.zeros(batch.n - nj)]), ddof=1) / math.sqrt(batch.n))
        gap = abs(ka - vb2)
        agree = gap <= 3.0 * (sa + sb2) + 0.15 * abs(vb2) + tail
        notes.append(f"kde route {ka!r} +- {sa!r}; agreement "
                     f"{'ok' if agree else 'off'}")
    else:
        notes.append("too few jump exits for the density route")
    if batch.censored_fraction > 0:
        notes.append("censored paths contribute zero to the exit term")
    return HarmonicEstimate(vb2, sb2, batch.n, batch.censored_fraction,
                            batch.fraction(HORIZON), batch.fraction(CUTOFF),
                            0.0, mesh_delta + tail, tuple(notes))
