"""Jump and Green density quadrature for subordinate Brownian motion.

The process is W(S_t) with W a Brownian motion normalized so that its
transition density at time t is (4 pi t)^(-d/2) exp(-|x|^2/(4t)) and S an
independent subordinator with Laplace exponent from the catalog.  The jump
density and (when the process is transient) the Green density are radial:

    j(r) = int_0^inf (4 pi t)^(-d/2) exp(-r^2/(4t)) mu(t) dt
    g(r) = int_0^inf (4 pi t)^(-d/2) exp(-r^2/(4t)) u(t) dt

with mu the Levy density and u the potential density of S.  All quadrature
runs in log space: the time-domain routes return log values, since for
exponentially localized entries j underflows float64 well inside the radii
ranges of interest.

A second, independent route computes g through the radial Fourier
inversion of 1/phi(|xi|^2), integrating between consecutive Bessel phase
zeros with epsilon-algorithm acceleration.  The two routes share no code
and are kept separate on purpose.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.special import jv

from ._quad import integrate_adaptive, integrate_log, _panel_sums, wynn_epsilon
from .bernstein import CompleteBernsteinFunction, transience_check
from .errors import TransienceError

__all__ = [
    "jump_density", "log_jump_density", "green_density", "log_green_density",
    "green_density_fourier", "KernelTable", "build_kernel_table",
    "ComparabilityReport", "verify_jg_estimates", "DoublingReport",
    "verify_doubling", "IntegralEstimatesReport", "verify_integral_estimates",
    "jump_kernel_table", "green_kernel_table", "jump_mass_beyond",
    "jump_second_moment_within",
]

_S_LO, _S_HI = -40.0, 40.0


@lru_cache(maxsize=64)
def _is_transient(f: CompleteBernsteinFunction, d: int) -> bool:
    return transience_check(f, d).verdict == "transient"


def _log_subordination(f, d, radii, log_time_density, rel_tol):
    """Common time-domain route.  t = r^2 exp(s) makes the heat factor
    exp(-exp(-s)/4), independent of r; dt = r^2 exp(s) ds."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    out = np.empty(radii.size)
    err = np.empty(radii.size)
    halfd = 0.5 * d
    log4pi = math.log(4.0 * math.pi)

    for i, r in enumerate(radii):
        logr2 = 2.0 * math.log(r)

        def log_f(s):
            t_log = logr2 + s
            return (-halfd * (log4pi + t_log) - 0.25 * np.exp(-s)
                    + log_time_density(np.exp(t_log)) + t_log)

        out[i], err[i] = integrate_log(log_f, _S_LO, _S_HI, rel_tol=rel_tol,
                                       scan_points=513)
    return out, err


def log_jump_density(f, d, r, rel_tol=1e-10):
    """Log of the radial jump density, with a relative error estimate."""
    vals, errs = _log_subordination(f, d, r, f.log_levy_density, rel_tol)
    if np.isscalar(r) or np.asarray(r).ndim == 0:
        return float(vals[0]), float(errs[0])
    return vals, errs


def jump_density(f, d, r, rel_tol=1e-10):
    """Radial jump density j(r); underflows to 0 where exp does."""
    vals, _ = log_jump_density(f, d, r, rel_tol)
    return np.exp(vals)


def _require_transient(f, d):
    if not _is_transient(f, d):
        raise TransienceError(
            f"Green density undefined: transience not established for "
            f"{f.spec_id} in dimension {d}")


def log_green_density(f, d, r, rel_tol=1e-10):
    """Log Green density through the subordinator potential density.

    Only catalog kinds with a closed-form potential density support this
    route; others raise UnsupportedKindError naming the Fourier fallback.
    """
    _require_transient(f, d)
    vals, errs = _log_subordination(f, d, r, f.log_potential_density, rel_tol)
    if np.isscalar(r) or np.asarray(r).ndim == 0:
        return float(vals[0]), float(errs[0])
    return vals, errs


def green_density(f, d, r, rel_tol=1e-10):
    vals, _ = log_green_density(f, d, r, rel_tol)
    return np.exp(vals)


# -- Fourier route --------------------------------------------------------

def green_density_fourier(f, d, r, rel_tol=1e-8, max_panels=220):
    """Green density by radial Fourier inversion of 1/phi(|xi|^2).

        g(r) = (2 pi)^(-d/2) r^(-d) int_0^inf J_nu(z) z^(d/2)
               / phi(z^2/r^2) dz,   nu = d/2 - 1,

    integrated between consecutive Bessel phase zeros (McMahon spacing)
    with epsilon-algorithm acceleration of the alternating partial sums.
    Returns (values, error_estimates); scalar in, scalar out.
    """
    _require_transient(f, d)
    scalar = np.isscalar(r) or np.asarray(r).ndim == 0
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    nu = 0.5 * d - 1.0
    # McMahon phase zeros; exact for half-integer nu = 1/2 (d = 3)
    ks = np.arange(1, max_panels + 1)
    zeros = (ks + 0.5 * nu - 0.25) * math.pi
    edges = np.concatenate([[0.0], zeros])
    pref = (2.0 * math.pi) ** (-0.5 * d)
    out = np.empty(radii.size)
    errs = np.empty(radii.size)

    for i, rr in enumerate(radii):
        logr = math.log(rr)

        def integrand(z):
            good = z > 0.0
            zz = np.where(good, z, 1.0)
            val = (jv(nu, zz) * np.exp(
                0.5 * d * np.log(zz)
                - f.log_phi_logarg(2.0 * (np.log(zz) - logr))))
            return np.where(good, val, 0.0)

        head, head_err = integrate_adaptive(integrand, edges[0], edges[1],
                                            rel_tol=rel_tol, order=24)
        terms = _panel_sums(integrand, edges[1:-1], edges[2:], 32)
        partial = head + np.cumsum(terms)
        total, tail_err = wynn_epsilon(partial)
        out[i] = pref * math.exp(-d * logr) * total
        errs[i] = pref * math.exp(-d * logr) * (head_err + tail_err)
    rel = errs / np.maximum(np.abs(out), 1e-300)
    if scalar:
        return float(out[0]), float(rel[0])
    return out, rel


# -- fast tabulated evaluators -------------------------------------------

def _log_subordination_grid(f, d, radii, log_time_density, n_s=3072,
                            chunk=256):
    """Fixed-grid variant: one composite Gauss panel rule in s shared by
    every radius, evaluated in vectorized radius blocks.  Adequate for
    smooth catalog densities; cross-checked against the adaptive route."""
    radii = np.asarray(radii, dtype=float)
    n_panels = n_s // 32
    edges = np.linspace(_S_LO, _S_HI, n_panels + 1)
    gx, gw = np.polynomial.legendre.leggauss(32)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    s = (mid[:, None] + half * gx[None, :]).ravel()
    w = np.tile(gw * half, n_panels)
    halfd = 0.5 * d
    log4pi = math.log(4.0 * math.pi)
    heat = -0.25 * np.exp(-s)
    out = np.empty(radii.size)
    for i0 in range(0, radii.size, chunk):
        logr2 = 2.0 * np.log(radii[i0:i0 + chunk])
        t_log = logr2[:, None] + s[None, :]
        log_fs = (-halfd * (log4pi + t_log) + heat[None, :]
                  + log_time_density(np.exp(t_log)) + t_log)
        m = np.max(log_fs, axis=1, keepdims=True)
        vals = np.sum(np.exp(log_fs - m) * w[None, :], axis=1)
        out[i0:i0 + chunk] = m[:, 0] + np.log(vals)
    return out


# The s window for the pointwise kernels can stay at [-40, 40] because the
# heat factor and the time density both cut off fast around the peak.  The
# ball moments below decay only like exp(-|s| alpha/2) on one side, so they
# get a wider window.
_S_LO_M, _S_HI_M = -200.0, 200.0


def jump_mass_beyond(f, d, R, rel_tol=1e-9):
    """Total jump intensity outside the centered ball of radius R.

    Swapping the spatial and time integrals turns the inner integral into
    a chi square tail probability, leaving a single smooth integral over
    the time variable (t = R^2 exp(s))."""
    from scipy.special import gammaincc
    R = float(R)
    logR2 = 2.0 * math.log(R)
    half_d = 0.5 * d

    def log_f(s):
        with np.errstate(divide="ignore"):
            tail = np.log(gammaincc(half_d, 0.25 * np.exp(-s)))
        t_log = logR2 + s
        return f.log_levy_density(np.exp(t_log)) + tail + t_log

    val, err = integrate_log(log_f, _S_LO_M, _S_HI_M, rel_tol=rel_tol,
                             scan_points=1025)
    return math.exp(val), err


def jump_second_moment_within(f, d, R, rel_tol=1e-9):
    """int_{|y| < R} |y|^2 j(|y|) dy by the same order swap; the inner
    integral is a raised-degree chi square probability."""
    from scipy.special import gammainc
    R = float(R)
    logR2 = 2.0 * math.log(R)

    def log_f(s):
        with np.errstate(divide="ignore"):
            body = np.log(gammainc(0.5 * d + 1.0, 0.25 * np.exp(-s)))
        t_log = logR2 + s
        return (math.log(2.0 * d) + t_log
                + f.log_levy_density(np.exp(t_log)) + body + t_log)

    val, err = integrate_log(log_f, _S_LO_M, _S_HI_M, rel_tol=rel_tol,
                             scan_points=1025)
    return math.exp(val), err


class _LogKernelInterpolant:
    """log-log monotone interpolant of a radial kernel with a recorded
    held-out deviation against the defining quadrature."""

    def __init__(self, f, d, which, r_lo=1e-7, r_hi=1e4, n=4097):
        from scipy.interpolate import PchipInterpolator
        dens = (f.log_levy_density if which == "jump"
                else f.log_potential_density)
        if which == "green":
            _require_transient(f, d)
        grid = np.logspace(math.log10(r_lo), math.log10(r_hi), n)
        logv = _log_subordination_grid(f, d, grid, dens)
        self._interp = PchipInterpolator(np.log(grid), logv,
                                         extrapolate=False)
        self.r_lo, self.r_hi = r_lo, r_hi
        self.phi_id = f.spec_id
        mid = np.sqrt(grid[:-1:64] * grid[1::64])
        direct, _ = _log_subordination(f, d, mid, dens, 1e-10)
        self.held_out_dev = float(np.max(np.abs(self._interp(np.log(mid))
                                                - direct)))

    def log_eval(self, r):
        r = np.asarray(r, dtype=float)
        out = self._interp(np.log(np.clip(r, self.r_lo, self.r_hi)))
        return np.where((r >= self.r_lo) & (r <= self.r_hi), out, -np.inf)

    def __call__(self, r):
        with np.errstate(over="ignore"):
            return np.exp(self.log_eval(r))


@lru_cache(maxsize=32)
def jump_kernel_table(f: CompleteBernsteinFunction, d: int):
    """Cached fast evaluator of the jump density."""
    return _LogKernelInterpolant(f, d, "jump")


@lru_cache(maxsize=32)
def green_kernel_table(f: CompleteBernsteinFunction, d: int,
                       r_lo=1e-6, r_hi=1e6, n=1025):
    """Cached fast evaluator of the Green density.  Time-domain route for
    the pure power entry; Fourier route tabulation otherwise."""
    from scipy.interpolate import PchipInterpolator
    _require_transient(f, d)
    if f.kind == "stable":
        return _LogKernelInterpolant(f, d, "green", r_lo=r_lo, r_hi=r_hi,
                                     n=2049)

    class _FourierTable:
        def __init__(self):
            grid = np.logspace(math.log10(r_lo), math.log10(r_hi), n)
            vals, errs = green_density_fourier(f, d, grid)
            self._interp = PchipInterpolator(np.log(grid), np.log(vals),
                                             extrapolate=False)
            self.r_lo, self.r_hi = r_lo, r_hi
            self.phi_id = f.spec_id
            mid = np.sqrt(grid[:-1:64] * grid[1::64])
            dv, _ = green_density_fourier(f, d, mid)
            self.held_out_dev = float(np.max(np.abs(
                self._interp(np.log(mid)) - np.log(dv))))

        def log_eval(self, r):
            r = np.asarray(r, dtype=float)
            out = self._interp(np.log(np.clip(r, self.r_lo, self.r_hi)))
            return np.where((r >= self.r_lo) & (r <= self.r_hi), out, -np.inf)

        def __call__(self, r):
            with np.errstate(over="ignore"):
                return np.exp(self.log_eval(r))

    return _FourierTable()


# -- tables ---------------------------------------------------------------

@dataclass(frozen=True)
class KernelTable:
    """Tabulated kernels on a radius grid, with per-entry error estimates.

    Entries whose quadrature error exceeds the requested tolerance are
    flagged rather than dropped.  Green columns are None when the process
    is not transient or the entry lacks every Green route.
    """

    phi_id: str
    dim: int
    radii: tuple
    log_j: tuple
    j_err: tuple
    log_g: tuple | None
    g_err: tuple | None
    green_route: str          # "time-domain" | "fourier" | "none"
    tol: float
    flags: tuple              # per-radius bool, True = above tolerance

    def to_rows(self):
        rows = []
        for i, r in enumerate(self.radii):
            row = {
                "r": r,
                "log_j": self.log_j[i],
                "j": math.exp(self.log_j[i]) if self.log_j[i] > -700 else 0.0,
                "j_err": self.j_err[i],
                "flagged": bool(self.flags[i]),
            }
            if self.log_g is not None:
                row["log_g"] = self.log_g[i]
                row["g"] = (math.exp(self.log_g[i])
                            if self.log_g[i] > -700 else 0.0)
                row["g_err"] = self.g_err[i]
            rows.append(row)
        return rows

    def to_csv(self, path):
        rows = self.to_rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)

    def to_json(self, path=None):
        payload = {
            "schema": "levypot.kernel_table.v1",
            "phi": self.phi_id,
            "dim": self.dim,
            "green_route": self.green_route,
            "tol": self.tol,
            "rows": self.to_rows(),
        }
        text = json.dumps(payload, sort_keys=True, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def build_kernel_table(f, d, radii, tol=1e-8, green_route="auto"):
    radii = np.asarray(radii, dtype=float)
    log_j, j_err = _log_subordination(f, d, radii, f.log_levy_density, tol)
    log_g = g_err = None
    route = "none"
    if green_route == "auto":
        green_route = "time-domain" if f.kind == "stable" else "fourier"
    try:
        if green_route == "time-domain":
            lg, ge = log_green_density(f, d, radii, rel_tol=tol)
            log_g, g_err, route = tuple(lg), tuple(ge), "time-domain"
        elif green_route == "fourier":
            gv, ge = green_density_fourier(f, d, radii, rel_tol=tol)
            with np.errstate(divide="ignore"):
                log_g = tuple(np.log(gv))
            g_err, route = tuple(ge), "fourier"
    except TransienceError:
        pass
    flags = j_err > tol
    if g_err is not None:
        flags = flags | (np.asarray(g_err) > tol)
    return KernelTable(f.spec_id, int(d), tuple(radii), tuple(log_j),
                       tuple(j_err), log_g, g_err, route, tol,
                       tuple(bool(x) for x in flags))


# -- comparability scans --------------------------------------------------

def _spread_stats(logratio):
    lo = float(np.min(logratio))
    hi = float(np.max(logratio))
    spread_log10 = (hi - lo) / math.log(10.0)
    spread = math.exp(hi - lo) if (hi - lo) < 700 else math.inf
    return lo, hi, spread_log10, spread


@dataclass(frozen=True)
class ComparabilityReport:
    """Scan of j(r) against r^-d phi(r^-2) and g(r) against the reciprocal
    shape r^-d / phi(r^-2), in log space.

    Ratio statistics are stored as log ratios; spreads are reported both as
    plain ratios (inf when they overflow float64) and in log10.  The
    verdict is "bounded" when both log spreads are finite and moving to a
    doubled radius grid changes them by less than five percent.
    """

    phi_id: str
    dim: int
    radii: tuple
    j_logratio: tuple
    g_logratio: tuple | None
    j_spread: float
    j_spread_log10: float
    g_spread: float | None
    g_spread_log10: float | None
    refine_shift_log10: float
    stable_under_refinement: bool
    verdict: str


def _jg_logratios(f, d, radii, green_route):
    log_j, _ = _log_subordination(f, d, radii, f.log_levy_density, 1e-9)
    logphi_inv2 = f.log_phi_logarg(-2.0 * np.log(radii))
    j_stat = log_j + d * np.log(radii) - logphi_inv2
    g_stat = None
    if _is_transient(f, d):
        if green_route == "auto":
            green_route = "time-domain" if f.kind == "stable" else "fourier"
        if green_route == "time-domain":
            lg, _ = _log_subordination(f, d, radii, f.log_potential_density,
                                       1e-9)
        else:
            gv, _ = green_density_fourier(f, d, radii)
            lg = np.log(gv)
        g_stat = lg + d * np.log(radii) + logphi_inv2
    return j_stat, g_stat


def verify_jg_estimates(f, d, r_lo=1e-3, r_hi=1e3, points=33,
                        green_route="auto") -> ComparabilityReport:
    radii = np.logspace(math.log10(r_lo), math.log10(r_hi), points)
    j_stat, g_stat = _jg_logratios(f, d, radii, green_route)
    _, _, j_sl10, j_sp = _spread_stats(j_stat)
    g_sp = g_sl10 = None
    if g_stat is not None:
        _, _, g_sl10, g_sp = _spread_stats(g_stat)

    fine = np.logspace(math.log10(r_lo), math.log10(r_hi), 2 * points - 1)
    j2, g2 = _jg_logratios(f, d, fine, green_route)
    _, _, j2_sl10, _ = _spread_stats(j2)
    shift = abs(j2_sl10 - j_sl10)
    if g2 is not None:
        _, _, g2_sl10, _ = _spread_stats(g2)
        shift = max(shift, abs(g2_sl10 - g_sl10))
    stable_ref = shift <= math.log10(1.05) + 1e-12 * max(j_sl10, 1.0)
    finite = np.isfinite(j_sl10) and (g_sl10 is None or np.isfinite(g_sl10))
    verdict = "bounded" if (finite and stable_ref) else "unstable"
    return ComparabilityReport(
        f.spec_id, int(d), tuple(radii), tuple(j_stat),
        tuple(g_stat) if g_stat is not None else None,
        j_sp, j_sl10, g_sp, g_sl10, float(shift), bool(stable_ref), verdict)


@dataclass(frozen=True)
class DoublingReport:
    phi_id: str
    dim: int
    scale: float
    c: float
    c_log10: float
    verdict: str


def verify_doubling(f, d, scale=2.0, r_lo=1e-2, r_hi=1e2,
                    points=41) -> DoublingReport:
    """Tightest c with j(r) <= c j(scale * r) over the radius grid."""
    radii = np.logspace(math.log10(r_lo), math.log10(r_hi), points)
    lj, _ = _log_subordination(f, d, radii, f.log_levy_density, 1e-9)
    lj_s, _ = _log_subordination(f, d, scale * radii, f.log_levy_density,
                                 1e-9)
    log_c = float(np.max(lj - lj_s))
    c = math.exp(log_c) if log_c < 700 else math.inf
    return DoublingReport(f.spec_id, int(d), float(scale), c,
                          log_c / math.log(10.0),
                          "bounded" if np.isfinite(log_c) else "unbounded")


# -- integral inequality scans --------------------------------------------

def _decaying_integral(fn, v_hi=256.0, rel_tol=1e-11):
    val, err = integrate_adaptive(fn, 0.0, v_hi, rel_tol=rel_tol,
                                  init_panels=32)
    return val, err


@dataclass(frozen=True)
class IntegralEstimatesReport:
    """Constants in three radial integral inequalities tying phi to its
    own integrals, scanned over a grid of frequency scales lam:

      (a) int_0^(1/lam) sqrt(phi(r^-2)) dr        against lam^-1 sqrt(phi(lam^2))
      (b) lam^2 int_0^(1/lam) r phi(r^-2) dr
          + int_(1/lam)^inf r^-1 phi(r^-2) dr     against phi(lam^2)
      (c) int_0^(1/lam) r^-1 / phi(r^-2) dr       against 1/phi(lam^2),
          two-sided

    Each row holds the fitted constants at one lam; the summary holds the
    extremes over the grid.
    """

    phi_id: str
    lam_grid: tuple
    c_a: tuple
    c_b: tuple
    c_c: tuple
    c_a_max: float
    c_b_max: float
    c_c_low: float
    c_c_high: float
    lam_uniform_spread: float


def verify_integral_estimates(f, lam_grid=(1e-2, 1.0, 1e2)):
    lam_grid = np.asarray(lam_grid, dtype=float)
    c_a, c_b, c_c = [], [], []
    for lam in lam_grid:
        llam = math.log(lam)
        log_phi_l2 = float(f.log_phi_logarg(2.0 * llam))

        def f_a(v):
            return np.exp(0.5 * f.log_phi_logarg(2.0 * (llam + v)) - v)

        def f_b1(v):
            return np.exp(f.log_phi_logarg(2.0 * (llam + v)) - 2.0 * v)

        def f_b2(w):
            return np.exp(f.log_phi_logarg(2.0 * (llam - w)))

        def f_c(v):
            return np.exp(-f.log_phi_logarg(2.0 * (llam + v)))

        ia, _ = _decaying_integral(f_a)
        ib1, _ = _decaying_integral(f_b1)
        ib2, _ = _decaying_integral(f_b2)
        ic, _ = _decaying_integral(f_c)
        # substitutions: r = lam^-1 exp(-v) (inner), r = lam^-1 exp(w) (outer)
        c_a.append(ia / math.exp(0.5 * log_phi_l2))
        c_b.append((ib1 + ib2) / math.exp(log_phi_l2))
        c_c.append(ic * math.exp(log_phi_l2))
    c_a = np.asarray(c_a)
    c_b = np.asarray(c_b)
    c_c = np.asarray(c_c)
    all_c = np.concatenate([c_a, c_b, c_c])
    return IntegralEstimatesReport(
        f.spec_id, tuple(lam_grid), tuple(c_a), tuple(c_b), tuple(c_c),
        float(np.max(c_a)), float(np.max(c_b)),
        float(np.min(c_c)), float(np.max(c_c)),
        float(np.max(all_c) / np.min(all_c)))
