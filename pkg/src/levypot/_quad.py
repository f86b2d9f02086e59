"""Shared 1-D quadrature kernels.

Adaptive Gauss-Legendre panels with a node-doubling error estimate, a
log-space variant for integrands whose magnitude under/overflows float64,
and Wynn epsilon acceleration for the alternating panel sums that show up
when integrating against Bessel oscillations.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gl_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel_sums(f, lo, hi, order):
    """Gauss-Legendre on a stack of panels in one vectorized call.

    lo, hi: arrays of panel edges.  Returns the per-panel integrals.
    """
    x, w = _gl_rule(order)
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    nodes = mid + half * x[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return (half[:, 0]) * (vals * w[None, :]).sum(axis=1)


def integrate_adaptive(f, a, b, rel_tol=1e-10, abs_tol=0.0, order=16,
                       max_panels=4096, init_panels=8):
    """Integrate vectorized f over [a, b] by adaptive panel bisection.

    The per-panel error estimate is the difference between the order-n and
    order-2n Gauss rules.  Returns (value, error_estimate).
    """
    if b <= a:
        return 0.0, 0.0
    edges = np.linspace(a, b, init_panels + 1)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    accepted = 0.0
    accepted_err = 0.0
    for _ in range(64):
        coarse = _panel_sums(f, lo, hi, order)
        fine = _panel_sums(f, lo, hi, 2 * order)
        err = np.abs(fine - coarse)
        scale = abs(accepted + fine.sum())
        tol_here = max(abs_tol, rel_tol * scale)
        # spread the budget over panels by width
        budget = tol_here * (hi - lo) / (b - a)
        ok = (err <= np.maximum(budget, 1e-300)) | (hi - lo <= 1e-14 * (b - a))
        accepted += fine[ok].sum()
        accepted_err += err[ok].sum()
        if ok.all():
            return accepted, accepted_err
        lo_bad, hi_bad = lo[~ok], hi[~ok]
        if 2 * lo_bad.size + (ok.sum()) > max_panels:
            # give up splitting, absorb the remainder
            accepted += fine[~ok].sum()
            accepted_err += err[~ok].sum()
            return accepted, accepted_err
        mid = 0.5 * (lo_bad + hi_bad)
        lo = np.concatenate([lo_bad, mid])
        hi = np.concatenate([mid, hi_bad])
    accepted += fine[~ok].sum()
    accepted_err += err[~ok].sum()
    return accepted, accepted_err


def integrate_log(log_f, a, b, rel_tol=1e-10, order=16, max_panels=4096,
                  scan_points=257):
    """Integrate exp(log_f) over [a, b] without leaving log space.

    log_f is a vectorized map returning log-integrand values (may be -inf).
    A coarse scan locates the maximum M; the integral of exp(log_f - M) is
    then O(1) and handled by the adaptive rule.  Returns (log_integral,
    rel_error_estimate).  log_integral is -inf when the mass underflows
    entirely, which cannot happen for finite M.
    """
    s = np.linspace(a, b, scan_points)
    ls = log_f(s)
    m = np.max(ls)
    if not np.isfinite(m):
        return -np.inf, 0.0

    def shifted(x):
        return np.exp(log_f(x) - m)

    val, err = integrate_adaptive(shifted, a, b, rel_tol=rel_tol, order=order,
                                  max_panels=max_panels)
    if val <= 0.0:
        return -np.inf, 0.0
    return m + np.log(val), err / val


def wynn_epsilon(partial_sums):
    """Wynn epsilon acceleration of a sequence of partial sums.

    Returns (best_estimate, error_estimate) taken from the even columns of
    the epsilon table.  Falls back to the last partial sum for short input.
    """
    s = np.asarray(partial_sums, dtype=float)
    scale = float(np.max(np.abs(s))) + 1e-300
    # truncate once successive sums agree to machine precision; further
    # terms are noise and poison the epsilon table
    diffs = np.abs(np.diff(s))
    converged = np.nonzero(diffs <= 1e-15 * scale)[0]
    if converged.size:
        k = converged[0] + 1
        return s[k], diffs[converged[0]]
    n = s.size
    if n == 1:
        return s[0], np.inf
    best = s[-1]
    best_err = abs(s[-1] - s[-2])
    eps_prev = np.zeros(n + 1)
    eps_cur = s.copy()
    col = 0
    while eps_cur.size >= 2:
        diff = np.diff(eps_cur)
        if np.any(np.abs(diff) <= 1e-15 * scale):
            break
        eps_prev, eps_cur = eps_cur, eps_prev[1:eps_cur.size] + 1.0 / diff
        col += 1
        # odd columns are auxiliary reciprocals, even columns estimate
        if col % 2 == 0 and eps_cur.size >= 2:
            err = abs(eps_cur[-1] - eps_cur[-2])
            good = (np.isfinite(err) and np.isfinite(eps_cur[-1])
                    and abs(eps_cur[-1]) <= 10.0 * scale)
            if good and err < best_err:
                best_err = err
                best = eps_cur[-1]
    return best, best_err


def sum_oscillatory(panel_f, edges, rel_tol=1e-9, order=24, min_terms=8):
    """Sum integrals of panel_f over consecutive [edges[k], edges[k+1]].

    Intended for integrands oscillating with sign flips roughly aligned
    with the edges; partial sums are accelerated with Wynn epsilon.
    panel_f(lo, hi) must return per-panel integrals for edge arrays.
    Returns (value, error_estimate).
    """
    edges = np.asarray(edges, dtype=float)
    terms = panel_f(edges[:-1], edges[1:])
    partial = np.cumsum(terms)
    best, best_err = wynn_epsilon(partial[: max(min_terms, 4)])
    for k in range(max(min_terms, 4), partial.size + 1, 4):
        est, err = wynn_epsilon(partial[:k])
        if err < best_err:
            best, best_err = est, err
        if best_err <= rel_tol * max(abs(best), 1e-300):
            break
    return best, best_err
