"""Catalog evaluation, Lemma-style bounds, scaling fits, transience."""

import math

import numpy as np
import pytest

from levypot.bernstein import (DEFAULT_CATALOG_IDS, check_bernstein_bounds,
                               check_global_scaling,
                               estimate_scaling_profile, eval_phi, parse_phi,
                               sign_pattern_check, transience_check,
                               user_tabulated)
from levypot.errors import DomainSpecError, LevypotError
from levypot.kernels import jump_density, verify_integral_estimates

from conftest import CATALOG_IDS


def test_eval_literals():
    assert eval_phi(parse_phi("stable:alpha=1"), 4.0) == pytest.approx(
        2.0, rel=1e-14)
    assert eval_phi(parse_phi("mix:0.5,1+1.5,1"), 16.0) == pytest.approx(
        10.0, rel=1e-14)
    assert eval_phi(parse_phi("relativistic:alpha=1,m=1"), 3.0) == \
        pytest.approx(1.0, rel=1e-14)


def test_parse_rejects_malformed_ids():
    for bad in ("", "stable", "stable:alpha=0", "stable:alpha=2",
                "mix:", "nope:alpha=1"):
        with pytest.raises(DomainSpecError):
            parse_phi(bad)


def test_default_catalog_parses():
    assert set(CATALOG_IDS) == set(DEFAULT_CATALOG_IDS)
    for s in DEFAULT_CATALOG_IDS:
        f = parse_phi(s)
        assert f.phi(1.0) > 0


def test_eval_rejects_nonpositive_argument(phi_stable):
    with pytest.raises(LevypotError):
        eval_phi(phi_stable, 0.0)
    with pytest.raises(LevypotError):
        eval_phi(phi_stable, -2.0)


def test_bernstein_bounds_ratio_cases(phi_stable, phi_mix):
    # lambda = 1 gives ratio 1; lambda = 2 at t = 1 gives sqrt(2)
    assert phi_stable.phi(2.0) / phi_stable.phi(1.0) == pytest.approx(
        math.sqrt(2.0), rel=1e-14)
    rho = phi_mix.phi(0.25 * 4.0) / phi_mix.phi(4.0)
    assert 0.25 <= rho <= 1.0


@pytest.mark.parametrize("spec", CATALOG_IDS)
def test_bernstein_bounds_hold_on_grid(spec):
    rep = check_bernstein_bounds(parse_phi(spec))
    assert rep.passed
    assert rep.worst_lower_margin <= 1e-9
    assert rep.worst_upper_margin <= 1e-9


@pytest.mark.parametrize("spec", CATALOG_IDS)
def test_monotone_increasing(spec):
    f = parse_phi(spec)
    lam = np.geomspace(1e-6, 1e6, 121)
    vals = f.phi(lam)
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("spec", CATALOG_IDS)
def test_sign_pattern_to_order_three(spec):
    rows = sign_pattern_check(parse_phi(spec))
    assert rows and all(r[-1] for r in rows)


def test_scaling_profile_stable_exact():
    p = estimate_scaling_profile(parse_phi("stable:alpha=1"))
    for d in (p.delta1, p.delta2, p.delta3, p.delta4):
        assert d == pytest.approx(0.5, abs=1e-6)
    for a in (p.a1, p.a2, p.a3, p.a4):
        assert a == pytest.approx(1.0, abs=1e-6)
    assert p.h1_valid and p.h2_valid


def test_scaling_profile_mixture():
    p = estimate_scaling_profile(parse_phi("mix:0.5,1+1.5,1"))
    assert p.delta_low == pytest.approx(0.25, abs=5e-3)
    assert p.delta_high == pytest.approx(0.75, abs=5e-3)
    assert 0.0 < p.delta_low < p.delta_high < 1.0
    assert p.h1_valid and p.h2_valid


def test_scaling_profile_relativistic_flags_zero_end():
    p = estimate_scaling_profile(parse_phi("relativistic:alpha=1,m=1"))
    # near-infinity behavior is the stable alpha/2; the zero end sits at
    # the Brownian-like boundary and the profile records the degeneracy
    assert p.delta1 == pytest.approx(0.5, abs=5e-3)
    assert not p.h2_valid
    assert any("boundary-degenerate" in n for n in p.notes)


def test_global_scaling_stable_tight():
    rep = check_global_scaling(parse_phi("stable:alpha=1"))
    assert rep.passed
    assert rep.c == pytest.approx(1.0, abs=1e-6)
    f = parse_phi("stable:alpha=1")
    assert f.phi(100.0) / f.phi(1.0) == pytest.approx(10.0, rel=1e-14)


def test_global_scaling_mixture_passes():
    rep = check_global_scaling(parse_phi("mix:0.5,1+1.5,1"))
    assert rep.passed
    assert np.isfinite(rep.c) and rep.c >= 1.0


def test_transience_verdicts():
    assert transience_check(parse_phi("stable:alpha=1"), 3).verdict == \
        "transient"
    # d = 1 fails the strict dimension inequality for alpha = 1
    assert transience_check(parse_phi("stable:alpha=1"), 1).verdict == \
        "not-established"
    # the mixture in d = 2: low-frequency exponent 1/4 keeps the
    # Chung-Fuchs integral convergent and the dimension margin positive
    rep = transience_check(parse_phi("mix:0.5,1+1.5,1"), 2)
    assert rep.verdict == "transient"
    assert rep.dim_margin > 0 and rep.converged


def test_integral_estimate_constants_stable_exact():
    rep = verify_integral_estimates(parse_phi("stable:alpha=1"))
    assert rep.c_a_max == pytest.approx(2.0, abs=1e-8)
    assert rep.c_c_low == pytest.approx(1.0, abs=1e-8)
    assert rep.c_c_high == pytest.approx(1.0, abs=1e-8)


def test_integral_estimate_constants_mixture_uniform():
    rep = verify_integral_estimates(parse_phi("mix:0.5,1+1.5,1"),
                                    lam_grid=np.geomspace(1e-2, 1e2, 9))
    assert np.isfinite(rep.lam_uniform_spread)
    assert rep.lam_uniform_spread < 10.0


def test_user_tabulated_round_trip_and_range():
    f = parse_phi("stable:alpha=1")
    xs = np.geomspace(1e-3, 1e3, 41)
    t = user_tabulated(xs, f.phi(xs))
    assert t.phi(4.0) == pytest.approx(2.0, rel=1e-6)
    rep = check_bernstein_bounds(t, lam_grid=np.geomspace(0.1, 10.0, 7),
                                 t_grid=np.geomspace(0.1, 10.0, 7))
    assert rep.passed
    with pytest.raises(LevypotError):
        t.phi(1e9)


def test_user_tabulated_rejected_by_kernel_quadrature():
    f = parse_phi("stable:alpha=1")
    xs = np.geomspace(1e-3, 1e3, 41)
    t = user_tabulated(xs, f.phi(xs))
    with pytest.raises(LevypotError):
        jump_density(t, 3, 1.0)
