"""Jump and Green density quadrature against closed forms and scans."""

import json
import math

import numpy as np
import pytest

from levypot.bernstein import parse_phi, user_tabulated
from levypot.errors import TransienceError, UnsupportedKindError
from levypot.kernels import (build_kernel_table, green_density,
                             green_density_fourier, green_kernel_table,
                             jump_density, jump_kernel_table,
                             jump_mass_beyond, jump_second_moment_within,
                             log_green_density, log_jump_density,
                             verify_doubling, verify_jg_estimates)

D = 3
RADII = np.geomspace(0.05, 20.0, 13)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_jump_density_matches_riesz_kernel(alpha):
    from levypot.potential import StableOracle
    orc = StableOracle(D, alpha)
    f = parse_phi(f"stable:alpha={alpha:g}")
    j = jump_density(f, D, RADII)
    ref = orc.jump(RADII)
    assert np.max(np.abs(j / ref - 1.0)) < 1e-9


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_green_density_matches_riesz_kernel(alpha):
    from levypot.potential import StableOracle
    orc = StableOracle(D, alpha)
    f = parse_phi(f"stable:alpha={alpha:g}")
    g = green_density(f, D, RADII)
    ref = orc.green(RADII)
    assert np.max(np.abs(g / ref - 1.0)) < 1e-9


def test_exact_power_homogeneity(phi_stable):
    # r^{-d-alpha} and r^{alpha-d} laws pin the doubling ratios exactly
    r = np.geomspace(0.2, 5.0, 7)
    jr = jump_density(phi_stable, D, r)
    j2r = jump_density(phi_stable, D, 2.0 * r)
    assert np.max(np.abs(j2r / jr - 2.0 ** (-D - 1.0))) < 1e-10
    gr = green_density(phi_stable, D, r)
    g2r = green_density(phi_stable, D, 2.0 * r)
    assert np.max(np.abs(g2r / gr - 2.0 ** (1.0 - D))) < 1e-10


def test_log_routes_report_errors(phi_stable):
    lj, ej = log_jump_density(phi_stable, D, 1.0)
    assert math.exp(lj) == pytest.approx(jump_density(phi_stable, D, 1.0))
    assert 0 <= ej < 1e-8
    lg, eg = log_green_density(phi_stable, D, 1.0)
    assert math.exp(lg) == pytest.approx(green_density(phi_stable, D, 1.0))
    assert 0 <= eg < 1e-8


def test_fourier_route_agrees_with_time_domain(phi_stable):
    r = np.geomspace(0.1, 10.0, 9)
    gt = green_density(phi_stable, D, r)
    gf, rel = green_density_fourier(phi_stable, D, r)
    assert np.max(np.abs(gf / gt - 1.0)) < 1e-6
    assert np.all(rel < 1e-5)


def test_fourier_route_mixture_positive_decreasing(phi_mix):
    r = np.geomspace(0.05, 50.0, 21)
    g, rel = green_density_fourier(phi_mix, D, r)
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)
    assert np.all(rel < 1e-5)


def test_jump_mass_beyond_closed_form(phi_stable):
    # alpha = 1, d = 3: total intensity outside radius R is 4/(pi R)
    for R in (0.5, 2.0, 7.0):
        m, err = jump_mass_beyond(phi_stable, D, R)
        assert m == pytest.approx(4.0 / (math.pi * R), rel=1e-10)
        assert err < 1e-8


def test_jump_second_moment_closed_form(phi_stable):
    # int_{|y|<R} |y|^2 j dy = (1/pi^2) * 4 pi * R = 4 R / pi
    for R in (1.0, 3.0):
        s, err = jump_second_moment_within(phi_stable, D, R)
        assert s == pytest.approx(4.0 * R / math.pi, rel=1e-10)
        assert err < 1e-8


def test_doubling_constant_stable(phi_stable):
    rep = verify_doubling(phi_stable, D)
    assert rep.verdict == "bounded"
    assert rep.c == pytest.approx(16.0, rel=1e-10)
    near = verify_doubling(phi_stable, D, scale=1.0 + 1e-9)
    assert near.c == pytest.approx(1.0, abs=1e-7)


def test_jg_comparability_stable_is_tight(phi_stable):
    rep = verify_jg_estimates(phi_stable, D, points=17)
    assert rep.verdict == "bounded"
    assert rep.j_spread == pytest.approx(1.0, abs=1e-6)
    assert rep.g_spread == pytest.approx(1.0, abs=1e-6)
    assert rep.stable_under_refinement


@pytest.mark.parametrize("spec", ["mix:0.5,1+1.5,1", "relativistic:alpha=1,m=1"])
def test_jg_comparability_bounded(spec):
    # the relativistic tail is exponential, so the log-ratio spread is huge
    # but finite; the default grid keeps the refinement shift at zero
    rep = verify_jg_estimates(parse_phi(spec), D)
    assert rep.verdict == "bounded"
    assert np.isfinite(rep.j_spread_log10)
    assert rep.refine_shift_log10 <= math.log10(1.05) + 1e-9


def test_kernel_table_round_trip(tmp_path, phi_stable):
    t = build_kernel_table(phi_stable, D, np.geomspace(0.1, 10.0, 5))
    assert t.green_route == "time-domain"
    assert not any(t.flags)
    rows = t.to_rows()
    assert {"r", "log_j", "j", "j_err", "flagged", "log_g", "g",
            "g_err"} <= set(rows[0])
    p = tmp_path / "table.json"
    t.to_json(p)
    payload = json.loads(p.read_text())
    assert payload["schema"] == "levypot.kernel_table.v1"
    assert len(payload["rows"]) == 5
    c = tmp_path / "table.csv"
    t.to_csv(c)
    lines = c.read_text().strip().splitlines()
    assert len(lines) == 6 and lines[0].startswith("r,")


def test_kernel_table_fourier_route(phi_mix):
    t = build_kernel_table(phi_mix, D, np.geomspace(0.5, 2.0, 3))
    assert t.green_route == "fourier"
    assert t.log_g is not None


def test_kernel_table_recurrent_drops_green():
    f = parse_phi("stable:alpha=1")
    t = build_kernel_table(f, 1, np.geomspace(0.5, 2.0, 3))
    assert t.green_route == "none"
    assert t.log_g is None


def test_fast_tables_track_quadrature(phi_stable, phi_mix):
    tj = jump_kernel_table(phi_stable, D)
    assert tj.held_out_dev < 1e-10
    r = np.geomspace(0.2, 5.0, 5)
    assert np.max(np.abs(tj(r) / jump_density(phi_stable, D, r) - 1.0)) < 1e-8
    # outside the tabulated window the evaluator returns zero mass
    assert tj(1e9) == 0.0
    tg = green_kernel_table(phi_mix, D)
    assert tg.held_out_dev < 1e-6
    gf, _ = green_density_fourier(phi_mix, D, 1.0)
    assert tg(1.0) == pytest.approx(gf, rel=1e-6)


def test_green_requires_transience():
    with pytest.raises(TransienceError):
        green_density(parse_phi("stable:alpha=1"), 1, 1.0)
    with pytest.raises(TransienceError):
        green_density_fourier(parse_phi("stable:alpha=1"), 1, 1.0)


def test_time_domain_green_unsupported_for_mixture(phi_mix):
    with pytest.raises(UnsupportedKindError) as ei:
        log_green_density(phi_mix, D, 1.0)
    assert "green_density_fourier" in str(ei.value)


def test_tabulated_entry_rejected(phi_stable):
    xs = np.geomspace(1e-3, 1e3, 33)
    t = user_tabulated(xs, phi_stable.phi(xs))
    with pytest.raises(UnsupportedKindError):
        jump_density(t, D, 1.0)
