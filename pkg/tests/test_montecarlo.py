"""Subordinator sampling laws, exit walks, and path-functional estimators."""

import csv
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from levypot.bernstein import parse_phi
from levypot.errors import DomainSpecError
from levypot.geometry import Ball, ExteriorBall, HalfSpace, Intersection
from levypot.montecarlo import (CUTOFF, EXITED, HORIZON, PathConfig,
                                SubordinatorSampler, estimate_green,
                                estimate_harmonic, estimate_poisson_kernel,
                                sample_increment, sample_sbm_increment,
                                simulate_exits, write_exits_csv)


def _rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("spec,scheme", [
    ("stable:alpha=1", "exact-stable"),
    ("stable:alpha=1", "jump-compensation"),
    ("mix:0.5,1+1.5,1", "jump-compensation"),
    ("relativistic:alpha=1,m=1", "jump-compensation"),
])
def test_subordinator_laplace_transform(spec, scheme):
    f = parse_phi(spec)
    s = SubordinatorSampler(f, scheme=scheme)
    h = 0.7
    draws = s.sample_increment(np.full(40000, h), _rng(1))
    for lam in (0.5, 2.0):
        target = math.exp(-h * f.phi(lam))
        vals = np.exp(-lam * draws)
        z = (np.mean(vals) - target) / (np.std(vals) / math.sqrt(vals.size))
        assert abs(z) < 3.5


def test_displacement_characteristic_function(phi_mix):
    s = SubordinatorSampler(phi_mix)
    h = 0.5
    disp = sample_sbm_increment(s, np.full(40000, h), 3, _rng(2))
    for xi_len in (0.5, 1.0, 2.0):
        xi = np.array([0.0, xi_len, 0.0])
        target = math.exp(-h * phi_mix.phi(xi_len ** 2))
        vals = np.cos(disp @ xi)
        z = (np.mean(vals) - target) / (np.std(vals) / math.sqrt(vals.size))
        assert abs(z) < 3.5


def test_increments_are_infinitely_divisible(phi_mix):
    # S_h should match the sum of two independent S_{h/2} in law
    s = SubordinatorSampler(phi_mix)
    n = 10000
    whole = s.sample_increment(np.full(n, 0.8), _rng(3))
    halves = s.sample_increment(np.full(2 * n, 0.4), _rng(4))
    summed = halves[:n] + halves[n:]
    assert ks_2samp(whole, summed).pvalue > 0.01


def test_displacement_isotropy(phi_stable):
    s = SubordinatorSampler(phi_stable)
    disp = sample_sbm_increment(s, np.full(30000, 1.0), 3, _rng(5))
    units = disp / np.linalg.norm(disp, axis=1, keepdims=True)
    se = 1.0 / math.sqrt(3.0 * units.shape[0])
    assert np.all(np.abs(units.mean(axis=0)) < 3.5 * se)


def test_zero_and_negative_time_increments(phi_stable, phi_mix):
    for f in (phi_stable, phi_mix):
        s = SubordinatorSampler(f)
        assert sample_increment(s, 0.0, _rng(6)) == 0.0
        assert np.all(sample_sbm_increment(s, 0.0, 3, _rng(6)) == 0.0)
        with pytest.raises(DomainSpecError):
            s.sample_increment(np.array([-1.0]), _rng(6))


def test_scheme_validation(phi_mix):
    with pytest.raises(DomainSpecError):
        SubordinatorSampler(phi_mix, scheme="exact-stable")
    with pytest.raises(DomainSpecError):
        SubordinatorSampler(phi_mix, scheme="nope")


def test_path_config_with():
    cfg = PathConfig(seed=1)
    cfg2 = cfg.with_(theta=0.02, n_paths=5)
    assert cfg2.theta == 0.02 and cfg2.n_paths == 5
    assert cfg.theta == 0.1 and cfg.n_paths == 10000


def test_walk_prefix_is_block_stable(phi_stable):
    # growing n_paths must extend, never reshuffle, earlier paths
    D = Ball(1.0)
    c1 = PathConfig(seed=5, n_paths=8192, theta=0.05)
    b1 = simulate_exits(D, np.zeros(3), phi_stable, c1)
    b2 = simulate_exits(D, np.zeros(3), phi_stable, c1.with_(n_paths=16384))
    assert np.array_equal(b1.positions, b2.positions[:8192])
    assert np.array_equal(b1.times, b2.times[:8192])
    assert np.array_equal(b1.status, b2.status[:8192])


def test_exits_land_outside_the_domain(phi_stable):
    D = Ball(1.0)
    cfg = PathConfig(seed=7, n_paths=4096, theta=0.05)
    b = simulate_exits(D, np.zeros(3), phi_stable, cfg)
    assert b.censored_fraction == 0.0
    assert not np.any(D.contains(b.positions))
    assert np.all(b.times > 0)
    assert np.all(np.linalg.norm(b.positions, axis=1) >= 1.0)


def test_horizon_and_cutoff_statuses(phi_stable):
    H = HalfSpace(3)
    x = np.array([0.0, 0.0, 1.0])
    cfg = PathConfig(seed=11, n_paths=512, theta=0.02)
    bh = simulate_exits(H, x, phi_stable, cfg.with_(t_max=1e-12))
    assert set(bh.status.tolist()) == {HORIZON}
    assert bh.fraction(HORIZON) == 1.0
    bc = simulate_exits(H, x, phi_stable, cfg.with_(rho_max=3.0,
                                                    n_paths=2048))
    assert CUTOFF in bc.status
    assert EXITED in bc.status
    assert bc.censored_fraction == bc.fraction(HORIZON) + bc.fraction(CUTOFF)


def test_starts_override_and_occupation_rate(phi_stable):
    D = Ball(1.0)
    cfg = PathConfig(seed=11, n_paths=512, theta=0.02)
    shared = simulate_exits(D, np.zeros(3), phi_stable, cfg)
    tiled = simulate_exits(D, np.zeros(3), phi_stable, cfg,
                           starts=np.zeros((512, 3)))
    assert np.array_equal(shared.positions, tiled.positions)
    # unit rate integrates to the elapsed walk time exactly
    b = simulate_exits(D, np.zeros(3), phi_stable, cfg,
                       occupation_of=lambda p: np.ones(p.shape[0]))
    assert np.array_equal(b.occupation, b.times)
    with pytest.raises(DomainSpecError):
        simulate_exits(D, np.zeros(3), phi_stable, cfg,
                       starts=np.zeros((7, 3)))


def test_write_exits_csv(tmp_path, phi_stable):
    D = Ball(1.0)
    cfg = PathConfig(seed=2, n_paths=64, theta=0.05)
    b = simulate_exits(D, np.zeros(3), phi_stable, cfg)
    p = tmp_path / "exits.csv"
    write_exits_csv(b, p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "x1", "x2", "time", "status", "jump_exit"]
    assert len(rows) == 65
    assert {r[4] for r in rows[1:]} <= {"exited", "horizon", "cutoff"}
    got = np.array([[float(v) for v in r[:3]] for r in rows[1:]])
    assert np.array_equal(got, b.positions)


def test_constant_payoff_is_exact(phi_stable):
    D = Ball(1.0)
    cfg = PathConfig(seed=3, n_paths=2048, theta=0.05)
    est = estimate_harmonic(D, lambda p: np.ones(p.shape[0]), np.zeros(3),
                            phi_stable, cfg)
    assert est.value == 1.0
    assert est.stderr == 0.0
    assert est.censored_fraction == 0.0


def test_hitting_probability_against_closed_form(phi_stable):
    # unit ball hit from distance 2, d=3: P = 1 - sqrt(1 - 1/4)
    E = ExteriorBall(1.0)
    cfg = PathConfig(seed=3, n_paths=10000, theta=0.01, rho_max=1e3)
    ind = lambda pos: (np.linalg.norm(pos, axis=1) <= 1.0).astype(float)
    est = estimate_harmonic(E, ind, np.array([0.0, 0.0, 2.0]), phi_stable,
                            cfg)
    target = 1.0 - math.sqrt(0.75)
    assert abs(est.value - target) < 3.5 * est.stderr + 0.003


def test_theta_halving_keeps_hitting_estimate(phi_stable):
    E = ExteriorBall(1.0)
    ind = lambda pos: (np.linalg.norm(pos, axis=1) <= 1.0).astype(float)
    x = np.array([0.0, 0.0, 2.0])
    cfg = PathConfig(seed=9, n_paths=6000, theta=0.02, rho_max=1e3)
    a = estimate_harmonic(E, ind, x, phi_stable, cfg)
    b = estimate_harmonic(E, ind, x, phi_stable, cfg.with_(theta=0.01))
    assert abs(a.value - b.value) < 3.0 * (a.stderr + b.stderr) + 0.005


def test_tower_property_through_intermediate_domain(phi_stable):
    # averaging the exact hitting profile over the exit of a subdomain
    # must reproduce the profile at the start point
    E = ExteriorBall(1.0)
    U = Intersection([E, Ball(0.5, center=(0.0, 0.0, 2.0))])

    def profile(pos):
        r = np.linalg.norm(pos, axis=1)
        out = np.ones(r.size)
        far = r > 1.0
        out[far] = 1.0 - np.sqrt(1.0 - 1.0 / r[far] ** 2)
        return out

    cfg = PathConfig(seed=13, n_paths=20000, theta=0.01)
    est = estimate_harmonic(U, profile, np.array([0.0, 0.0, 2.0]),
                            phi_stable, cfg)
    target = 1.0 - math.sqrt(0.75)
    assert abs(est.value - target) < 3.5 * est.stderr + 0.003


def test_green_in_ball_matches_oracle(phi_stable, oracle):
    D = Ball(1.0)
    x = np.array([0.0, 0.0, 0.3])
    y = np.array([0.0, 0.0, -0.2])
    cfg = PathConfig(seed=4, n_paths=20000, theta=0.01)
    est = estimate_green(D, x, y, phi_stable, cfg)
    ref = oracle.ball_green(1.0, x, y)
    assert abs(est.value - ref) < 3.5 * est.stderr + 0.01 * ref
    assert est.quad_err < 1e-10
    with pytest.raises(DomainSpecError):
        estimate_green(D, x, x, phi_stable, cfg)


def test_poisson_kernel_matches_oracle(phi_stable, oracle):
    D = Ball(1.0)
    z = np.array([0.0, 0.0, 1.8])
    cfg = PathConfig(seed=4, n_paths=2000, theta=0.02)
    est = estimate_poisson_kernel(D, np.zeros(3), z, phi_stable, cfg,
                                  n_radial=12, n_polar=6)
    ref = oracle.ball_poisson(1.0, np.zeros(3), z)
    assert abs(est.value - ref) < 3.0 * (est.stderr + est.quad_err) \
        + 0.03 * ref
    assert any("kde route" in n for n in est.notes)
