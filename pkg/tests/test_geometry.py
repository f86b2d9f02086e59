"""Domain specs, membership and distance literals, fatness certificates."""

import math

import numpy as np
import pytest

from levypot.errors import CertificateError, DomainSpecError
from levypot.geometry import (Ball, BallChain, Cone, ExteriorBall, HalfSpace,
                              Intersection, SlabComplement, Union,
                              FatnessCertificate, contains, dist_to_complement,
                              parse_domain, propose_witness,
                              recenter_certificate, verify_fatness)

CATALOG_DOMAINS = ("halfspace", "extball:r=1", "cone:aperture=0.5", "slab",
                   "chain:base=2")


def test_membership_literals():
    H = HalfSpace(3)
    assert contains(H, (0.0, 0.0, 1.0))
    assert not contains(H, (0.0, 0.0, -1.0))
    assert dist_to_complement(H, (0.0, 0.0, 2.0)) == 2.0
    E = ExteriorBall(1.0)
    assert not contains(E, np.zeros(3))
    assert contains(E, (0.0, 0.0, 2.0))
    assert dist_to_complement(E, (0.0, 0.0, 2.0)) == 1.0
    B = Ball(1.0)
    assert B.bounded and contains(B, np.zeros(3))
    assert dist_to_complement(B, np.zeros(3)) == 1.0
    S = SlabComplement(3)
    assert contains(S, (0.0, 0.0, -1.0))
    assert not contains(S, (0.0, 0.0, 0.5))
    assert dist_to_complement(S, (0.0, 0.0, 2.0)) == 1.0
    assert dist_to_complement(S, (0.0, 0.0, -3.0)) == 3.0


def test_chain_centers_and_gaps():
    C = BallChain(2.0)
    assert contains(C, C.center(3))
    # ball n has radius 2^(n-2); the next ball's boundary sits at distance
    # 2^(n-1) from the center, so the own boundary is nearest
    for n in range(1, 8):
        assert dist_to_complement(C, C.center(n)) == pytest.approx(
            2.0 ** (n - 2), rel=1e-14)
    mid = 0.5 * (C.center(2) + C.center(3))
    assert not contains(C, mid)


def test_chain_disjointness_guard():
    with pytest.raises(DomainSpecError):
        BallChain(1.2)


def test_cone_literals():
    K = Cone(0.25 * math.pi)
    assert contains(K, (0.0, 0.0, 1.0))
    assert not contains(K, (1.0, 0.0, 0.0))
    # axis point: nearest lateral surface at angle pi/4
    assert dist_to_complement(K, (0.0, 0.0, 2.0)) == pytest.approx(
        2.0 * math.sin(0.25 * math.pi), rel=1e-14)
    with pytest.raises(DomainSpecError):
        Cone(2.0)


def test_parse_grammar():
    assert parse_domain("halfspace").spec_id == "halfspace"
    assert parse_domain("extball:r=2").radius == 2.0
    assert parse_domain("annulus:r1=1,r2=3").spec_id == "annulus:r1=1,r2=3"
    D = parse_domain("halfspace&extball:r=1")
    assert isinstance(D, Intersection)
    assert D.spec_id == "halfspace&extball:r=1"
    for bad in ("nosuch", "annulus:r1=3,r2=1", "ball:r=-1", "annulus:r1=1"):
        with pytest.raises(DomainSpecError):
            parse_domain(bad)


def test_combinator_distances_are_consistent():
    D = parse_domain("halfspace&extball:r=1")
    x = np.array([0.0, 0.0, 2.0])
    assert contains(D, x)
    assert dist_to_complement(D, x) == 1.0
    assert not contains(D, (0.0, 0.0, 0.5))
    U = Union([Ball(1.0), Ball(1.0, center=(0.0, 0.0, 5.0))])
    assert U.bounded
    assert contains(U, np.zeros(3)) and contains(U, (0.0, 0.0, 5.0))
    assert dist_to_complement(U, np.zeros(3)) == 1.0


@pytest.mark.parametrize("spec", CATALOG_DOMAINS)
def test_distance_is_one_lipschitz(spec):
    D = parse_domain(spec)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-40.0, 40.0, size=(400, 3))
    steps = rng.normal(size=(400, 3))
    steps *= rng.uniform(0.01, 5.0, size=(400, 1)) / np.linalg.norm(
        steps, axis=1, keepdims=True)
    d0 = dist_to_complement(D, pts)
    d1 = dist_to_complement(D, pts + steps)
    assert np.all(np.abs(d1 - d0) <= np.linalg.norm(steps, axis=1) + 1e-9)


@pytest.mark.parametrize("spec", CATALOG_DOMAINS)
def test_catalog_certificates_verify_exactly(spec):
    D = parse_domain(spec)
    cert = propose_witness(D)
    rep = verify_fatness(D, cert)
    assert rep.all_passed
    assert all(rep.separation_ok)
    assert rep.failures == ()


def test_chain_witness_scale_selection():
    D = parse_domain("chain:base=2")
    cert = propose_witness(D)
    a = cert.witness(2.0 ** 5)
    assert float(a[-1]) in (2.0 ** 6, 2.0 ** 7)


def test_bounded_domain_has_no_certificate():
    with pytest.raises(CertificateError):
        propose_witness(Ball(1.0))


def test_boundary_case_certificate_fails_window_check():
    # kappa = 1/2 with witness 2r sits exactly on the closed window edge
    # |A_r| < r / kappa, so every grid scale fails that one inequality
    H = HalfSpace(3)
    cert = FatnessCertificate(
        "halfspace", 0.5, 1.0,
        lambda r: np.array([0.0, 0.0, 2.0 * r]), "boundary witness 2r")
    rep = verify_fatness(H, cert)
    assert not rep.all_passed
    assert all(name == "window" for _, name in rep.failures)
    assert not any(rep.window_ok)
    assert all(rep.interior_ok) and all(rep.outside_ok)


def test_verify_rejects_bad_inputs():
    H = HalfSpace(3)
    cert = propose_witness(H)
    with pytest.raises(CertificateError):
        verify_fatness(H, cert, r_lo=0.5 * cert.R)
    bad = FatnessCertificate("halfspace", 0.9, 1.0, cert.witness, "bad kappa")
    with pytest.raises(CertificateError):
        verify_fatness(H, bad)


def test_recenter_certificate_passes_off_origin():
    H = HalfSpace(3)
    cert = propose_witness(H)
    moved = recenter_certificate(cert, (0.0, 0.0, 5.0))
    assert moved.kappa == pytest.approx(cert.kappa / 3.0)
    assert moved.R == 5.0
    rep = verify_fatness(H, moved)
    assert rep.all_passed
    # trivial recenter at the origin only shrinks constants, still passes
    rep0 = verify_fatness(H, recenter_certificate(cert, np.zeros(3)))
    assert rep0.all_passed


def test_recenter_threshold_tracks_anchor_norm():
    E = parse_domain("extball:r=1")
    cert = propose_witness(E)
    moved = recenter_certificate(cert, (1.0, 0.0, 0.0))
    assert moved.R == max(cert.R, 1.0)
    assert verify_fatness(E, moved).all_passed
