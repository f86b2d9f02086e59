"""Open-set catalog with exact signed distances and fatness certificates.

Every domain exposes membership, a signed distance (negative inside) that
is exact on the catalog, and the interior distance-to-complement used by
the adaptive walk.  Unbounded catalog entries come with closed-form
witness maps r -> A_r certifying uniform fatness at infinity: a ball
B(A_r, kappa*r) inside the domain, outside radius r, within radius
r/kappa.  Certificates are verified pointwise with no tolerance; the
witness constructions keep a few percent of slack so exact float
comparisons are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CertificateError, DomainSpecError

__all__ = [
    "OpenSetSpec", "HalfSpace", "Ball", "ExteriorBall", "Annulus", "Cone",
    "SlabComplement", "BallChain", "Intersection", "Union", "parse_domain",
    "contains", "dist_to_complement", "FatnessCertificate", "propose_witness",
    "verify_fatness", "FatnessReport", "recenter_certificate",
]


class OpenSetSpec:
    """Base class; subclasses implement signed_distance and spec_id."""

    dim: int
    bounded: bool = False

    def signed_distance(self, x):
        raise NotImplementedError

    def contains(self, x):
        return self.signed_distance(x) < 0.0

    def dist_to_complement(self, x):
        return np.maximum(-self.signed_distance(x), 0.0)

    @property
    def spec_id(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec_id} d={self.dim}>"


def _norms(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(x * x, axis=-1))


class HalfSpace(OpenSetSpec):
    """Upper half space {x : x_d > 0}."""

    def __init__(self, dim=3):
        self.dim = dim

    def signed_distance(self, x):
        return -np.asarray(x, dtype=float)[..., -1]

    @property
    def spec_id(self):
        return "halfspace"


class Ball(OpenSetSpec):
    bounded = True

    def __init__(self, radius=1.0, center=None, dim=3):
        self.radius = float(radius)
        self.dim = dim if center is None else len(center)
        self.center = (np.zeros(self.dim) if center is None
                       else np.asarray(center, dtype=float))
        if self.radius <= 0:
            raise DomainSpecError("ball radius must be positive")

    def signed_distance(self, x):
        return _norms(np.asarray(x, dtype=float) - self.center) - self.radius

    @property
    def spec_id(self):
        return f"ball:r={self.radius:g}"


class ExteriorBall(OpenSetSpec):
    """Complement of a closed ball."""

    def __init__(self, radius=1.0, center=None, dim=3):
        self.radius = float(radius)
        self.dim = dim if center is None else len(center)
        self.center = (np.zeros(self.dim) if center is None
                       else np.asarray(center, dtype=float))
        if self.radius <= 0:
            raise DomainSpecError("ball radius must be positive")

    def signed_distance(self, x):
        return self.radius - _norms(np.asarray(x, dtype=float) - self.center)

    @property
    def spec_id(self):
        return f"extball:r={self.radius:g}"


class Annulus(OpenSetSpec):
    bounded = True

    def __init__(self, r_inner, r_outer, dim=3):
        if not 0 < r_inner < r_outer:
            raise DomainSpecError("annulus needs 0 < r1 < r2")
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)
        self.dim = dim

    def signed_distance(self, x):
        rho = _norms(x)
        return np.maximum(self.r_inner - rho, rho - self.r_outer)

    @property
    def spec_id(self):
        return f"annulus:r1={self.r_inner:g},r2={self.r_outer:g}"


class Cone(OpenSetSpec):
    """Open circular cone about +e_d with vertex at the origin.

    aperture is the half angle in radians, restricted to (0, pi/2] so the
    lateral-surface distance formula stays exact.
    """

    def __init__(self, aperture, dim=3):
        if not 0.0 < aperture <= 0.5 * math.pi:
            raise DomainSpecError("cone aperture must lie in (0, pi/2]")
        self.aperture = float(aperture)
        self.dim = dim

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        rho = _norms(x)
        axial = x[..., -1]
        with np.errstate(invalid="ignore"):
            theta = np.arccos(np.clip(axial / np.where(rho > 0, rho, 1.0),
                                      -1.0, 1.0))
        gap = theta - self.aperture          # positive outside
        lateral = rho * np.sin(np.minimum(np.abs(gap), 0.5 * math.pi))
        out = np.where(gap >= 0.0, np.where(gap <= 0.5 * math.pi,
                                            lateral, rho), -lateral)
        return np.where(rho == 0.0, 0.0, out)

    @property
    def spec_id(self):
        return f"cone:aperture={self.aperture:g}"


class SlabComplement(OpenSetSpec):
    """{x_d < 0} union {x_d > 1}: two half spaces with a unit gap."""

    def __init__(self, dim=3):
        self.dim = dim

    def signed_distance(self, x):
        xd = np.asarray(x, dtype=float)[..., -1]
        return np.where(xd <= 0.5, xd, 1.0 - xd)

    @property
    def spec_id(self):
        return "slab"


class BallChain(OpenSetSpec):
    """Disjoint balls B(b^n e_d, b^(n-2)) for n >= 1 marching to infinity.

    Disjointness needs b^2 (b-1) > 1 + b; the dyadic case b = 2 has gap
    2^(n-2) between consecutive balls.
    """

    _MAX_N = 120

    def __init__(self, base=2.0, dim=3):
        b = float(base)
        if not b * b * (b - 1.0) > 1.0 + b:
            raise DomainSpecError("chain base too small; balls overlap")
        self.base = b
        self.dim = dim
        self._centers = b ** np.arange(1, self._MAX_N + 1)
        self._radii = b ** (np.arange(1, self._MAX_N + 1) - 2.0)

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        axial = x[..., -1]
        perp_sq = np.sum(x[..., :-1] ** 2, axis=-1)
        # only shells near the point's own scale can be nearest; slice a
        # window to keep batched evaluation cheap
        reach = float(np.max(np.abs(axial), initial=1.0)
                      + np.sqrt(np.max(perp_sq, initial=0.0)))
        n_hi = min(self._MAX_N, max(8, int(math.log(reach, self.base)) + 3))
        centers = self._centers[:n_hi]
        radii = self._radii[:n_hi]
        diffs = np.sqrt(perp_sq[..., None]
                        + (axial[..., None] - centers) ** 2)
        return np.min(diffs - radii, axis=-1)

    def center(self, n):
        out = np.zeros(self.dim)
        out[-1] = self.base ** n
        return out

    @property
    def spec_id(self):
        return f"chain:base={self.base:g}"


class Intersection(OpenSetSpec):
    """Intersection; signed distance is the max of the parts', which is
    the exact distance-to-complement on the interior side."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise DomainSpecError("empty intersection")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DomainSpecError("mixed dimensions in intersection")
        self.parts = parts
        self.dim = dims.pop()
        self.bounded = any(p.bounded for p in parts)

    def signed_distance(self, x):
        out = self.parts[0].signed_distance(x)
        for p in self.parts[1:]:
            out = np.maximum(out, p.signed_distance(x))
        return out

    @property
    def spec_id(self):
        return "&".join(p.spec_id for p in self.parts)


class Union(OpenSetSpec):
    """Union of separated parts; signed distance is the min of the parts',
    exact when the closures are disjoint."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise DomainSpecError("empty union")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DomainSpecError("mixed dimensions in union")
        self.parts = parts
        self.dim = dims.pop()
        self.bounded = all(p.bounded for p in parts)

    def signed_distance(self, x):
        out = self.parts[0].signed_distance(x)
        for p in self.parts[1:]:
            out = np.minimum(out, p.signed_distance(x))
        return out

    @property
    def spec_id(self):
        return "|".join(p.spec_id for p in self.parts)


def parse_domain(spec: str, dim=3) -> OpenSetSpec:
    """Parse a domain spec string, e.g. "halfspace", "extball:r=1",
    "cone:aperture=0.5", "chain:base=2", "halfspace&extball:r=1"."""
    if "&" in spec:
        return Intersection(parse_domain(p, dim) for p in spec.split("&"))
    head, _, rest = spec.partition(":")
    head = head.strip().lower()
    try:
        kv = dict(p.split("=") for p in rest.split(",")) if rest else {}
        if head == "halfspace":
            return HalfSpace(dim)
        if head == "ball":
            return Ball(float(kv.get("r", 1.0)), dim=dim)
        if head == "extball":
            return ExteriorBall(float(kv.get("r", 1.0)), dim=dim)
        if head == "annulus":
            return Annulus(float(kv["r1"]), float(kv["r2"]), dim=dim)
        if head == "cone":
            return Cone(float(kv.get("aperture", 0.5)), dim=dim)
        if head == "slab":
            return SlabComplement(dim)
        if head == "chain":
            return BallChain(float(kv.get("base", 2.0)), dim=dim)
    except DomainSpecError:
        raise
    except Exception as exc:
        raise DomainSpecError(f"cannot parse domain {spec!r}: {exc}") from exc
    raise DomainSpecError(f"unknown domain {spec!r}")


def contains(D: OpenSetSpec, x):
    return D.contains(x)


def dist_to_complement(D: OpenSetSpec, x):
    return D.dist_to_complement(x)


# -- fatness certificates -------------------------------------------------

@dataclass(frozen=True)
class FatnessCertificate:
    """Witness map r -> A_r with constants (kappa, R) claiming, for every
    r >= R (relative to the anchor point Q):

        dist_to_complement(A_r) >= kappa * r
        |A_r - Q| >= (1 + kappa) * r
        |A_r - Q| <  r / kappa
    """

    domain_id: str
    kappa: float
    R: float
    witness: Callable[[float], np.ndarray]
    witness_desc: str
    anchor: tuple = None  # None means the origin

    def anchor_point(self, dim):
        if self.anchor is None:
            return np.zeros(dim)
        return np.asarray(self.anchor, dtype=float)


def _axis_point(dim, scale):
    out = np.zeros(dim)
    out[-1] = scale
    return out


def propose_witness(D: OpenSetSpec, R_hint: Optional[float] = None
                    ) -> FatnessCertificate:
    """Closed-form witness for the unbounded catalog entries.

    Bounded sets and unrecognized combinations raise CertificateError.
    """
    if D.bounded:
        raise CertificateError(
            f"{D.spec_id} is bounded; no fatness at infinity")
    if isinstance(D, HalfSpace):
        return FatnessCertificate(
            D.spec_id, 1.0 / 3.0, R_hint or 1.0,
            lambda r: _axis_point(D.dim, 1.5 * r),
            "axis point at height 1.5r")
    if isinstance(D, ExteriorBall):
        rho0 = D.radius
        return FatnessCertificate(
            D.spec_id, 0.4, max(R_hint or 0.0, rho0),
            lambda r: D.center + _axis_point(D.dim, 2.0 * r),
            "axis point at radius 2r")
    if isinstance(D, Cone):
        kappa = min(0.45, 2.0 * math.sin(D.aperture) / 1.05)
        return FatnessCertificate(
            D.spec_id, kappa, R_hint or 1.0,
            lambda r: _axis_point(D.dim, 2.0 * r),
            "cone axis point at radius 2r")
    if isinstance(D, SlabComplement):
        return FatnessCertificate(
            D.spec_id, 1.0 / 3.0, R_hint or 1.0,
            lambda r: _axis_point(D.dim, -1.5 * r),
            "axis point at depth 1.5r in the lower half space")
    if isinstance(D, BallChain):
        b = D.base
        if abs(b - 2.0) > 1e-12:
            raise CertificateError("chain witness is derived for base 2")
        powers = 2.0 ** np.arange(1, D._MAX_N + 1)

        def witness(r):
            # smallest n with 2^n > 4r/3; then 2^n <= 8r/3 by minimality
            n_idx = int(np.searchsorted(powers, 4.0 * r / 3.0, side="right"))
            return D.center(n_idx + 1)

        return FatnessCertificate(
            D.spec_id, 0.3, max(R_hint or 0.0, 1.0), witness,
            "center of the first chain ball beyond 4r/3")
    raise CertificateError(f"no catalog witness for {D.spec_id}")


@dataclass(frozen=True)
class FatnessReport:
    domain_id: str
    kappa: float
    R: float
    r_grid: tuple
    interior_ok: tuple        # dist_to_complement(A_r) >= kappa r
    outside_ok: tuple         # |A_r - Q| >= (1+kappa) r
    window_ok: tuple          # |A_r - Q| < r/kappa
    separation_ok: tuple      # witness balls across paired scales disjoint
    all_passed: bool
    failures: tuple


def verify_fatness(D: OpenSetSpec, cert: FatnessCertificate,
                   r_lo: Optional[float] = None, r_hi: Optional[float] = None,
                   points: int = 25) -> FatnessReport:
    """Check the certificate on a log grid of scales, exactly (no slack).

    Also checks the two-scale separation property: the witness ball at
    scale r stays disjoint from the ball of radius r about the witness at
    scale (kappa/2)^-1 r.
    """
    r_lo = cert.R if r_lo is None else r_lo
    r_hi = 1e6 * cert.R if r_hi is None else r_hi
    if r_lo < cert.R:
        raise CertificateError("verification grid starts below the "
                               "certificate threshold R")
    kappa = cert.kappa
    if not 0.0 < kappa <= 0.5:
        raise CertificateError("kappa must lie in (0, 1/2]")
    q = cert.anchor_point(D.dim)
    grid = np.logspace(math.log10(r_lo), math.log10(r_hi), points)
    interior, outside, window, separation, failures = [], [], [], [], []
    for r in grid:
        a = np.asarray(cert.witness(r), dtype=float)
        da = float(D.dist_to_complement(a))
        dist_q = float(np.linalg.norm(a - q))
        ok1 = da >= kappa * r
        ok2 = dist_q >= (1.0 + kappa) * r
        ok3 = dist_q < r / kappa
        r_far = r / (0.5 * kappa)
        a_far = np.asarray(cert.witness(r_far), dtype=float)
        gap = float(np.linalg.norm(a - a_far)) - (0.5 * kappa * r + r)
        ok4 = gap > 0.0
        interior.append(ok1)
        outside.append(ok2)
        window.append(ok3)
        separation.append(ok4)
        for name, ok in (("interior", ok1), ("outside", ok2),
                         ("window", ok3), ("separation", ok4)):
            if not ok:
                failures.append((float(r), name))
    all_passed = not failures
    return FatnessReport(cert.domain_id, kappa, cert.R, tuple(grid),
                         tuple(interior), tuple(outside), tuple(window),
                         tuple(separation), all_passed, tuple(failures))


def recenter_certificate(cert: FatnessCertificate, Q) -> FatnessCertificate:
    """Move the anchor to Q: the witness at doubled scale with a third of
    kappa certifies fatness relative to Q once r exceeds max(R, |Q|)."""
    Q = np.asarray(Q, dtype=float)
    base_witness = cert.witness
    return FatnessCertificate(
        cert.domain_id, cert.kappa / 3.0,
        max(cert.R, float(np.linalg.norm(Q))),
        lambda r: base_witness(2.0 * r),
        cert.witness_desc + " (recentered, doubled scale)",
        tuple(float(v) for v in Q))
