import numpy as np
import pytest

from levypot.bernstein import parse_phi
from levypot.potential import StableOracle

CATALOG_IDS = (
    "stable:alpha=0.5",
    "stable:alpha=1",
    "stable:alpha=1.5",
    "mix:0.5,1+1.5,1",
    "relativistic:alpha=1,m=1",
)


@pytest.fixture(scope="session")
def phi_stable():
    return parse_phi("stable:alpha=1")


@pytest.fixture(scope="session")
def phi_mix():
    return parse_phi("mix:0.5,1+1.5,1")


@pytest.fixture(scope="session")
def phi_rel():
    return parse_phi("relativistic:alpha=1,m=1")


@pytest.fixture(scope="session")
def oracle():
    return StableOracle(3, 1.0)


@pytest.fixture(scope="session")
def catalog():
    return [parse_phi(s) for s in CATALOG_IDS]


def gauss_panels(edges, order=16):
    """Composite Gauss-Legendre nodes and weights over panel edges."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    wts = (half[:, None] * gw[None, :]).ravel()
    return nodes, wts
