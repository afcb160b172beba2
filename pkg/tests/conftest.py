import numpy as np
import pytest

from partner_orbits import partners as pa

EPS = 0.02
SS = [0.35, -0.25, 0.15, -0.1, 0.3]


def harness_coords(L, eps=EPS):
    """Separated planted coordinates; pairwise differences stay inside the section of radius eps/L."""
    r = eps / L
    us = np.linspace(-0.4, 0.4, L) * r
    ss = np.array(SS[:L]) * r
    return [(float(u), float(s)) for u, s in zip(us, ss)]


def harness_loops(L):
    # longer loops keep the isometric circles of the L = 5 generators disjoint
    return [(16 if L < 5 else 17) + 0.5 * j for j in range(L)]


def build_harness(L, eps=EPS):
    return pa.synthetic_encounter(L, harness_coords(L, eps), harness_loops(L), eps=eps / L)


@pytest.fixture(scope="session")
def harness3():
    return build_harness(3)


@pytest.fixture(scope="session")
def harness4():
    return build_harness(4)


@pytest.fixture(scope="session")
def harness5():
    return build_harness(5)


@pytest.fixture(scope="session")
def bolza():
    from partner_orbits.fuchsian import build_surface_group

    return build_surface_group("bolza")
