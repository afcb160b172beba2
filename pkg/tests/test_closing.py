import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partner_orbits import psl2
from partner_orbits.closing import (
    ClosingError,
    DegenerateInputError,
    close_orbit,
    connect_orbits,
    eta_roots,
    near_return_element,
    predicted_trace,
    shadow_verify,
)
from partner_orbits.flow import PhasePoint, SectionCoords, UniquenessError
from partner_orbits.fuchsian import FuchsianGroup, QuotientConfig, orbit_from_element
from partner_orbits.psl2 import Flavor

ETA_I = "|eta - s| < 2s^2|u| + 2|s|e^-T"


def _on_axis(res):
    """The new base point is periodic with the reported period."""
    g = res.x_prime.lift
    return psl2.proj_equal(g @ psl2.a(res.T_prime), res.orbit.element @ g, 1e-8)


@settings(max_examples=150, deadline=None)
@given(st.floats(1, 10), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.sampled_from(list(Flavor)))
def test_closing_residuals_hold_in_the_small_regime(T, u, s, flavor):
    res = close_orbit(PhasePoint(np.eye(2)), T, SectionCoords(u, s, 0.0, flavor), flavor, validate=False, step=0.25)
    failing = [k for k, v in res.residuals.items() if not v[2]]
    assert not failing, failing
    assert _on_axis(res)


def test_closing_trace_against_direct_product():
    for flavor in Flavor:
        T, u, s = 3.0, 0.05, -0.03
        R = psl2.c(u) @ psl2.b(s) if flavor is Flavor.CU_BS else psl2.b(s) @ psl2.c(u)
        assert abs(np.trace(R @ psl2.a(-T))) == pytest.approx(predicted_trace(T, u, s, flavor), rel=1e-14)


def test_closing_example_orbit_and_shift():
    res = close_orbit(np.eye(2), 5.0, SectionCoords(0.02, 0.01, 0.0), validate=False)
    assert res.ok
    assert res.T_prime == pytest.approx(5.0 + 2 * math.log1p(0.02 * 0.01), abs=5 * 2e-4 * math.exp(-5) * 2)
    assert abs(res.sigma) < 2 * 0.02 * math.exp(-5)


def test_closing_zero_coordinates_gives_same_orbit():
    res = close_orbit(np.eye(2), 4.0, SectionCoords(0.0, 0.0, 0.0), validate=False)
    assert res.T_prime == pytest.approx(4.0, abs=1e-12)
    assert abs(res.sigma) < 1e-12 and abs(res.eta) < 1e-12
    assert res.ok


def test_second_flavor_formulas_match_axis():
    res = close_orbit(np.eye(2), 2.5, SectionCoords(0.08, -0.06, 0.0, Flavor.BS_CU), validate=False)
    for k in ("eta formula", "sigma formula", "T' formula"):
        assert res.residuals[k][2], k
    roots, disc = eta_roots(2.5, 0.08, -0.06)
    assert disc > 0 and min(abs(r - res.eta) for r in roots) < 1e-12


def test_near_return_validation_on_a_group():
    g = FuchsianGroup([psl2.a(4.0), psl2.d_theta(math.pi / 2) @ psl2.a(4.0) @ psl2.d_theta(-math.pi / 2)], config=QuotientConfig(0.25, 2.0, 2))
    # phi_T(x) for x on the axis of g1 is x itself: coordinates (0, 0) after one period
    x = PhasePoint(np.eye(2), g)
    zeta = near_return_element(x, 4.0, SectionCoords(0.0, 0.0, 0.0))
    assert psl2.proj_equal(zeta, psl2.a(-4.0))
    # a fabricated return competes with the genuine one and is rejected
    with pytest.raises((ClosingError, UniquenessError)):
        near_return_element(x, 4.0, SectionCoords(0.01, 0.02, 0.0))


def test_closing_eta_bound_counterexample():
    # a sampled corner where the |eta - s| inequality of the first flavor fails;
    # the periodic point itself is verified independently through the fixed points
    T, u, s = 1.00196, 0.229695, -0.238214
    res = close_orbit(np.eye(2), T, SectionCoords(u, s, 0.0), validate=False)
    lhs, rhs, ok = res.residuals[ETA_I]
    assert not ok
    assert lhs == pytest.approx(0.23457, abs=1e-4) and rhs == pytest.approx(0.20099, abs=1e-4)
    rep, att = psl2.fixed_points(res.orbit.element)
    g = res.x_prime.lift
    assert psl2.moebius(g, 0.0) == pytest.approx(rep, abs=1e-9)
    assert psl2.moebius(g, 1e12) == pytest.approx(att, rel=1e-9, abs=1e-9)


# connecting


def schottky_pair(T1, T2, u, s):
    p = psl2.c(u) @ psl2.b(s)
    A, B = psl2.a(T1), p @ psl2.a(T2) @ psl2.inv_raw(p)
    group = FuchsianGroup([A, B], config=QuotientConfig(0.25, 1.0, 2))
    o1 = orbit_from_element(A, (1,), group)
    o1.frame = np.eye(2)
    o2 = orbit_from_element(B, (2,), group)
    o2.frame = psl2.canonical(p)
    return o1, o2


def test_connect_orbits_period_and_axis():
    rng = np.random.default_rng(11)
    literal_failures = 0
    for _ in range(60):
        T1, T2 = rng.uniform(4, 9, 2)
        u, s = rng.uniform(0.01, 0.05, 2) * rng.choice([-1, 1], 2)
        o1, o2 = schottky_pair(T1, T2, u, s)
        res = connect_orbits(o1, SectionCoords(u, s, 0.0), o2, gamma=np.eye(2))
        assert res.ok, {k: v for k, v in res.residuals.items() if not v[2]}
        # oracle: translation length of the product from its trace
        F = o1.element @ o2.element
        assert res.T == pytest.approx(2 * math.acosh(abs(np.trace(F)) / 2), rel=1e-12)
        literal_failures += not next(iter(res.diagnostics.values()))[2]
    # the bound without the |s|e^-T2 term is violated on a sizable share of samples
    assert literal_failures > 0


def test_connect_orbits_finds_gamma_and_rejects_degenerate():
    o1, o2 = schottky_pair(5.0, 6.0, 0.02, -0.03)
    res = connect_orbits(o1, SectionCoords(0.02, -0.03, 0.0), o2)
    assert res.ok
    with pytest.raises(DegenerateInputError):
        connect_orbits(o1, SectionCoords(0.0, -0.03, 0.0), o2)


# shadowing


def test_shadowing_bracket_point():
    eps = 0.05
    g1 = psl2.d_theta(0.3)
    w = g1 @ psl2.b(0.01)
    g2 = w @ psl2.c(-0.015)
    rep = shadow_verify(g1, g2, w, eps, 6.0)
    assert rep.ok
    # stable leaf contracts exactly: ratio is constant 0.01/eps
    assert rep.max_forward == pytest.approx(0.01 / eps, rel=1e-9)
    assert rep.max_backward == pytest.approx(0.015 / eps, rel=1e-9)


def test_shadowing_violation_detected():
    g1 = np.eye(2)
    w = psl2.c(0.01)  # unstable offset grows forward
    rep = shadow_verify(g1, g1, w, 0.05, 3.0)
    assert not rep.ok
