import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partner_orbits import psl2
from partner_orbits.fuchsian import (
    BOLZA_RELATOR,
    FuchsianGroup,
    PresentationError,
    QuotientConfig,
    build_surface_group,
    canonical_cyclic,
    cyclic_reduce,
    enumerate_conjugacy_classes,
    free_reduce,
    is_proper_power,
    orbit_from_element,
    orbit_from_word,
    parse_token,
    ping_pong_certificate,
    primitive_root,
    quotient_dist,
    systole,
    word_inverse,
)

BOLZA_SYSTOLE = 2 * math.acosh(1 + math.sqrt(2))

words = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=12).map(tuple)


def schottky_pair():
    d = psl2.d_theta(math.pi / 2)
    return [psl2.a(4.0), d @ psl2.a(4.0) @ psl2.inv_raw(d)]


# word combinatorics


@given(words)
def test_free_reduce_idempotent_and_inverse(w):
    r = free_reduce(w)
    assert free_reduce(r) == r
    assert all(r[i] != -r[i + 1] for i in range(len(r) - 1))
    assert free_reduce(r + word_inverse(r)) == ()


@given(words)
def test_canonical_cyclic_invariant_under_rotation_and_inversion(w):
    w = cyclic_reduce(free_reduce(w))
    if not w:
        return
    c = canonical_cyclic(w)
    for k in range(len(w)):
        assert canonical_cyclic(w[k:] + w[:k]) == c
    assert canonical_cyclic(word_inverse(w)) == c


def test_powers():
    assert is_proper_power((1, 2, 1, 2))
    assert not is_proper_power((1, 2, 2))
    assert primitive_root((1, -2, 1, -2, 1, -2)) == (1, -2)


def test_parse_token():
    assert parse_token(3) == 3
    assert parse_token("g2^-1") == -2
    assert parse_token("g3") == 3
    with pytest.raises(PresentationError):
        parse_token("zz")


# groups


def test_bolza_relator_and_systole(bolza):
    assert bolza.kind == "cocompact_surface"
    assert bolza.relator_residual(BOLZA_RELATOR) < 1e-10
    assert systole(bolza, 8) == pytest.approx(BOLZA_SYSTOLE, abs=1e-9)


def test_bolza_short_words_are_not_trivial(bolza):
    words, mats = bolza.ball(2)
    assert len(words) == len(mats)
    assert not any(psl2.proj_equal(m, np.eye(2)) for m in mats[1:])


def test_schottky_example_passes_ping_pong():
    gens = schottky_pair()
    assert ping_pong_certificate(gens)
    g = build_surface_group("schottky", gens)
    assert systole(g, 4) == pytest.approx(4.0, abs=1e-12)


def test_invalid_presentation_rejected():
    gens = schottky_pair()
    with pytest.raises(PresentationError):
        build_surface_group("cocompact_surface", gens, [(1, 2, -1, -2)])
    with pytest.raises(PresentationError):
        build_surface_group("schottky", [psl2.b(1.0)])
    with pytest.raises(PresentationError):
        build_surface_group("nope")


def test_overlapping_schottky_rejected():
    gens = [psl2.a(1.0), psl2.c(-0.3) @ psl2.a(1.0) @ psl2.c(0.3)]
    with pytest.raises(PresentationError):
        build_surface_group("schottky", gens)


def test_dict_description():
    gens = schottky_pair()
    g = build_surface_group({"kind": "schottky", "generators": [m.ravel().tolist() for m in gens]})
    assert g.rank == 2
    with pytest.raises(PresentationError):
        build_surface_group({"kind": "schottky"})


def test_config_validation():
    with pytest.raises(PresentationError):
        QuotientConfig(epsilon_star=0.0)


# conjugacy classes and orbits


def test_class_counts_free_group():
    g = build_surface_group("schottky", schottky_pair())
    # cyclic words of rank 2 up to rotation and inversion: 2 of length 1, 4 of length 2
    classes = enumerate_conjugacy_classes(g, 2)
    assert len(classes) == 6
    assert [o.period for o in classes] == sorted(o.period for o in classes)
    prims = enumerate_conjugacy_classes(g, 2, include_powers=False)
    assert len(prims) == 4
    assert all(o.primitive for o in prims)


def test_class_counts_bolza(bolza):
    assert len(enumerate_conjugacy_classes(bolza, 1)) == 4
    assert len(enumerate_conjugacy_classes(bolza, 2)) == 20
    truncated = enumerate_conjugacy_classes(bolza, 3, max_classes=10)
    assert truncated.truncated and len(truncated) == 10


def test_orbit_frame_convention(bolza):
    for o in enumerate_conjugacy_classes(bolza, 3)[:30]:
        assert psl2.proj_equal(o.frame @ psl2.a(o.period), o.element @ o.frame, 1e-8)
        assert o.period == pytest.approx(2 * math.acosh(o.trace / 2), rel=1e-12)


def test_orbit_from_word_requires_cyclic_reduction(bolza):
    with pytest.raises(PresentationError):
        orbit_from_word(bolza, (1, 2, -1))


def test_orbit_from_element_primitive_flag():
    g = psl2.a(3.0)
    assert orbit_from_element(g, (1,)).primitive
    assert not orbit_from_element(g @ g, (1, 1)).primitive


def test_quotient_dist_sees_deck_translates():
    gens = schottky_pair()
    g = FuchsianGroup(gens, config=QuotientConfig(0.25, 1.0, 1))
    x = psl2.c(0.01)
    d, gamma = quotient_dist(x, gens[0] @ x, g)
    assert d == pytest.approx(0.0, abs=1e-12)
    assert psl2.proj_equal(gamma, psl2.invert(gens[0]))


def test_systole_budget_flag():
    g = build_surface_group("schottky", schottky_pair())
    _, upper = systole(g, 1, with_flag=True)
    assert upper
    with pytest.raises(ValueError):
        systole(g, 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=6).map(tuple))
def test_trace_is_class_invariant(w):
    g = build_surface_group("schottky", schottky_pair())
    w = cyclic_reduce(free_reduce(w))
    if not w:
        return
    t = abs(psl2.trace(g.element(w)))
    assert abs(psl2.trace(g.element(canonical_cyclic(w)))) == pytest.approx(t, rel=1e-12)
