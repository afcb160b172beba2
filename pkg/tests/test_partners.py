import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partner_orbits import partners as pa
from partner_orbits import psl2
from partner_orbits.fuchsian import canonical_cyclic

from conftest import EPS, build_harness


def brute_single_cycle(P):
    """Cycle check by following the permutation as a dict."""
    L = len(P)
    m = {j: P[j - 1] for j in range(1, L + 1)}
    seen, j = set(), 1
    while j not in seen:
        seen.add(j)
        j = m[j]
    return len(seen) == L


# combinatorics


@pytest.mark.parametrize("L", [3, 4, 5, 6, 7])
def test_reconnection_count(L):
    assert len(pa.reconnections(L)) == math.factorial(L - 1) - 1


def test_reconnections_match_brute_force():
    for L in (3, 4, 5):
        ident = tuple(range(1, L + 1))
        Pl = pa.loop_perm(L)
        brute = sorted(P for P in itertools.permutations(ident) if P != ident and brute_single_cycle(pa.compose_perm(Pl, P)))
        assert sorted(r.P for r in pa.reconnections(L)) == brute


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 7).flatmap(lambda L: st.permutations(list(range(1, L + 1)))))
def test_single_cycle_against_brute_force(P):
    assert pa.is_single_cycle(tuple(P)) == brute_single_cycle(tuple(P))


def test_three_encounter_reconnection():
    (r,) = pa.reconnections(3)
    assert r.P == (2, 3, 1)
    assert r.cycle == [1, 3, 2]


def test_pk_sequence_shrinks_and_errors():
    for r in pa.reconnections(5):
        assert [len(Pk) for Pk in r.pk_sequence] == [5, 4, 3]
    with pytest.raises(pa.ReconnectionError):
        pa.reconnection((1, 2, 3))
    with pytest.raises(pa.ReconnectionError):
        pa.reconnection((1, 1, 3))
    with pytest.raises(pa.ReconnectionError):
        pa.reconnection((3, 2, 1))  # loop_perm * P is not a single cycle
    with pytest.raises(ValueError):
        pa.reconnections(2)


def test_bound_constants_harmonic_sums():
    bc = pa.bound_constants(3)
    assert bc.delta_d == pytest.approx(41 / 3)
    assert bc.delta_T == pytest.approx(14 + 78 / 9)
    bc5 = pa.bound_constants(5)
    h1 = 1 / 3 + 1 / 4 + 1 / 5
    assert bc5.delta_d == pytest.approx(41 * h1)
    assert bc5.beta == pytest.approx(1 + 17 * h1)
    with pytest.raises(ValueError):
        pa.bound_constants(2)


def test_delta_S_small_coordinates_and_regime():
    (r,) = pa.reconnections(3)
    assert pa.delta_S([(0, 0), (0, 0), (0, 0)], r) == 0.0
    # first-order term: sum of gap products
    c = [(0.0, 0.0), (1e-4, 2e-4), (-2e-4, 1e-4)]
    assert abs(pa.delta_S(c, r)) < 1e-7
    with pytest.raises(pa.RegimeError):
        pa.delta_S([(0, 0), (2.0, -1.0), (-2.0, 1.0)], r)


# synthesis on the harness


def test_three_encounter_partner(harness3):
    orbit, enc = harness3
    reps, verdicts = pa.all_partners(orbit, enc)
    assert len(reps) == 1
    rep, v = reps[0], verdicts[0]
    assert v["ok"], {k: x for k, x in v.items() if k != "ok" and not x[2]}
    # oracle: the partner period from the trace of the reordered word
    g = orbit.group
    T_oracle = 2 * math.acosh(abs(psl2.trace(g.element((1, 3, 2)))) / 2)
    assert rep.T_prime == pytest.approx(T_oracle, rel=1e-13)
    assert canonical_cyclic(rep.word) == canonical_cyclic((1, 3, 2))
    assert rep.residual < rep.bound_value
    assert rep.cascade["relative_trace_gap"] < 1e-9


@pytest.mark.parametrize("L", [4, 5])
def test_all_partners_general_L(L, request):
    orbit, enc = request.getfixturevalue(f"harness{L}")
    reps, verdicts = pa.all_partners(orbit, enc)
    assert len(reps) == math.factorial(L - 1) - 1
    for rep, v in zip(reps, verdicts):
        assert v["ok"], (rep.reconnection.P, {k: x for k, x in v.items() if k != "ok" and not x[2]})
        # oracle: product of generators in partner order
        loops = [rep.reconnection.P[j - 1] for j in rep.reconnection.cycle]
        m = orbit.group.element(tuple(loops))
        assert rep.partner.trace == pytest.approx(abs(psl2.trace(m)), rel=1e-10)
    words = {canonical_cyclic(r.word) for r in reps}
    assert len(words) == len(reps)
    assert canonical_cyclic(orbit.word) not in words


def test_partner_loop_times_sum_to_period(harness4):
    orbit, enc = harness4
    for rep in pa.all_partners(orbit, enc)[0]:
        assert math.fsum(rep.loop_times_prime.values()) == pytest.approx(rep.T_prime, abs=1e-8)


def test_cascade_cross_check_for_general_L(harness4):
    orbit, enc = harness4
    for r in pa.reconnections(4):
        rep = pa.synthesize_partner(orbit, enc, r, cross_check=True)
        assert rep.cascade["relative_trace_gap"] < 1e-9


def test_order_mismatch_rejected(harness3):
    orbit, enc = harness3
    with pytest.raises(ValueError):
        pa.synthesize_partner(orbit, enc, pa.reconnections(4)[0])


def test_hypotheses_report(harness3):
    _, enc = harness3
    hyp = pa.encounter_hypotheses(enc)
    assert hyp["separation"] and hyp["inside P_{eps/L}"]


def test_harness_input_errors():
    with pytest.raises(pa.HarnessError):
        pa.synthetic_encounter(3, [(0, 0)], [16, 16, 16])
    with pytest.raises(pa.HarnessError):
        pa.synthetic_encounter(3, [(0, 0), (0.001, 0.001), (0.002, -0.001)], [16, 0.5, 16])
    with pytest.raises(pa.HarnessError):
        pa.synthetic_encounter(3, [(0, 0), (0.001, 0.001), (0.02, -0.001)], [16, 16, 16], eps=0.01)
    # loops too short for ping-pong
    with pytest.raises(pa.HarnessError):
        pa.synthetic_encounter(3, [(0, 0), (0.001, 0.001), (0.002, -0.001)], [1.5, 1.5, 1.5])


def test_harness_centres_stretch_one():
    orbit, enc = pa.synthetic_encounter(3, [(0.001, 0.002), (-0.001, -0.001)], [16, 16.5, 17], eps=EPS / 3)
    assert (enc.piercings[0].u, enc.piercings[0].s) == pytest.approx((0, 0), abs=1e-14)
