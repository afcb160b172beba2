"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
Every criterion recomputes its quantities from an independent route where one
exists (direct matrix products, traces of words, brute-force enumeration).
"""

import itertools
import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from partner_orbits import partners as pa
from partner_orbits import psl2
from partner_orbits.closing import close_orbit
from partner_orbits.flow import PhasePoint, SectionCoords
from partner_orbits.fuchsian import BOLZA_RELATOR, build_surface_group, canonical_cyclic, systole
from partner_orbits.psl2 import Flavor
from partner_orbits.suites import run_suites

from conftest import EPS, build_harness

LIMITS = {1: 1.0, 2: 5.0, 3: 30.0, 4: 10.0, 5: 1.0, 6: 60.0, 7: 300.0, 8: 120.0}


def timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


def line(n, ok, detail, elapsed):
    in_time = elapsed < LIMITS[n]
    verdict = "PASS" if ok and in_time else "FAIL"
    return f"criterion {n}: {verdict}  {detail}  [{elapsed:.2f}s < {LIMITS[n]:g}s: {in_time}]", ok and in_time


# 1 quintuple decomposition


def criterion_1():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1 / 6, 1 / 6, size=(10_000, 5))
    worst = 0.0
    for s1, u1, s2, u2, s3 in xs:
        q = psl2.quintuple_product(s1, u1, s2, u2, s3)
        direct = psl2.b(s1) @ psl2.c(u1) @ psl2.b(s2) @ psl2.c(u2) @ psl2.b(s3)
        closed = psl2.c(q.u) @ psl2.b(q.s) @ psl2.a(q.tau)
        worst = max(worst, float(np.max(np.abs(direct - closed))))
    return worst <= 1e-12, f"max entrywise error {worst:.2e} <= 1e-12"


# 2 closing


def criterion_2():
    rng = np.random.default_rng(0)
    x = PhasePoint(np.eye(2))
    trace_gap = formula_gap = 0.0
    window_fail = 0
    eta1_fail = 0
    for _ in range(1000):
        T = rng.uniform(1, 10)
        u, s = rng.uniform(-0.25, 0.25, 2)
        eT = math.exp(-T)
        for flavor in Flavor:
            res = close_orbit(x, T, SectionCoords(u, s, 0.0, flavor), flavor, validate=False, step=1.0)
            # oracle: trace of c_u b_s a_-T (or b_s c_u a_-T) by hand
            sign = 1 if flavor is Flavor.CU_BS else -1
            rhs = math.exp(T / 2) + math.exp(-T / 2) + u * s * math.exp(sign * T / 2)
            trace_gap = max(trace_gap, abs(2 * math.cosh(res.T_prime / 2) - rhs))
            window_fail += not abs(res.sigma) < 2 * abs(u) * eT
            if flavor is Flavor.BS_CU:
                window_fail += not abs(res.eta - s) < 2 * abs(s) * eT
                for k in ("eta formula", "sigma formula", "T' formula"):
                    formula_gap = max(formula_gap, res.residuals[k][0])
            else:
                eta1_fail += not abs(res.eta - s) < 2 * s * s * abs(u) + 2 * abs(s) * eT
    ok = trace_gap <= 1e-10 and formula_gap <= 1e-9 and window_fail == 0
    detail = (
        f"trace gap {trace_gap:.1e} <= 1e-10, flavor II formula gap {formula_gap:.1e} <= 1e-9, "
        f"window failures {window_fail}, first-flavor eta bound failures {eta1_fail}"
    )
    return ok, detail


# 3 connecting


def criterion_3():
    (res,) = run_suites(0, names=["connecting"])
    period = next(k for k in res.checks if k.startswith("|(T-(T1+T2))/2"))
    wanted = [period, "leg 1 within 5 eps", "leg 2 within 5 eps"]
    fails = {k: res.checks[k]["failures"] for k in wanted}
    worst = {k: res.checks[k]["worst"] for k in wanted}
    ok = res.samples == 200 and not any(fails.values())
    detail = f"{res.samples} pairs, failures period/leg1/leg2 {list(fails.values())}, worst ratios " + ", ".join(
        f"{w:.2f}" for w in worst.values()
    )
    return ok, detail


# 4 combinatorics

L4_LIST = {(1, 3, 4, 2), (2, 3, 1, 4), (2, 4, 3, 1), (3, 4, 1, 2), (3, 2, 4, 1)}


def _brute(L):
    ident = tuple(range(1, L + 1))
    out = []
    for P in itertools.permutations(ident):
        if P == ident:
            continue
        m = {j: P[j % L] for j in range(1, L + 1)}  # loop_perm(j) = j + 1, then P
        j, seen = 1, set()
        while j not in seen:
            seen.add(j)
            j = m[j]
        if len(seen) == L:
            out.append(P)
    return sorted(out)


def criterion_4():
    counts = []
    agree = True
    for L in range(3, 8):
        got = sorted(r.P for r in pa.reconnections(L))
        counts.append(len(got))
        agree &= got == _brute(L)
    l4 = {r.P for r in pa.reconnections(4)} == L4_LIST
    ok = counts == [1, 5, 23, 119, 719] and agree and l4
    return ok, f"counts {counts}, brute force agrees {agree}, L=4 list matches {l4}"


# 5 constants


def criterion_5():
    b3 = pa.bound_constants(3)
    strict = b3.omega > 76 and b3.kappa > 7 and b3.alpha > 23 and b3.beta > 6
    rec = 0.0
    for L in range(4, 9):
        lo, hi = pa.bound_constants(L - 1), pa.bound_constants(L)
        rec = max(rec, abs(hi.delta_T - lo.delta_T - 78 / L**2), abs(hi.delta_d - lo.delta_d - 41 / L))
    ok = strict and rec <= 1e-12
    detail = f"omega3 {b3.omega:.3f}, kappa3 {b3.kappa:.3f}, alpha3 {b3.alpha:.3f}, beta3 {b3.beta:.3f}, recurrence gap {rec:.1e}"
    return ok, detail


# 6 and 7 harness


def _word_trace(group, rep):
    loops = [rep.reconnection.P[j - 1] for j in rep.reconnection.cycle]
    return abs(psl2.trace(group.element(tuple(loops))))


def criterion_6():
    orbit, enc = build_harness(3)
    T = list(enc.loop_times)
    reps, verdicts = pa.all_partners(orbit, enc, cross_check=True)
    if len(reps) != 1:
        return False, f"{len(reps)} partners"
    rep = reps[0]
    e = EPS
    bound = 76 * e**4 + 22 * e**2 * math.exp(-T[0]) + 7 * e**2 * (math.exp(-T[1]) + math.exp(-T[2]))
    Tp = 2 * math.acosh(_word_trace(orbit.group, rep) / 2)
    resid = abs((Tp - orbit.period) / 2 - pa.delta_S(enc, rep.reconnection))
    gap = rep.cascade["relative_trace_gap"]
    ok = min(T) >= 6 and resid <= bound and gap < 1e-9 and verdicts[0]["ok"]
    detail = f"1 partner, residual {resid:.2e} <= {bound:.2e}, cascade trace gap {gap:.1e}, all checks {verdicts[0]['ok']}"
    return ok, detail


def criterion_7():
    parts = []
    ok = True
    for L in (4, 5):
        orbit, enc = build_harness(L)
        bc = pa.bound_constants(L)
        T = list(enc.loop_times)
        reps, verdicts = pa.all_partners(orbit, enc)
        words = {canonical_cyclic(r.word) for r in reps if r.word is not None}
        distinct = len(words) == len(reps) and canonical_cyclic(orbit.word) not in words
        bound = bc.omega * EPS**4 + bc.kappa * EPS**2 * math.fsum(math.exp(-t) for t in T)
        gap_bound = bc.alpha * EPS**3 + bc.beta * EPS * math.fsum(math.exp(-t) for t in T)
        worst_r = worst_T = worst_g = 0.0
        for rep in reps:
            Tp = 2 * math.acosh(_word_trace(orbit.group, rep) / 2)
            worst_r = max(worst_r, abs((Tp - orbit.period) / 2 - pa.delta_S(enc, rep.reconnection)) / bound)
            dT = max(abs(rep.loop_times_prime[j] - T[j - 1]) for j in range(1, L + 1))
            worst_T = max(worst_T, dT / (bc.delta_T * EPS**2))
            P = rep.reconnection.P
            g = max(
                max(abs(rep.partner_piercings[j].u - enc.u[P[j] - 1]), abs(rep.partner_piercings[j].s - enc.s[j]))
                for j in range(L)
            )
            worst_g = max(worst_g, g / gap_bound)
        this = (
            len(reps) == math.factorial(L - 1) - 1
            and distinct
            and worst_r <= 1
            and worst_T < 1
            and worst_g < 1
            and all(v["ok"] for v in verdicts)
        )
        ok &= this
        parts.append(
            f"L={L}: {len(reps)} distinct {distinct}, worst ratios residual {worst_r:.2e} dT {worst_T:.2e} gaps {worst_g:.2e}"
        )
    return ok, "; ".join(parts)


# 8 Bolza


def criterion_8():
    g = build_surface_group("bolza")
    rel = g.relator_residual(BOLZA_RELATOR)
    sysl = systole(g, 8)
    sys_gap = abs(sysl - 2 * math.acosh(1 + math.sqrt(2)))
    found = None
    for hit in pa.survey(g, 6, 0.1, L_max=3):
        for rep, v in zip(hit.reports, hit.verdicts):
            if v["d(phi_t x_P(j), phi_t v_j)"][2] and v["distinct"][2]:
                found = (hit, rep, v)
                break
        if found:
            break
    ok = rel <= 1e-9 and sys_gap <= 1e-6 and found is not None
    detail = f"relator {rel:.1e}, systole gap {sys_gap:.1e}"
    if found:
        hit, rep, v = found
        d, bound, _ = v["d(phi_t x_P(j), phi_t v_j)"]
        detail += (
            f", orbit {hit.orbit.word} L={hit.encounter.L} at section radius 0.1 -> partner {rep.word},"
            f" d {d:.3f} < {bound:.2f}, separated {bool(hit.hypotheses['separation'])},"
            f" eps admissible {hit.hypotheses.get('eps <= eps_star / delta_d')}"
        )
    else:
        detail += ", no encounter in budget"
    return ok, detail


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 9)}


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n, capsys):
    ok, detail, elapsed = timed(CRITERIA[n])
    text, passed = line(n, ok, detail, elapsed)
    with capsys.disabled():
        print("\n" + text)
    assert passed, text


if __name__ == "__main__":
    results = []
    for n, fn in CRITERIA.items():
        text, passed = line(n, *timed(fn))
        print(text, flush=True)
        results.append(passed)
    sys.exit(0 if all(results) else 1)
