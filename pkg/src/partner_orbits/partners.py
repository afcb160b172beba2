"""Reconnection combinatorics and partner-orbit synthesis.

Conventions: permutations are tuples of images ``P = (P(1), ..., P(L))``
with 1-based labels; ``(Q P)(j) = Q(P(j))``.  Stretch ``j`` of an
encounter leaves along loop ``j``; loop ``j`` ends at stretch ``j + 1``.
A partner given by ``P`` leaves stretch ``j`` along loop ``P(j)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .closing import close_orbit, connect_orbits, period_noise
from .encounters import Encounter, encounter_from_piercings, separation_ok
from .flow import PhasePoint, SectionCoords, orbit_candidates, piercings, recenter, sampled_distance
from .fuchsian import (
    FuchsianGroup,
    PeriodicOrbit,
    PresentationError,
    build_surface_group,
    canonical_cyclic,
    cyclic_reduce,
    free_reduce,
    orbit_from_element,
    orbit_from_word,
    word_inverse,
)
from .psl2 import Flavor, inv_raw


class ReconnectionError(ValueError):
    pass


class RegimeError(ValueError):
    pass


class HarnessError(RuntimeError):
    pass


class CrossCheckError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# permutations


def loop_perm(L: int) -> tuple:
    return tuple(list(range(2, L + 1)) + [1])


def compose_perm(Q, P) -> tuple:
    return tuple(Q[P[j] - 1] for j in range(len(P)))


def is_single_cycle(P) -> bool:
    L = len(P)
    j, k = 1, 0
    while True:
        j = P[j - 1]
        k += 1
        if j == 1:
            return k == L


def _partial_single_cycle(Pk: dict, L: int) -> bool:
    """Is ``P_{k,loop} P_k`` a single cycle on the domain of ``P_k``?"""
    dom = set(Pk)
    nxt = {j: (1 if Pk[j] == L else Pk[j] + 1) for j in dom}
    if set(nxt.values()) != dom:
        return False
    start = min(dom)
    j, n = start, 0
    while True:
        j = nxt[j]
        n += 1
        if j == start:
            return n == len(dom)


def pk_sequence(P, L: int | None = None) -> list:
    """Partial permutations ``P_0, ..., P_{L-3}`` as dicts ``{j: P_k(j)}``."""
    P = tuple(P)
    L = L or len(P)
    if len(P) != L or sorted(P) != list(range(1, L + 1)):
        raise ReconnectionError("not a permutation of 1..L")
    if P == tuple(range(1, L + 1)) or not is_single_cycle(compose_perm(loop_perm(L), P)):
        raise ReconnectionError("inadmissible permutation")
    seq = [{j + 1: P[j] for j in range(L)}]
    for k in range(1, L - 2):
        prev = seq[-1]
        inv = {v: j for j, v in prev.items()}
        j0 = inv[k]
        cur = {j: v for j, v in prev.items() if j != k + 1}
        cur[j0] = prev[k + 1]
        seq.append(cur)
    for Pk in seq:
        if not _partial_single_cycle(Pk, L):
            raise ReconnectionError("reduced permutation is not a single cycle")
    return seq


@dataclass(frozen=True)
class Reconnection:
    L: int
    P: tuple
    pk_sequence: list = field(compare=False, hash=False, repr=False)
    single_cycle_product: tuple = field(compare=False, default=())

    @property
    def cycle(self) -> list:
        """Stretch order of the partner starting at stretch 1."""
        out, j = [], 1
        for _ in range(self.L):
            out.append(j)
            j = self.P[j - 1] % self.L + 1
        return out


def reconnection(P) -> Reconnection:
    P = tuple(int(x) for x in P)
    L = len(P)
    return Reconnection(L, P, pk_sequence(P, L), compose_perm(loop_perm(L), P))


def reconnections(L: int) -> list:
    if not 3 <= L <= 9:
        raise ValueError("L must lie in 3..9")
    ident = tuple(range(1, L + 1))
    Pl = loop_perm(L)
    out = []
    for P in itertools.permutations(ident):
        if P != ident and is_single_cycle(compose_perm(Pl, P)):
            out.append(reconnection(P))
    return out


# ---------------------------------------------------------------------------
# constants and action difference


@dataclass(frozen=True)
class BoundConstants:
    L: int
    delta_d: float
    delta_T: float
    alpha: float
    beta: float
    omega: float
    kappa: float


def _h(L, p):
    return math.fsum(1 / k**p for k in range(3, L + 1))


def bound_constants(L: int) -> BoundConstants:
    if L < 3:
        raise ValueError("L >= 3 required")
    alpha = 6 + 468 * _h(L, 3)
    beta = 1 + 17 * _h(L, 1)
    omega = 12 * _h(L, 4) + 720 * _h(L, 3) + 21 * alpha / L - 114
    kappa = 118 * _h(L, 2) + 312 * _h(L, 1) + 21 * beta / L - 156
    return BoundConstants(L, 41 * _h(L, 1), 14 + 78 * _h(L, 2), alpha, beta, omega, kappa)


def _coords(enc):
    if isinstance(enc, Encounter):
        return enc.u, enc.s
    arr = np.asarray(enc, float)
    return arr[:, 0], arr[:, 1]


def delta_S(enc, rec: Reconnection) -> float:
    """Two-sum approximation of the half period difference."""
    u, s = _coords(enc)
    L = rec.L
    if len(u) != L:
        raise ValueError("encounter and reconnection orders differ")
    U = lambda j: u[j - 1]  # noqa: E731
    S = lambda j: s[j - 1]  # noqa: E731
    args = []
    for j in range(1, L - 1):
        args.append(1 + (U(j + 1) - U(j)) * (S(j + 1) - S(1)))
    for j in range(1, L - 1):
        Pk = rec.pk_sequence[j - 1]
        inv = {v: i for i, v in Pk.items()}
        args.append(1 + (U(Pk[j + 1]) - U(j)) * (S(inv[j]) - S(j + 1)))
    if min(args) <= 0:
        raise RegimeError("coordinates out of regime: nonpositive log argument")
    return math.fsum(math.log(a) for a in args)


def action_bound(L: int, eps: float, loop_times) -> float:
    bc = bound_constants(L)
    return bc.omega * eps**4 + bc.kappa * eps**2 * math.fsum(math.exp(-t) for t in loop_times)


def three_encounter_bound(eps: float, loop_times) -> float:
    T1, T2, T3 = loop_times
    return 76 * eps**4 + 22 * eps**2 * math.exp(-T1) + 7 * eps**2 * (math.exp(-T2) + math.exp(-T3))


# ---------------------------------------------------------------------------
# synthetic harness


def synthetic_encounter(L: int, target_coords, loop_lengths, eps: float | None = None, check_pingpong: bool = True):
    """Periodic orbit of a Schottky group with a planted ``L``-encounter.

    Loop elements ``delta_j = p_j a_{T_j} p_{j+1}^{-1}`` with
    ``p_j = c_{u_j} b_{s_j}`` generate the group; the orbit of
    ``delta_1 ... delta_L`` then pierces the section at the identity exactly
    at the targets, with loop times ``T_j``.  Passing ``L - 1`` targets
    puts stretch 1 at the centre.  Returns ``(orbit, encounter)``.
    """
    tc = [tuple(map(float, c)) for c in target_coords]
    if len(tc) == L - 1:
        tc = [(0.0, 0.0)] + tc
    if len(tc) != L or len(loop_lengths) != L:
        raise HarnessError("need L targets and L loop lengths")
    T = [float(t) for t in loop_lengths]
    if min(T) < 1:
        raise HarnessError("loop lengths must be at least 1")
    m = max(max(abs(u), abs(s)) for u, s in tc)
    if eps is None:
        eps = 1.25 * m if m > 0 else 0.01
    if m >= eps:
        raise HarnessError("targets must lie inside the section")
    p = [psl2.c(u) @ psl2.b(s) for u, s in tc]
    deltas = [p[j] @ psl2.a(T[j]) @ inv_raw(p[(j + 1) % L]) for j in range(L)]
    try:
        group = build_surface_group("schottky", deltas, check_pingpong=check_pingpong)
    except PresentationError as exc:
        raise HarnessError(f"loop elements do not form a Schottky group: {exc}") from None
    orbit = orbit_from_word(group, tuple(range(1, L + 1)))
    base = PhasePoint(np.eye(2), group)
    pts = piercings(orbit, base, eps, ball_length=1)
    if len(pts) != L:
        raise HarnessError(f"found {len(pts)} piercings, expected {L}")
    # start at stretch 1
    d = [abs(q.u - tc[0][0]) + abs(q.s - tc[0][1]) for q in pts]
    k = int(np.argmin(d))
    pts = pts[k:] + pts[:k]
    for j, q in enumerate(pts):
        q.index = j + 1
        if abs(q.u - tc[j][0]) > 1e-4 or abs(q.s - tc[j][1]) > 1e-4:
            raise HarnessError("detected coordinates do not match the targets")
    enc = _ordered_encounter(orbit, base, eps, pts)
    return orbit, enc


def _ordered_encounter(orbit, base, eps, pts) -> Encounter:
    enc = encounter_from_piercings(orbit, base, eps, pts)
    # keep the given cyclic order (stretch 1 first)
    T = orbit.period
    enc.piercings = list(pts)
    times = [q.t for q in pts]
    enc.loop_times = [((times[(j + 1) % len(pts)] - times[j]) % T) or T for j in range(len(pts))]
    return enc


# ---------------------------------------------------------------------------
# loop elements and words


def _pierce_line(h, gamma, frame):
    """Crossing of the line ``gamma frame a_t`` with the section at ``h``: (t, u, s)."""
    c = psl2.nac_decompose(inv_raw(h) @ gamma @ frame, Flavor.CU_BS)
    return -c.tau, c.u, c.s


def loop_elements(orbit: PeriodicOrbit, enc: Encounter) -> list:
    """Deck elements ``D_j`` with ``X_j a_{T_j} = D_j X_{j+1}`` (chart lifts ``X_j``).

    With deck words on the piercings the elements are rebuilt from short
    words, which avoids products of large matrices.
    """
    pts = enc.piercings
    L = len(pts)
    group = orbit.group
    if group is not None and all(getattr(q, "word", None) is not None for q in pts):
        w = [q.word for q in pts]
        words = [free_reduce(w[j] + word_inverse(w[j + 1])) for j in range(L - 1)]
        words.append(free_reduce(w[-1] + tuple(orbit.word) + word_inverse(w[0])))
        return [group.element(x) for x in words]
    g = [q.gamma for q in pts]
    D = [psl2.canonical(g[j] @ inv_raw(g[j + 1])) for j in range(L - 1)]
    D.append(psl2.canonical(g[-1] @ orbit.element @ inv_raw(g[0])))
    return D


def cycle_lines(h, elements):
    """Crossings of the orbit of ``E_1 ... E_n`` with the section at ``h``.

    Line ``k`` is the axis of the rotation ``E_k ... E_{k-1}``; returns the
    crossing times ``t_k`` (orbit time, line 1 frame at 0), coordinates
    ``(u_k, s_k)`` and the period.
    """
    n = len(elements)
    frames = []
    for k in range(n):
        frames.append(psl2.axis_frame(_product(elements[k:] + elements[:k]))[0])
    T = psl2.translation_length(_product(elements))
    off = [0.0]
    for k in range(n - 1):
        m = inv_raw(frames[k]) @ elements[k] @ frames[k + 1]
        off.append(off[-1] + 2 * math.log(abs(m[0, 0])))
    ts, cs = [], []
    for k in range(n):
        c = psl2.nac_decompose(inv_raw(h) @ frames[k], Flavor.CU_BS)
        ts.append(off[k] - c.tau)
        cs.append((c.u, c.s))
    return ts, cs, T


def find_word(group: FuchsianGroup | None, m, max_len: int = 3):
    if group is None:
        return None
    words, mats = group.ball(max_len)
    diff = np.abs(psl2.canonical_batch(mats) - psl2.canonical(m)).max(axis=(1, 2))
    i = int(np.argmin(diff))
    return tuple(words[i]) if diff[i] < 1e-7 else None


def _product(ms):
    out = np.eye(2)
    for m in ms:
        out = out @ m
    return out


# ---------------------------------------------------------------------------
# cascade cross-check
#
# Orbits are carried as section data at the chart base: stretch labels,
# the loop each stretch leaves along, section coordinates and orbit times.
# Deck elements never appear; moving between stretches uses
# ``c_p b_q a_t = a_t c_{p e^t} b_{q e^-t}`` with unstable parts propagated
# backward and stable parts forward, so nothing is amplified by ``e^T``.


@dataclass
class SectionOrbit:
    labels: list
    loops: list
    coords: list
    times: list
    period: float

    @property
    def loop_times(self) -> list:
        n = len(self.times)
        return [self.times[k + 1] - self.times[k] for k in range(n - 1)] + [self.times[0] + self.period - self.times[-1]]


def _cb(u, s):
    return psl2.c(u) @ psl2.b(s)


def _dec(m):
    c = psl2.nac_decompose(m, Flavor.CU_BS)
    return c.u, c.s, c.tau


def _residual(checks, name, lhs, rhs):
    checks.setdefault(name, []).append((float(lhs), float(rhs)))


def _cascade(orb: SectionOrbit, perm: dict, depth: int, eps: float, checks: dict) -> SectionOrbit:
    n = len(orb.labels)
    if all(perm[a] == l for a, l in zip(orb.labels, orb.loops)):
        return orb
    if n < 3:
        raise CrossCheckError("cascade reached two stretches with a nontrivial permutation")
    T = orb.loop_times
    X = [_cb(u, s) for u, s in orb.coords]
    c1 = SectionCoords(*orb.coords[0], 0.0)
    rc = recenter(c1, SectionCoords(*orb.coords[1], 0.0), check=False)
    tau2 = rc.tau
    I = PhasePoint(np.eye(2))

    # close the first loop (flavor I at x1) and the rest (flavor II at the recentred x2)
    T1t = T[0] + tau2
    A = close_orbit(I, T1t, SectionCoords(rc.u, rc.s, 0.0, Flavor.CU_BS), validate=False)
    TB = math.fsum(T[1:]) - tau2
    B = close_orbit(I, TB, SectionCoords(-rc.u, -rc.s, 0.0, Flavor.BS_CU), validate=False)
    for name, r in list(A.residuals.items()) + list(B.residuals.items()):
        _residual(checks, "closing: " + name, r[0], r[1])
    y2 = X[0] @ _cb(A.sigma, A.eta)

    # stretch data of the second closed orbit
    beta, gam, theta = B.eta * math.exp(tau2), B.sigma * math.exp(-tau2), -tau2
    bc, bt = [], []
    for k in range(1, n):
        U, S, tau = _dec(X[k] @ psl2.b(beta) @ psl2.c(gam))
        bc.append((U, S))
        bt.append(theta - tau)
        beta *= math.exp(-T[k])
        gam *= math.exp(T[k])
        theta += T[k]
    Borb = SectionOrbit([orb.labels[0]] + orb.labels[2:], orb.loops[1:], bc, bt, B.T_prime)

    j0 = {v: k for k, v in perm.items()}[orb.loops[0]]
    a2 = orb.labels[1]
    perm1 = {j: perm[j] for j in perm if j != a2}
    perm1[j0] = perm[a2]
    Bp = _cascade(Borb, perm1, depth + 1, eps, checks)

    # connect the first closed orbit with the reduced partner at stretch j0
    m = Bp.labels.index(j0)
    uZ, sZ = Bp.coords[m]
    uc, sc, tc = _dec(inv_raw(y2) @ _cb(uZ, sZ))
    W = _cb(uc, sc)
    Wi = inv_raw(W)
    P2 = Bp.period
    T1h = A.T_prime
    M = psl2.a(T1h) @ W @ psl2.a(P2) @ Wi
    frame, Tp = psl2.axis_frame(M)
    uz, sz, tz = _dec(frame)
    us = uc * sc
    e1, e2 = math.exp(-T1h), math.exp(-P2)
    _residual(checks, "connecting: period", abs((Tp - T1h - P2) / 2 - math.log1p(us)), 3 * abs(us) * (e1 + e2) + 8 * abs(us) * e1 * e2 + period_noise(Tp))

    labels = [j0]
    loops = [orb.loops[0]]
    U0, S0, t0 = _dec(y2 @ _cb(uz, sz))
    coords = [(U0, S0)]
    times = [-tz - t0]
    ps, qs, rs = _dec(psl2.a(-tc) @ Wi @ _cb(uz * math.exp(T1h), sz * math.exp(-T1h)))
    pe, qe, re = _dec(psl2.a(-tc) @ Wi @ _cb(uz, sz))
    _residual(checks, "connecting: return time", abs(Tp - (T1h + P2 + re - rs)), 1e-9 * max(1.0, Tp))
    TBp = Bp.loop_times
    nB = len(Bp.labels)
    C = 0.0
    for i in range(nB):
        k = (m + i) % nB
        q = qs * math.exp(-C)
        p = pe * math.exp(-(P2 - C))
        uk, sk = Bp.coords[k]
        U, S, tau = _dec(_cb(uk, sk) @ _cb(p, q))
        labels.append(a2 if i == 0 else Bp.labels[k])
        loops.append(Bp.loops[k])
        coords.append((U, S))
        times.append(T1h - tz - rs + C - tau)
        C += TBp[k]

    if depth == 0 and n == 3:
        u_ = [c[0] for c in orb.coords]
        s_ = [c[1] for c in orb.coords]
        rc3 = recenter(c1, SectionCoords(*orb.coords[2], 0.0), check=False)
        Tt = [T[0] + tau2, T[1] - tau2 + rc3.tau, T[2] - rc3.tau]
        e = [math.exp(-x) for x in Tt]
        checks["|T^1 - T1| < 4 eps^2"] = (abs(T1h - T[0]), 4 * eps**2)
        checks["|T^23 - (T~2 + T~3)| < eps^2"] = (abs(B.T_prime - (Tt[1] + Tt[2])), eps**2)
        checks["|u3 check - (u3 - u1)|"] = (abs(uc - (u_[2] - u_[0])), 8 * eps**3 + 2 * eps * (e[0] + e[2]))
        checks["|s3 check - (s3 - s2)|"] = (abs(sc - (s_[2] - s_[1])), 19 * eps**3 + 2 * eps * (e[0] + e[1]))
    out = SectionOrbit(labels, loops, coords, times, Tp)
    out.trace = psl2.trace(M)
    return out


def cascade_partner(orbit: PeriodicOrbit, enc: Encounter, rec: Reconnection, eps: float | None = None):
    """Partner built by repeated closing and connecting, as section data.

    Returns ``(SectionOrbit, checks)``; ``checks`` maps names to
    ``(lhs, rhs)`` pairs (or lists of them for repeated steps).
    """
    L = enc.L
    eps = eps if eps is not None else L * enc.eps
    T = list(enc.loop_times)
    times = [0.0]
    for t in T[:-1]:
        times.append(times[-1] + t)
    orb = SectionOrbit(list(range(1, L + 1)), list(range(1, L + 1)), [(p.u, p.s) for p in enc.piercings], times, math.fsum(T))
    perm = {j + 1: rec.P[j] for j in range(L)}
    checks = {}
    out = _cascade(orb, perm, 0, eps, checks)
    return out, checks


# ---------------------------------------------------------------------------
# synthesis and verification


@dataclass
class PartnerReport:
    reconnection: Reconnection
    partner: PeriodicOrbit
    T_prime: float
    delta_S: float
    bound_value: float
    residual: float
    partner_piercings: list
    loop_times_prime: dict
    distance_samples: dict
    distinctness: dict
    eps: float
    word: tuple | None = None
    cascade: dict | None = None
    coords_base: np.ndarray | None = None


def synthesize_partner(orbit: PeriodicOrbit, enc: Encounter, rec: Reconnection, eps: float | None = None, cross_check: bool | None = None, step: float = 0.05, word_len: int = 3, cascade_tol: float = 1e-9) -> PartnerReport:
    """Partner orbit by reassembling loop elements in the order of ``P``.

    ``eps`` is the theorem scale, ``L`` times the section radius by default.
    ``cross_check`` (default: on for ``L = 3``) rebuilds the partner by
    closing and connecting and compares traces.
    """
    L = rec.L
    if enc.L != L:
        raise ValueError("encounter and reconnection orders differ")
    eps = eps if eps is not None else L * enc.eps
    group = orbit.group
    h = enc.base.lift
    D = loop_elements(orbit, enc)
    cyc = rec.cycle
    loops = [rec.P[j - 1] for j in cyc]
    F = psl2.canonical(_product([D[l - 1] for l in loops]))
    if psl2.classify(F).kind != "hyperbolic":
        raise RegimeError("reassembled element is not hyperbolic")

    words = [find_word(group, Dj, word_len) for Dj in D]
    word = None
    if all(w is not None for w in words):
        word = cyclic_reduce(free_reduce(sum((words[l - 1] for l in loops), ())))
    partner = orbit_from_element(F, (), group)
    if word is not None and group is not None and psl2.proj_equal(group.element(word), F, 1e-8):
        partner.word = word

    # partner stretch points: line k is the axis of the k-th rotation of the product
    ts, cs, Tp = cycle_lines(h, [D[l - 1] for l in loops])
    vp = {j: SectionCoords(cs[k][0], cs[k][1], 0.0) for k, j in enumerate(cyc)}
    Tj_prime = {}
    for k, j in enumerate(cyc):
        nxt = ts[k + 1] if k + 1 < L else ts[0] + Tp
        Tj_prime[loops[k]] = nxt - ts[k]

    u, s = enc.u, enc.s
    Tj = list(enc.loop_times)
    dS = delta_S(enc, rec)
    residual = abs((Tp - orbit.period) / 2 - dS)
    bound = three_encounter_bound(eps, Tj) if L == 3 else action_bound(L, eps, Tj)

    dist = {}
    for j in range(1, L + 1):
        Pj = rec.P[j - 1]
        X = h @ psl2.c(u[Pj - 1]) @ psl2.b(s[Pj - 1])
        V = h @ psl2.c(vp[j].u) @ psl2.b(vp[j].s)
        tmax = max(Tj[Pj - 1], Tj_prime[Pj])
        dist[j], _ = sampled_distance(X, V, 0.0, tmax, step)

    cas = None
    if cross_check is None:
        cross_check = L == 3
    if cross_check:
        cp, checks = cascade_partner(orbit, enc, rec, eps)
        tr_w, tr_c = psl2.trace(F), cp.trace
        gap = abs(tr_w - tr_c) / max(1.0, abs(tr_w))
        if gap > cascade_tol:
            raise CrossCheckError(f"cascade and reassembly disagree: relative trace gap {gap:.3e}")
        cgap = 0.0
        for lab, (uc, sc) in zip(cp.labels, cp.coords):
            cgap = max(cgap, abs(uc - vp[lab].u), abs(sc - vp[lab].s))
        cas = {
            "trace_word": tr_w,
            "trace_cascade": tr_c,
            "relative_trace_gap": gap,
            "coordinate_gap": cgap,
            "cycle": list(zip(cp.labels, cp.loops)),
            "checks": checks,
        }

    rep = PartnerReport(
        rec, partner, Tp, dS, bound, residual, [vp[j] for j in range(1, L + 1)], Tj_prime, dist, {}, eps, word, cas, h
    )
    return rep


def _word_key(w):
    return canonical_cyclic(w, with_inverse=False) if w is not None else None


def verify_partner(report: PartnerReport, orbit: PeriodicOrbit, enc: Encounter, others=()) -> dict:
    """Check the partner conclusions; returns ``{name: (lhs, rhs, pass)}`` plus ``ok``."""
    L = report.reconnection.L
    P = report.reconnection.P
    eps = report.eps
    bc = bound_constants(L)
    Tj = list(enc.loop_times)
    eT = [math.exp(-t) for t in Tj]
    u, s = enc.u, enc.s
    out = {}

    def add(name, lhs, rhs):
        out[name] = (float(lhs), float(rhs), bool(lhs < rhs))

    res = abs((report.T_prime - orbit.period) / 2 - report.delta_S)
    add("action difference", res, report.bound_value)
    if L == 3:
        add("action difference (general constants)", res, action_bound(3, eps, Tj))

    gap_bound = bc.alpha * eps**3 + bc.beta * eps * math.fsum(eT)
    gu = max(abs(report.partner_piercings[j].u - u[P[j] - 1]) for j in range(L))
    gs = max(abs(report.partner_piercings[j].s - s[j]) for j in range(L))
    add("|u'_j - u_P(j)|", gu, gap_bound)
    add("|s'_j - s_j|", gs, gap_bound)
    rad = max(max(abs(v.u), abs(v.s)) for v in report.partner_piercings)
    add("partner piercings in P_{3eps/L}", rad, 3 * eps / L)

    dT = max(abs(report.loop_times_prime[j] - Tj[j - 1]) for j in range(1, L + 1))
    add("|T'_j - T_j|", dT, bc.delta_T * eps**2)
    add("period sum", abs(math.fsum(report.loop_times_prime.values()) - report.T_prime), 1e-8 * max(1, report.T_prime))
    add("d(phi_t x_P(j), phi_t v_j)", max(report.distance_samples.values()), bc.delta_d * eps)

    # distinctness
    cases = []
    for j in range(L):
        Pj = P[j]
        prev = eT[j - 1]  # e^{-T_{j-1}}, T_0 = T_L
        cu = abs(report.partner_piercings[j].u - u[Pj - 1]) < math.exp(-Tj[Pj - 1]) + 0.0
        cs = abs(report.partner_piercings[j].s - s[j]) < 12 / L**3 * eps**3 + prev
        cases.append(cu and cs)
    out["coordinate cases"] = (float(sum(cases)), float(L), all(cases))
    distinct = {}
    free = orbit.group is None or not orbit.group.relators
    if free and report.word is not None and orbit.word:
        k = _word_key(report.word)
        distinct["original"] = k != _word_key(orbit.word)
        for o in others:
            if o is not report and o.word is not None:
                distinct["P=" + "".join(map(str, o.reconnection.P))] = k != _word_key(o.word)
        mode = "word"
    else:
        tr = report.partner.trace
        distinct["original"] = abs(tr - orbit.trace) > 1e-9 * max(1, abs(tr))
        for o in others:
            if o is not report:
                distinct["P=" + "".join(map(str, o.reconnection.P))] = abs(o.partner.trace - tr) > 1e-9 * max(1, abs(tr))
        mode = "trace+coordinates"
    report.distinctness = {"mode": mode, **distinct}
    out["distinct"] = (0.0, 0.0, all(distinct.values()) and (mode == "word" or all(cases)))

    if report.cascade is not None:
        g = report.cascade["relative_trace_gap"]
        out["cascade trace agreement"] = (g, 1e-9, g < 1e-9)
        for name, val in report.cascade["checks"].items():
            pairs = val if isinstance(val, list) else [val]
            worst = max(pairs, key=lambda lr: lr[0] - lr[1])
            out["cascade " + name] = (float(worst[0]), float(worst[1]), all(l <= r for l, r in pairs))
    out["ok"] = all(v[2] for k, v in out.items() if k != "ok")
    return out


def all_partners(orbit: PeriodicOrbit, enc: Encounter, eps: float | None = None, cross_check: bool | None = None):
    """Reports and verdicts for every admissible reconnection, in lexicographic order of ``P``."""
    reps = [synthesize_partner(orbit, enc, r, eps, cross_check) for r in reconnections(enc.L)]
    verdicts = [verify_partner(r, orbit, enc, reps) for r in reps]
    return reps, verdicts


def encounter_hypotheses(enc: Encounter, eps: float | None = None) -> dict:
    """Hypotheses of the partner construction for an encounter."""
    L = enc.L
    eps = eps if eps is not None else L * enc.eps
    sep, margins = separation_ok(enc, eps)
    inside = max(max(abs(p.u), abs(p.s)) for p in enc.piercings) < eps / L
    out = {"separation": sep, "margins": margins, "inside P_{eps/L}": inside}
    group = enc.orbit.group if enc.orbit is not None else None
    if group is not None:
        out["eps <= eps_star / delta_d"] = eps <= group.config.epsilon_star / bound_constants(L).delta_d
    return out


@dataclass
class SurveyHit:
    orbit: PeriodicOrbit
    encounter: Encounter
    reports: list
    verdicts: list
    hypotheses: dict


def _hits(orbit, eps, L_max, ball_length, min_L):
    from .encounters import detect_encounters

    out = []
    for enc in detect_encounters(orbit, eps, L_max=L_max, ball_length=ball_length):
        if enc.L < min_L or enc.ambiguous:
            continue
        reps, verdicts = all_partners(orbit, enc, cross_check=False)
        out.append(SurveyHit(orbit, enc, reps, verdicts, encounter_hypotheses(enc)))
    return out


def survey(group, max_word_length: int, eps: float, L_max: int = 4, ball_length: int = 2, min_L: int = 3, max_classes: int = 200000, map_fn=None, chunk: int = 64):
    """Encounters with partners on the classes of ``group``, shortest period first.

    ``eps`` is the section radius used for detection.  Ambiguous encounters
    are skipped.  Yields one ``SurveyHit`` per encounter.  ``map_fn`` (an
    ordered map such as ``Executor.map``) spreads detection over classes.
    """
    from .fuchsian import enumerate_conjugacy_classes

    classes = enumerate_conjugacy_classes(group, max_word_length, max_classes, include_powers=False)
    mf = map_fn or map
    work = lambda o: _hits(o, eps, L_max, ball_length, min_L)  # noqa: E731
    for i in range(0, len(classes), chunk):
        for hits in mf(work, classes[i : i + chunk]):
            yield from hits
