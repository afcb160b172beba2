"""L-parallel encounters on periodic orbits.

A relative deck element ``R = g0^{-1} gamma g0 = c_u0 b_s0 a_tau0`` pairs
the orbit point at time ``tb`` with the one at ``tb - tau0``; the latter
sits in the section at the former with coordinates ``(u0 e^tb, s0 e^-tb)``.
The pair is an encounter exactly on the window
``ln(|s0|/eps) < tb < ln(eps/|u0|)``.  Encounters are the maximal sets of
such pairs active at a common ``tb``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .flow import (
    Piercing,
    PhasePoint,
    SectionCoords,
    UniquenessError,
    evolve,
    orbit_lines,
)
from .fuchsian import PeriodicOrbit, free_reduce, word_inverse
from .psl2 import D_PI, Flavor, inv_raw


class DegenerateEncounterError(ValueError):
    pass


@dataclass
class Encounter:
    base: PhasePoint
    eps: float
    L: int
    piercings: list
    loop_times: list
    t_s: float = 0.0
    t_u: float = 0.0
    t_enc: float = 0.0
    orbit: PeriodicOrbit | None = None
    antiparallel: list = field(default_factory=list)
    ambiguous: bool = False

    @property
    def coords(self):
        return [(p.u, p.s) for p in self.piercings]

    @property
    def u(self) -> np.ndarray:
        return np.array([p.u for p in self.piercings])

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.piercings])


@dataclass
class Ports:
    entrance: list
    exit: list


def piercing_lift(p: Piercing, base) -> np.ndarray:
    """Chart lift ``g c_u b_s`` of a piercing (``g`` the section base lift)."""
    g = getattr(base, "lift", base)
    return psl2.canonical(g @ psl2.c(p.u) @ psl2.b(p.s))


# ---------------------------------------------------------------------------
# metrics


def encounter_metrics(enc: Encounter, recenter_first: bool = True):
    """``(t_s, t_u, t_enc, Ports)``.

    ``t_s = min ln(eps/|u_j|)`` and ``t_u = min ln(eps/|s_j|)`` over
    ``j >= 2`` after recentring at piercing 1.
    """
    pts = enc.piercings
    if len(pts) < 2:
        raise DegenerateEncounterError("need at least two piercings")
    from .flow import recenter

    rel = []
    p1 = pts[0].coords
    for p in pts[1:]:
        c = recenter(p1, p.coords, check=False) if recenter_first else p.coords
        rel.append((c.u, c.s))
    us = np.abs(np.array(rel))
    if np.any(us == 0):
        raise DegenerateEncounterError("a piercing has u = 0 or s = 0")
    eps = enc.eps
    t_s = float(np.min(np.log(eps / us[:, 0])))
    t_u = float(np.min(np.log(eps / us[:, 1])))
    t_enc = float(math.log(eps**2 / (us[:, 0].max() * us[:, 1].max())))
    entrance, exit_ = [], []
    for p in pts:
        x = PhasePoint(piercing_lift(p, enc.base), enc.base.group)
        entrance.append(evolve(x, -t_s))
        exit_.append(evolve(x, t_u))
    return t_s, t_u, t_enc, Ports(entrance, exit_)


def separation_ok(enc_or_coords, eps: float | None = None, loop_times=None):
    """Check the pairwise separation hypothesis for partner construction.

    ``|u_j - u_i| > (6/5)(e^{-T_j} + e^{-T_i})`` and
    ``|s_j - s_i| > (24/L^3) eps^3 + e^{-T_{j-1}} + e^{-T_{i-1}}`` with
    ``T_0 = T_L``.  ``eps`` is the theorem scale (``L`` times the section
    radius for an encounter).  Returns ``(ok, margins)``.
    """
    if isinstance(enc_or_coords, Encounter):
        u, s = enc_or_coords.u, enc_or_coords.s
        T = np.asarray(enc_or_coords.loop_times, float)
        if eps is None:
            eps = enc_or_coords.L * enc_or_coords.eps
    else:
        arr = np.asarray(enc_or_coords, float)
        u, s = arr[:, 0], arr[:, 1]
        T = np.asarray(loop_times, float)
    L = len(u)
    eT = np.exp(-T)
    prevT = np.roll(eT, 1)  # e^{-T_{j-1}}, with T_0 = T_L
    worst_u, worst_s = math.inf, math.inf
    bad = None
    for i in range(L):
        for j in range(i + 1, L):
            mu = abs(u[j] - u[i]) - 1.2 * (eT[j] + eT[i])
            ms = abs(s[j] - s[i]) - (24 / L**3 * eps**3 + prevT[j] + prevT[i])
            if mu < worst_u:
                worst_u = mu
            if ms < worst_s:
                worst_s = ms
            if (mu <= 0 or ms <= 0) and bad is None:
                bad = (i + 1, j + 1)
    ok = bad is None
    return ok, {"min_margin_u": worst_u, "min_margin_s": worst_s, "violating_pair": bad}


def crossing_coords(phi: float, epsilon_star: float | None = None):
    """Section coordinates ``(u, s, tau)`` of a self-crossing at angle ``pi - phi``."""
    limit = 1 / 6 if epsilon_star is None else min(1 / 6, epsilon_star / 9)
    if not math.isfinite(phi) or abs(phi) >= limit:
        raise ValueError(f"|phi| must be below {limit}")
    h = phi / 2
    return -math.sin(h) * math.cos(h), math.tan(h), -2 * math.log(math.cos(h))


# ---------------------------------------------------------------------------
# detection


@dataclass
class _Pair:
    u0: float
    s0: float
    tau0: float
    lo: float
    hi: float
    line: int
    word: tuple | None
    reversed: bool

    def other_time(self, tb_local: float, off_k: float) -> float:
        """Orbit time (unwrapped) of the paired stretch for reference parameter ``tb_local``."""
        return off_k + (self.tau0 - tb_local if self.reversed else tb_local - self.tau0)


def _relative_pairs(lines, r, eps, bw, bm, include_reversed):
    """Pairs between the reference line ``r`` and every line, through the ball."""
    c_r = _c_r(lines, r)
    right = np.asarray(lines.frames)
    revs = [False, True] if include_reversed else [False]
    right = np.stack([right @ D_PI if rev else right for rev in revs])  # (R, K, 2, 2)
    rel = inv_raw(lines.frames[r]) @ bm[None, None, :] @ right[:, :, None]
    u0, s0, tau0 = psl2.nac_decompose_batch(rel.reshape(-1, 2, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.log(np.abs(s0) / eps)
        hi = np.log(eps / np.abs(u0))
    nz = (np.abs(u0) > 1e-13) & (np.abs(s0) > 1e-13)
    ok = nz & np.isfinite(lo) & np.isfinite(hi) & (hi > lo) & (hi > 0) & (lo < c_r)
    shape = rel.shape[:3]
    out = []
    for i in np.flatnonzero(ok):
        ri, k, bi = np.unravel_index(i, shape)
        out.append(_Pair(float(u0[i]), float(s0[i]), float(tau0[i]), float(lo[i]), float(hi[i]), int(k), bw[bi] if bw is not None else None, revs[ri]))
    return out, c_r


def detect_encounters(orbit: PeriodicOrbit, eps: float, L_max: int = 6, ball_length: int = 1, include_reversed: bool = True, base_time: float | None = None, step: float | None = None) -> list:
    """Maximal parallel encounters of the orbit with itself at section radius ``eps``.

    Candidate bases are sampled along every line of the orbit at step
    ``eps / 2``; an encounter is reported once, at the midpoint of the
    window in which all of its stretches stay in the section (or at
    ``base_time`` when that lies inside the window).
    """
    group = orbit.group
    if group is not None and eps >= group.config.sigma0_proxy / 4:
        raise UniquenessError("eps must be below sigma0_proxy / 4")
    lines = orbit_lines(orbit)
    if group is not None:
        bw, bm = group.ball(ball_length)
    else:
        bw, bm = None, np.eye(2)[None]
    T = orbit.period
    step = step or eps / 2
    clusters = []
    tol = 4 * eps
    for r in range(len(lines.frames)):
        pairs, c_r = _relative_pairs(lines, r, eps, bw, bm, include_reversed)
        par = [p for p in pairs if not p.reversed]
        if not par:
            continue
        samples = np.arange(0.0, c_r, step)
        mids = [(p.lo + p.hi) / 2 for p in par if 0 <= (p.lo + p.hi) / 2 < c_r]
        if base_time is not None:
            bt = (base_time - lines.offsets[r]) % T
            if bt < c_r:
                mids.append(bt)
        for tb in np.unique(np.concatenate([samples, mids])):
            t_abs = lines.offsets[r] + tb
            act, offs = [], []
            for p in sorted((p for p in par if p.lo < tb < p.hi), key=lambda p: len(p.word or ())):
                d = (p.other_time(tb, lines.offsets[p.line]) - t_abs) % T
                if min(d, T - d) < 1e-6 or any(abs(d - o) < 1e-6 for o in offs):
                    continue
                act.append(p)
                offs.append(d)
            if not act:
                continue
            key = _cycle_key([0.0] + offs, T)
            lo = max(p.lo for p in act)
            hi = min(p.hi for p in act)
            inside = base_time is not None and lo < ((base_time - lines.offsets[r]) % T) < hi
            idx = next((i for i, c in enumerate(clusters) if _same_key(c[0], key, tol)), None)
            entry = (key, r, tb, act, lo, hi, inside, [p for p in pairs if p.reversed])
            if idx is None:
                clusters.append(entry)
            elif inside and not clusters[idx][6]:
                clusters[idx] = entry

    keys = [c[0] for c in clusters]
    out = []
    for c in sorted(clusters, key=lambda c: (c[1], c[2])):
        key, r, tb, act, lo, hi, inside, anti = c
        if len(key) > L_max or any(_is_sub(key, k2, tol) for k2 in keys):
            continue
        t_ref = (base_time - lines.offsets[r]) % T if inside else (max(lo, 0.0) + min(hi, _c_r(lines, r))) / 2
        out.append(_build(orbit, lines, eps, r, t_ref, act, anti))
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            if _overlap(out[i], out[j]):
                out[i].ambiguous = out[j].ambiguous = True
    return out


def _overlap(e1: Encounter, e2: Encounter) -> bool:
    """Two encounters overlap when some stretch passes both sections at once."""
    T = e1.orbit.period
    for p in e1.piercings:
        for q in e2.piercings:
            d = abs((p.t - q.t + T / 2) % T - T / 2)
            if d < min(e1.t_enc, e2.t_enc) / 2:
                return True
    return False


def _c_r(lines, r):
    nxt = lines.offsets[r + 1] if r + 1 < len(lines.offsets) else lines.period
    return nxt - lines.offsets[r]


def _cycle_key(offsets, T):
    """Gaps between consecutive stretches, in orbit order."""
    offs = sorted(o % T for o in offsets)
    return tuple(b - a for a, b in zip(offs, offs[1:] + [offs[0] + T]))


def _same_key(k1, k2, tol) -> bool:
    if len(k1) != len(k2):
        return False
    g = np.array(k2)
    return any(np.max(np.abs(np.roll(g, i) - k1)) < tol for i in range(len(g)))


def _is_sub(k_small, k_big, tol) -> bool:
    """Is the stretch set of ``k_small`` contained in that of ``k_big``?"""
    if len(k_small) >= len(k_big):
        return False
    T = sum(k_big)
    big = np.cumsum((0.0,) + tuple(k_big[:-1]))
    small = np.cumsum((0.0,) + tuple(k_small[:-1]))
    for start in big:
        pos = (big - start) % T
        if all(np.min(np.minimum(np.abs(pos - x), T - np.abs(pos - x))) < tol for x in small):
            return True
    return False


def _wrap(orbit, t_raw, word):
    T = orbit.period
    k = math.floor(t_raw / T)
    t = t_raw - k * T
    if t >= T - 1e-12:
        t, k = 0.0, k + 1
    if word is None:
        return t, None
    w = tuple(orbit.word)
    wz = w * k if k >= 0 else word_inverse(w) * (-k)
    return t, free_reduce(tuple(word) + wz)


def _build(orbit, lines, eps, r, t_ref, pairs, anti) -> Encounter:
    group = orbit.group
    ref_lift = lines.frames[r] @ psl2.a(t_ref)
    base = PhasePoint(ref_lift, group)
    t_abs = lines.offsets[r] + t_ref
    has_words = group is not None and bool(orbit.word)
    items = []
    w0 = word_inverse(lines.prefixes[r]) if has_words else None
    items.append((t_abs, SectionCoords(0.0, 0.0, 0.0, Flavor.CU_BS), w0))
    for p in pairs:
        u = p.u0 * math.exp(t_ref)
        s = p.s0 * math.exp(-t_ref)
        w = p.word + word_inverse(lines.prefixes[p.line]) if has_words else None
        items.append((p.other_time(t_ref, lines.offsets[p.line]), SectionCoords(u, s, 0.0, Flavor.CU_BS), w))
    pts = []
    for t_raw, c, w in items:
        t, w = _wrap(orbit, t_raw, w)
        gamma = group.element(w) if w is not None else np.eye(2)
        q = Piercing(t, c, gamma, 0, False, w)
        pts.append(q)
    # stretch 1 is the reference; the rest follow in orbit order
    T = orbit.period
    t1 = pts[0].t
    pts = [pts[0]] + sorted(pts[1:], key=lambda q: (q.t - t1) % T)
    for j, q in enumerate(pts):
        q.index = j + 1
    times = [(q.t - t1) % T for q in pts] + [T]
    loop_times = [times[j + 1] - times[j] for j in range(len(pts))]
    anti_p = []
    for p in anti:
        if p.lo < t_ref < p.hi:
            u = p.u0 * math.exp(t_ref)
            s = p.s0 * math.exp(-t_ref)
            t, w = _wrap(orbit, p.other_time(t_ref, lines.offsets[p.line]), None)
            anti_p.append(Piercing(t, SectionCoords(u, s, 0.0), np.eye(2), 0, True))
    enc = Encounter(base, eps, len(pts), pts, loop_times, orbit=orbit, antiparallel=anti_p)
    enc.t_s, enc.t_u, enc.t_enc, _ = encounter_metrics(enc, recenter_first=False)
    return enc


def encounter_from_piercings(orbit: PeriodicOrbit, base, eps: float, piercings: list) -> Encounter:
    """Wrap piercings of one section (ordered by orbit time) as an encounter."""
    pts = sorted([p for p in piercings if not p.reversed], key=lambda p: p.t)
    T = orbit.period
    times = [p.t for p in pts] + [pts[0].t + T]
    loop_times = [times[j + 1] - times[j] for j in range(len(pts))]
    enc = Encounter(as_base(base, orbit), eps, len(pts), pts, loop_times, orbit=orbit)
    enc.antiparallel = [p for p in piercings if p.reversed]
    if len(pts) >= 2:
        enc.t_s, enc.t_u, enc.t_enc, _ = encounter_metrics(enc)
    return enc


def as_base(base, orbit):
    if isinstance(base, PhasePoint):
        return base
    return PhasePoint(np.asarray(base, float), orbit.group)
