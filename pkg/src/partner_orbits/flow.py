"""Geodesic and horocycle flows on Gamma\\PSL(2,R) and Poincare sections.

A point is a coset ``Gamma g``; flows act on the right (``g a_t``, ``g b_t``,
``g c_t``), deck elements on the left.  The section of radius ``eps`` at
``x = Gamma g`` is ``{Gamma g c_u b_s : |u|, |s| < eps}`` (primed flavor:
``g b_s c_u``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .fuchsian import FuchsianGroup, PeriodicOrbit, QuotientConfig, free_reduce, word_inverse
from .psl2 import D_PI, Flavor, NacDecomposition, inv_raw

SectionCoords = NacDecomposition

PIERCE_TOL = 1e-10


class UniquenessError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    lift: np.ndarray
    group: FuchsianGroup | None = None

    def __post_init__(self):
        object.__setattr__(self, "lift", psl2.canonical(self.lift))

    def same_coset(self, other: "PhasePoint", tol: float = 1e-9) -> bool:
        if psl2.proj_equal(self.lift, other.lift, tol):
            return True
        if self.group is None:
            return False
        _, mats = self.group.ball(self.group.config.dist_ball_length)
        diff = np.abs(psl2.canonical_batch(mats @ other.lift) - self.lift).max(axis=(1, 2))
        return bool(diff.min() <= tol)


@dataclass
class Piercing:
    t: float
    coords: SectionCoords
    gamma: np.ndarray
    index: int = 0
    reversed: bool = False
    word: tuple | None = None

    @property
    def u(self) -> float:
        return self.coords.u

    @property
    def s(self) -> float:
        return self.coords.s


def as_point(x, group=None) -> PhasePoint:
    if isinstance(x, PhasePoint):
        return x
    return PhasePoint(np.asarray(x, dtype=float), group)


_FLOWS = {"geodesic": psl2.a, "horocycle": psl2.b, "conj_horocycle": psl2.c}


def evolve(x, t: float, flow: str = "geodesic") -> PhasePoint:
    x = as_point(x)
    try:
        gen = _FLOWS[flow]
    except KeyError:
        raise ValueError(f"unknown flow {flow!r}") from None
    return PhasePoint(x.lift @ gen(t), x.group)


def time_reversal(x) -> PhasePoint:
    x = as_point(x)
    return PhasePoint(x.lift @ D_PI, x.group)


# ---------------------------------------------------------------------------
# sections


def _decompose_batch(ms, flavor):
    return psl2.nac_decompose_batch(ms, flavor)


def _candidates(group, extra=()):
    mats = [np.eye(2)[None]]
    if group is not None:
        mats.append(group.ball(group.config.dist_ball_length)[1])
    if len(extra):
        mats.append(np.asarray(extra, dtype=float).reshape(-1, 2, 2))
    return np.concatenate(mats)


def section_locate(x_ref, y, eps: float, flavor=Flavor.CU_BS, extra=(), tol: float = 1e-9, with_gamma: bool = False):
    """Coordinates of ``y`` in the section of radius ``eps`` at ``x_ref``.

    Every candidate deck element from the ball (plus ``extra``) is tried;
    ``None`` when no candidate puts ``y`` on the section.
    """
    x_ref = as_point(x_ref)
    y = as_point(y)
    group = x_ref.group or y.group
    if group is not None and eps >= group.config.sigma0_proxy / 4:
        raise UniquenessError("eps must be below sigma0_proxy / 4")
    flavor = Flavor(flavor)
    cands = _candidates(group, extra)
    ms = inv_raw(x_ref.lift) @ cands @ y.lift
    u, s, tau = _decompose_batch(ms, flavor)
    ok = (np.abs(tau) <= tol) & (np.abs(u) < eps) & (np.abs(s) < eps)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return (None, None) if with_gamma else None
    if idx.size > 1:
        # the same coset can be reached through duplicated candidates
        mats = psl2.canonical_batch(cands[idx])
        if np.abs(mats - mats[0]).max() > 1e-8:
            raise UniquenessError("two deck elements put y on the section; eps too large")
    i = idx[0]
    coords = SectionCoords(float(u[i]), float(s[i]), float(tau[i]), flavor)
    return (coords, cands[i]) if with_gamma else coords


def orbit_candidates(orbit: PeriodicOrbit, group: FuchsianGroup | None, ball_length: int = 2, extra=()):
    """Deck elements ``beta * prefix_k^{-1}`` that bring orbit stretches near the frame."""
    pref = [np.eye(2)]
    if group is not None and orbit.word:
        m = np.eye(2)
        for x in orbit.word[:-1]:
            m = m @ group.letter(x)
            pref.append(m.copy())
    pinv = np.array([inv_raw(p) for p in pref])
    if group is not None:
        _, ball = group.ball(ball_length)
    else:
        ball = np.eye(2)[None]
    out = (ball[:, None] @ pinv[None, :]).reshape(-1, 2, 2)
    if len(extra):
        out = np.concatenate([out, np.asarray(extra, dtype=float).reshape(-1, 2, 2)])
    return out


@dataclass
class OrbitLines:
    """The orbit lifted along the axes of the rotations of its word.

    ``frames[k]`` is the axis frame of ``x_k ... x_{k-1}`` and sits at orbit
    time ``offsets[k]``; line ``k + 1`` is line ``k`` pulled back by ``x_k``.
    Working line by line keeps every matrix product short, which matters
    once the period exceeds a few tens.
    """

    frames: list
    offsets: list
    prefixes: list
    period: float


def orbit_lines(orbit: PeriodicOrbit) -> OrbitLines:
    group = orbit.group
    w = tuple(orbit.word)
    if group is None or not w:
        return OrbitLines([orbit.frame], [0.0], [()], orbit.period)
    letters = [group.letter(x) for x in w]
    n = len(w)
    frames = []
    for k in range(n):
        m = np.eye(2)
        for x in letters[k:] + letters[:k]:
            m = m @ x
        frames.append(psl2.axis_frame(m)[0] if k else orbit.frame)
    offsets = [0.0]
    for k in range(n - 1):
        m = inv_raw(frames[k]) @ letters[k] @ frames[k + 1]
        offsets.append(offsets[-1] + 2 * math.log(abs(m[0, 0])))
    return OrbitLines(frames, offsets, [w[:k] for k in range(n)], orbit.period)


def piercings(orbit: PeriodicOrbit, x_ref, eps: float, flavor=Flavor.CU_BS, include_reversed: bool = False, candidates=None, tol: float = PIERCE_TOL, ball_length: int = 2) -> list:
    """All times in ``[0, T)`` at which the orbit crosses the section at ``x_ref``.

    For a fixed deck element the flow offset of the relative matrix is
    affine in time (slope 1, or -1 after reversal), so each candidate is
    solved exactly and validated by recomputation.  Without explicit
    ``candidates`` the ball is tried against every line of
    :func:`orbit_lines`; piercings then carry the deck word in ``word``.
    """
    x_ref = as_point(x_ref, orbit.group)
    flavor = Flavor(flavor)
    T = orbit.period
    hinv = inv_raw(x_ref.lift)
    group = orbit.group
    if candidates is not None:
        lines = OrbitLines([orbit.frame], [0.0], [()], T)
        cand_sets = [(np.asarray(candidates, float).reshape(-1, 2, 2), None)]
    else:
        lines = orbit_lines(orbit)
        if group is not None:
            bw, bm = group.ball(ball_length)
        else:
            bw, bm = [()], np.eye(2)[None]
        cand_sets = [(bm, bw)]
    zeta = orbit.element
    found = []
    for k, (fr, off, pre) in enumerate(zip(lines.frames, lines.offsets, lines.prefixes)):
        pre_inv = word_inverse(pre)
        for mats, words in cand_sets:
            for rev in ([False, True] if include_reversed else [False]):
                base = fr @ D_PI if rev else fr
                u, s, tau0 = _decompose_batch(hinv @ mats @ base, flavor)
                keep = np.flatnonzero((np.abs(u) < eps) & (np.abs(s) < eps))
                for i in keep:
                    local = float(tau0[i]) if rev else -float(tau0[i])
                    m = hinv @ mats[i] @ fr @ psl2.a(local)
                    if rev:
                        m = m @ D_PI
                    try:
                        c = psl2.nac_decompose(m, flavor)
                    except psl2.DecompositionError:
                        continue
                    if abs(c.tau) > max(tol, 1e-9) or abs(c.u) >= eps or abs(c.s) >= eps:
                        continue
                    t_raw = off + local
                    wraps = math.floor(t_raw / T)
                    t = t_raw - wraps * T
                    if t >= T - 1e-12:
                        t, wraps = 0.0, wraps + 1
                    word = None
                    if words is not None:
                        # gamma g0 a_{t + kT} = gamma zeta^k g0 a_t
                        wz = tuple(orbit.word) * wraps if wraps >= 0 else word_inverse(tuple(orbit.word)) * (-wraps)
                        word = free_reduce(tuple(words[i]) + pre_inv + wz)
                        gamma = group.element(word) if group is not None else np.eye(2)
                    else:
                        gamma = mats[i]
                        if wraps > 0:
                            gamma = gamma @ np.linalg.matrix_power(zeta, wraps)
                        elif wraps < 0:
                            gamma = gamma @ np.linalg.matrix_power(inv_raw(zeta), -wraps)
                    p = Piercing(t, c, psl2.canonical(gamma), 0, rev)
                    p.word = word
                    # short candidates are the most accurate; keep the first of near-duplicates
                    size = float(np.abs(mats[i]).max())
                    found.append((size, p))
    found.sort(key=lambda it: it[0])
    out = []
    for _, p in found:
        dup = False
        for q in out:
            dt = abs((p.t - q.t + T / 2) % T - T / 2)
            if q.reversed == p.reversed and dt < 1e-5 and abs(p.u - q.u) < 1e-6 and abs(p.s - q.s) < 1e-6:
                dup = True
                break
        if not dup:
            out.append(p)
    out.sort(key=lambda p: (p.t, p.reversed))
    for j, p in enumerate(out):
        p.index = j + 1
    return out


def recenter(coords_a, coords_b, check: bool = True):
    """Coordinates of B in the section at A, with the flow time that puts it there.

    ``b_{-s1} c_{u2-u1} b_{s2} = c_u b_s a_{-tau}`` so that ``phi_tau(x2)``
    lies in the section at ``x1`` with coordinates ``(u, s)``.
    """
    u1, s1 = coords_a.u, coords_a.s
    u2, s2 = coords_b.u, coords_b.s
    q = psl2.quintuple_product(-s1, u2 - u1, s2, 0.0, 0.0, check_domain=False)
    out = SectionCoords(q.u, q.s, -q.tau, Flavor.CU_BS, q.rho)
    if check:
        eps = max(abs(u1), abs(s1), abs(u2), abs(s2))
        du, ds = u2 - u1, s2 - s1
        ident = abs(out.u * out.s - du * ds) - abs(s1 * s2) * du * du
        if 0 < eps < 0.5:
            assert abs(out.u - du) < 8 * eps**3, "recentring: |u - (u2 - u1)| < 8 eps^3"
            assert abs(out.s - ds) < 8 * eps**3, "recentring: |s - (s2 - s1)| < 8 eps^3"
            assert abs(out.tau) < 8 * eps**2, "recentring: |tau| < 8 eps^2"
        assert abs(ident) <= 1e-12 * max(1.0, abs(du * ds)), "recentring: product identity"
    return out


def coords_point(coords, base=None) -> np.ndarray:
    """Lift ``g c_u b_s`` (or ``g b_s c_u``) of a point with given section coordinates."""
    g = np.eye(2) if base is None else getattr(base, "lift", base)
    if Flavor(coords.flavor) is Flavor.CU_BS:
        return psl2.canonical(g @ psl2.c(coords.u) @ psl2.b(coords.s))
    return psl2.canonical(g @ psl2.b(coords.s) @ psl2.c(coords.u))


# ---------------------------------------------------------------------------
# sampled distances and closeness reports


def sampled_distance(lift1, lift2, t0: float, t1: float, step: float = 0.1, group=None, extra=()):
    """Max over sampled ``t`` in [t0, t1] of the distance between ``lift_i a_t``.

    With ``group=None`` only the given lifts are compared (tracked lifts);
    otherwise the ball is searched too.  Returns (max distance, time of max).
    """
    if t1 < t0:
        t0, t1 = t1, t0
    n = max(1, int(math.ceil((t1 - t0) / step)))
    ts = np.linspace(t0, t1, n + 1)
    lift1 = np.asarray(lift1, float)
    lift2 = np.asarray(lift2, float)
    if group is None and not len(extra):
        # a_{-t} M a_t scales the off-diagonal entries exactly
        d = relative_distances(inv_raw(lift1) @ lift2, ts)
    else:
        cands = _candidates(group, extra)
        d = np.array([psl2.local_dist_batch(lift1 @ psl2.a(t), cands @ lift2 @ psl2.a(t)).min() for t in ts])
    i = int(np.argmax(d))
    return float(d[i]), float(ts[i])


def relative_distances(m, ts) -> np.ndarray:
    """Local distances ``||log(a_{-t} m a_t)||`` for an array of times."""
    ts = np.asarray(ts, dtype=float)
    ms = np.empty((len(ts), 2, 2))
    ms[:, 0, 0] = m[0, 0]
    ms[:, 1, 1] = m[1, 1]
    ms[:, 0, 1] = m[0, 1] * np.exp(-ts)
    ms[:, 1, 0] = m[1, 0] * np.exp(ts)
    d, ok = psl2._local_norm_batch(ms)
    return np.where(ok, d, np.inf)


@dataclass
class BoundReport:
    direction: str
    T: float
    eps: float
    rho: float
    max_forward: float | None = None
    max_backward: float | None = None
    gap_u: float = 0.0
    gap_s: float = 0.0
    gap_s_sym: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks.values() if c["hypothesis"])


def closeness_bounds(coords1, coords2, T: float, direction: str = "both", eps: float = 0.05, rho: float = 1.0, eps_rho: float | None = None, step: float = 0.1, base=None) -> BoundReport:
    """Empirical check of the coordinate/closeness implications in both directions.

    ``(u_i, s_i)`` are section coordinates at ``base``.  Forward (backward)
    closeness on ``[0, T]`` (``[-T, 0]``) is compared with the unstable
    (stable) gap.  ``eps_rho`` is the closeness scale attached to ``rho``.
    """
    if direction not in ("forward", "backward", "both"):
        raise ValueError("direction must be forward, backward or both")
    if eps_rho is None:
        eps_rho = rho / 2
    p1 = coords_point(coords1, base)
    p2 = coords_point(coords2, base)
    u1, s1, u2, s2 = coords1.u, coords1.s, coords2.u, coords2.s
    rep = BoundReport(direction, T, eps, rho)
    rep.gap_u = abs(u1 - u2)
    rep.gap_s = abs(s1 - s2 - s1 * s2 * (u1 - u2))
    rep.gap_s_sym = abs(s1 - s2)
    small = max(abs(u1), abs(s1), abs(u2), abs(s2)) < eps / 5
    eT = math.exp(-T)
    if direction in ("forward", "both"):
        rep.max_forward, _ = sampled_distance(p1, p2, 0.0, T, step)
    if direction in ("backward", "both"):
        rep.max_backward, _ = sampled_distance(p1, p2, -T, 0.0, step)

    def add(name, hyp, lhs, rhs):
        rep.checks[name] = {"hypothesis": bool(hyp), "lhs": lhs, "rhs": rhs, "pass": bool(lhs < rhs) if hyp else True}

    if rep.max_forward is not None:
        add("forward close => unstable gap", rep.max_forward < eps_rho, rep.gap_u, rho * eT)
        add("unstable gap => forward close", small and rep.gap_u < eps / 2 * eT, rep.max_forward, eps)
    if rep.max_backward is not None:
        add("backward close => stable gap", rep.max_backward < eps_rho, rep.gap_s, rho * eT)
        add("stable gap => backward close", small and rep.gap_s < eps / 2 * eT, rep.max_backward, eps)
    if direction == "both":
        both = max(rep.max_forward, rep.max_backward)
        add("two-sided close => symmetric stable gap", both < eps_rho, rep.gap_s_sym, 1.5 * rho * eT)
        add(
            "both gaps => two-sided close",
            small and rep.gap_u < eps / 2 * eT and rep.gap_s < eps / 2 * eT,
            both,
            eps,
        )
    return rep


def time_shift_check(lift1, lift2, T: float, T2: float, step: float = 0.05):
    """Sampled max distance on ``[0, max(T, T2)]`` and the allowance
    ``(max on [0, min(T, T2)]) + sqrt(2)|T - T2|``."""
    lo, hi = sorted((T, T2))
    d_short, _ = sampled_distance(lift1, lift2, 0.0, lo, step)
    d_long, _ = sampled_distance(lift1, lift2, 0.0, hi, step)
    return max(d_long, d_short), d_short + math.sqrt(2) * (hi - lo)
