"""Closing near-returns into periodic orbits, connecting orbits, shadowing.

Every construction goes through a deck element and its axis; the explicit
formulas for the new base point and period are then checked against the
axis as named residuals.

Conventions: a point ``x = Gamma g`` returns after time ``T`` to
``Gamma g c_u b_s`` (flavor CU_BS) or ``Gamma g b_s c_u`` (flavor BS_CU).
The deck element ``zeta = g c_u b_s a_{-T} g^{-1}`` records the return, and
its inverse is the forward element of the closed orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .flow import PhasePoint, SectionCoords, as_point, relative_distances, sampled_distance, section_locate
from .fuchsian import PeriodicOrbit, orbit_from_element
from .psl2 import Flavor, inv_raw


class ClosingError(RuntimeError):
    pass


class DegenerateInputError(ValueError):
    pass


# absolute slack for coordinates recovered from a decomposition
TINY = 1e-15


def period_noise(T):
    # periods come from an arccosh of a trace; below this they are noise
    return 1e-13 * max(1.0, T)


def _residual(lhs, rhs, strict=True):
    ok = lhs < rhs if strict else lhs <= rhs
    return (float(lhs), float(rhs), bool(ok))


@dataclass
class ClosingResult:
    orbit: PeriodicOrbit
    x_prime: PhasePoint
    T_prime: float
    sigma: float
    eta: float
    residuals: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r[2] for r in self.residuals.values())


@dataclass
class ConnectResult:
    orbit: PeriodicOrbit
    T: float
    sigma: float
    eta: float
    period_residual: float
    residuals: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r[2] for r in self.residuals.values())


def return_matrix(u, s, flavor) -> np.ndarray:
    if Flavor(flavor) is Flavor.CU_BS:
        return psl2.c(u) @ psl2.b(s)
    return psl2.b(s) @ psl2.c(u)


def near_return_element(x, T: float, coords, flavor=None, validate: bool = True) -> np.ndarray:
    """Deck element ``zeta = g R a_{-T} g^{-1}`` with ``R = c_u b_s`` or ``b_s c_u``."""
    x = as_point(x)
    flavor = Flavor(flavor or coords.flavor)
    g = x.lift
    zeta = psl2.canonical(g @ return_matrix(coords.u, coords.s, flavor) @ psl2.a(-T) @ inv_raw(g))
    if validate and x.group is not None:
        eps = 2 * max(abs(coords.u), abs(coords.s)) + 1e-12
        back = section_locate(x, PhasePoint(g @ psl2.a(T), x.group), eps, flavor, extra=[zeta])
        if back is None or abs(back.u - coords.u) > 1e-8 or abs(back.s - coords.s) > 1e-8:
            raise ClosingError("not a near-return")
    return zeta


def predicted_trace(T, u, s, flavor) -> float:
    extra = math.exp(T / 2) if Flavor(flavor) is Flavor.CU_BS else math.exp(-T / 2)
    return 2 * math.cosh(T / 2) + u * s * extra


def eta_roots(T, u, s):
    """Roots of ``u e^{-T} eta^2 - ((1 + s u) e^{-T} - 1) eta - s = 0``."""
    eT = math.exp(-T)
    A = u * eT
    B = -((1 + s * u) * eT - 1)
    C = -s
    if A == 0:
        return [-C / B], None
    disc = B * B - 4 * A * C
    if disc < 0:
        return [], disc
    r = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (B + math.copysign(r, B))
    roots = [q / A, C / q] if q != 0 else [(-B + r) / (2 * A), (-B - r) / (2 * A)]
    return roots, disc


def select_eta(T, u, s, notes=None):
    roots, disc = eta_roots(T, u, s)
    # for long returns the window shrinks to a few ulps of s
    window = 2 * abs(s) * math.exp(-T) + 4 * math.ulp(s)
    ok = [r for r in roots if abs(r - s) <= window]
    if not ok:
        raise ClosingError(f"no root of the eta quadratic in the window (discriminant {disc})")
    if len(ok) > 1 and notes is not None:
        notes.append("both quadratic roots in window; closer one used")
    return min(ok, key=lambda r: abs(r - s))


def close_orbit(x, T: float, coords, flavor=None, validate: bool = True, step: float = 0.05) -> ClosingResult:
    """Close the near-return ``phi_T(x) = (u, s)_x`` into a periodic orbit."""
    x = as_point(x)
    flavor = Flavor(flavor or coords.flavor)
    u, s = coords.u, coords.s
    notes = []
    zeta = near_return_element(x, T, coords, flavor, validate)
    forward = psl2.invert(zeta)
    g = x.lift
    frame, T_prime = psl2.axis_frame(forward)
    rel = inv_raw(g) @ frame
    back = psl2.nac_decompose(rel, flavor)
    if flavor is Flavor.CU_BS:
        sigma, eta = back.u, back.s
        g_prime = g @ psl2.c(sigma) @ psl2.b(eta)
    else:
        sigma, eta = back.u, back.s
        g_prime = g @ psl2.b(eta) @ psl2.c(sigma)
    g_prime = psl2.canonical(g_prime)
    orbit = orbit_from_element(forward, (), x.group)
    orbit.frame = g_prime
    x_prime = PhasePoint(g_prime, x.group)

    eT = math.exp(-T)
    res = {}
    lhs_tr = 2 * math.cosh(T_prime / 2)
    rhs_tr = predicted_trace(T, u, s, flavor)
    res["trace identity"] = _residual(abs(lhs_tr - rhs_tr), 1e-10, strict=False)
    if flavor is Flavor.CU_BS:
        res["|sigma| < 2|u|e^-T"] = _residual(abs(sigma), 2 * abs(u) * eT + TINY) if u else _residual(abs(sigma), 1e-12, False)
        res["|eta - s| < 2s^2|u| + 2|s|e^-T"] = _residual(abs(eta - s), 2 * s * s * abs(u) + 2 * abs(s) * eT + TINY) if s else _residual(abs(eta), 1e-12, False)
        dT = abs((T_prime - T) / 2 - math.log1p(u * s))
        res["|(T'-T)/2 - ln(1+us)| < 5|us|e^-T"] = _residual(dT, 5 * abs(u * s) * eT + period_noise(T)) if u * s else _residual(dT, 1e-12, False)
    else:
        eta_f = select_eta(T, u, s, notes)
        denom = 1 + (s - eta_f) * u - eta_f * u - math.exp(T)
        sigma_f = u / denom
        Tp_f = T - 2 * math.log1p((s - eta_f) * u)
        res["eta formula"] = _residual(abs(eta_f - eta), 1e-9 * max(1.0, abs(eta)), strict=False)
        res["sigma formula"] = _residual(abs(sigma_f - sigma), 1e-9 * max(1.0, abs(sigma)), strict=False)
        res["T' formula"] = _residual(abs(Tp_f - T_prime), 1e-9 * max(1.0, T), strict=False)
        res["|eta - s| <= 2|s|e^-T"] = _residual(abs(eta - s), 2 * abs(s) * eT + TINY, strict=False)
        res["|sigma| < 2|u|e^-T"] = _residual(abs(sigma), 2 * abs(u) * eT + TINY) if u else _residual(abs(sigma), 1e-12, False)
        dT = abs(T_prime / 2 - T / 2)
        res["|T'/2 - T/2| < 4|us|e^-T"] = _residual(dT, 4 * abs(u * s) * eT + period_noise(T)) if u * s else _residual(dT, 1e-12, False)
    if T > 0:
        dmax, _ = sampled_distance(g, g_prime, 0.0, T, step)
        bound = 2 * abs(u) + abs(eta)
        # as u -> 0, x' -> x b_eta and the bound is attained at t = 0
        res["d(phi_t x, phi_t x') < 2|u| + |eta|"] = _residual(dmax, bound * (1 + 1e-12) + 1e-15, False)
    return ClosingResult(orbit, x_prime, T_prime, sigma, eta, res, notes)


# ---------------------------------------------------------------------------
# connecting


def connect_orbits(orbit1: PeriodicOrbit, x2_coords, orbit2: PeriodicOrbit, gamma=None, step: float = 0.1) -> ConnectResult:
    """Merge two periodic orbits whose base points share a section.

    ``orbit2.frame`` (after left multiplication by ``gamma``) must equal
    ``orbit1.frame c_u b_s``.  Without ``gamma`` it is searched in the ball.
    """
    u, s = x2_coords.u, x2_coords.s
    if u * s == 0:
        raise DegenerateInputError("us = 0: base points on a common stable or unstable leaf")
    g1 = orbit1.frame
    T1, T2 = orbit1.period, orbit2.period
    if T1 + T2 < 1:
        raise DegenerateInputError("T1 + T2 must be at least 1")
    g2 = psl2.canonical(g1 @ psl2.c(u) @ psl2.b(s))
    if gamma is None:
        if psl2.proj_equal(g2, orbit2.frame, 1e-8):
            gamma = np.eye(2)
        else:
            eps = 2 * max(abs(u), abs(s))
            found, gamma = section_locate(
                PhasePoint(g1, orbit1.group), PhasePoint(orbit2.frame, orbit2.group), eps, with_gamma=True
            )
            if found is None:
                raise DegenerateInputError("orbit2 base point is not in the section at orbit1")
    F1 = orbit1.element
    F2 = psl2.canonical(gamma @ orbit2.element @ inv_raw(gamma))
    F = psl2.compose(F1, F2)
    frame, T = psl2.axis_frame(F)
    back = psl2.nac_decompose(inv_raw(g1) @ frame, Flavor.CU_BS)
    eta = back.s
    sigma = back.u - u * math.exp(-T1)
    x_lift = psl2.canonical(g1 @ psl2.c(back.u) @ psl2.b(back.s))
    orbit = orbit_from_element(F, (), orbit1.group)
    orbit.frame = x_lift

    us = u * s
    e1, e2 = math.exp(-T1), math.exp(-T2)
    pres = abs((T - (T1 + T2)) / 2 - math.log1p(us))
    res = {}
    res["period"] = _residual(pres, 3 * abs(us) * (e1 + e2) + 8 * abs(us) * e1 * e2 + period_noise(T))
    res["|sigma| < 2|u|e^-(T1+T2)"] = _residual(abs(sigma), 2 * abs(u) * e1 * e2)
    # |eta - s~| from closing plus |s~ - s| = |s|e^-T2
    res["|eta - s| < 2s^2|u| + 2|s|e^-(T1+T2) + |s|e^-T2"] = _residual(
        abs(eta - s), 2 * s * s * abs(u) + 2 * abs(s) * e1 * e2 + abs(s) * e2
    )
    diag = {"|eta - s| < 2s^2|u| + 2|s|e^-(T1+T2)": _residual(abs(eta - s), 2 * s * s * abs(u) + 2 * abs(s) * e1 * e2)}
    eps = max(abs(u), abs(s))
    d1, _ = sampled_distance(x_lift, g1, 0.0, T1, step)
    x_mid = x_lift @ psl2.a(T1)
    d2, _ = sampled_distance(x_mid, F1 @ g2, 0.0, T2, step)
    res["leg 1 within 5 eps"] = _residual(d1, 5 * eps)
    res["leg 2 within 5 eps"] = _residual(d2, 5 * eps)
    return ConnectResult(orbit, T, sigma, eta, pres, res, diag)


# ---------------------------------------------------------------------------
# shadowing


@dataclass
class ShadowReport:
    times_forward: np.ndarray
    ratio_forward: np.ndarray
    times_backward: np.ndarray
    ratio_backward: np.ndarray

    @property
    def max_forward(self) -> float:
        return float(self.ratio_forward.max()) if self.ratio_forward.size else 0.0

    @property
    def max_backward(self) -> float:
        return float(self.ratio_backward.max()) if self.ratio_backward.size else 0.0

    @property
    def ok(self) -> bool:
        return self.max_forward < 1 and self.max_backward < 1


def shadow_verify(x1, x2, w, eps: float, t_span: float, step: float = 0.1) -> ShadowReport:
    """Ratios ``d(phi_t x1, phi_t w) / (eps e^{-t})`` for ``t >= 0`` and
    ``d(phi_t x2, phi_t w) / (eps e^{t})`` for ``t <= 0``, on tracked lifts."""
    g1 = getattr(x1, "lift", x1)
    g2 = getattr(x2, "lift", x2)
    gw = getattr(w, "lift", w)
    if t_span <= 0:
        empty = np.zeros(0)
        return ShadowReport(empty, empty, empty, empty)
    n = max(1, int(math.ceil(t_span / step)))
    ts = np.linspace(0.0, t_span, n + 1)
    fwd = relative_distances(inv_raw(g1) @ gw, ts) / (eps * np.exp(-ts))
    bwd = relative_distances(inv_raw(g2) @ gw, -ts) / (eps * np.exp(-ts))
    return ShadowReport(ts, fwd, -ts, bwd)
