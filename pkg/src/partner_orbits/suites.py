"""Seeded inequality suites for the section, closing and connecting constructions.

Each suite draws its samples from ``numpy.random.default_rng(seed)`` and
records, per inequality, the worst sample and the number of failures.
``fault`` names a suite whose first inequality gets a unit offset, to
exercise the failure path.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .closing import close_orbit, connect_orbits, shadow_verify
from .flow import PhasePoint, SectionCoords, closeness_bounds, recenter
from .fuchsian import FuchsianGroup, QuotientConfig, orbit_from_element
from .psl2 import Flavor


@dataclass
class SuiteResult:
    name: str
    samples: int
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["failures"] == 0 for c in self.checks.values())

    def first_failure(self):
        for k, c in self.checks.items():
            if c["failures"]:
                return k
        return None

    def record_diagnostic(self, name, lhs, rhs, ok):
        """Like ``record`` but never gates ``ok``."""
        self.record(name, lhs, rhs, ok, self.diagnostics)

    def record(self, name, lhs, rhs, ok=None, into=None):
        lhs, rhs = float(lhs), float(rhs)
        ok = lhs < rhs if ok is None else bool(ok)
        into = self.checks if into is None else into
        c = into.setdefault(name, {"lhs": lhs, "rhs": rhs, "worst": -math.inf, "failures": 0, "count": 0})
        score = lhs / rhs if rhs > 0 else (math.inf if lhs > 0 else 0.0)
        if score > c["worst"]:
            c.update(lhs=lhs, rhs=rhs, worst=score)
        c["count"] += 1
        c["failures"] += 0 if ok else 1


def quintuple_suite(rng, n=10_000, fault=False) -> SuiteResult:
    out = SuiteResult("quintuple", n)
    xs = rng.uniform(-1 / 6, 1 / 6, size=(n, 5))
    for k, (s1, u1, s2, u2, s3) in enumerate(xs):
        q = psl2.quintuple_product(s1, u1, s2, u2, s3)
        direct = psl2.b(s1) @ psl2.c(u1) @ psl2.b(s2) @ psl2.c(u2) @ psl2.b(s3)
        closed = psl2.c(q.u) @ psl2.b(q.s) @ psl2.a(q.tau)
        err = float(np.max(np.abs(direct - closed))) + (1.0 if fault and k == 0 else 0.0)
        out.record("b c b c b = c_u b_s a_tau entrywise", err, 1e-12, err <= 1e-12)
    return out


def recenter_suite(rng, n=2000, fault=False) -> SuiteResult:
    out = SuiteResult("recentring", n)
    for k in range(n):
        eps = rng.uniform(1e-3, 0.2)
        u1, s1, u2, s2 = rng.uniform(-eps, eps, 4)
        r = recenter(SectionCoords(u1, s1, 0.0), SectionCoords(u2, s2, 0.0), check=False)
        du, ds = u2 - u1, s2 - s1
        bump = 1.0 if fault and k == 0 else 0.0
        out.record("|u - (u2 - u1)| < 8 eps^3", abs(r.u - du) + bump, 8 * eps**3)
        out.record("|s - (s2 - s1)| < 8 eps^3", abs(r.s - ds), 8 * eps**3)
        out.record("|tau| < 8 eps^2", abs(r.tau), 8 * eps**2)
        gap = abs(abs(r.u * r.s - du * ds) - abs(s1 * s2) * du * du)
        out.record("|us - (u2-u1)(s2-s1)| = |s1 s2|(u2-u1)^2", gap, 1e-12 * max(1.0, abs(du * ds)), gap <= 1e-12)
    return out


def closing_suite(rng, n=1000, fault=False, step=0.25) -> SuiteResult:
    out = SuiteResult("closing", n)
    x = PhasePoint(np.eye(2))
    for k in range(n):
        T = rng.uniform(1, 10)
        u, s = rng.uniform(-0.25, 0.25, 2)
        for flavor in (Flavor.CU_BS, Flavor.BS_CU):
            res = close_orbit(x, T, SectionCoords(u, s, 0.0, flavor), flavor, validate=False, step=step)
            for name, (lhs, rhs, ok) in res.residuals.items():
                if fault and k == 0 and flavor is Flavor.CU_BS and name.startswith("|(T'-T)/2"):
                    lhs, ok = lhs + 1.0, False
                out.record(f"{flavor.value}: {name}", lhs, rhs, ok)
    return out


def _schottky_pair(rng):
    T1, T2 = rng.uniform(4, 9, 2)
    u, s = rng.uniform(0.01, 0.05, 2) * rng.choice([-1, 1], 2)
    p = psl2.c(u) @ psl2.b(s)
    A = psl2.a(T1)
    B = p @ psl2.a(T2) @ psl2.inv_raw(p)
    group = FuchsianGroup([A, B], config=QuotientConfig(0.25, 1.0, 2))
    o1 = orbit_from_element(A, (1,), group)
    o1.frame = np.eye(2)
    o2 = orbit_from_element(B, (2,), group)
    o2.frame = psl2.canonical(p)
    return o1, o2, SectionCoords(u, s, 0.0)


def connecting_suite(rng, n=200, fault=False, step=0.1) -> SuiteResult:
    out = SuiteResult("connecting", n)
    for k in range(n):
        o1, o2, xy = _schottky_pair(rng)
        res = connect_orbits(o1, xy, o2, gamma=np.eye(2), step=step)
        for name, (lhs, rhs, ok) in res.residuals.items():
            if fault and k == 0 and name == "period":
                lhs, ok = lhs + 1.0, False
            label = "|(T-(T1+T2))/2 - ln(1+us)| <= 3|us|(e^-T1+e^-T2) + 8|us|e^-(T1+T2)" if name == "period" else name
            out.record(label, lhs, rhs, ok)
        for name, (lhs, rhs, ok) in res.diagnostics.items():
            out.record_diagnostic(name, lhs, rhs, ok)
    return out


def shadowing_suite(rng, n=100, fault=False) -> SuiteResult:
    out = SuiteResult("shadowing", n)
    for k in range(n):
        eps = rng.uniform(0.01, 0.1)
        t1, t2 = rng.uniform(-eps, eps, 2) / 2
        g1 = psl2.canonical(psl2.d_theta(rng.uniform(0, math.pi)) @ psl2.a(rng.uniform(-1, 1)))
        w = g1 @ psl2.b(t1)
        g2 = w @ psl2.c(-t2)
        rep = shadow_verify(g1, g2, w, eps, t_span=5.0)
        bump = 1.0 if fault and k == 0 else 0.0
        out.record("d(phi_t x1, phi_t w) < eps e^-t", rep.max_forward + bump, 1.0)
        out.record("d(phi_-t x2, phi_-t w) < eps e^-t", rep.max_backward, 1.0)
    return out


def closeness_suite(rng, n=100, fault=False) -> SuiteResult:
    """Samples of the coordinate/closeness implications in both directions."""
    out = SuiteResult("closeness", n)
    eps = 0.05
    for k in range(n):
        T = rng.uniform(1, 6)
        u1, s1 = rng.uniform(-eps / 5, eps / 5, 2) * 0.99
        du, ds = rng.uniform(-0.45, 0.45, 2) * eps * math.exp(-T)
        c1 = SectionCoords(u1, s1, 0.0)
        c2 = SectionCoords(u1 + du, s1 + ds, 0.0)
        if max(abs(c2.u), abs(c2.s)) >= eps / 5:
            c2 = SectionCoords(u1 - du, s1 - ds, 0.0)
        rep = closeness_bounds(c1, c2, T, "both", eps=eps)
        for j, (name, c) in enumerate(rep.checks.items()):
            if not c["hypothesis"]:
                continue
            lhs = c["lhs"] + (1.0 if fault and k == 0 and j == 0 else 0.0)
            out.record(name, lhs, c["rhs"], lhs < c["rhs"])
    return out


SUITES = {
    "quintuple": quintuple_suite,
    "recentring": recenter_suite,
    "closing": closing_suite,
    "connecting": connecting_suite,
    "shadowing": shadowing_suite,
    "closeness": closeness_suite,
}


def run_suites(seed: int = 0, fault: str | None = None, scale: float = 1.0, names=None) -> list:
    """Run the suites in a fixed order, each with its own child generator."""
    if fault is not None and fault not in SUITES:
        raise KeyError(f"unknown suite {fault!r}")
    seeds = np.random.SeedSequence(seed).spawn(len(SUITES))
    out = []
    for (name, fn), ss in zip(SUITES.items(), seeds):
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng(ss)
        n = inspect.signature(fn).parameters["n"].default
        out.append(fn(rng, n=max(1, int(n * scale)), fault=(fault == name)))
    return out
