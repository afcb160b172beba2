"""Floating-point arithmetic in SL(2,R) / PSL(2,R).

Elements are plain ``(2, 2)`` float arrays kept in a canonical sign
(positive trace, or first nonzero entry positive when the trace vanishes)
with unit determinant.  The one-parameter subgroups are

    a_t = diag(e^{t/2}, e^{-t/2}),   b_s = [[1, s], [0, 1]],   c_u = [[1, 0], [u, 1]],

and ``d_theta`` is the rotation class used for time reversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

ALG_TOL = 1e-10
EIG_TOL = 1e-9

IDENTITY = np.eye(2)


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class DecompositionError(ValueError):
    """Matrix is not decomposable in the requested cell."""


class DistanceRangeError(ValueError):
    """Pair of elements too far apart for the local metric."""


class ClassificationError(ValueError):
    pass


class Flavor(str, Enum):
    CU_BS = "cu_bs"  # y = g c_u b_s
    BS_CU = "bs_cu"  # y = g b_s c_u


@dataclass(frozen=True)
class NacDecomposition:
    """Coordinates of ``c_u b_s a_tau`` (CU_BS) or ``b_s c_u a_tau`` (BS_CU)."""

    u: float
    s: float
    tau: float
    flavor: Flavor = Flavor.CU_BS
    rho: float | None = None

    def matrix(self) -> np.ndarray:
        if self.flavor is Flavor.CU_BS:
            return compose(c(self.u), b(self.s), a(self.tau))
        return compose(b(self.s), c(self.u), a(self.tau))


@dataclass(frozen=True)
class ElementClass:
    kind: str  # "identity" | "elliptic" | "parabolic" | "hyperbolic"
    translation_length: float = 0.0


# ---------------------------------------------------------------------------
# construction and canonical form


def canonical(m, tol: float = ALG_TOL) -> np.ndarray:
    """Renormalize to det 1 and fix the projective sign."""
    m = np.array(m, dtype=float).reshape(2, 2)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    # for large entries the computed determinant is pure rounding noise
    noise = 16 * np.finfo(float).eps * float(np.abs(m).max()) ** 2
    if abs(det - 1) > noise:
        if not det > 0:
            raise DomainError(f"determinant must be positive, got {det!r}")
        m = m / math.sqrt(det)
    tr = m[0, 0] + m[1, 1]
    if tr < -tol:
        return -m
    if tr > tol:
        return m
    for x in (m[0, 0], m[0, 1], m[1, 0]):
        if abs(x) > tol:
            return m if x > 0 else -m
    return m


def canonical_batch(ms: np.ndarray, tol: float = ALG_TOL) -> np.ndarray:
    """Vectorized sign fix for an ``(N, 2, 2)`` stack (no renormalization)."""
    ms = np.asarray(ms, dtype=float)
    tr = ms[:, 0, 0] + ms[:, 1, 1]
    first = np.where(
        np.abs(ms[:, 0, 0]) > tol,
        ms[:, 0, 0],
        np.where(np.abs(ms[:, 0, 1]) > tol, ms[:, 0, 1], ms[:, 1, 0]),
    )
    sign = np.where(tr > tol, 1.0, np.where(tr < -tol, -1.0, np.where(first < 0, -1.0, 1.0)))
    return ms * sign[:, None, None]


def _finite(param) -> float:
    t = float(param)
    if not math.isfinite(t):
        raise DomainError(f"parameter must be finite, got {param!r}")
    return t


def a(t: float) -> np.ndarray:
    t = _finite(t)
    return np.array([[math.exp(t / 2), 0.0], [0.0, math.exp(-t / 2)]])


def b(s: float) -> np.ndarray:
    return np.array([[1.0, _finite(s)], [0.0, 1.0]])


def c(u: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [_finite(u), 1.0]])


def d_theta(theta: float) -> np.ndarray:
    h = _finite(theta) / 2
    return canonical([[math.cos(h), math.sin(h)], [-math.sin(h), math.cos(h)]])


D_PI = np.array([[0.0, 1.0], [-1.0, 0.0]])


def make_generator(kind: str, param: float = 0.0) -> np.ndarray:
    """Element of a named one-parameter subgroup (``a``, ``b``, ``c``, ``d_theta``, ``d_pi``)."""
    if kind == "d_pi":
        return D_PI.copy()
    builders = {"a": a, "b": b, "c": c, "d_theta": d_theta}
    try:
        builder = builders[kind]
    except KeyError:
        raise DomainError(f"unknown generator kind {kind!r}") from None
    return canonical(builder(param))


# ---------------------------------------------------------------------------
# group operations


def compose(*ms) -> np.ndarray:
    out = IDENTITY
    for m in ms:
        out = out @ m
    return canonical(out)


def invert(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return canonical([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])


def inv_raw(g: np.ndarray) -> np.ndarray:
    """Inverse of a unit-determinant matrix, no sign canonicalization."""
    return np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])


def proj_equal(g, h, tol: float = ALG_TOL) -> bool:
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    scale = max(1.0, float(np.abs(g).max()), float(np.abs(h).max()))
    return bool(np.abs(g - h).max() <= tol * scale or np.abs(g + h).max() <= tol * scale)


def trace(g) -> float:
    return float(g[0, 0] + g[1, 1])


# ---------------------------------------------------------------------------
# NAC-type decompositions


def nac_decompose(g, flavor: Flavor = Flavor.CU_BS, tol: float = ALG_TOL) -> NacDecomposition:
    """Write ``g`` as ``c_u b_s a_tau`` (CU_BS) or ``b_s c_u a_tau`` (BS_CU).

    The projective sign is chosen so that the pivot entry is positive.
    """
    flavor = Flavor(flavor)
    g = np.asarray(g, dtype=float)
    if flavor is Flavor.CU_BS:
        pivot = g[0, 0]
        if abs(pivot) <= tol:
            raise DecompositionError("not decomposable in this cell (m11 vanishes)")
        if pivot < 0:
            g = -g
        m11 = g[0, 0]
        return NacDecomposition(u=g[1, 0] / m11, s=g[0, 1] * m11, tau=2 * math.log(m11), flavor=flavor)
    pivot = g[1, 1]
    if abs(pivot) <= tol:
        raise DecompositionError("not decomposable in this cell (m22 vanishes)")
    if pivot < 0:
        g = -g
    m22 = g[1, 1]
    return NacDecomposition(u=g[1, 0] * m22, s=g[0, 1] / m22, tau=-2 * math.log(m22), flavor=flavor)


def nac_decompose_batch(ms: np.ndarray, flavor: Flavor = Flavor.CU_BS, tol: float = ALG_TOL):
    """Vectorized :func:`nac_decompose`; rows with a vanishing pivot come back NaN."""
    ms = np.asarray(ms, dtype=float)
    if Flavor(flavor) is Flavor.CU_BS:
        p = ms[:, 0, 0]
        ok = np.abs(p) > tol
        sgn = np.where(p < 0, -1.0, 1.0)
        m11 = np.where(ok, p * sgn, np.nan)
        u = ms[:, 1, 0] * sgn / m11
        s = ms[:, 0, 1] * sgn * m11
        tau = 2 * np.log(m11)
        return u, s, tau
    p = ms[:, 1, 1]
    ok = np.abs(p) > tol
    sgn = np.where(p < 0, -1.0, 1.0)
    m22 = np.where(ok, p * sgn, np.nan)
    u = ms[:, 1, 0] * sgn * m22
    s = ms[:, 0, 1] * sgn / m22
    tau = -2 * np.log(m22)
    return u, s, tau


def quintuple_rho(s1, u1, s2, u2, s3):
    return u2 * (s1 + s2) + u1 * s1 * (1 + u2 * s2)


def quintuple_product(s1: float, u1: float, s2: float, u2: float, s3: float, check_domain: bool = True) -> NacDecomposition:
    """Closed form of ``b_{s1} c_{u1} b_{s2} c_{u2} b_{s3} = c_u b_s a_tau``."""
    if check_domain and not all(abs(x) < 1 / 6 for x in (s1, u1, s2, u2, s3)):
        raise DomainError("all five parameters must lie in (-1/6, 1/6)")
    rho = quintuple_rho(s1, u1, s2, u2, s3)
    if 1 + rho <= 0:
        raise DecompositionError("singular decomposition: 1 + rho <= 0")
    u = u1 + u2 + (u1 * u2 * s2 - (u1 + u2) * rho) / (1 + rho)
    s = s1 + s2 + s3 + rho * ((2 + rho) * s3 + s1 + s2) + u1 * s1 * s2 * (1 + rho)
    tau = 2 * math.log1p(rho)
    return NacDecomposition(u=u, s=s, tau=tau, flavor=Flavor.CU_BS, rho=rho)


# ---------------------------------------------------------------------------
# local metric


def _log_factor(half_trace: np.ndarray) -> np.ndarray:
    """theta/sinh(theta) for cosh(theta)=h (or phi/sin(phi) for cos(phi)=h)."""
    h = np.asarray(half_trace, dtype=float)
    d = h - 1.0
    out = np.empty_like(h)
    small = np.abs(d) < 1e-6
    out[small] = 1 - d[small] / 3 + 2 * d[small] ** 2 / 15
    hyp = (~small) & (h > 1)
    th = np.arccosh(h[hyp])
    out[hyp] = th / np.sinh(th)
    ell = (~small) & (h < 1)
    ph = np.arccos(np.clip(h[ell], -1.0, 1.0))
    out[ell] = ph / np.sin(ph)
    return out


def log_sl2(m) -> np.ndarray:
    """Principal logarithm of a positive-trace element near the identity."""
    m = canonical(m)
    h = 0.5 * (m[0, 0] + m[1, 1])
    f = float(_log_factor(np.array([h]))[0])
    return f * (m - h * IDENTITY)


def _local_norm_batch(ms: np.ndarray):
    """Frobenius norm of the log and the in-range mask for a stack of elements."""
    ms = canonical_batch(ms)
    eye = np.eye(2)
    dist_to_id = np.sqrt(((ms - eye) ** 2).sum(axis=(1, 2)))
    ok = dist_to_id < 1.0
    h = 0.5 * (ms[:, 0, 0] + ms[:, 1, 1])
    f = np.full(len(ms), np.nan)
    if ok.any():
        f[ok] = _log_factor(h[ok])
    x = f[:, None, None] * (ms - h[:, None, None] * eye)
    return np.sqrt((x**2).sum(axis=(1, 2))), ok


def local_dist(g, h) -> float:
    """``||log(g^{-1} h)||_F``: a left-invariant local metric on PSL(2,R)."""
    m = canonical(inv_raw(np.asarray(g, dtype=float)) @ np.asarray(h, dtype=float))
    if np.sqrt(((m - IDENTITY) ** 2).sum()) >= 1.0:
        raise DistanceRangeError("distance out of local range")
    return float(np.sqrt((log_sl2(m) ** 2).sum()))


def local_dist_batch(g: np.ndarray, hs: np.ndarray):
    """Distances from ``g`` to each of ``hs``; out-of-range entries are ``inf``."""
    ms = np.einsum("ij,njk->nik", inv_raw(np.asarray(g, dtype=float)), np.asarray(hs, dtype=float))
    d, ok = _local_norm_batch(ms)
    return np.where(ok, d, np.inf)


# ---------------------------------------------------------------------------
# classification and axes


def classify(g, tol: float = EIG_TOL) -> ElementClass:
    g = canonical(g)
    tr = abs(trace(g))
    if tr > 2 + tol:
        return ElementClass("hyperbolic", 2 * math.acosh(tr / 2))
    if tr < 2 - tol:
        return ElementClass("elliptic")
    if np.abs(g - IDENTITY).max() <= tol:
        return ElementClass("identity")
    return ElementClass("parabolic")


def translation_length(g) -> float:
    return 2 * math.acosh(max(1.0, abs(trace(g)) / 2))


def _eigvec(m: np.ndarray, lam: float) -> np.ndarray:
    v1 = np.array([lam - m[1, 1], m[1, 0]])
    v2 = np.array([m[0, 1], lam - m[0, 0]])
    return v1 if np.hypot(*v1) >= np.hypot(*v2) else v2


def axis_frame(g, tol: float = EIG_TOL):
    """Frame ``g0`` with ``g0^{-1} g g0 = a_T`` and the translation length ``T``.

    The expanding eigenvector is the first column; columns are balanced in
    norm, which pins the frame up to sign.
    """
    g = canonical(g)
    cls = classify(g, tol)
    if cls.kind != "hyperbolic":
        raise ClassificationError(f"axis_frame needs a hyperbolic element, got {cls.kind}")
    tr = trace(g)
    T = 2 * math.acosh(tr / 2)
    lam = math.exp(T / 2)
    v1 = _eigvec(g, lam)
    v2 = _eigvec(g, 1 / lam)
    v1 = v1 / np.hypot(*v1)
    v2 = v2 / np.hypot(*v2)
    det = v1[0] * v2[1] - v1[1] * v2[0]
    if det < 0:
        v2 = -v2
        det = -det
    k = 1 / math.sqrt(det)
    frame = canonical(np.column_stack([v1 * k, v2 * k]))
    return frame, T


def moebius(g, z):
    """Action on the upper half-plane (or its boundary) by linear fractional maps."""
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=complex)
    return (g[0, 0] * z + g[0, 1]) / (g[1, 0] * z + g[1, 1])


def fixed_points(g):
    """Boundary fixed points (repelling, attracting) of a hyperbolic element."""
    frame, _ = axis_frame(g)
    inf = complex("inf")
    rep = frame[0, 1] / frame[1, 1] if frame[1, 1] != 0 else inf
    att = frame[0, 0] / frame[1, 0] if frame[1, 0] != 0 else inf
    return rep, att
