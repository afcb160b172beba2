"""Discrete subgroups of PSL(2,R): presets, words, conjugacy classes, systole.

Words are tuples of nonzero ints; ``k`` stands for generator ``k`` (1-based)
and ``-k`` for its inverse.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import psl2
from .psl2 import canonical, canonical_batch, inv_raw

Word = tuple

RELATOR_TOL = 1e-9
ROUND_DIGITS = 7


class PresentationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# word helpers


def word_inverse(w) -> tuple:
    return tuple(-x for x in reversed(w))


def free_reduce(w) -> tuple:
    out = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(w) -> tuple:
    w = list(free_reduce(w))
    while len(w) > 1 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def rotations(w):
    return [tuple(w[i:] + w[:i]) for i in range(len(w))] or [()]


def canonical_cyclic(w, with_inverse: bool = True) -> tuple:
    """Lexicographically least rotation of ``w`` (and of its inverse)."""
    w = tuple(w)
    cands = rotations(w)
    if with_inverse:
        cands += rotations(word_inverse(w))
    return min(cands)


def primitive_root(w) -> tuple:
    n = len(w)
    for d in range(1, n):
        if n % d == 0 and w[:d] * (n // d) == tuple(w):
            return tuple(w[:d])
    return tuple(w)


def is_proper_power(w) -> bool:
    return len(w) > 0 and len(primitive_root(w)) < len(w)


def word_to_str(w, labels=None) -> str:
    if not w:
        return "e"
    out = []
    for x in w:
        name = labels[abs(x) - 1] if labels else f"g{abs(x)}"
        out.append(name if x > 0 else name + "^-1")
    return " ".join(out)


def parse_token(tok) -> int:
    """``"g3"`` -> 3, ``"g3^-1"`` -> -3; integers pass through."""
    if isinstance(tok, (int, np.integer)):
        if tok == 0:
            raise PresentationError("letter 0 is not a generator")
        return int(tok)
    t = str(tok).strip()
    sign = 1
    if t.endswith("^-1"):
        sign, t = -1, t[:-3]
    if t.startswith("g") and t[1:].isdigit() and int(t[1:]) > 0:
        return sign * int(t[1:])
    raise PresentationError(f"cannot parse generator token {tok!r}")


# ---------------------------------------------------------------------------
# groups


@dataclass
class QuotientConfig:
    epsilon_star: float = 0.25
    sigma0_proxy: float = 1.0
    dist_ball_length: int = 6

    def __post_init__(self):
        if not self.epsilon_star > 0 or not self.sigma0_proxy > 0:
            raise PresentationError("epsilon_star and sigma0_proxy must be positive")


@dataclass
class FuchsianGroup:
    generators: list
    relators: list = field(default_factory=list)
    kind: str = "schottky"
    labels: list | None = None
    config: QuotientConfig = field(default_factory=QuotientConfig)

    def __post_init__(self):
        self.generators = [canonical(g) for g in self.generators]
        self.inverses = [psl2.invert(g) for g in self.generators]
        if self.labels is None:
            self.labels = [f"g{i + 1}" for i in range(len(self.generators))]
        self._ball = {0: ([()], np.eye(2)[None])}

    @property
    def rank(self) -> int:
        return len(self.generators)

    def letter(self, x: int) -> np.ndarray:
        return self.generators[x - 1] if x > 0 else self.inverses[-x - 1]

    def letters(self):
        return [x for k in range(1, self.rank + 1) for x in (k, -k)]

    def element(self, w) -> np.ndarray:
        m = np.eye(2)
        for x in w:
            m = m @ self.letter(x)
        return canonical(m)

    def relator_residual(self, w) -> float:
        m = self.element(w)
        return float(np.abs(m - np.eye(2)).max())

    def ball(self, n: int):
        """Distinct elements of word length <= n: (words, (N,2,2) matrices).

        Built level by level; words evaluating to an element already seen
        (through a relator) are dropped, keeping the shorter word.
        """
        n = int(n)
        if n in self._ball:
            return self._ball[n]
        if n < 0:
            return [()], np.eye(2)[None]
        words, mats = [()], [np.eye(2)[None]]
        seen = {_key(np.eye(2))}
        frontier_w, frontier_m = [()], np.eye(2)[None]
        for level in range(1, n + 1):
            new_w, new_m = [], []
            for x in self.letters():
                g = self.letter(x)
                prod = canonical_batch(frontier_m @ g)
                for i, w in enumerate(frontier_w):
                    if w and w[-1] == -x:
                        continue
                    k = _key(prod[i])
                    if k in seen:
                        continue
                    seen.add(k)
                    new_w.append(w + (x,))
                    new_m.append(prod[i])
            frontier_w = new_w
            frontier_m = np.array(new_m) if new_m else np.zeros((0, 2, 2))
            words += new_w
            if new_m:
                mats.append(frontier_m)
            self._ball[level] = (list(words), np.concatenate(mats))
        if n == 0:
            return self._ball[0]
        return self._ball[n]

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "generators": [[float(v) for v in g.ravel()] for g in self.generators],
                "relators": [[_tok(x) for x in r] for r in self.relators],
            }
        )


def _tok(x: int) -> str:
    return f"g{abs(x)}" + ("" if x > 0 else "^-1")


def _key(m) -> tuple:
    return tuple(np.round(m.ravel(), ROUND_DIGITS) + 0.0)


@dataclass
class PeriodicOrbit:
    word: tuple
    element: np.ndarray
    frame: np.ndarray
    period: float
    primitive: bool = True
    group: FuchsianGroup | None = None

    def point(self, t: float = 0.0) -> np.ndarray:
        """Lift of the orbit point at time ``t``."""
        return self.frame @ psl2.a(t)

    @property
    def trace(self) -> float:
        return psl2.trace(self.element)


def orbit_from_element(element, word=(), group=None) -> PeriodicOrbit:
    frame, T = psl2.axis_frame(element)
    prim = not is_proper_power(tuple(word)) if word else True
    return PeriodicOrbit(tuple(word), canonical(element), frame, T, prim, group)


def orbit_from_word(group: FuchsianGroup, w) -> PeriodicOrbit:
    w = tuple(w)
    if cyclic_reduce(w) != w:
        raise PresentationError("orbit words must be cyclically reduced")
    return orbit_from_element(group.element(w), w, group)


# ---------------------------------------------------------------------------
# ping-pong certificate


_K = np.array([[1, -1j], [1, 1j]])
_KI = np.linalg.inv(_K)


def to_disk(g) -> np.ndarray:
    """Conjugate into SU(1,1) by the Cayley map z -> (z - i)/(z + i)."""
    return _K @ np.asarray(g, dtype=complex) @ _KI


def isometric_circle(g):
    """Center and radius of the isometric circle of ``g`` in the disk model."""
    m = to_disk(g)
    beta_bar = m[1, 0]
    if abs(beta_bar) < 1e-14:
        return None
    return -m[1, 1] / beta_bar, 1 / abs(beta_bar)


def ping_pong_certificate(gens, margin: float = 0.0) -> bool:
    """True when the isometric circles of all generators and inverses are
    pairwise disjoint, which makes the group free and discrete."""
    circles = []
    for g in gens:
        for h in (g, psl2.invert(g)):
            c = isometric_circle(h)
            if c is None:
                return False
            circles.append(c)
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            (c1, r1), (c2, r2) = circles[i], circles[j]
            if abs(c1 - c2) <= r1 + r2 + margin:
                return False
    return True


# ---------------------------------------------------------------------------
# presets and construction


def bolza_generators() -> list:
    """The four side-pairings of the regular octagon, as SL(2,R) matrices."""
    r2 = math.sqrt(2)
    alpha = 1 + r2
    out = []
    for k in range(4):
        beta = np.exp(1j * k * math.pi / 4) * math.sqrt(2 + 2 * r2)
        su = np.array([[alpha, beta], [np.conj(beta), alpha]])
        m = _KI @ su @ _K
        out.append(canonical(m.real))
    return out


BOLZA_RELATOR = (1, -2, 3, -4, -1, 2, -3, 4)


def _check_generators(gens):
    for g in gens:
        g = np.asarray(g, dtype=float)
        if g.shape != (2, 2) or not np.all(np.isfinite(g)):
            raise PresentationError("generators must be finite 2x2 matrices")
        det = np.linalg.det(g)
        if abs(det - 1) > 1e-8:
            raise PresentationError(f"generator determinant {det} is not 1")
        if abs(np.trace(g)) <= 2 + psl2.EIG_TOL:
            raise PresentationError("generators must be hyperbolic (|tr| > 2)")


def build_surface_group(preset="bolza", generators=None, relators=None, config: QuotientConfig | None = None, check_pingpong: bool = True) -> FuchsianGroup:
    """Build a group from a preset name, explicit matrices, or a JSON-style dict.

    ``preset`` is ``"bolza"``, ``"schottky"`` (needs ``generators``) or a dict
    ``{"kind": ..., "generators": [[m11, m12, m21, m22], ...], "relators": [...]}``.
    """
    if isinstance(preset, dict):
        desc = preset
        kind = desc.get("kind", "schottky")
        if kind == "bolza":
            return build_surface_group("bolza", config=config)
        try:
            gens = [np.array(g, dtype=float).reshape(2, 2) for g in desc["generators"]]
            rels = [tuple(parse_token(t) for t in r) for r in desc.get("relators", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise PresentationError(f"malformed group description: {exc}") from None
        kind = "cocompact_surface" if kind in ("cocompact_surface", "surface") else kind
        return build_surface_group(kind, gens, rels, config, check_pingpong)

    if preset == "bolza":
        gens = bolza_generators()
        rels = [BOLZA_RELATOR]
        kind = "cocompact_surface"
    elif preset in ("schottky", "cocompact_surface"):
        if generators is None:
            raise PresentationError("explicit generators required")
        gens = list(generators)
        rels = list(relators or [])
        kind = preset
    else:
        raise PresentationError(f"unknown preset {preset!r}")

    _check_generators(gens)
    group = FuchsianGroup([np.asarray(g, float) for g in gens], rels, kind)
    for r in rels:
        if any(abs(x) > group.rank for x in r):
            raise PresentationError("relator uses an unknown generator")
        res = group.relator_residual(r)
        if res > RELATOR_TOL:
            raise PresentationError(f"invalid presentation: relator residual {res:.3e}")
    if kind == "schottky" and check_pingpong and not ping_pong_certificate(group.generators):
        raise PresentationError("schottky generators fail the ping-pong test")

    if config is None:
        sys_len = systole(group, 8 if kind == "cocompact_surface" else 2)
        config = QuotientConfig(epsilon_star=sys_len / 8, sigma0_proxy=sys_len / 2)
    group.config = config
    return group


# ---------------------------------------------------------------------------
# conjugacy classes


class ClassList(list):
    truncated = False


def _cyclic_words(rank: int, n: int):
    """Cyclically reduced words of length exactly n."""
    letters = [x for k in range(1, rank + 1) for x in (k, -k)]
    words = [(x,) for x in letters]
    for _ in range(n - 1):
        words = [w + (x,) for w in words for x in letters if x != -w[-1]]
    return [w for w in words if len(w) == 1 or w[0] != -w[-1]]


def enumerate_conjugacy_classes(group: FuchsianGroup, max_word_length: int, max_classes: int = 200000, include_powers: bool = True) -> ClassList:
    """One orbit per class of cyclically reduced words under rotation and inversion.

    Sorted by period.  Proper powers are kept but flagged non-primitive
    unless ``include_powers`` is false.
    """
    out = ClassList()
    for n in range(1, int(max_word_length) + 1):
        for w in _cyclic_words(group.rank, n):
            if w != canonical_cyclic(w):
                continue
            prim = not is_proper_power(w)
            if not prim and not include_powers:
                continue
            m = group.element(w)
            if psl2.classify(m).kind != "hyperbolic":
                continue
            orb = orbit_from_element(m, w, group)
            orb.primitive = prim
            out.append(orb)
            if len(out) >= max_classes:
                out.truncated = True
                break
        if out.truncated:
            break
    out.sort(key=lambda o: (o.period, len(o.word), o.word))
    return out


# ---------------------------------------------------------------------------
# metric on the quotient and systole


def quotient_dist(x, y, group: FuchsianGroup | None = None, extra=()):
    """Minimum of ``local_dist(lift_x, gamma lift_y)`` over the cached ball.

    ``x`` and ``y`` are matrices or objects with a ``lift`` attribute.
    ``extra`` adds known deck elements (matrices) to the candidate set.
    The value is an upper bound for the true quotient distance.  Returns
    ``(distance, gamma)``.
    """
    gx = np.asarray(getattr(x, "lift", x), dtype=float)
    gy = np.asarray(getattr(y, "lift", y), dtype=float)
    if group is None:
        group = getattr(x, "group", None)
    if group is not None:
        _, mats = group.ball(group.config.dist_ball_length)
    else:
        mats = np.eye(2)[None]
    if len(extra):
        mats = np.concatenate([mats, np.asarray(extra, dtype=float).reshape(-1, 2, 2)])
    d = psl2.local_dist_batch(gx, mats @ gy)
    i = int(np.argmin(d))
    if not np.isfinite(d[i]):
        raise psl2.DistanceRangeError("distance out of range")
    return float(d[i]), mats[i]


def systole(group: FuchsianGroup, max_word_length: int, with_flag: bool = False):
    """Shortest translation length among words of length <= budget.

    Words are split into two halves so traces come from one vectorized
    product.  With a budget of 1 (or below the relator length) the result
    is only an upper bound, reported through ``with_flag``.
    """
    n = int(max_word_length)
    if n < 1:
        raise ValueError("budget must be >= 1")
    h1 = (n + 1) // 2
    h2 = n // 2
    W1, M1 = _reduced_words_upto(group, h1)
    W2, M2 = _reduced_words_upto(group, h2)
    best = math.inf
    last1 = np.array([w[-1] if w else 0 for w in W1])
    len1 = np.array([len(w) for w in W1])
    first2 = np.array([w[0] if w else 0 for w in W2])
    len2 = np.array([len(w) for w in W2])
    chunk = max(1, 4_000_000 // max(1, len(W2)))
    for start in range(0, len(W1), chunk):
        sl = slice(start, start + chunk)
        tr = np.einsum("aij,bji->ab", M1[sl], M2)
        ok = (last1[sl, None] != -first2[None, :]) | (last1[sl, None] == 0)
        ok &= (len1[sl, None] + len2[None, :]) > 0
        # a short left half only pairs with the empty right half
        ok &= (len2[None, :] == 0) | (len1[sl, None] == h1)
        atr = np.abs(tr[ok])
        atr = atr[atr > 2 + psl2.EIG_TOL]
        if atr.size:
            best = min(best, float(atr.min()))
    value = 2 * math.acosh(best / 2)
    rel_len = min((len(r) for r in group.relators), default=0)
    upper = n < 2 or n < rel_len
    return (value, upper) if with_flag else value


def _reduced_words_upto(group: FuchsianGroup, n: int):
    words = [()]
    mats = [np.eye(2)]
    frontier = [((), np.eye(2))]
    for _ in range(n):
        nxt = []
        for w, m in frontier:
            for x in group.letters():
                if w and w[-1] == -x:
                    continue
                nxt.append((w + (x,), m @ group.letter(x)))
        frontier = nxt
        words += [w for w, _ in nxt]
        mats += [m for _, m in nxt]
    return words, np.array(mats)
