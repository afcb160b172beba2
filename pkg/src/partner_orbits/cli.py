"""Command line driver: orbits, encounters, partners, verify, plot.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 nothing found.  The thread count for surveys is read from
``PARTNER_ORBITS_THREADS``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import psl2
from .encounters import detect_encounters, separation_ok
from .fuchsian import PresentationError, build_surface_group, enumerate_conjugacy_classes, word_to_str
from .partners import (
    HarnessError,
    all_partners,
    bound_constants,
    encounter_hypotheses,
    survey,
    synthetic_encounter,
)
from .suites import run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONE = 0, 1, 2, 3
THREADS_ENV = "PARTNER_ORBITS_THREADS"

DEFAULTS = {
    "mode": "harness",
    "group": {"kind": "bolza"},
    "eps": 0.02,
    "max_word_length": 4,
    "max_classes": 20000,
    "L_max": 3,
    "ball_length": 2,
    "max_encounters": 3,
    "allow_large_eps": False,
    "harness": {"L": 3, "coords": None, "loop_lengths": None},
    "tolerances": {"cascade": 1e-9},
    "suite_scale": 1.0,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base, extra, path=""):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and k != "group":
            if not isinstance(v, dict):
                raise ConfigError(f"{path + k} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, raw)
    return validate(cfg)


def validate(cfg: dict) -> dict:
    def num(key, lo=0.0, integer=False, val=None):
        v = cfg[key] if val is None else val
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            raise ConfigError(f"{key} must be {'an integer' if integer else 'a number'}")
        if not math.isfinite(v) or v < lo:
            raise ConfigError(f"{key} must be >= {lo}")
        return v

    if cfg["mode"] not in ("harness", "survey"):
        raise ConfigError("mode must be 'harness' or 'survey'")
    if not num("eps") > 0:
        raise ConfigError("eps must be positive")
    num("max_word_length", 0, True)
    num("max_classes", 1, True)
    num("ball_length", 0, True)
    num("max_encounters", 1, True)
    num("suite_scale")
    if not 3 <= num("L_max", 2, True) <= 9:
        raise ConfigError("L_max must lie in 3..9")
    h = cfg["harness"]
    L = num("harness.L", 3, True, h["L"])
    if L > 7:
        raise ConfigError("harness.L must lie in 3..7")
    for key in ("coords", "loop_lengths"):
        if h[key] is not None and not isinstance(h[key], list):
            raise ConfigError(f"harness.{key} must be a list")
    if h["loop_lengths"] is not None and len(h["loop_lengths"]) != L:
        raise ConfigError("harness.loop_lengths needs L entries")
    if h["coords"] is not None and len(h["coords"]) not in (L - 1, L):
        raise ConfigError("harness.coords needs L or L - 1 pairs")
    num("tolerances.cascade", 0, False, cfg["tolerances"]["cascade"])
    if not isinstance(cfg["group"], dict):
        raise ConfigError("group must be an object")
    return cfg


def _group(cfg):
    try:
        return build_surface_group(cfg["group"])
    except PresentationError as exc:
        raise ConfigError(str(exc)) from None


def _check_eps(cfg, group, L):
    bound = group.config.epsilon_star / bound_constants(L).delta_d
    if cfg["eps"] > bound and not cfg["allow_large_eps"]:
        raise ConfigError(f"eps {cfg['eps']} exceeds epsilon_star / delta_d = {bound:.6g} (set allow_large_eps)")


def harness_data(cfg, seed: int):
    """Harness orbit and its detected encounter.  Coordinates and loop lengths
    not given in the config are drawn from the seed; a draw is kept only when
    it is separated and ``eps`` is admissible for the resulting group."""
    h = cfg["harness"]
    L, eps = h["L"], cfg["eps"]
    r = eps / L
    rng = np.random.default_rng(seed)
    if h["coords"] is not None and h["loop_lengths"] is not None:
        try:
            orbit, enc = synthetic_encounter(L, h["coords"], h["loop_lengths"], eps=r)
        except (HarnessError, ValueError) as exc:
            raise ConfigError(f"harness: {exc}") from None
        return orbit, _detect_harness(orbit, enc, r, L)
    # isometric circles shrink like e^{-T/2}; more stretches need longer loops
    shortest = 16 + 2 * max(0, L - 3)
    last = None
    for _ in range(200):
        loops = h["loop_lengths"] or list(shortest + rng.uniform(0, 2, L))
        c = h["coords"] or [(0.0, 0.0)] + [tuple(rng.uniform(-0.4 * r, 0.4 * r, 2)) for _ in range(L - 1)]
        try:
            orbit, enc = synthetic_encounter(L, c, loops, eps=r)
            _check_eps(cfg, orbit.group, L)
        except (HarnessError, ValueError) as exc:
            last = exc
            continue
        if separation_ok(enc, eps)[0]:
            return orbit, _detect_harness(orbit, enc, r, L)
        last = "separation fails"
    raise ConfigError(f"harness: no admissible configuration found ({last})")


def _detect_harness(orbit, planted, r, L):
    found = detect_encounters(orbit, r, L_max=L, ball_length=1, base_time=planted.piercings[0].t)
    found = [e for e in found if e.L == L]
    return found[0] if found else planted


# ---------------------------------------------------------------------------
# output


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def to_json(obj, indent=0) -> str:
    """JSON with floats at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def _emit(args, name, text, ext):
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{name}.{ext}").write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _word(o):
    return word_to_str(o.word, o.group.labels if o.group is not None else None) if o.word else ""


# ---------------------------------------------------------------------------
# commands


def cmd_orbits(cfg, args) -> int:
    group = harness_data(cfg, args.seed)[0].group if cfg["mode"] == "harness" else _group(cfg)
    classes = enumerate_conjugacy_classes(group, cfg["max_word_length"], cfg["max_classes"])
    rows = [{"word": _word(o), "trace": abs(o.trace), "period": o.period, "primitive": bool(o.primitive)} for o in classes]
    cols = ["word", "trace", "period", "primitive"]
    if args.format == "json":
        _emit(args, "orbits", to_json({"orbits": rows}), "json")
    else:
        _emit(args, "orbits", to_csv(rows, cols), "csv")
    return EXIT_OK


def _encounter_dict(orbit, enc, eps):
    hyp = encounter_hypotheses(enc, eps)
    return {
        "orbit": _word(orbit),
        "period": orbit.period,
        "L": enc.L,
        "coords": [[p.u, p.s] for p in enc.piercings],
        "loop_times": list(enc.loop_times),
        "t_s": enc.t_s,
        "t_u": enc.t_u,
        "t_enc": enc.t_enc,
        "ambiguous": bool(enc.ambiguous),
        "antiparallel": len(enc.antiparallel),
        "separation": bool(hyp["separation"]),
    }


def _hits(cfg, args):
    """(orbit, encounter, reports, verdicts) for the configured mode."""
    if cfg["mode"] == "harness":
        orbit, enc = harness_data(cfg, args.seed)
        _check_eps(cfg, orbit.group, enc.L)
        reps, verdicts = all_partners(orbit, enc, cfg["eps"], cross_check=True)
        return [(orbit, enc, reps, verdicts)]
    group = _group(cfg)
    _check_eps(cfg, group, cfg["L_max"])
    radius = cfg["eps"] / cfg["L_max"]
    threads = max(1, int(os.environ.get(THREADS_ENV, "1") or 1))
    out = []
    with ThreadPoolExecutor(threads) as ex:
        mf = ex.map if threads > 1 else None
        for h in survey(group, cfg["max_word_length"], radius, cfg["L_max"], cfg["ball_length"], max_classes=cfg["max_classes"], map_fn=mf):
            out.append((h.orbit, h.encounter, h.reports, h.verdicts))
            if len(out) >= cfg["max_encounters"]:
                break
    return out


def cmd_encounters(cfg, args) -> int:
    if cfg["mode"] == "harness":
        orbit, enc = harness_data(cfg, args.seed)
        found = [(orbit, e) for e in detect_encounters(orbit, enc.eps, L_max=cfg["harness"]["L"], ball_length=1, base_time=enc.piercings[0].t)]
    else:
        group = _group(cfg)
        radius = cfg["eps"] / cfg["L_max"]
        found = []
        for o in enumerate_conjugacy_classes(group, cfg["max_word_length"], cfg["max_classes"], include_powers=False):
            found += [(o, e) for e in detect_encounters(o, radius, L_max=cfg["L_max"], ball_length=cfg["ball_length"]) if e.L >= 3]
            if len(found) >= cfg["max_encounters"]:
                break
    rows = [_encounter_dict(o, e, e.L * e.eps) for o, e in found]
    if args.format == "json":
        _emit(args, "encounters", to_json({"encounters": rows}), "json")
    else:
        flat = [{**r, "coords": json.dumps(r["coords"]), "loop_times": json.dumps(r["loop_times"])} for r in rows]
        _emit(args, "encounters", to_csv(flat, ["orbit", "period", "L", "t_s", "t_u", "t_enc", "separation", "ambiguous", "antiparallel", "coords", "loop_times"]), "csv")
    return EXIT_OK if rows else EXIT_NONE


def _partners_report(hits):
    """JSON-ready report and whether every hypothesis-backed check passed."""
    encs = []
    ok = True
    for orbit, enc, reps, verdicts in hits:
        e = _encounter_dict(orbit, enc, reps[0].eps if reps else None)
        hyp = e["separation"]
        parts = []
        for rep, v in zip(reps, verdicts):
            checks = {k: {"lhs": c[0], "rhs": c[1], "pass": c[2]} for k, c in v.items() if k != "ok"}
            parts.append(
                {
                    "P": list(rep.reconnection.P),
                    "word": _word(rep.partner) if rep.word else "",
                    "T_prime": rep.T_prime,
                    "delta_S": rep.delta_S,
                    "residual": rep.residual,
                    "bound": rep.bound_value,
                    "all_checks_pass": bool(v["ok"]),
                    "checks": checks,
                }
            )
            if hyp and not v["ok"]:
                ok = False
        e["partners"] = parts
        encs.append(e)
    orbit = hits[0][0] if hits else None
    head = {"word": _word(orbit), "period": orbit.period} if orbit is not None else None
    return {"orbit": head, "encounters": encs}, ok


def cmd_partners(cfg, args, svg_only=False) -> int:
    hits = _hits(cfg, args)
    if not hits:
        print("no admissible encounter found within budget", file=sys.stderr)
        return EXIT_NONE
    report, ok = _partners_report(hits)
    if not svg_only:
        if args.format == "csv":
            rows = []
            for e in report["encounters"]:
                for p in e["partners"]:
                    rows.append({"orbit": e["orbit"], "L": e["L"], "P": " ".join(map(str, p["P"])), "T_prime": p["T_prime"], "delta_S": p["delta_S"], "residual": p["residual"], "bound": p["bound"], "ok": p["all_checks_pass"]})
            _emit(args, "partners", to_csv(rows, ["orbit", "L", "P", "T_prime", "delta_S", "residual", "bound", "ok"]), "csv")
        else:
            _emit(args, "partners", to_json(report), "json")
    if args.svg or svg_only:
        orbit, enc, reps, _ = hits[0]
        _emit(args, "partners", render_svg(orbit, enc, reps), "svg")
    if not ok:
        print("verification failure: see report", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(cfg, args) -> int:
    try:
        results = run_suites(args.seed, args.inject_fault, cfg["suite_scale"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    report = {
        "seed": args.seed,
        "suites": [
            {"name": r.name, "samples": r.samples, "pass": r.ok, "checks": r.checks, "diagnostics": r.diagnostics}
            for r in results
        ],
    }
    if args.format == "csv":
        rows = [
            {"suite": r.name, "inequality": k, "lhs": c["lhs"], "rhs": c["rhs"], "count": c["count"], "failures": c["failures"], "gating": g}
            for r in results
            for g, d in (("yes", r.checks), ("no", r.diagnostics))
            for k, c in d.items()
        ]
        _emit(args, "verify", to_csv(rows, ["suite", "inequality", "lhs", "rhs", "count", "failures", "gating"]), "csv")
    else:
        _emit(args, "verify", to_json(report), "json")
    for r in results:
        if not r.ok:
            print(f"FAIL {r.name}: {r.first_failure()}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def cmd_plot(cfg, args) -> int:
    return cmd_partners(cfg, args, svg_only=True)


# ---------------------------------------------------------------------------
# SVG in the Poincare disk


def _disk(z):
    return (z - 1j) / (z + 1j)


def _path(points, size):
    c = size / 2
    pts = [f"{c + c * 0.95 * w.real:.3f},{c - c * 0.95 * w.imag:.3f}" for w in points]
    return "M" + " L".join(pts)


def _stretch_points(lift, t0, t1, n=200):
    ts = np.linspace(t0, t1, n)
    # a_t i = e^t i
    return [_disk(complex(psl2.moebius(lift, 1j * math.exp(t)))) for t in ts]


def render_svg(orbit, enc, reps, size=600) -> str:
    """Stretches of the original (black) and partners (colours) through the
    encounter, recentred so the section base sits at the disk centre."""
    colours = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    c = size / 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<circle cx="{c}" cy="{c}" r="{c * 0.95:.3f}" fill="none" stroke="#888"/>',
    ]
    r_enc = math.tanh(max(3 * enc.eps, 0.02) / 2)
    parts.append(f'<circle cx="{c}" cy="{c}" r="{c * 0.95 * r_enc:.3f}" fill="#ffe9a8" stroke="none"/>')
    T = enc.loop_times

    def draw(coords, loops, colour, width):
        for j, (u, s) in enumerate(coords):
            lift = psl2.c(u) @ psl2.b(s)
            back = loops[j - 1] if j else loops[-1]
            d = _path(_stretch_points(lift, -min(back, 8.0), min(loops[j], 8.0)), size)
            parts.append(f'<path d="{d}" fill="none" stroke="{colour}" stroke-width="{width}"/>')

    draw([(p.u, p.s) for p in enc.piercings], list(T), "#000", 1.6)
    for k, rep in enumerate(reps):
        loops = [rep.loop_times_prime[j] for j in sorted(rep.loop_times_prime)]
        draw([(p.u, p.s) for p in rep.partner_piercings], loops, colours[k % len(colours)], 0.8)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--svg", action="store_true", help="also write an SVG (partners)")
    p = argparse.ArgumentParser(prog="partner-orbits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fmt in (("orbits", "csv"), ("encounters", "csv"), ("partners", "json"), ("plot", "json")):
        sp = sub.add_parser(name, parents=[common])
        sp.set_defaults(default_format=fmt)
    sp = sub.add_parser("verify", parents=[common])
    sp.add_argument("--inject-fault", metavar="SUITE", help="offset the first inequality of SUITE")
    sp.set_defaults(default_format="json")
    return p


COMMANDS = {"orbits": cmd_orbits, "encounters": cmd_encounters, "partners": cmd_partners, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.format = args.format or args.default_format
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
