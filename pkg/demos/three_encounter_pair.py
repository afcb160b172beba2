"""A periodic orbit with a planted 3-encounter and its unique partner.

The orbit lives on a Schottky surface built so that three of its stretches
pierce one small section at chosen coordinates.  Swapping the order of the
loops between the piercings gives the partner; its period is predicted by a
sum of logarithms of the coordinate gaps.
"""

import math

from partner_orbits import partners as pa
from partner_orbits.encounters import encounter_metrics

eps = 0.02
r = eps / 3
coords = [(-0.4 * r, 0.35 * r), (0.0, -0.25 * r), (0.4 * r, 0.15 * r)]
orbit, enc = pa.synthetic_encounter(3, coords, [16, 16.5, 17], eps=r)

print(f"orbit period T = {orbit.period:.10f}")
print("loop times    ", [round(t, 6) for t in enc.loop_times])
for p in enc.piercings:
    print(f"  piercing u = {p.u:+.3e}  s = {p.s:+.3e}")

t_s, t_u, t_enc, _ = encounter_metrics(enc)
print(f"encounter lasts {t_enc:.3f} (backward {t_s:.3f}, forward {t_u:.3f})")

# the only reconnection that keeps the partner connected
(rec,) = pa.reconnections(3)
rep = pa.synthesize_partner(orbit, enc, rec, cross_check=True)
v = pa.verify_partner(rep, orbit, enc)
print(f"\nreconnection P = {rec.P}, partner word {rep.word}")
print(f"partner period T' = {rep.T_prime:.10f}")
print(f"(T'-T)/2          = {(rep.T_prime - orbit.period) / 2:+.6e}")
print(f"predicted dS      = {rep.delta_S:+.6e}")
print(f"residual {rep.residual:.2e} against bound {rep.bound_value:.2e}")
print(f"cascade and reassembly traces agree to {rep.cascade['relative_trace_gap']:.1e}")

print()
for name, val in v.items():
    if name == "ok":
        continue
    lhs, rhs, ok = val
    print(f"  {'ok ' if ok else 'BAD'} {name:40s} {lhs:.3e}  {rhs:.3e}")
print("all checks pass:", v["ok"])

# the action difference is second order in the encounter size; closer
# piercings need longer loops to keep the group discrete
print("\nshrinking the section:")
for k in range(4):
    e = eps / 2**k
    c = [(x / 2**k, y / 2**k) for x, y in coords]
    o, en = pa.synthetic_encounter(3, c, [16 + 3 * k, 16.5 + 3 * k, 17 + 3 * k], eps=e / 3)
    rp = pa.synthesize_partner(o, en, rec)
    print(f"  eps {e:.4f}  T'-T {rp.T_prime - o.period:+.3e}  ratio to eps^2 {(rp.T_prime - o.period) / e**2:+.4f}")
