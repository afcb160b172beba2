"""Counting admissible reconnections and the bound constants that go with them."""

import math

from partner_orbits import partners as pa

for L in range(3, 8):
    recs = pa.reconnections(L)
    print(f"L = {L}: {len(recs):4d} reconnections  ((L-1)! - 1 = {math.factorial(L - 1) - 1})")

print("\nL = 4 in detail (P, order the partner visits the stretches):")
for r in pa.reconnections(4):
    print(f"  P = {r.P}  cycle {r.cycle}")

print("\nconstants of the general bounds")
print(f"{'L':>2} {'delta_d':>9} {'delta_T':>9} {'alpha':>9} {'beta':>8} {'omega':>9} {'kappa':>8}")
for L in range(3, 9):
    b = pa.bound_constants(L)
    print(f"{L:>2} {b.delta_d:9.3f} {b.delta_T:9.3f} {b.alpha:9.3f} {b.beta:8.3f} {b.omega:9.3f} {b.kappa:8.3f}")

# the partners of a 4-encounter are all distinct orbits
eps = 0.02
r = eps / 4
coords = [(-0.4 * r, 0.35 * r), (-0.4 * r / 3, -0.25 * r), (0.4 * r / 3, 0.15 * r), (0.4 * r, -0.1 * r)]
orbit, enc = pa.synthetic_encounter(4, coords, [16, 16.5, 17, 17.5], eps=r)
reps, verdicts = pa.all_partners(orbit, enc)
print(f"\noriginal word {orbit.word}, period {orbit.period:.6f}")
for rep, v in zip(reps, verdicts):
    print(f"  P = {rep.reconnection.P}  word {rep.word}  T' - T = {rep.T_prime - orbit.period:+.3e}  checks {v['ok']}")
