"""Closed geodesics on the Bolza surface and a search for self-encounters.

At radii small enough for the partner theorems to apply, short orbits have no
3-encounters; with a coarse section the first one turns up at word length 6.
"""

import math
import time

from partner_orbits import partners as pa
from partner_orbits.fuchsian import BOLZA_RELATOR, build_surface_group, enumerate_conjugacy_classes, systole, word_to_str

g = build_surface_group("bolza")
print("relator residual", g.relator_residual(BOLZA_RELATOR))
print(f"systole {systole(g, 8):.12f}   2 arccosh(1 + sqrt 2) = {2 * math.acosh(1 + math.sqrt(2)):.12f}")
print("eps_star proxy", g.config.epsilon_star)

classes = enumerate_conjugacy_classes(g, 3)
print(f"\n{len(classes)} primitive classes up to length 3; shortest few:")
for c in classes[:6]:
    print(f"  {word_to_str(c.word):>12s}  T = {c.period:.6f}")

t0 = time.time()
for hit in pa.survey(g, 6, 0.1, L_max=3):
    good = [(r, v) for r, v in zip(hit.reports, hit.verdicts) if v["distinct"][2]]
    if good:
        rep, v = good[0]
        print(f"\nfirst distinct partner after {time.time() - t0:.1f}s")
        print(f"  orbit   {word_to_str(hit.orbit.word)}  T  = {hit.orbit.period:.6f}")
        print(f"  partner {word_to_str(rep.word)}  T' = {rep.T_prime:.6f}")
        d, bound, ok = v["d(phi_t x_P(j), phi_t v_j)"]
        print(f"  stretches stay within {d:.3f} of the original (bound {bound:.2f})")
        print("  eps admissible:", hit.hypotheses.get("eps <= eps_star / delta_d"))
        break
