"""Partner orbits of the geodesic flow on quotients of PSL(2,R)."""

from . import psl2, fuchsian, flow, closing, encounters, partners, suites

__all__ = ["psl2", "fuchsian", "flow", "closing", "encounters", "partners", "suites"]
