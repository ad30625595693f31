"""Spectral laboratory for the focusing energy-critical NLS on R^d x T.

Computes constrained ground-state thresholds on the vanishing-semivirial
manifold, locates the symmetry-breaking mass, and evolves the equation with a
split-step spectral integrator to probe the blow-up/scattering dichotomy.
"""

__version__ = "0.1.0"

from .grid import Field, WaveguideGrid, make_grid  # noqa: F401
from .functionals import FunctionalReport, MeiDomainCurve, mei, report  # noqa: F401
