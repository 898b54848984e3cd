"""Free-boundary simulation of the porous medium equation on a fixed domain.

The pressure formulation's moving support is pulled back to the initial
region by a height function h(x, t) defined along transversal segments; the
package evolves h, solves the associated degenerate linear parabolic
problems with no boundary data, and numerically certifies the boundary
structure (Fichera-type) sign conditions that govern well-posedness.
"""

__version__ = "0.1.0"

from ._backend import NUMBA_ENABLED, backend_name  # noqa: F401
