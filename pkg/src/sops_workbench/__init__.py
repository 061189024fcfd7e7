"""Simulate and analyse self-organizing particle systems on the triangular torus.

Particles carry one of ``q`` orientations and move under a Metropolis chain
whose stationary law rewards neighbouring pairs (compression or aggregation)
and equal orientations (alignment).  The subpackages cover the lattice
geometry, configurations and their boundary statistics, the compiled chain,
classifiers, closed-form thresholds and the run harness.  Importing the
package does not compile anything; the kernels compile on first use.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
