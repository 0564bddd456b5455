"""Numerical laboratory for rough-path driven semilinear parabolic equations.

Subpackages by concern:

  roughpath  grid rough paths, canonical lifts, fBm sampling, seminorms
  greedy     two-parameter control W, greedy times and counts
  specfun    Gamma / Mittag-Leffler evaluation and bound certificates
  gronwall   singular and discrete Gronwall bound calculators
  spectral   diagonal operator model with drift / diffusion coefficients
  solver     rough convolution and the exponential rough Euler scheme
  attractor  bound pipeline, ergodic moments, absorbing radius, pullback
  cli        batch experiment runner and the acceptance driver
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericsError

__all__ = ["ConfigError", "NumericsError", "__version__"]
