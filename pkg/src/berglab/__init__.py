"""berglab: a numerical laboratory for Bergman spaces with rapidly
decaying radial weights.

The package builds regularized weights, harmonic building blocks
concentrated on boundary lattices, certified interpolation on those
lattices, and explicit bounded invertible functions whose Gram diagnostics
exhibit non-cyclic behavior.
"""

__version__ = "0.1.0"
