"""Flow matching for multistable, symmetry-breaking bifurcation systems."""

__version__ = "0.1.0"
