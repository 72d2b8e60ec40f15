"""Cut points of chordal SLE with boundary arcs: Loewner solvers, samplers,
the two-curve ensemble, spectral densities and Monte Carlo estimators."""

__version__ = "0.1.0"
