"""Monte Carlo laboratory for first-passage percolation on the complete graph
with exponential edge weights: finite-n simulation, exact exploration laws,
samplers for the limiting diameter variable, and the statistics to compare
them."""

__version__ = "0.1.0"
