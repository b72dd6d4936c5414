"""Distributional potentials, exact ground states and density inversion on the 1-d torus."""
