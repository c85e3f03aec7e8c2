"""Functionals evaluated on front-tracking profiles and trajectories."""
