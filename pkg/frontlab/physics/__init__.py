"""Thermodynamics and wave curves of the gamma-law gas."""
