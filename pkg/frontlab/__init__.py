"""frontlab: front-tracking laboratory for the 1-D full Euler system."""

__app_name__ = "frontlab"
__version__ = "0.1.0"
