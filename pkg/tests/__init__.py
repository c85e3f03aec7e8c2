"""frontlab test suite."""
