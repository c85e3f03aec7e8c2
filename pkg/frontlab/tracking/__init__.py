"""Front tracking: Riemann solvers, shift policies and the event-driven tracker."""
