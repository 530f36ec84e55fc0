"""Discretized Ginzburg-Landau functionals, their conjugates and duality checks."""
