"""Finite-element minimizers of the Ginzburg-Landau energy."""

__version__ = "0.1.0"
