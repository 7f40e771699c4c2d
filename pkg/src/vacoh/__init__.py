"""Exact vertex-algebra cohomology calculator.

Rank-1 free-boson vertex algebra with exact rational arithmetic, matrix
elements as rational functions, chain-cochain complexes with coboundary
operators, sewing-parameter product series, and invariant classes built from
transversality-gated products.
"""

from .rational import DiagRational, MPoly, Q, TruncSeries

__all__ = ["DiagRational", "MPoly", "Q", "TruncSeries"]
