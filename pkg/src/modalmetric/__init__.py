"""Weighted formula distances, finite topologies and product update on pointed Kripke models.

Submodules: ``formula`` (syntax and parser), ``kripke`` (models and model
checking), ``bisim`` (refinement, characteristic formulas, n-types),
``metrics`` (descriptors, weights, distances), ``topology`` (finite
topologies), ``dynamics`` (action models and continuity) and ``cli``.
"""

__version__ = "0.1.0"
