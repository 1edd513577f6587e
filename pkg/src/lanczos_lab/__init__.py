"""Mixed-precision laboratory for Lanczos stability experiments.

Subpackage map: ``scalars`` (precision regimes), ``ensembles`` (random
inputs), ``spectral`` (eigensolvers, matrix functions), ``lanczos`` (the
three-term iteration and its rounding diagnostics), ``measures`` (spectral
measures and distances), ``orthopoly`` (orthogonal-polynomial machinery),
``stability`` (backward/forward stability constructions), ``krylov``
(Lanczos-based linear solves), ``harness`` (experiment CLI).
"""

from ._backend import BACKEND
from .scalars import DD, Precision

__version__ = "0.1.0"

__all__ = ["BACKEND", "DD", "Precision", "__version__"]
