"""Time-fractional nonlocal diffusion on a periodic interval.

Submodules: ``fractime`` (discrete Caputo calculus), ``spaceop`` (nonlocal
operators), ``march`` (implicit time stepping and persistence),
``diagnostics`` (barriers, energies, oscillation scans, weak residuals),
``special`` (Mittag-Leffler reference) and ``cli``.
"""

from .errors import DomainError, FormatError, SolverError

__version__ = "0.1.0"

__all__ = ["DomainError", "FormatError", "SolverError", "__version__"]
