"""Bayesian inference for discretely observed diffusions.

Thin wrapper over the C++ extension module.  Every entry point takes the same
plain-text configuration accepted by the ``sdebridge`` command line tool.
"""

from ._sdebridge import act, bridges, config_errors, discretization, run, simulate

__all__ = ["act", "bridges", "config_errors", "discretization", "run", "simulate"]
__version__ = "0.1.0"
