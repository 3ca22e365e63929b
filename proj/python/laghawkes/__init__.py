"""Multivariate Hawkes processes with per-pair time lags.

Thin wrapper over the C++ core: simulation, exact likelihood/gradients,
stationarity and identifiability checks, and the MLE / VI / VAE lag
inference backends.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
