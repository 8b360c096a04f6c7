"""Kernel backend selection.

The compiled Cython extension is used when available; otherwise the numpy
fallback in :mod:`emkit._kernels.py` takes over.  Set ``EMKIT_PURE_PYTHON=1``
to force the fallback (used by the backend benchmark and parity tests).
"""

import os

from . import py as _py

BACKEND = "python"
gmm_posterior = _py.gmm_posterior
poisson_posterior = _py.poisson_posterior

if not os.environ.get("EMKIT_PURE_PYTHON"):
    try:
        from . import _core as _c

        gmm_posterior = _c.gmm_posterior
        poisson_posterior = _c.poisson_posterior
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "gmm_posterior", "poisson_posterior"]
