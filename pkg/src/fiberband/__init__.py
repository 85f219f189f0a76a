"""fiberband: band functions, thresholds and effective models for fibered
magnetic Schrödinger operators.

The package is organised bottom-up:

* :mod:`fiberband.mesh` -- grids, truncation windows and the wire transform;
* :mod:`fiberband.eig1d` -- Sturm bisection / inverse iteration / Richardson;
* :mod:`fiberband.models` -- fiber families, primitives and asymptotic laws;
* :mod:`fiberband.bands` -- band scans, velocities, thresholds, Θ₀;
* :mod:`fiberband.states` -- wavepackets, currents, localisation profiles;
* :mod:`fiberband.effective` -- effective 1D operators, counting, Robin;
* :mod:`fiberband.registry` -- on-disk cache of band tables;
* :mod:`fiberband.cli` -- the ``fiberband`` command.
"""

__version__ = "0.1.0"

#: Tag folded into cache keys; bump whenever numerical output may change.
SOLVER_VERSION = "fiberband-solver-1"

from fiberband.errors import (  # noqa: E402
    ClusterError,
    FiberbandError,
    NumericalError,
    ValidationError,
)

__all__ = [
    "__version__",
    "SOLVER_VERSION",
    "FiberbandError",
    "ValidationError",
    "NumericalError",
    "ClusterError",
]
