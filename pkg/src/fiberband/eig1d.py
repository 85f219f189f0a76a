"""Symmetric tridiagonal eigensolver and Richardson extrapolation.

Discretised fiber operators are symmetric tridiagonal matrices.  Eigenvalues
come from Sturm-sequence bisection, eigenvectors from shifted inverse
iteration, and second-order discretisation errors are removed by Richardson
extrapolation over grids whose spacing halves.

The matrices are stored over the *active* nodes only: Dirichlet end nodes are
dropped, a Neumann end node is kept and symmetrised.  Eigenvectors are padded
back to the full grid so that ``Eigenpair.vector`` has one entry per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from fiberband import _kernels
from fiberband.errors import ClusterError, NumericalError, ValidationError
from fiberband.mesh import Grid

#: Relative tolerance of the bisection: |error| ≤ DEFAULT_RTOL·(|λ| + 1).
DEFAULT_RTOL = 1e-10
MAX_BISECTION = 200
MAX_INVERSE_ITERATIONS = 50


class BC(str, Enum):
    """Boundary condition at one end of a grid."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal discretisation of a 1D operator.

    Attributes
    ----------
    diag, offdiag : ndarray
        Matrix entries over the active nodes, in *matrix units*.  Physical
        eigenvalues are ``scale`` times the matrix eigenvalues.
    grid : Grid
        The full grid, including Dirichlet end nodes.
    bc_left, bc_right : BC
    scale : float
        Energy unit of the matrix.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    grid: Grid
    bc_left: BC = BC.DIRICHLET
    bc_right: BC = BC.DIRICHLET
    scale: float = 1.0
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        bc_left = BC(self.bc_left)
        bc_right = BC(self.bc_right)
        object.__setattr__(self, "bc_left", bc_left)
        object.__setattr__(self, "bc_right", bc_right)
        diag = np.ascontiguousarray(self.diag, dtype=float)
        offdiag = np.ascontiguousarray(self.offdiag, dtype=float)
        n_active = self.grid.n - (bc_left is BC.DIRICHLET) - (bc_right is BC.DIRICHLET)
        if diag.shape != (n_active,) or offdiag.shape != (n_active - 1,):
            raise ValidationError(
                f"operator shape mismatch: diag {diag.shape}, offdiag {offdiag.shape}, "
                f"expected {n_active} active nodes"
            )
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag))):
            raise ValidationError("operator entries must be finite")
        if not self.scale > 0:
            raise ValidationError("scale must be positive")
        diag.flags.writeable = False
        offdiag.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)
        w = np.full(n_active, self.grid.spacing)
        if bc_left is BC.NEUMANN:
            w[0] *= 0.5
        if bc_right is BC.NEUMANN:
            w[-1] *= 0.5
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n_active(self) -> int:
        return self.diag.shape[0]

    @property
    def active(self) -> slice:
        """Slice of grid nodes carried by the matrix."""
        start = 1 if self.bc_left is BC.DIRICHLET else 0
        stop = self.grid.n - 1 if self.bc_right is BC.DIRICHLET else self.grid.n
        return slice(start, stop)

    @property
    def active_nodes(self) -> np.ndarray:
        return self.grid.nodes[self.active]

    @classmethod
    def schrodinger(
        cls,
        grid: Grid,
        potential: np.ndarray,
        bc_left: BC | str = BC.DIRICHLET,
        bc_right: BC | str = BC.DIRICHLET,
        kinetic: float = 1.0,
        scale: float = 1.0,
    ) -> "TridiagonalOperator":
        """Discretise ``-kinetic·d²/dx² + V`` with central differences.

        ``potential`` holds ``V`` at every grid node.  A Neumann end uses the
        mirror-node stencil; the resulting non-symmetric boundary row is
        symmetrised by the diagonal similarity that turns the trapezoid
        weight ½ at that node into 1, which changes the coupling to the
        neighbour into ``-√2·kinetic/h²``.
        """
        bc_left, bc_right = BC(bc_left), BC(bc_right)
        potential = np.asarray(potential, dtype=float)
        if potential.shape != (grid.n,):
            raise ValidationError("potential must be sampled at every grid node")
        h2 = grid.spacing**2
        c = kinetic / h2
        sl = slice(
            1 if bc_left is BC.DIRICHLET else 0,
            grid.n - 1 if bc_right is BC.DIRICHLET else grid.n,
        )
        diag = 2.0 * c + potential[sl]
        off = np.full(diag.shape[0] - 1, -c)
        if bc_left is BC.NEUMANN:
            off[0] *= math.sqrt(2.0)
        if bc_right is BC.NEUMANN:
            off[-1] *= math.sqrt(2.0)
        return cls(diag / scale, off / scale, grid, bc_left, bc_right, scale)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Matrix (in matrix units) applied to an active-node vector."""
        return _kernels.tridiag_matvec(self.diag, self.offdiag, np.ascontiguousarray(v, dtype=float))

    def count_below(self, value: float) -> int:
        """Number of eigenvalues strictly below the physical energy ``value``."""
        return int(_kernels.count_below(self.diag, self.offdiag, value / self.scale))

    def dense(self) -> np.ndarray:
        """Dense matrix in matrix units (testing and small problems only)."""
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True)
class Eigenpair:
    """Eigenvalue with its normalised eigenvector on the full grid.

    ``vector`` satisfies ``Σ wᵢ vᵢ² = 1`` with trapezoid weights ``w`` (the
    grid spacing, halved at a Neumann end node).  Its largest-magnitude
    entry is positive.
    """

    value: float
    vector: np.ndarray
    residual: float
    grid: Grid


def _rtol(tol: float | None) -> float:
    if tol is None:
        return DEFAULT_RTOL
    if not tol > 0:
        raise ValidationError("tol must be positive")
    return float(tol)


def lowest_eigenvalues(op: TridiagonalOperator, j_max: int, tol: float | None = None) -> np.ndarray:
    """The ``j_max`` smallest eigenvalues, in nondecreasing order.

    Parameters
    ----------
    op : TridiagonalOperator
    j_max : int
        Number of eigenvalues; at most a quarter of the active nodes.
    tol : float, optional
        Relative bisection tolerance; each value is within
        ``tol·(|λ| + 1)`` (matrix units) of an exact matrix eigenvalue.

    Returns
    -------
    ndarray
        Physical eigenvalues (matrix eigenvalues times ``op.scale``).
    """
    rtol = _rtol(tol)
    if int(j_max) != j_max or j_max < 1:
        raise ValidationError("j_max must be a positive integer")
    if j_max > op.n_active / 4:
        raise ValidationError(f"j_max={j_max} exceeds a quarter of the {op.n_active} active nodes")
    values, lower, upper, status = _kernels.bisect_lowest(
        op.diag, op.offdiag, int(j_max), rtol, MAX_BISECTION
    )
    if status:
        idx = status - 1
        raise NumericalError(
            "bisection failed to bracket eigenvalue",
            index=idx + 1,
            interval=(lower[idx] * op.scale, upper[idx] * op.scale),
        )
    return values * op.scale


def _normalise(op: TridiagonalOperator, s: np.ndarray) -> np.ndarray:
    """Scatter an orthonormal active vector to a weighted-normalised full vector."""
    full = np.zeros(op.grid.n)
    full[op.active] = s / np.sqrt(op.weights)
    peak = int(np.argmax(np.abs(full)))  # first occurrence on ties
    if full[peak] < 0:
        full = -full
    return full


def _start_vector(n: int) -> np.ndarray:
    # deterministic and generic: not orthogonal to any smooth mode
    i = np.arange(n, dtype=float)
    v = 1.0 + 0.5 * np.sin(0.7 * i + 0.3) + 0.25 * np.cos(2.3 * i)
    return v / np.linalg.norm(v)


def _inverse_iteration(
    op: TridiagonalOperator,
    mvalue: float,
    previous: Sequence[np.ndarray] = (),
    tol: float | None = None,
) -> tuple[np.ndarray, float]:
    rtol = _rtol(tol)
    bracket = 10.0 * rtol * (abs(mvalue) + 1.0)
    inside = _kernels.count_below(op.diag, op.offdiag, mvalue + bracket) - _kernels.count_below(
        op.diag, op.offdiag, mvalue - bracket
    )
    if inside >= 2:
        raise ClusterError("cluster: eigenvalue is not simple", value=mvalue * op.scale, multiplicity=inside)
    target = 1e-8 * (abs(mvalue) + 1.0)
    x = _start_vector(op.n_active)
    residual = math.inf
    for _ in range(MAX_INVERSE_ITERATIONS):
        y = _kernels.tridiag_solve(op.diag, op.offdiag, mvalue, x)
        norm = np.linalg.norm(y)
        if not np.isfinite(norm) or norm == 0.0:
            raise NumericalError("inverse iteration broke down", value=mvalue * op.scale)
        x = y / norm
        for p in previous:
            x -= np.dot(p, x) * p
        x /= np.linalg.norm(x)
        r = op.matvec(x) - mvalue * x
        residual = float(np.linalg.norm(r))
        if residual <= target:
            return x, residual
    raise NumericalError(
        "inverse iteration did not converge in 50 iterations",
        value=mvalue * op.scale,
        residual=residual * op.scale,
    )


def eigenvector(op: TridiagonalOperator, value: float, tol: float | None = None) -> Eigenpair:
    """Eigenvector for a (physical) eigenvalue located by bisection.

    Raises
    ------
    ClusterError
        If two or more eigenvalues lie within the bisection bracket.
    NumericalError
        If inverse iteration does not reach the residual target
        ``1e-8·(|value| + 1)`` within 50 steps.
    """
    s, residual = _inverse_iteration(op, value / op.scale, tol=tol)
    return Eigenpair(float(value), _normalise(op, s), residual * op.scale, op.grid)


def eigenpairs(op: TridiagonalOperator, j_max: int, tol: float | None = None) -> list[Eigenpair]:
    """Lowest ``j_max`` eigenpairs, re-orthogonalised within the slice."""
    values = lowest_eigenvalues(op, j_max, tol)
    found: list[np.ndarray] = []
    pairs = []
    for value in values:
        s, residual = _inverse_iteration(op, value / op.scale, previous=found, tol=tol)
        found.append(s)
        pairs.append(Eigenpair(float(value), _normalise(op, s), residual * op.scale, op.grid))
    return pairs


def active_vector(op: TridiagonalOperator, pair: Eigenpair) -> np.ndarray:
    """Orthonormal (unweighted) active-node representation of an eigenvector."""
    return pair.vector[op.active] * np.sqrt(op.weights)


@dataclass(frozen=True)
class RichardsonResult:
    """Extrapolated value with an error estimate.

    ``order`` is the empirical convergence order, available with three or
    more resolutions.
    """

    value: np.ndarray | float
    error: np.ndarray | float
    order: np.ndarray | float | None = None


def richardson(values_at_spacings: Sequence[tuple[float, np.ndarray | float]]) -> RichardsonResult:
    """Eliminate the ``h²`` error term from values at halving spacings.

    Parameters
    ----------
    values_at_spacings : sequence of (spacing, value)
        Two or three entries with spacings ``h, h/2[, h/4]`` (any order).
        Values may be arrays of a common shape.

    Returns
    -------
    RichardsonResult
        ``value`` is ``(4 v_{h/2} - v_h)/3`` built from the two finest
        entries; ``error`` is the absolute difference between the two most
        recent extrapolants (with two entries, the finest raw value is the
        previous one); ``order`` is ``log2((v_h - v_{h/2})/(v_{h/2} - v_{h/4}))``.

    Examples
    --------
    >>> float(richardson([(0.1, 5 + 2 * 0.01), (0.05, 5 + 2 * 0.0025)]).value)
    5.0
    """
    entries = sorted(values_at_spacings, key=lambda item: -item[0])
    if len(entries) < 2:
        raise ValidationError("richardson needs at least two resolutions")
    if len(entries) > 3:
        raise ValidationError("richardson accepts at most three resolutions")
    spacings = [float(h) for h, _ in entries]
    for coarse, fine in zip(spacings, spacings[1:]):
        if not fine > 0 or abs(coarse / fine - 2.0) > 1e-9:
            raise ValidationError(f"spacings must halve: got {spacings}")
    vals = [np.asarray(v, dtype=float) for _, v in entries]
    extrap = [(4.0 * fine - coarse) / 3.0 for coarse, fine in zip(vals, vals[1:])]
    value = extrap[-1]
    if len(extrap) == 1:
        error = np.abs(value - vals[-1])
        order = None
    else:
        error = np.abs(extrap[-1] - extrap[-2])
        with np.errstate(divide="ignore", invalid="ignore"):
            order = np.log2(np.abs((vals[0] - vals[1]) / (vals[1] - vals[2])))
    def unwrap(a):
        return float(a) if a is not None and np.ndim(a) == 0 else a
    return RichardsonResult(unwrap(value), unwrap(error), unwrap(order))
