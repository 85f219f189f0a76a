"""Effective one-dimensional operators, counting functions and Robin models.

Contents
--------
* :func:`effective_halfplane` -- the operator ``-μ∂_y² - v(y)`` that governs
  weak perturbations ``-V`` of the Neumann half-plane fiber near the band
  minimum, with ``μ = λ''(k₀)/2`` and ``v(y) = ∫ V(x, y) u₁(x, k₀)² dx``;
* :func:`count_negative` -- Sturm count of negative eigenvalues, checked
  under window and resolution doubling;
* :func:`phase_space_count` -- ``(1/2π)·|{V > λ, x > 0}|`` by adaptive cell
  counting;
* :func:`robin_sector_numeric` / :func:`robin_halfline` -- Robin Laplacian
  ground energies on a sector (2D, polar finite volumes) and on a half-line;
* :func:`robin_effective_boundary` -- ``-∂_s² - α·γ(s)`` on a closed curve;
* :func:`harmonic_levels` -- sorted sums ``Σ √(μ_k/2)(2n_k - 1)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import cg

from fiberband import _kernels
from fiberband.bands import SolverSettings, Theta0Result, theta0 as _theta0
from fiberband.eig1d import BC, TridiagonalOperator, lowest_eigenvalues, richardson
from fiberband.errors import NumericalError, ValidationError
from fiberband.mesh import Grid
from fiberband.models import sector_energy

# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationField:
    """Nonnegative bounded perturbation ``V(x, y)`` of a half-plane model.

    Parameters
    ----------
    sampler : callable
        Vectorised ``(x, y) ↦ V``.
    decay : float, optional
        Decay exponent ``m`` of ``V ~ ⟨(x, y)⟩^{-m}`` (metadata; a positive
        value promises bounded superlevel sets).
    support : (x0, x1, y0, y1), optional
        Rectangle containing the support, or None for unbounded support.
    """

    sampler: Callable[[np.ndarray, np.ndarray], np.ndarray]
    decay: Optional[float] = None
    support: Optional[tuple[float, float, float, float]] = None

    def __call__(self, x, y):
        return np.asarray(self.sampler(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)


@dataclass(frozen=True)
class EffectiveOperator1D:
    """Discretised ``-μ d²/dy² + W(y)``.

    Attributes
    ----------
    mass : float
        ``μ > 0``.
    potential : ndarray
        ``W`` sampled at :attr:`nodes` (for the line: interior nodes only).
    geometry : str
        ``line`` (Dirichlet at both ends of ``[y_min, y_max]``) or ``circle``
        (periodic, length :attr:`length`).
    y_min, y_max : float
        Line geometry end points.
    length : float
        Circle circumference.
    potential_fn : callable, optional
        ``W`` as a function, enabling rebuilds at other windows/resolutions.
    """

    mass: float
    potential: np.ndarray
    geometry: str = "line"
    y_min: float = math.nan
    y_max: float = math.nan
    length: float = math.nan
    potential_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValidationError("effective mass must be positive")
        if self.geometry not in ("line", "circle"):
            raise ValidationError("geometry must be 'line' or 'circle'")
        pot = np.asarray(self.potential, dtype=float)
        if pot.ndim != 1 or pot.size < 16:
            raise ValidationError("effective operator needs at least 16 samples")
        if self.geometry == "circle" and not self.length > 0:
            raise ValidationError("circle geometry needs a positive length")
        object.__setattr__(self, "potential", pot)

    @property
    def n(self) -> int:
        return self.potential.size

    @property
    def spacing(self) -> float:
        if self.geometry == "circle":
            return self.length / self.n
        return (self.y_max - self.y_min) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        if self.geometry == "circle":
            return np.arange(self.n) * self.spacing
        return self.y_min + self.spacing * np.arange(1, self.n + 1)

    def entries(self) -> tuple[np.ndarray, np.ndarray, float]:
        """Diagonal, off-diagonal and corner entry of the matrix."""
        c = self.mass / self.spacing**2
        diag = 2.0 * c + self.potential
        off = np.full(self.n - 1, -c)
        corner = -c if self.geometry == "circle" else 0.0
        return diag, off, corner

    def dense(self) -> np.ndarray:
        diag, off, corner = self.entries()
        A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        A[0, -1] += corner
        A[-1, 0] += corner
        return A

    def count_below(self, value: float) -> int:
        diag, off, corner = self.entries()
        if self.geometry == "circle":
            return int(_kernels.count_below_cyclic(diag, off, corner, float(value)))
        return int(_kernels.count_below(diag, off, float(value)))

    def eigenvalues(self, count: int, rtol: float = 1e-13) -> np.ndarray:
        """Lowest ``count`` eigenvalues by (cyclic) Sturm bisection."""
        if count < 1 or count > self.n // 4:
            raise ValidationError("count must be between 1 and n/4")
        diag, off, corner = self.entries()
        if self.geometry == "circle":
            vals, lo, hi, status = _kernels.bisect_lowest_cyclic(diag, off, corner, int(count), rtol, 400)
        else:
            vals, lo, hi, status = _kernels.bisect_lowest(diag, off, int(count), rtol, 400)
        if status:
            raise NumericalError("bisection failed", index=status, interval=(lo[status - 1], hi[status - 1]))
        return vals

    @classmethod
    def line(
        cls,
        mass: float,
        potential_fn: Callable[[np.ndarray], np.ndarray],
        y_max: float,
        n: int,
        y_min: Optional[float] = None,
    ) -> "EffectiveOperator1D":
        """Sample ``W`` on ``n`` interior nodes of ``[y_min, y_max]`` (default symmetric)."""
        y_min = -y_max if y_min is None else y_min
        h = (y_max - y_min) / (n + 1)
        y = y_min + h * np.arange(1, n + 1)
        return cls(mass, potential_fn(y), "line", y_min, y_max, potential_fn=potential_fn)

    def rebuilt(self, window_factor: float = 1.0, resolution_factor: int = 1) -> "EffectiveOperator1D":
        """Same operator on a scaled window and/or refined grid (line only)."""
        if self.potential_fn is None or self.geometry != "line":
            raise ValidationError("rebuilding needs a line operator with potential_fn")
        center = 0.5 * (self.y_min + self.y_max)
        half = 0.5 * (self.y_max - self.y_min) * window_factor
        h = self.spacing / resolution_factor
        n = int(round(2 * half / h)) - 1
        return EffectiveOperator1D.line(self.mass, self.potential_fn, center + half, n, center - half)


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature ``γ`` sampled at uniform arc length on ``[0, L)``."""

    gamma: np.ndarray
    length: float

    def __post_init__(self) -> None:
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or g.size < 16:
            raise ValidationError("curvature profile needs at least 16 samples")
        if not self.length > 0:
            raise ValidationError("curve length must be positive")
        object.__setattr__(self, "gamma", g)

    @property
    def spacing(self) -> float:
        return self.length / self.gamma.size

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.gamma.size) * self.spacing

    def total_curvature(self) -> float:
        """``∫γ ds`` (periodic trapezoid rule); ``2π`` for a convex closed curve."""
        return float(np.sum(self.gamma) * self.spacing)

    def shifted(self, c: float) -> "CurvatureProfile":
        return CurvatureProfile(self.gamma + c, self.length)

    def hessian_at_max(self) -> tuple[float, float]:
        """``(γ_max, -γ''(s_max))`` from a periodic second difference."""
        g = self.gamma
        i = int(np.argmax(g))
        h = self.spacing
        second = (g[(i + 1) % g.size] - 2 * g[i] + g[i - 1]) / h**2
        return float(g[i]), float(-second)


def circle_profile(radius: float = 1.0, n: int = 2000) -> CurvatureProfile:
    """Constant curvature ``1/radius`` on a circle."""
    return CurvatureProfile(np.full(n, 1.0 / radius), 2 * math.pi * radius)


def ellipse_profile(a: float, b: float, n: int = 4000, oversample: int = 50) -> CurvatureProfile:
    """Curvature of the ellipse ``(a cos t, b sin t)`` at uniform arc length.

    Arc length is tabulated with the cumulative trapezoid rule on a fine
    parameter grid and inverted by linear interpolation.
    """
    if not (a > 0 and b > 0):
        raise ValidationError("ellipse semi-axes must be positive")
    t = np.linspace(0.0, 2 * math.pi, n * oversample + 1)
    speed = np.sqrt(a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2)
    s = cumulative_trapezoid(speed, t, initial=0.0)
    length = float(s[-1])
    su = np.arange(n) * length / n
    tu = np.interp(su, s, t)
    gamma = a * b / (a * a * np.sin(tu) ** 2 + b * b * np.cos(tu) ** 2) ** 1.5
    return CurvatureProfile(gamma, length)


# ---------------------------------------------------------------------------
# effective operator of the perturbed Neumann half-plane
# ---------------------------------------------------------------------------


def effective_halfplane(
    V: PerturbationField,
    y_max: float = 20.0,
    n: int = 2000,
    theta: Optional[Theta0Result] = None,
    settings: Optional[SolverSettings] = None,
    extra: float = 8.0,
) -> EffectiveOperator1D:
    """Effective operator ``-μ∂_y² - v(y)`` on ``[-y_max, y_max]``.

    Parameters
    ----------
    V : PerturbationField
    y_max, n : float, int
        Window half-width and number of interior nodes.
    theta : Theta0Result, optional
        Band minimum data; computed with :func:`fiberband.bands.theta0` when
        omitted.
    extra : float
        Window ``[0, k₀ + extra]`` for the ground state ``u₁(·, k₀)``.

    Raises
    ------
    ValidationError
        If ``λ''(k₀) ≤ 0``.
    """
    theta = theta or _theta0(settings=settings)
    if not theta.second_derivative > 0:
        raise ValidationError("band minimum is degenerate: second derivative is not positive")
    mu = 0.5 * theta.second_derivative
    sol = solve_ground_state(theta.k0, extra, settings)
    x, u2 = sol
    wx = np.full(x.size, x[1] - x[0])
    wx[[0, -1]] *= 0.5

    def v_of(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        X, Y = np.meshgrid(x, y, indexing="xy")
        vals = V(X, Y)
        return (vals * (wx * u2)[None, :]).sum(axis=1)

    def W(y):
        return -v_of(y)

    return EffectiveOperator1D.line(mu, W, y_max, n)


def solve_ground_state(k0: float, extra: float = 8.0, settings: Optional[SolverSettings] = None):
    """``(x, u₁(x, k₀)²)`` on the finest grid of the Neumann ground slice."""
    from fiberband.bands import solve_slice
    from fiberband.models import FiberModel

    sol = solve_slice(FiberModel.half_plane("neumann"), k0, 1, settings=settings, want_vectors=True, window=(0.0, k0 + extra))
    return sol.grid.nodes, sol.vectors[0] ** 2


def count_negative(op: EffectiveOperator1D, check: bool = True) -> int:
    """Number of negative eigenvalues (Sturm count at 0).

    With ``check`` and a line operator carrying ``potential_fn``, the count
    is recomputed on a doubled window and on a doubled resolution; any
    disagreement raises.

    Raises
    ------
    NumericalError
        "unconverged count" when the doubled operators disagree.
    """
    count = op.count_below(0.0)
    if check and op.geometry == "line" and op.potential_fn is not None:
        wide = op.rebuilt(window_factor=2.0).count_below(0.0)
        fine = op.rebuilt(resolution_factor=2).count_below(0.0)
        if not count == wide == fine:
            raise NumericalError("unconverged count", base=count, doubled_window=wide, doubled_resolution=fine)
    return count


# ---------------------------------------------------------------------------
# phase-space counting
# ---------------------------------------------------------------------------


def _area(V, lam, box, base, max_depth):
    """Inside area plus half the undecided area of ``[0, box]×[-box, box]``.

    Cells are processed one refinement level at a time: each cell is probed
    at its four corners and centre; unanimous cells are settled, the rest
    are split in four.  Cells with no probe inside are dropped from level
    2 on.
    """
    size = box / base
    ix, iy = np.meshgrid(np.arange(base), np.arange(2 * base), indexing="ij")
    x0 = (ix * size).ravel()
    y0 = (-box + iy * size).ravel()
    inside_area = 0.0
    corner = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
    for depth in range(max_depth + 1):
        if x0.size == 0:
            return inside_area, 0.0
        px = x0[:, None] + size * corner[None, :, 0]
        py = y0[:, None] + size * corner[None, :, 1]
        probe = V(px, py) > lam
        full = probe.all(axis=1)
        empty = ~probe.any(axis=1)
        inside_area += full.sum() * size * size
        keep = ~full
        if depth >= 2:
            keep &= ~empty
        x0, y0 = x0[keep], y0[keep]
        if depth == max_depth:
            return inside_area + 0.5 * x0.size * size * size, x0.size * size * size
        half = 0.5 * size
        x0 = np.concatenate([x0, x0 + half, x0, x0 + half])
        y0 = np.concatenate([y0, y0, y0 + half, y0 + half])
        size = half
    return inside_area, 0.0  # pragma: no cover


def phase_space_count(
    V: PerturbationField,
    lam: float,
    rtol: float = 1e-3,
    box: float = 1.0,
    max_box: float = 2.0**20,
    base: int = 8,
    max_depth: int = 14,
) -> float:
    """``(1/2π)·|{(x, y) : x > 0, V(x, y) > λ}|``.

    The box ``[0, B]×[-B, B]`` is doubled until ``V ≤ λ`` on a sampled ring
    around it, then the area is estimated by recursive quadrisection of
    cells whose corner/centre samples disagree; fully inside cells count in
    full, undecided cells at the finest level count half.  The depth is
    increased until the estimate changes by less than ``rtol``.

    Raises
    ------
    ValidationError
        If ``λ ≤ 0``.
    NumericalError
        If the superlevel set keeps reaching the boundary of boxes up to
        ``max_box``.
    """
    if not lam > 0:
        raise ValidationError("λ must be positive")
    while True:
        ring = np.linspace(-1.0, 1.0, 513)
        edge_x = np.concatenate([np.full(ring.size, box), box * (ring + 1) / 2, box * (ring + 1) / 2])
        edge_y = np.concatenate([box * ring, np.full(ring.size, box), np.full(ring.size, -box)])
        outer = V(edge_x, edge_y)
        if not np.any(outer > lam):
            break
        box *= 2.0
        if box > max_box:
            raise NumericalError("unbounded superlevel set", lam=lam, box=box)
    depth = 4
    prev, mixed = _area(V, lam, box, base, depth)
    while True:
        depth += 1
        cur, mixed = _area(V, lam, box, base, depth)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300) or depth >= max_depth:
            break
        prev = cur
    if cur == 0.0 and mixed == 0.0:
        return 0.0
    return cur / (2 * math.pi)


# ---------------------------------------------------------------------------
# Robin models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobinHalfline:
    value: float
    error: float
    x: np.ndarray
    vector: np.ndarray


def robin_halfline(length: float = 30.0, n: int = 3001) -> RobinHalfline:
    """Ground state of ``-u''`` on ``(0, L)``, ``u'(0) = -u(0)``, ``u(L) = 0``.

    The Robin end is discretised with the ghost node ``u_{-1} = u_1 + 2h·u_0``
    folded into the first row and symmetrised like a Neumann row; the
    result is Richardson-extrapolated from two resolutions.  The exact
    half-line answer is ``-1`` with eigenfunction ``√2·e^{-x}``.
    """
    from fiberband.eig1d import eigenvector

    values = []
    pair = None
    for grid in (Grid(0.0, length, n), Grid(0.0, length, 2 * n - 1)):
        op = TridiagonalOperator.schrodinger(grid, np.zeros(grid.n), BC.NEUMANN, BC.DIRICHLET)
        diag = op.diag.copy()
        # mirror row (2u0 - 2u1)/h² - (2/h)u0 ; symmetrisation leaves the diagonal
        diag[0] -= 2.0 / grid.spacing
        op = TridiagonalOperator(diag, op.offdiag, grid, BC.NEUMANN, BC.DIRICHLET)
        lam = lowest_eigenvalues(op, 1)[0]
        values.append((grid.spacing, lam))
        pair = eigenvector(op, lam)
    res = richardson(values)
    return RobinHalfline(float(res.value), float(res.error), pair.grid.nodes, pair.vector)


@dataclass(frozen=True)
class SectorResult:
    """Robin ground energy on a truncated sector with run diagnostics."""

    theta: float
    energy: float
    target: float
    R: float
    n_r: int
    n_phi: int
    r_min: float
    iterations: int
    residual: float
    r_sensitivity: Optional[float] = None
    r_flagged: bool = False

    @property
    def relative_error(self) -> float:
        return abs(self.energy / self.target - 1.0)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "energy": self.energy,
            "target": self.target,
            "relative_error": self.relative_error,
            "R": self.R,
            "n_r": self.n_r,
            "n_phi": self.n_phi,
            "r_min": self.r_min,
            "iterations": self.iterations,
            "residual": self.residual,
            "r_sensitivity": self.r_sensitivity,
            "r_flagged": self.r_flagged,
        }


def sector_matrix(theta: float, R: float, n_r: int, n_phi: int, r_min_frac: float = 1e-6):
    """Symmetrised polar finite-volume matrix of the Robin sector problem.

    Nodes ``r_i = r_min + i·dr`` (``i < n_r``; Dirichlet at ``r = R``) and
    ``φ_j = j·dφ`` (``0 ≤ j ≤ n_phi``).  The quadratic form
    ``∫|∇u|² - ∫_{sides} u²`` uses midpoint radii for radial fluxes and
    half control volumes at ``r_min`` and on both sides; the excised core
    ``r < r_min`` carries a natural (Neumann) condition.  Returns the
    matrix ``M^{-1/2} K M^{-1/2}`` in CSR format.
    """
    r_min = R * r_min_frac
    dr = (R - r_min) / n_r
    r = r_min + dr * np.arange(n_r)
    dphi = theta / n_phi
    cr = np.ones(n_r)
    cr[0] = 0.5
    cp = np.ones(n_phi + 1)
    cp[[0, -1]] = 0.5
    rh = r + 0.5 * dr
    main = rh / dr
    main[1:] += rh[:-1] / dr
    Kr = sp.diags([main, -rh[:-1] / dr, -rh[:-1] / dr], [0, 1, -1])
    mp = np.zeros(n_phi + 1)
    mp[:-1] += 1.0 / dphi
    mp[1:] += 1.0 / dphi
    Kp = sp.diags([mp, -np.ones(n_phi) / dphi, -np.ones(n_phi) / dphi], [0, 1, -1])
    sides = np.zeros(n_phi + 1)
    sides[[0, -1]] = 1.0
    K = (
        sp.kron(Kr, sp.diags(cp * dphi))
        + sp.kron(sp.diags(cr * dr / r), Kp)
        - sp.kron(sp.diags(cr * dr), sp.diags(sides))
    )
    mass = np.kron(cr * dr * r, cp * dphi)
    s = 1.0 / np.sqrt(mass)
    return (sp.diags(s) @ K @ sp.diags(s)).tocsr(), r_min


def _sector_solve(theta, R, n_r, n_phi, r_min_frac, rq_tol, max_outer):
    import pyamg

    target = sector_energy(theta)
    S, r_min = sector_matrix(theta, R, n_r, n_phi, r_min_frac)
    sigma = 1.5 * target
    A = (S - sigma * sp.identity(S.shape[0], format="csr")).tocsr()
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
    P = ml.aspreconditioner(cycle="V")
    # start from the sampled exponential profile of the half-plane edge state
    rr = np.repeat(r_min + (R - r_min) / n_r * np.arange(n_r), n_phi + 1)
    x = np.exp(-np.minimum(rr, 50.0)) + 1e-3
    x /= np.linalg.norm(x)
    rq_prev = math.inf
    rq = float(x @ (S @ x))
    residual = math.inf
    for it in range(1, max_outer + 1):
        y, info = cg(A, x, M=P, rtol=1e-10, maxiter=500)
        if info != 0:
            res = float(np.linalg.norm(A @ y - x))
            raise NumericalError("CG stagnated", theta=theta, iteration=it, residual=res)
        x = y / np.linalg.norm(y)
        rq_prev, rq = rq, float(x @ (S @ x))
        residual = float(np.linalg.norm(S @ x - rq * x))
        if abs(rq - rq_prev) < rq_tol * max(1.0, abs(rq)):
            return rq, it, residual, r_min
    raise NumericalError("inverse iteration did not converge", theta=theta, residual=residual)


def robin_sector_numeric(
    theta: float,
    R: Optional[float] = None,
    n_r: int = 400,
    n_phi: int = 80,
    r_min_frac: float = 1e-6,
    check_R: bool = False,
    max_outer: int = 200,
) -> SectorResult:
    """Robin ground energy on the sector of opening ``θ`` (``∂_ν u = u``).

    Shifted inverse power iteration with shift ``1.5·E_ref`` below the
    spectrum; each step solves the SPD system by conjugate gradients
    preconditioned with smoothed-aggregation algebraic multigrid.  Iterates
    until the Rayleigh quotient moves by less than ``1e-6``.

    Parameters
    ----------
    theta : float
        Opening in ``(0, 2π)``, ``θ ≠ π``.
    R : float, optional
        Truncation radius (default and minimum ``10 / |sin(θ/2)|``).
    n_r, n_phi : int
        Radial and angular cell counts.
    r_min_frac : float
        Excised core radius as a fraction of ``R``.
    check_R : bool
        Also solve with ``1.5·R`` (same cell sizes) and flag a relative
        shift above 1%.
    """
    if not 0 < theta < 2 * math.pi or abs(theta - math.pi) < 1e-12:
        raise ValidationError("θ must lie in (0, 2π) and differ from π")
    half_sin = abs(math.sin(0.5 * theta))
    if R is None:
        R = 10.0 / half_sin
    if not R >= 10.0 / half_sin - 1e-12:
        raise ValidationError(f"R must be at least 10/|sin(θ/2)| = {10.0 / half_sin:g}")
    if n_r < 8 or n_phi < 4:
        raise ValidationError("sector grid is too coarse")
    energy, its, residual, r_min = _sector_solve(theta, R, n_r, n_phi, r_min_frac, 1e-6, max_outer)
    sens = None
    flagged = False
    if check_R:
        big, *_ = _sector_solve(theta, 1.5 * R, int(round(1.5 * n_r)), n_phi, r_min_frac, 1e-6, max_outer)
        sens = abs(big / energy - 1.0)
        flagged = sens > 0.01
    return SectorResult(theta, energy, sector_energy(theta), R, n_r, n_phi, r_min, its, residual, sens, flagged)


def sector_convergence(theta: float, sizes: Sequence[tuple[int, int]] = ((100, 20), (200, 40), (400, 80))) -> list[SectorResult]:
    """Sector energies on a sequence of grids (for convergence reports)."""
    return [robin_sector_numeric(theta, n_r=nr, n_phi=nphi) for nr, nphi in sizes]


def robin_effective_boundary(
    profile: CurvatureProfile,
    alpha: float,
    count: int = 3,
) -> tuple[EffectiveOperator1D, np.ndarray]:
    """Periodic operator ``-∂_s² - α·γ(s)`` and its lowest eigenvalues.

    The cyclic tridiagonal matrix is solved directly by bisection on its
    inertia (the elimination of a cyclic tridiagonal only fills the last
    column, so the count stays O(n)).
    """
    if not alpha > 0:
        raise ValidationError("α must be positive")
    op = EffectiveOperator1D(1.0, -alpha * profile.gamma, "circle", length=profile.length)
    return op, op.eigenvalues(count)


def harmonic_levels(hessian_eigs: Sequence[float], count: int) -> list[float]:
    """The ``count`` smallest sums ``Σ_k √(μ_k/2)(2n_k - 1)``, ``n_k ≥ 1``.

    Enumeration is best-first over the lattice of ``(n_k)`` with a heap;
    each lattice point is generated once (incrementing only coordinates at
    or after the last incremented one), so repeated values appear with
    their multiplicity.
    """
    mus = [float(m) for m in hessian_eigs]
    if not mus or any(not m > 0 for m in mus):
        raise ValidationError("hessian eigenvalues must be positive")
    if int(count) != count or count < 1:
        raise ValidationError("count must be a positive integer")
    w = [math.sqrt(m / 2.0) for m in mus]
    start = tuple([1] * len(w))
    heap = [(sum(w), start, 0)]
    out: list[float] = []
    while heap and len(out) < count:
        value, ns, last = heapq.heappop(heap)
        out.append(value)
        for i in range(last, len(w)):
            nxt = list(ns)
            nxt[i] += 1
            heapq.heappush(heap, (value + 2.0 * w[i], tuple(nxt), i))
    return out
