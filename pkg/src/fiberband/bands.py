"""Band functions λ_j(k): slice solves, scans, velocities and thresholds.

A *slice* is the fiber operator at one frequency ``k``.  It is assembled on
a truncation window (see :mod:`fiberband.mesh`), discretised with central
differences at two or three resolutions whose spacing halves, solved by
Sturm bisection and extrapolated with Richardson.  Group velocities come
from the Feynman–Hellmann formula ``λ' = ⟨u, ∂_k h(k) u⟩``, which is exact
for the discrete eigenpair and is extrapolated in the same way.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from fiberband.eig1d import (
    BC,
    DEFAULT_RTOL,
    TridiagonalOperator,
    active_vector,
    eigenpairs,
    richardson,
)
from fiberband.errors import FiberbandError, NumericalError, ValidationError
from fiberband.mesh import Grid, TruncationPolicy, truncation_window
from fiberband.models import (
    AsymptoticPredictor,
    Family,
    FiberModel,
    landau,
    magnetic_primitive,
    splitting_set,
)


@dataclass(frozen=True)
class SolverSettings:
    """Discretisation controls for slice solves.

    Parameters
    ----------
    points_per_length : float
        Nodes per natural length of the model on the coarsest grid.
    levels : int
        Number of resolutions (2 or 3).  With three, the reported error is
        the difference of successive Richardson extrapolants.
    tol : float
        Relative bisection tolerance.
    max_window_updates : int
        How often the automatic energy cap may be raised when a computed
        eigenvalue exceeds its estimate.
    """

    points_per_length: float = 50.0
    levels: int = 3
    tol: float = DEFAULT_RTOL
    max_window_updates: int = 8

    def __post_init__(self) -> None:
        if not self.points_per_length >= 4:
            raise ValidationError("points_per_length must be at least 4")
        if self.levels not in (2, 3):
            raise ValidationError("levels must be 2 or 3")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")

    def to_dict(self) -> dict:
        return {
            "points_per_length": self.points_per_length,
            "levels": self.levels,
            "tol": self.tol,
            "max_window_updates": self.max_window_updates,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverSettings":
        unknown = set(data) - {"points_per_length", "levels", "tol", "max_window_updates"}
        if unknown:
            raise ValidationError(f"unknown solver fields: {sorted(unknown)}")
        return cls(**data)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assembled:
    """Discrete slice together with the data needed for Feynman–Hellmann."""

    op: TridiagonalOperator
    coordinate: str  # "x", or "log_rho" for the wire
    dk_potential: Optional[np.ndarray]  # ∂_k of the potential at active nodes
    potential: Optional[np.ndarray]  # wire: t² at active nodes


def slice_grid(
    model: FiberModel,
    k: float,
    window: tuple[float, float],
    settings: SolverSettings,
) -> Grid:
    """Coarsest grid for a slice on the given truncation window."""
    spacing = model.natural_length(k) / settings.points_per_length
    lo, hi = window
    if model.is_wire:
        lo, hi = math.log(lo), math.log(hi)
        return Grid.covering(lo, hi, spacing, anchor=0.0)
    if model.is_half_plane:
        return Grid.covering(0.0, max(hi, 16 * spacing), spacing, anchor=0.0)
    if model.family is Family.MAGNETIC_STEP:
        return Grid.covering(min(lo, -spacing), max(hi, spacing), spacing, anchor=0.0)
    return Grid.covering(lo, hi, spacing)


def assemble(model: FiberModel, k: float, grid: Grid) -> Assembled:
    """Discretise the fiber of ``model`` at frequency ``k`` on ``grid``.

    Half-plane grids must start at the wall ``x = 0``.  Wire grids live in
    ``t = log ρ`` where the fiber is unitarily equivalent to
    ``h²·e^{-t}(-∂_t² + m²)e^{-t} + t²`` with ``h = e^{-k}`` on flat
    ``L²(dt)``; the matrix is stored in units of ``h``.
    """
    x = grid.nodes
    if model.is_wire:
        h = math.exp(-k)
        d2 = grid.spacing**2
        t = x[1:-1]
        et = np.exp(-t)
        diag = h * et * et * (2.0 / d2 + model.m**2) + t * t / h
        off = -h * et[:-1] * et[1:] / d2
        op = TridiagonalOperator(diag, off, grid, BC.DIRICHLET, BC.DIRICHLET, scale=h)
        return Assembled(op, "log_rho", None, t * t)
    if model.is_half_plane:
        if abs(grid.x_min) > 1e-14:
            raise ValidationError("half-plane grids must start at the wall x = 0")
        a = x
        bc_left = BC(model.wall)
    else:
        a = magnetic_primitive(model)(x)
        bc_left = BC.DIRICHLET
    shifted = a - k
    op = TridiagonalOperator.schrodinger(grid, shifted * shifted, bc_left, BC.DIRICHLET)
    return Assembled(op, "x", -2.0 * shifted[op.active], None)


def _velocities(asm: Assembled, pairs) -> np.ndarray:
    out = np.empty(len(pairs))
    for i, pair in enumerate(pairs):
        s = active_vector(asm.op, pair)
        s2 = s * s
        if asm.dk_potential is not None:
            out[i] = float(np.dot(s2, asm.dk_potential))
        else:
            # ∂_k (h² K) = -2 h² K = -2 (P - t²)
            out[i] = -2.0 * (pair.value - float(np.dot(s2, asm.potential)))
    return out


# ---------------------------------------------------------------------------
# slice solves
# ---------------------------------------------------------------------------


@dataclass
class SliceSolution:
    """Extrapolated eigenvalues and velocities of one slice.

    ``grid``/``vectors`` refer to the finest resolution and are only filled
    when requested.  ``coordinate`` names the variable of ``grid``: ``x``,
    or ``log_rho`` (``log ρ = log r - k``) for the wire.
    """

    k: float
    values: np.ndarray
    velocity: np.ndarray
    error: np.ndarray
    order: Optional[np.ndarray] = None
    window: tuple[float, float] = (math.nan, math.nan)
    grid: Optional[Grid] = None
    vectors: Optional[np.ndarray] = None
    coordinate: str = "x"
    raw: list = field(default_factory=list)


def _solve_level(model, k, grid, j_max, tol):
    asm = assemble(model, k, grid)
    pairs = eigenpairs(asm.op, j_max, tol)
    values = np.array([p.value for p in pairs])
    return asm, pairs, values, _velocities(asm, pairs)


def solve_slice(
    model: FiberModel,
    k: float,
    j_max: int,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
    want_vectors: bool = False,
    window: Optional[tuple[float, float]] = None,
) -> SliceSolution:
    """Lowest ``j_max`` band values, velocities and error estimates at ``k``.

    Parameters
    ----------
    model, k, j_max
    policy : TruncationPolicy, optional
    settings : SolverSettings, optional
    want_vectors : bool
        Keep the finest-grid eigenvectors on the result.
    window : (float, float), optional
        Explicit truncation window; bypasses the policy.

    Raises
    ------
    NumericalError
        Solver failure, with ``model``, ``k`` (and ``j`` when known) context.
    """
    policy = policy or TruncationPolicy()
    settings = settings or SolverSettings()
    if int(j_max) != j_max or j_max < 1:
        raise ValidationError("j_max must be a positive integer")
    k = float(k)
    try:
        if window is None:
            estimate = model.level_estimate(k, j_max)
            for _ in range(settings.max_window_updates + 1):
                cap = policy.cap(estimate)
                win = truncation_window(model, k, j_max, policy, energy_cap=cap)
                grid = slice_grid(model, k, win, settings)
                first = _solve_level(model, k, grid, j_max, settings.tol)
                top = first[2][-1]
                if policy.energy_cap is not None:
                    if top >= cap:
                        raise ValidationError(
                            f"energy cap {cap:g} does not exceed requested eigenvalue {top:g}"
                        )
                    break
                if policy.cap_factor * top <= cap * (1 + 1e-12):
                    break
                estimate = top
            else:  # pragma: no cover - estimates always converge quickly
                raise NumericalError("truncation window did not stabilise")
        else:
            win = tuple(window)
            grid = slice_grid(model, k, win, settings)
            first = _solve_level(model, k, grid, j_max, settings.tol)
        levels = [first]
        g = grid
        for _ in range(settings.levels - 1):
            g = g.refined()
            levels.append(_solve_level(model, k, g, j_max, settings.tol))
    except NumericalError as exc:
        raise exc.with_context(model=model.label, k=k) from exc
    spacings = [lvl[0].op.grid.spacing for lvl in levels]
    rv = richardson(list(zip(spacings, [lvl[2] for lvl in levels])))
    rvel = richardson(list(zip(spacings, [lvl[3] for lvl in levels])))
    values = np.atleast_1d(np.asarray(rv.value, dtype=float))
    floor = settings.tol * (np.abs(values) + 1.0) * levels[-1][0].op.scale
    error = np.atleast_1d(np.asarray(rv.error, dtype=float)) + floor
    sol = SliceSolution(
        k=k,
        values=values,
        velocity=np.atleast_1d(np.asarray(rvel.value, dtype=float)),
        error=error,
        order=None if rv.order is None else np.atleast_1d(rv.order),
        window=(float(win[0]), float(win[1])),
        coordinate=levels[-1][0].coordinate,
        raw=[lvl[2] for lvl in levels],
    )
    if want_vectors:
        finest = levels[-1]
        sol.grid = finest[0].op.grid
        sol.vectors = np.array([p.vector for p in finest[1]])
    return sol


def group_velocity(
    model: FiberModel,
    k: float,
    j: int,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
) -> float:
    """``λ_j'(k)`` by the Feynman–Hellmann formula ``-2∫(a - k)|u_j|²``."""
    return float(solve_slice(model, k, j, policy, settings).velocity[j - 1])


def finite_difference_velocity(
    model: FiberModel,
    k: float,
    j: int,
    dk: float = 1e-3,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
) -> float:
    """Central difference ``(λ_j(k+dk) - λ_j(k-dk)) / 2dk`` of extrapolated values."""
    plus = solve_slice(model, k + dk, j, policy, settings).values[j - 1]
    minus = solve_slice(model, k - dk, j, policy, settings).values[j - 1]
    return float((plus - minus) / (2 * dk))


# ---------------------------------------------------------------------------
# band tables
# ---------------------------------------------------------------------------


@dataclass
class BandTable:
    """Band functions sampled on a k-grid.

    ``values``, ``velocity`` and ``error`` have shape ``(j_max, len(k_nodes))``;
    row ``j - 1`` holds band ``j``.
    """

    model: FiberModel
    k_nodes: np.ndarray
    values: np.ndarray
    velocity: np.ndarray
    error: np.ndarray
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        self.k_nodes = np.asarray(self.k_nodes, dtype=float)
        for name in ("values", "velocity", "error"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.values.shape != (self.j_max, self.k_nodes.size):
            raise ValidationError("band table arrays have inconsistent shapes")
        if self.velocity.shape != self.values.shape or self.error.shape != self.values.shape:
            raise ValidationError("band table arrays have inconsistent shapes")
        if np.any(np.diff(self.k_nodes) <= 0):
            raise ValidationError("k_nodes must be strictly increasing")

    @property
    def j_max(self) -> int:
        return self.values.shape[0]

    def band(self, j: int) -> np.ndarray:
        return self.values[j - 1]

    def rows(self) -> Iterable[tuple[float, int, float, float, float]]:
        """``(k, j, lambda, velocity, err)`` rows, k-major."""
        for col, k in enumerate(self.k_nodes):
            for row in range(self.j_max):
                yield (
                    float(k),
                    row + 1,
                    float(self.values[row, col]),
                    float(self.velocity[row, col]),
                    float(self.error[row, col]),
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "j", "lambda", "velocity", "err"])
        for k, j, lam, vel, err in self.rows():
            writer.writerow([repr(k), j, repr(lam), repr(vel), repr(err)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "policy": self.policy.to_dict(),
            "settings": self.settings.to_dict(),
            "k": self.k_nodes.tolist(),
            "lambda": self.values.tolist(),
            "velocity": self.velocity.tolist(),
            "err": self.error.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "BandTable":
        return cls(
            model=FiberModel.from_dict(data["model"]),
            k_nodes=np.array(data["k"], dtype=float),
            values=np.array(data["lambda"], dtype=float),
            velocity=np.array(data["velocity"], dtype=float),
            error=np.array(data["err"], dtype=float),
            policy=TruncationPolicy.from_dict(data["policy"]),
            settings=SolverSettings.from_dict(data["settings"]),
        )


def worker_count(threads: Optional[int] = None) -> int:
    """Number of scan workers: argument, else ``FIBERBAND_THREADS``, else 1."""
    if threads is None:
        raw = os.environ.get("FIBERBAND_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValidationError(f"FIBERBAND_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ValidationError("thread count must be at least 1")
    return threads


def band_scan(
    model: FiberModel,
    k_grid: Sequence[float],
    j_max: int,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
    threads: Optional[int] = None,
) -> BandTable:
    """Solve every slice of ``k_grid`` and collect a :class:`BandTable`.

    Slices are independent and may run on several threads; the table is
    merged by k index, so the result does not depend on scheduling.
    """
    policy = policy or TruncationPolicy()
    settings = settings or SolverSettings()
    k_nodes = np.asarray(k_grid, dtype=float)
    if k_nodes.ndim != 1 or k_nodes.size < 1:
        raise ValidationError("k_grid must be a non-empty 1D sequence")
    if not np.all(np.isfinite(k_nodes)):
        raise ValidationError("k_grid must be finite")
    if np.any(np.diff(k_nodes) <= 0):
        raise ValidationError("k_grid must be strictly increasing")
    if int(j_max) != j_max or j_max < 1:
        raise ValidationError("j_max must be a positive integer")

    def work(k):
        return solve_slice(model, k, int(j_max), policy, settings)

    n_workers = worker_count(threads)
    if n_workers == 1:
        slices = [work(k) for k in k_nodes]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            slices = list(pool.map(work, k_nodes))
    values = np.array([s.values for s in slices]).T
    velocity = np.array([s.velocity for s in slices]).T
    error = np.array([s.error for s in slices]).T
    return BandTable(model, k_nodes, values, velocity, error, policy, settings)


def overlap_diagnostic(
    model: FiberModel,
    k_nodes: Sequence[float],
    j_max: int,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
) -> np.ndarray:
    """Check index-based band labelling by eigenvector continuation.

    For each pair of consecutive frequencies the eigenvectors are brought to
    a common grid and the matrix of overlaps ``|⟨u_i(k_n), u_j(k_{n+1})⟩|``
    is formed.  Returns, for every step, the largest off-diagonal overlap
    minus the smallest diagonal overlap; negative entries mean the labels
    are consistent with continuation.
    """
    sols = [solve_slice(model, k, j_max, policy, settings, want_vectors=True) for k in k_nodes]
    out = []
    for left, right in zip(sols, sols[1:]):
        lo = min(left.grid.x_min, right.grid.x_min)
        hi = max(left.grid.x_max, right.grid.x_max)
        x = np.linspace(lo, hi, max(left.grid.n, right.grid.n) * 2)
        ul = np.array([np.interp(x, left.grid.nodes, v, left=0, right=0) for v in left.vectors])
        ur = np.array([np.interp(x, right.grid.nodes, v, left=0, right=0) for v in right.vectors])
        w = np.full(x.size, x[1] - x[0])
        w[[0, -1]] *= 0.5
        ov = np.abs((ul * w) @ ur.T)
        diag = np.diag(ov).min()
        off = (ov - np.diag(np.diag(ov))).max() if j_max > 1 else 0.0
        out.append(off - diag)
    return np.array(out)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    k: float
    value: float
    kind: str  # "min" or "max"
    velocity: float


@dataclass(frozen=True)
class LimitEstimate:
    """Estimated limit of a band at one end of the k-axis.

    ``status`` is ``finite`` (``value`` ± ``uncertainty``), ``infinite``
    (the band diverges) or ``unresolved`` (the fit was poor).
    """

    status: str
    value: float = math.nan
    uncertainty: float = math.nan
    residual: float = math.nan


@dataclass(frozen=True)
class BandThresholds:
    j: int
    critical_points: tuple[CriticalPoint, ...]
    limit_plus: LimitEstimate
    limit_minus: LimitEstimate
    tags: tuple[str, ...]


@dataclass(frozen=True)
class ThresholdReport:
    model: FiberModel
    bands: tuple[BandThresholds, ...]

    def thresholds(self) -> list[float]:
        """Sorted list of all critical values and finite limits."""
        vals = []
        for band in self.bands:
            vals += [cp.value for cp in band.critical_points]
            for lim in (band.limit_plus, band.limit_minus):
                if lim.status == "finite":
                    vals.append(lim.value)
        return sorted(vals)

    def to_dict(self) -> dict:
        def lim(e: LimitEstimate):
            return {"status": e.status, "value": _json_num(e.value), "uncertainty": _json_num(e.uncertainty)}

        return {
            "model": self.model.to_dict(),
            "bands": [
                {
                    "j": b.j,
                    "critical_points": [
                        {"k": c.k, "value": c.value, "kind": c.kind, "velocity": c.velocity} for c in b.critical_points
                    ],
                    "limit_plus": lim(b.limit_plus),
                    "limit_minus": lim(b.limit_minus),
                    "tags": list(b.tags),
                }
                for b in self.bands
            ],
        }


def _json_num(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def _envelope(model: FiberModel, j: int, sign: int):
    """Basis function ``g`` of the fit ``λ ≈ L + C·g(k)`` at ``sign·∞``."""
    f = model.family
    if f is Family.IWATSUKA and model.B_minus != model.B_plus:
        if sign > 0:
            prim = magnetic_primitive(model)
            shift = prim.offset if model.gauge == "origin" else 0.0
            return lambda k: np.abs(k - shift) ** (-model.M)
        return lambda k: np.abs(k) ** (2 * j - 1) * np.exp(-k * k / model.B_minus)
    if f is Family.WIRE:
        return lambda k: np.exp(-sign * k)
    if f is Family.MAGNETIC_STEP and sign > 0:
        # the envelope follows the limit level, not the band index
        levels = splitting_set(model.b, j + 1).limits
        level = levels[j - 1]
        twins = [lv for lv in levels if abs(lv.value - level.value) <= 1e-12]
        if len(twins) == 2:
            # split level: the lower band carries the Landau law, the upper the b-law
            tag = "landau" if level is twins[0] else "b-landau"
            index = next(lv.index for lv in twins if lv.tag == tag)
        else:
            tag, index = level.tag, level.index
        n = 2 * index - 3
        if tag == "landau":
            return lambda k: np.abs(k) ** n * np.exp(-k * k)
        return lambda k: np.abs(k) ** n * np.exp(-k * k / model.b)
    return lambda k: np.abs(k) ** (2 * j - 1) * np.exp(-k * k)


def _fit_limit(k, lam, err, basis, sign) -> LimitEstimate:
    n = k.size
    if n < 6:
        return LimitEstimate("unresolved")
    # outward direction: increasing |k| toward sign·∞
    order = np.argsort(sign * k)
    k, lam, err = k[order], lam[order], err[order]
    w = (n + 1) // 2
    starts = sorted({0, (n - w) // 2, n - w})
    estimates, residuals = [], []
    for s in starts:
        kk, ll = k[s : s + w], lam[s : s + w]
        g = basis(kk)
        scale = np.max(np.abs(g)) or 1.0
        A = np.column_stack([np.ones_like(kk), g / scale])
        coef, *_ = np.linalg.lstsq(A, ll, rcond=None)
        resid = ll - A @ coef
        estimates.append(coef[0])
        residuals.append(float(np.sqrt(np.mean(resid**2))))
    value = float(estimates[-1])
    spread = float(np.max(estimates) - np.min(estimates))
    noise = float(np.max(err))
    uncertainty = spread + noise
    residual = max(residuals)
    if residual > 1e-4 * (abs(value) + 1.0) + 10 * noise:
        return LimitEstimate("unresolved", value, uncertainty, residual)
    return LimitEstimate("finite", value, uncertainty, residual)


def _limit(table: BandTable, j: int, sign: int) -> LimitEstimate:
    k = table.k_nodes
    n = k.size
    n_tail = max(6, int(math.ceil(0.25 * n)))
    if n_tail > n:
        return LimitEstimate("unresolved")
    sl = slice(n - n_tail, n) if sign > 0 else slice(0, n_tail)
    kk = k[sl]
    lam = table.values[j - 1, sl]
    vel = table.velocity[j - 1, sl]
    err = table.error[j - 1, sl]
    # outward slope: positive and non-decaying means the band diverges
    outward = sign * vel
    if sign < 0:
        outward = outward[::-1]
    outer, inner = np.abs(outward[-1]), np.abs(outward[0])
    if np.all(outward > 0) and outer >= inner and outer > 1e-3 * (1.0 + abs(lam).max()):
        return LimitEstimate("infinite", math.inf)
    return _fit_limit(kk, lam, err, _envelope(table.model, j, sign), sign)


def detect_thresholds(table: BandTable, velocity_tol: float = 1e-7) -> ThresholdReport:
    """Critical points and end limits of every band in ``table``.

    Interior critical points come from sign changes of the velocity between
    consecutive nodes, refined by Brent's method on the Feynman–Hellmann
    velocity.  End limits are fitted on the outer 25% of the k-range with
    the family's convergence law; ``uncertainty`` is the spread of the limit
    across three overlapping sub-windows plus the solver error.
    """
    bands = []
    for j in range(1, table.j_max + 1):
        vel = table.velocity[j - 1]
        crit = []
        for i in range(len(vel) - 1):
            v0, v1 = vel[i], vel[i + 1]
            # sign flips of velocities at round-off level are plateaus, not extrema
            if max(abs(v0), abs(v1)) <= velocity_tol:
                continue
            if v0 == 0.0 or v0 * v1 < 0:
                k0, k1 = table.k_nodes[i], table.k_nodes[i + 1]
                if v0 == 0.0:
                    k_star = k0
                else:
                    def fv(kk, j=j):
                        sol = solve_slice(table.model, kk, table.j_max, table.policy, table.settings)
                        return float(sol.velocity[j - 1])

                    try:
                        k_star = brentq(fv, k0, k1, xtol=1e-10, rtol=1e-12, maxiter=100)
                    except ValueError:
                        raise NumericalError(
                            "velocity sign change not reproduced", model=table.model.label, k=(k0, k1), j=j
                        ) from None
                sol = solve_slice(table.model, k_star, table.j_max, table.policy, table.settings)
                v_star = float(sol.velocity[j - 1])
                if abs(v_star) > velocity_tol:
                    raise NumericalError("critical point refinement missed tolerance", k=k_star, j=j, velocity=v_star)
                kind = "min" if v0 < 0 or v1 > 0 else "max"
                crit.append(CriticalPoint(float(k_star), float(sol.values[j - 1]), kind, v_star))
        plus = _limit(table, j, +1)
        minus = _limit(table, j, -1)
        tags = []
        if np.all(vel < velocity_tol) and not crit:
            tags.append("decreasing")
        elif np.all(vel > -velocity_tol) and not crit:
            tags.append("increasing")
        else:
            tags.append("non-monotone")
        if any(c.kind == "min" for c in crit):
            tags.append("has-minimum")
        if any(c.kind == "max" for c in crit):
            tags.append("has-maximum")
        bands.append(BandThresholds(j, tuple(crit), plus, minus, tuple(tags)))
    return ThresholdReport(table.model, tuple(bands))


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


@dataclass
class AsymptoticsReport:
    """Comparison of computed gaps with an asymptotic law.

    ``ratio`` is ``computed_gap / predicted_gap`` on the retained nodes
    ``k``; ``excluded`` lists nodes whose gap was below the noise floor.
    In fit mode ``fitted_exponent`` is the least-squares slope of
    ``log|gap| + k²`` against ``log k``.  For the wire, ``second_order`` is
    ``(λ - (2j-1)e^{-k})e^{2k}`` and ``second_order_predicted`` its
    predicted constant.
    """

    theorem_id: str
    band: int
    k: np.ndarray
    gap: np.ndarray
    predicted: np.ndarray
    ratio: np.ndarray
    excluded: np.ndarray
    drift: float
    trend: str
    passed: bool
    tolerance: float
    fitted_exponent: Optional[float] = None
    expected_exponent: Optional[float] = None
    second_order: Optional[np.ndarray] = None
    second_order_predicted: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "theorem_id": self.theorem_id,
            "band": self.band,
            "k": self.k.tolist(),
            "gap": self.gap.tolist(),
            "predicted": self.predicted.tolist(),
            "ratio": self.ratio.tolist(),
            "excluded": self.excluded.tolist(),
            "drift": _json_num(self.drift),
            "trend": self.trend,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
        }
        if self.fitted_exponent is not None:
            out["fitted_exponent"] = self.fitted_exponent
            out["expected_exponent"] = self.expected_exponent
        if self.second_order is not None:
            out["second_order"] = self.second_order.tolist()
            out["second_order_predicted"] = self.second_order_predicted
        return out


def compare_asymptotics(
    table: BandTable,
    pred: AsymptoticPredictor,
    tolerance: Optional[float] = None,
    k_range: Optional[tuple[float, float]] = None,
    noise_factor: float = 10.0,
) -> AsymptoticsReport:
    """Ratio of computed to predicted gaps over the predictor's validity window.

    Parameters
    ----------
    table : BandTable
    pred : AsymptoticPredictor
    tolerance : float, optional
        Allowed ``|ratio - 1|`` (default 0.05), or in fit mode the allowed
        deviation of the fitted exponent (default 0.15).
    k_range : (float, float), optional
        Further restricts the validity window.
    noise_factor : float
        Nodes with ``|gap| ≤ noise_factor·error`` are excluded.
    """
    if pred.band > table.j_max:
        raise ValidationError(f"table holds {table.j_max} bands, predictor needs band {pred.band}")
    lo, hi = pred.validity
    if k_range is not None:
        lo, hi = max(lo, k_range[0]), min(hi, k_range[1])
    k = table.k_nodes
    mask = (k >= lo - 1e-12) & (k <= hi + 1e-12)
    if not np.any(mask):
        raise ValidationError(f"table does not cover the validity window [{lo}, {hi}]")
    kk = k[mask]
    lam = table.values[pred.band - 1, mask]
    err = table.error[pred.band - 1, mask]
    gap = lam - pred.limit
    keep = np.abs(gap) > noise_factor * err
    excluded = kk[~keep]
    kk, gap, lam = kk[keep], gap[keep], lam[keep]
    predicted = np.asarray(pred.predict(kk), dtype=float)
    ratio = gap / predicted if kk.size else np.array([])
    drift = float(ratio[-1] - ratio[0]) if ratio.size else math.nan
    trend = "flat"
    if ratio.size >= 2:
        trend = "toward-1" if abs(ratio[-1] - 1) < abs(ratio[0] - 1) else "away-from-1"
    fitted = None
    second = None
    second_pred = None
    if pred.fit_mode:
        tol = 0.15 if tolerance is None else tolerance
        if kk.size < 2:
            raise ValidationError("fit mode needs at least two resolvable gaps")
        slope = float(np.polyfit(np.log(kk), np.log(np.abs(gap)) + kk * kk, 1)[0])
        fitted = slope
        passed = abs(slope - pred.exponent) <= tol
    else:
        tol = 0.05 if tolerance is None else tolerance
        passed = bool(ratio.size) and bool(np.all(np.abs(ratio - 1.0) <= tol))
    if pred.form == "wire-exponential":
        j = pred.band
        second = (lam - landau(j) * np.exp(-kk)) * np.exp(2 * kk)
        second_pred = -(table.model.m**2 - 0.25 - j * (j - 1) / 2.0)
    return AsymptoticsReport(
        theorem_id=pred.theorem_id,
        band=pred.band,
        k=kk,
        gap=gap,
        predicted=predicted,
        ratio=ratio,
        excluded=excluded,
        drift=drift,
        trend=trend,
        passed=passed,
        tolerance=tol,
        fitted_exponent=fitted,
        expected_exponent=pred.exponent if pred.fit_mode else None,
        second_order=second,
        second_order_predicted=second_pred,
    )


# ---------------------------------------------------------------------------
# Θ₀
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theta0Result:
    """Minimiser ``k0`` and minimum ``theta0`` of the first Neumann band."""

    k0: float
    theta0: float
    second_derivative: float
    velocity: float

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "theta0": self.theta0,
            "second_derivative": self.second_derivative,
        }


def neumann_ground(k: float, extra: float = 8.0, settings: Optional[SolverSettings] = None) -> SliceSolution:
    """First Neumann half-plane band on the explicit window ``[0, k + extra]``."""
    model = FiberModel.half_plane("neumann")
    return solve_slice(model, k, 1, settings=settings, window=(0.0, k + extra))


def theta0(
    tolerance: float = 1e-6,
    settings: Optional[SolverSettings] = None,
    extra: float = 8.0,
    bracket: tuple[float, float, float] = (0.3, 0.8, 1.4),
    step: float = 0.02,
) -> Theta0Result:
    """Minimise the first Neumann half-plane band by golden-section search.

    Parameters
    ----------
    tolerance : float
        Target accuracy of the minimiser (≥ 1e-6); the minimum itself is
        accurate to roughly its square.
    extra : float
        Each slice is solved on ``[0, k + extra]``.
    bracket : (a, b, c)
        Initial bracket with ``λ(b) < λ(a), λ(c)``.
    step : float
        Half-width of the second difference giving ``λ''(k0)``.
    """
    if not tolerance >= 1e-6:
        raise ValidationError("tolerance must be at least 1e-6")

    def f(k):
        return float(neumann_ground(k, extra, settings).values[0])

    try:
        res = minimize_scalar(f, bracket=bracket, method="golden", tol=tolerance)
    except ValueError as exc:
        raise NumericalError(f"golden-section bracket failure: {exc}", bracket=bracket) from None
    if not res.success:
        raise NumericalError("golden-section search failed", message=str(res.message))
    k0 = float(res.x)
    center = neumann_ground(k0, extra, settings)
    lam0 = float(center.values[0])
    second = (f(k0 + step) - 2 * lam0 + f(k0 - step)) / step**2
    return Theta0Result(k0, lam0, float(second), float(center.velocity[0]))


__all__ = [
    "SolverSettings",
    "SliceSolution",
    "BandTable",
    "solve_slice",
    "assemble",
    "band_scan",
    "group_velocity",
    "finite_difference_velocity",
    "overlap_diagnostic",
    "detect_thresholds",
    "ThresholdReport",
    "compare_asymptotics",
    "AsymptoticsReport",
    "theta0",
    "Theta0Result",
    "FiberbandError",
]
