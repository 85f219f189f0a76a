"""Uniform grids, potential level-set truncation and the wire transform.

Every fiber operator handled by the package is a 1D Schrödinger operator
``-d²/dx² + (a(x) - k)²`` on an unbounded interval.  Eigenfunctions decay
like Agmon exponentials outside the classically allowed region
``{(a(x) - k)² ≤ λ}``, so the interval is truncated to a neighbourhood of a
potential level set and closed with a Dirichlet condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from fiberband.errors import ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from fiberband.models import FiberModel

#: Default smallest admissible ρ for the wire after the log-radius transform.
WIRE_RHO_MIN = 1e-3


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` nodes on ``[x_min, x_max]``.

    Attributes
    ----------
    x_min, x_max : float
        End points; both are nodes.
    n : int
        Number of nodes, at least 16.
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValidationError("grid end points must be finite")
        if not self.x_min < self.x_max:
            raise ValidationError(f"empty grid: x_min={self.x_min} >= x_max={self.x_max}")
        if int(self.n) != self.n or self.n < 16:
            raise ValidationError(f"grid needs at least 16 nodes, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def refined(self) -> "Grid":
        """Same interval with the spacing halved (``2n - 1`` nodes)."""
        return Grid(self.x_min, self.x_max, 2 * self.n - 1)

    @classmethod
    def covering(
        cls,
        x_min: float,
        x_max: float,
        spacing: float,
        anchor: float | None = None,
    ) -> "Grid":
        """Smallest grid of the given spacing that covers ``[x_min, x_max]``.

        If ``anchor`` is given the spacing is exactly ``spacing`` and every
        node lies on the lattice ``anchor + spacing·ℤ`` (so ``anchor`` itself
        is a node whenever it lies in the interval); otherwise the end points
        are kept and the spacing is rounded down to fit an integer node count.
        """
        if spacing <= 0:
            raise ValidationError("spacing must be positive")
        if anchor is None:
            n = max(16, int(math.ceil((x_max - x_min) / spacing - 1e-9)) + 1)
            return cls(x_min, x_max, n)
        left = int(math.ceil((anchor - x_min) / spacing - 1e-9))
        right = int(math.ceil((x_max - anchor) / spacing - 1e-9))
        while left + right + 1 < 16:
            left += 1
            right += 1
        return cls(anchor - left * spacing, anchor + right * spacing, left + right + 1)


@dataclass(frozen=True)
class TruncationPolicy:
    """How far past the classically allowed region the fiber is kept.

    Parameters
    ----------
    energy_cap : float, optional
        Fixed level ``Λ`` of the potential level set.  When omitted it is set
        to ``cap_factor`` times an estimate of the highest requested
        eigenvalue, and the estimate is refreshed if the computed eigenvalue
        turns out larger.
    margin : float
        Multiplier (≥ 1) applied to ``√Λ`` in the primitive variable.
    cap_factor : float
        Multiplier used when ``energy_cap`` is automatic.
    wire_rho_min : float
        Floor of the wire window in ``ρ``; the Dirichlet wall never sits
        closer to the axis than this.
    """

    energy_cap: float | None = None
    margin: float = 3.0
    cap_factor: float = 4.0
    wire_rho_min: float = WIRE_RHO_MIN

    def __post_init__(self) -> None:
        if self.energy_cap is not None and not self.energy_cap > 0:
            raise ValidationError("energy_cap must be positive")
        if not self.margin >= 1.0:
            raise ValidationError(f"margin must be >= 1, got {self.margin}")
        if not self.cap_factor >= 1.0:
            raise ValidationError(f"cap_factor must be >= 1, got {self.cap_factor}")
        if not 0.0 < self.wire_rho_min < 1.0:
            raise ValidationError(f"wire_rho_min must lie in (0, 1), got {self.wire_rho_min}")

    def cap(self, estimate: float) -> float:
        """Energy cap for a given eigenvalue estimate."""
        if self.energy_cap is not None:
            return float(self.energy_cap)
        return self.cap_factor * max(float(estimate), 1e-300)

    def to_dict(self) -> dict:
        return {
            "energy_cap": self.energy_cap,
            "margin": self.margin,
            "cap_factor": self.cap_factor,
            "wire_rho_min": self.wire_rho_min,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TruncationPolicy":
        unknown = set(data) - {"energy_cap", "margin", "cap_factor", "wire_rho_min"}
        if unknown:
            raise ValidationError(f"unknown policy fields: {sorted(unknown)}")
        return cls(**data)


def truncation_window(
    model: "FiberModel",
    k: float,
    j_max: int = 1,
    policy: TruncationPolicy | None = None,
    energy_cap: float | None = None,
) -> tuple[float, float]:
    """Interval holding the lowest ``j_max`` eigenfunctions of the fiber at ``k``.

    The window is the preimage under the magnetic primitive ``a`` of
    ``[k - margin·√Λ, k + margin·√Λ]`` intersected with the model's natural
    domain.  For the wire the returned window is in the rescaled radius
    ``ρ = r·e^{-k}``; it always contains ``ρ = 1``.  Towards the axis the
    wire eigenfunctions decay only as powers of ``ρ`` unless the well is deep,
    so the left end is the Agmon point of :func:`wire_agmon_left` (clamped to
    at most ``e^{-reach}``) and never lower than ``policy.wire_rho_min``.

    Parameters
    ----------
    model : FiberModel
    k : float
        Fiber frequency.
    j_max : int
        Highest band index the window must accommodate.
    policy : TruncationPolicy, optional
    energy_cap : float, optional
        Overrides the policy's cap (used by the adaptive solver loop).

    Returns
    -------
    (float, float)

    Raises
    ------
    ValidationError
        If the level set is empty ("energy cap below well bottom").
    """
    policy = policy or TruncationPolicy()
    if not math.isfinite(k):
        raise ValidationError("k must be finite")
    if energy_cap is None:
        energy_cap = policy.cap(model.level_estimate(k, j_max))
    reach = policy.margin * math.sqrt(energy_cap)
    if model.is_wire:
        # a(ρ) = log ρ in the rescaled variable; the well bottom sits at ρ = 1
        h = math.exp(-k)
        lo = max(min(math.exp(-reach), wire_agmon_left(h, energy_cap, policy.margin)), policy.wire_rho_min)
        hi = math.exp(reach)
        return lo, hi
    window = model.primitive.level_window(k - reach, k + reach)
    if window is None:
        raise ValidationError(
            f"energy cap below well bottom: Λ={energy_cap:g} at k={k:g} for {model.label}"
        )
    return window


def wire_agmon_left(h: float, energy: float, margin: float = 3.0) -> float:
    """Largest ``ρ < 1`` at which a wire state of energy ``energy`` has decayed
    by the Agmon factor ``exp(-margin²·2)`` towards the axis.

    The decay rate of ``-h²∂_ρ² + log²ρ`` below the turning point
    ``ρ_t = e^{-√E}`` is ``√(log²ρ - E)/h``.  With ``s = -log ρ`` the action is
    ``S(s) = ∫_{√E}^{s} e^{-σ}√(σ² - E) dσ / h``, which stays bounded as
    ``s → ∞`` (the axis is at finite distance in ``ρ``).  When the bound is
    below the target the state reaches the axis and ``0.0`` is returned.
    """
    target = 2.0 * margin**2
    s_t = math.sqrt(max(energy, 0.0))

    def action(s_end: float) -> float:
        value, _ = quad(lambda s: math.exp(-s) * math.sqrt(max(s * s - energy, 0.0)), s_t, s_end, limit=200)
        return value / h

    s_far = s_t + 60.0
    if action(s_far) < target:
        return 0.0
    return math.exp(-brentq(lambda s: action(s) - target, s_t, s_far, xtol=1e-12))


@dataclass(frozen=True)
class WireCoefficients:
    """Coefficient functions of the flattened wire fiber in the ρ variable.

    The fiber ``-(1/r)∂_r r ∂_r + m²/r² + (log r - k)²`` on ``L²(r dr)`` is
    mapped by ``u = √r·v`` (onto flat ``L²(dr)``) and ``ρ = r·e^{-k}`` to
    ``-h²∂_ρ² + h²(m² - ¼)/ρ² + log²ρ`` with ``h = e^{-k}``.
    """

    m: int
    k: float
    h: float
    kinetic: float
    potential: Callable[[np.ndarray], np.ndarray]


def flatten_wire(m: int, k: float) -> WireCoefficients:
    """Flat-measure form of the wire fiber with frequency ``k``.

    Examples
    --------
    >>> c = flatten_wire(1, 0.3)
    >>> float(c.potential(np.array([1.0]))[0]) == 0.75 * c.h ** 2
    True
    """
    if int(m) != m:
        raise ValidationError("angular momentum m must be an integer")
    if not math.isfinite(k):
        raise ValidationError("k must be finite")
    h = math.exp(-k)
    h2 = h * h
    coeff = h2 * (m * m - 0.25)

    def potential(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return coeff / rho**2 + np.log(rho) ** 2

    return WireCoefficients(m=int(m), k=float(k), h=h, kinetic=h2, potential=potential)
