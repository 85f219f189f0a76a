"""Fiber families, their magnetic primitives, reference constants and
closed-form large-frequency predictors.

Every built-in family reduces, after a partial Fourier transform along the
direction of translation invariance, to the fiber operator

    h(k) = -d²/dx² + (a(x) - k)²

where ``a`` is a primitive of the magnetic field ``B``.  The families are

* ``half-plane-dirichlet`` / ``half-plane-neumann`` -- constant unit field on
  a half-plane, ``a(x) = x`` on ``[0, ∞)`` with the given wall condition;
* ``iwatsuka`` -- increasing field with limits ``B₋ < B₊`` equal to ``B₋``
  for ``x ≤ x₀`` and ``B₊ - x^{-M}`` for ``x ≥ x₀``, ``x₀ = (B₊ - B₋)^{-1/M}``;
* ``magnetic-step`` -- field ``1`` on ``x > 0`` and ``-b`` on ``x < 0``;
* ``wire`` -- field of an infinite straight current, ``a(r) = log r`` with
  angular momentum ``m`` (see :func:`fiberband.mesh.flatten_wire`);
* ``custom`` -- any nondecreasing primitive supplied by the caller (no
  asymptotic predictor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from fiberband.errors import ValidationError

RATIONAL_TOL = 1e-12


class Family(str, Enum):
    HALF_PLANE_DIRICHLET = "half-plane-dirichlet"
    HALF_PLANE_NEUMANN = "half-plane-neumann"
    IWATSUKA = "iwatsuka"
    MAGNETIC_STEP = "magnetic-step"
    WIRE = "wire"
    CUSTOM = "custom"

    @classmethod
    def _missing_(cls, value):
        # accept CamelCase / snake_case spellings such as "MagneticStep"
        if isinstance(value, str):
            key = value.replace("-", "").replace("_", "").lower()
            for member in cls:
                if member.value.replace("-", "") == key:
                    return member
        return None


GAUGES = ("origin", "power")


def landau(j: int) -> float:
    """Landau level ``E_j = 2j - 1``."""
    _check_index(j)
    return 2.0 * j - 1.0


def _check_index(j, name: str = "j") -> None:
    if int(j) != j or j < 1:
        raise ValidationError(f"{name} must be a positive integer, got {j!r}")


# ---------------------------------------------------------------------------
# magnetic primitives
# ---------------------------------------------------------------------------


class Primitive:
    """Magnetic primitive ``a`` on the model's natural domain.

    Subclasses provide vectorised evaluation, the field ``B = a'`` and
    :meth:`level_window`, the convex hull of ``{x : lo ≤ a(x) ≤ hi}``.
    """

    domain: tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, x):
        raise NotImplementedError

    def field(self, x):
        raise NotImplementedError

    def level_window(self, lo: float, hi: float) -> Optional[tuple[float, float]]:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearPrimitive(Primitive):
    """``a(x) = slope·x`` on ``[x_min, ∞)``."""

    slope: float = 1.0
    x_min: float = -math.inf

    @property
    def domain(self):
        return (self.x_min, math.inf)

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float)

    def field(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)

    def inverse(self, y):
        return np.asarray(y, dtype=float) / self.slope

    def level_window(self, lo, hi):
        a_min = self.slope * self.x_min if math.isfinite(self.x_min) else -math.inf
        if hi < a_min:
            return None
        lo_x = max(lo / self.slope, self.x_min)
        return (lo_x, hi / self.slope)


@dataclass(frozen=True)
class IwatsukaPrimitive(Primitive):
    """Primitive of ``B = B₋`` (x ≤ x₀), ``B₊ - x^{-M}`` (x ≥ x₀).

    ``gauge="origin"`` fixes ``a(0) = 0``; ``gauge="power"`` drops the
    additive constant so that ``a(x) = B₊x - x^{1-M}/(1-M)`` (``B₊x - log x``
    when ``M = 1``) exactly on ``x ≥ x₀``.  The two differ by the constant
    :attr:`offset` (``a_origin = a_power + offset``), i.e. by a shift of
    the fiber frequency.  ``B₋ = B₊`` gives a constant field.
    """

    B_plus: float
    B_minus: float
    M: float
    gauge: str = "origin"

    @property
    def degenerate(self) -> bool:
        return self.B_minus == self.B_plus

    @property
    def x0(self) -> float:
        if self.degenerate:
            return math.inf
        return (self.B_plus - self.B_minus) ** (-1.0 / self.M)

    def _tail(self, x):
        """Antiderivative of ``B₊ - x^{-M}`` without constant."""
        if self.M == 1.0:
            return self.B_plus * x - np.log(x)
        return self.B_plus * x - x ** (1.0 - self.M) / (1.0 - self.M)

    @property
    def offset(self) -> float:
        """``a_origin(x) - a_power(x)``, a constant."""
        if self.degenerate:
            return 0.0
        x0 = self.x0
        return self.B_minus * x0 - float(self._tail(x0))

    @property
    def _shift(self) -> float:
        return self.offset if self.gauge == "power" else 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return self.B_plus * x - self._shift
        x0 = self.x0
        out = self.B_minus * x
        right = x >= x0
        if np.any(right):
            xr = x[right] if x.ndim else x
            tail = self._tail(xr) - self._tail(x0) + self.B_minus * x0
            if x.ndim:
                out = out.copy()
                out[right] = tail
            else:
                out = tail
        return out - self._shift

    def field(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return np.full_like(x, self.B_plus)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = self.B_plus - np.abs(x) ** (-self.M)
        return np.where(x >= self.x0, tail, self.B_minus)

    def inverse(self, y: float) -> float:
        """Unique ``x`` with ``a(x) = y``; closed form on the constant branch,
        Brent's method on the power branch."""
        y = float(y)
        if self.degenerate:
            return (y + self._shift) / self.B_plus
        x0 = self.x0
        a0 = float(self(x0))
        if y <= a0:
            return (y + self._shift) / self.B_minus
        hi = max(2.0 * x0, x0 + (y - a0) / self.B_minus + 1.0)
        while float(self(hi)) < y:
            hi *= 2.0
        return brentq(lambda t: float(self(t)) - y, x0, hi, xtol=1e-14, rtol=1e-15)

    def level_window(self, lo, hi):
        return (self.inverse(lo), self.inverse(hi))


@dataclass(frozen=True)
class StepPrimitive(Primitive):
    """``a(x) = x`` for ``x ≥ 0`` and ``-b·x`` for ``x < 0`` (field 1 and -b).

    ``a`` is increasing on the right, decreasing on the left and ``a ≥ 0``,
    so ``(a(x) - k)²`` has two wells once ``k > 0``.
    """

    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, x, -self.b * x)

    def field(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 1.0, -self.b)

    def level_window(self, lo, hi):
        if hi < 0:
            return None
        return (-hi / self.b, hi)


@dataclass(frozen=True)
class LogPrimitive(Primitive):
    """``a(r) = log r`` on ``(0, ∞)`` (wire)."""

    domain = (0.0, math.inf)

    def __call__(self, r):
        return np.log(np.asarray(r, dtype=float))

    def field(self, r):
        return 1.0 / np.asarray(r, dtype=float)

    def level_window(self, lo, hi):
        return (math.exp(lo), math.exp(hi))


@dataclass(frozen=True)
class CallablePrimitive(Primitive):
    """User-supplied nondecreasing primitive on the full line."""

    func: Callable[[np.ndarray], np.ndarray]
    search: float = 1e6

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def field(self, x):
        x = np.asarray(x, dtype=float)
        step = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self(x + step) - self(x - step)) / (2 * step)

    def _solve(self, y: float) -> float:
        lo, hi = -1.0, 1.0
        while float(self(lo)) > y:
            lo *= 2.0
            if -lo > self.search:
                raise ValidationError("custom primitive does not reach the requested level")
        while float(self(hi)) < y:
            hi *= 2.0
            if hi > self.search:
                raise ValidationError("custom primitive does not reach the requested level")
        return brentq(lambda t: float(self(t)) - y, lo, hi, xtol=1e-13)

    def level_window(self, lo, hi):
        return (self._solve(lo), self._solve(hi))


# ---------------------------------------------------------------------------
# fiber models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberModel:
    """Descriptor of one fiber family.

    Use the named constructors (:meth:`half_plane`, :meth:`iwatsuka`,
    :meth:`step`, :meth:`wire`, :meth:`custom`) rather than the raw
    initialiser.
    """

    family: Family
    B_plus: Optional[float] = None
    B_minus: Optional[float] = None
    M: Optional[float] = None
    gauge: str = "origin"
    b: Optional[float] = None
    m: Optional[int] = None
    primitive_func: Optional[Callable] = field(default=None, compare=False, repr=False)
    name: Optional[str] = None

    def __post_init__(self) -> None:
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.IWATSUKA:
            for attr in ("B_plus", "B_minus", "M"):
                value = getattr(self, attr)
                if value is None or not math.isfinite(value):
                    raise ValidationError(f"iwatsuka model needs a finite {attr}")
                object.__setattr__(self, attr, float(value))
            if not 0 < self.B_minus <= self.B_plus:
                raise ValidationError("iwatsuka model needs 0 < B_minus <= B_plus")
            if not self.M > 0:
                raise ValidationError("iwatsuka model needs M > 0")
            if self.gauge not in GAUGES:
                raise ValidationError(f"gauge must be one of {GAUGES}")
        elif family is Family.MAGNETIC_STEP:
            if self.b is None or not 0 < self.b <= 1:
                raise ValidationError("magnetic step needs b in (0, 1]")
            object.__setattr__(self, "b", float(self.b))
        elif family is Family.WIRE:
            if self.m is None or int(self.m) != self.m:
                raise ValidationError("wire model needs an integer m")
            object.__setattr__(self, "m", int(self.m))
        elif family is Family.CUSTOM:
            if not callable(self.primitive_func):
                raise ValidationError("custom model needs a callable primitive")

    # -- constructors ------------------------------------------------------

    @classmethod
    def half_plane(cls, bc: str = "dirichlet") -> "FiberModel":
        bc = str(bc).lower()
        if bc not in ("dirichlet", "neumann"):
            raise ValidationError("half-plane boundary condition must be dirichlet or neumann")
        return cls(Family.HALF_PLANE_DIRICHLET if bc == "dirichlet" else Family.HALF_PLANE_NEUMANN)

    @classmethod
    def iwatsuka(cls, B_plus: float = 1.0, B_minus: float = 0.5, M: float = 2.0, gauge: str = "origin") -> "FiberModel":
        return cls(Family.IWATSUKA, B_plus=B_plus, B_minus=B_minus, M=M, gauge=gauge)

    @classmethod
    def step(cls, b: float) -> "FiberModel":
        return cls(Family.MAGNETIC_STEP, b=b)

    @classmethod
    def wire(cls, m: int = 0) -> "FiberModel":
        return cls(Family.WIRE, m=m)

    @classmethod
    def custom(cls, primitive: Callable, name: str = "custom") -> "FiberModel":
        """Full-line model with a caller-supplied nondecreasing primitive."""
        return cls(Family.CUSTOM, primitive_func=primitive, name=name)

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        """JSON-ready descriptor (custom models are not serialisable)."""
        f = self.family
        if f is Family.IWATSUKA:
            return {"family": f.value, "B_plus": self.B_plus, "B_minus": self.B_minus, "M": self.M, "gauge": self.gauge}
        if f is Family.MAGNETIC_STEP:
            return {"family": f.value, "b": self.b}
        if f is Family.WIRE:
            return {"family": f.value, "m": self.m}
        if f is Family.CUSTOM:
            raise ValidationError("custom models cannot be serialised")
        return {"family": f.value}

    @classmethod
    def from_dict(cls, data: dict) -> "FiberModel":
        data = dict(data)
        try:
            family = Family(data.pop("family"))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"unknown or missing model family: {exc}") from None
        allowed = {
            Family.IWATSUKA: {"B_plus", "B_minus", "M", "gauge"},
            Family.MAGNETIC_STEP: {"b"},
            Family.WIRE: {"m"},
        }.get(family, set())
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown fields for {family.value}: {sorted(unknown)}")
        if family is Family.CUSTOM:
            raise ValidationError("custom models cannot be deserialised")
        return cls(family, **data)

    # -- derived properties ------------------------------------------------

    @property
    def label(self) -> str:
        f = self.family
        if f is Family.IWATSUKA:
            return f"iwatsuka(B+={self.B_plus:g}, B-={self.B_minus:g}, M={self.M:g}, gauge={self.gauge})"
        if f is Family.MAGNETIC_STEP:
            return f"magnetic-step(b={self.b:g})"
        if f is Family.WIRE:
            return f"wire(m={self.m})"
        if f is Family.CUSTOM:
            return self.name or "custom"
        return f.value

    @property
    def is_wire(self) -> bool:
        return self.family is Family.WIRE

    @property
    def is_half_plane(self) -> bool:
        return self.family in (Family.HALF_PLANE_DIRICHLET, Family.HALF_PLANE_NEUMANN)

    @property
    def wall(self) -> Optional[str]:
        """Boundary condition at ``x = 0`` for half-plane models."""
        if self.family is Family.HALF_PLANE_DIRICHLET:
            return "dirichlet"
        if self.family is Family.HALF_PLANE_NEUMANN:
            return "neumann"
        return None

    @property
    def primitive(self) -> Primitive:
        return magnetic_primitive(self)

    def level_estimate(self, k: float, j_max: int) -> float:
        """Cheap upper-ish estimate of ``λ_{j_max}(k)`` used to size windows.

        The solver enlarges the window if the computed eigenvalue exceeds
        the estimate, so this only has to be in the right ballpark.
        """
        e = landau(j_max)
        f = self.family
        neg = min(k, 0.0) ** 2
        if f in (Family.HALF_PLANE_DIRICHLET, Family.HALF_PLANE_NEUMANN):
            return 2.0 * j_max + e + (2.0 * neg + math.sqrt(2.0) * (2 * e + 1) if k < 0 else 0.0)
        if f is Family.IWATSUKA:
            return e * self.B_plus
        if f is Family.MAGNETIC_STEP:
            return 1.5 * e + (2.0 * neg + math.sqrt(2.0) * e if k < 0 else 0.0)
        if f is Family.WIRE:
            h = math.exp(-k)
            return e * h if k >= 0 else e * (1.0 + 0.5 * k * k)
        return e * 2.0

    def natural_length(self, k: float) -> float:
        """Length scale on which eigenfunctions vary (sets the grid spacing).

        For the wire this is in the log-radius variable.
        """
        f = self.family
        if f is Family.IWATSUKA:
            return 1.0 / math.sqrt(self.B_plus)
        if f is Family.WIRE:
            return min(1.0, math.exp(-0.5 * k))
        if self.is_half_plane and k < 0:
            return min(1.0, (2.0 * abs(k)) ** (-1.0 / 3.0))
        return 1.0


def magnetic_primitive(model: FiberModel) -> Primitive:
    """Closed-form primitive ``a`` of the model's field.

    Examples
    --------
    >>> a = magnetic_primitive(FiberModel.step(0.5))
    >>> float(a(-2.0))
    1.0
    """
    f = model.family
    if f in (Family.HALF_PLANE_DIRICHLET, Family.HALF_PLANE_NEUMANN):
        return LinearPrimitive(1.0, 0.0)
    if f is Family.IWATSUKA:
        return IwatsukaPrimitive(model.B_plus, model.B_minus, model.M, model.gauge)
    if f is Family.MAGNETIC_STEP:
        return StepPrimitive(model.b)
    if f is Family.WIRE:
        return LogPrimitive()
    return CallablePrimitive(model.primitive_func)


# ---------------------------------------------------------------------------
# limit sets for the magnetic step
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitLevel:
    """One element of the step limit set with its provenance."""

    value: float
    tag: str  # "landau" (E_j) or "b-landau" (b·E_j)
    index: int


@dataclass(frozen=True)
class SplittingTriple:
    """``λ = E_ℓ = b·E_j`` with ``b = (2ℓ-1)/(2j-1)``."""

    value: float
    j: int
    ell: int


@dataclass(frozen=True)
class SplittingSet:
    b: float
    j_cap: int
    limits: tuple[LimitLevel, ...]
    splits: tuple[SplittingTriple, ...]

    @property
    def values(self) -> list[float]:
        return [lv.value for lv in self.limits]


def _is_split(b: float, j: int, ell: int) -> bool:
    return abs((2 * ell - 1) - b * (2 * j - 1)) <= RATIONAL_TOL


def splitting_set(b: float, j_cap: int) -> SplittingSet:
    """Limit set ``{E_j} ∪ {b·E_j}`` (``j ≤ j_cap``) and its coincidences.

    A coincidence ``E_ℓ = b·E_j`` is detected when
    ``|(2ℓ-1) - b(2j-1)| ≤ 1e-12``; ``ℓ = j`` is allowed so that ``b = 1``
    reports every level.

    Examples
    --------
    >>> [s.value for s in splitting_set(1/3, 5).splits]
    [1.0, 3.0]
    """
    if not 0 < b <= 1:
        raise ValidationError("b must lie in (0, 1]")
    _check_index(j_cap, "j_cap")
    levels = [LimitLevel(landau(j), "landau", j) for j in range(1, j_cap + 1)]
    levels += [LimitLevel(b * landau(j), "b-landau", j) for j in range(1, j_cap + 1)]
    levels.sort(key=lambda lv: (lv.value, lv.tag != "b-landau", lv.index))
    splits = []
    for j in range(1, j_cap + 1):
        for ell in range(1, j + 1):
            if _is_split(b, j, ell):
                splits.append(SplittingTriple(landau(ell), j, ell))
    splits.sort(key=lambda s: s.value)
    return SplittingSet(float(b), int(j_cap), tuple(levels), tuple(splits))


def step_band_index(b: float, value: float, tol: float = 1e-9) -> int:
    """Index ``p`` of the first band whose limit at +∞ equals ``value``.

    Limits are counted with multiplicity across both families.
    """
    count = 0
    j = 1
    while landau(j) * b < value - tol or landau(j) < value - tol:
        if landau(j) < value - tol:
            count += 1
        if b * landau(j) < value - tol:
            count += 1
        j += 1
    return count + 1


# ---------------------------------------------------------------------------
# reference constants
# ---------------------------------------------------------------------------


THETA0_COARSE = 0.59
DELTA_HYPERPLANE = -0.25


def sector_energy(theta: float) -> float:
    """Ground energy of the unit-parameter Robin Laplacian on a sector.

    ``-1/sin²(θ/2)`` for openings below π and ``-1`` above.
    """
    if not 0 < theta < 2 * math.pi:
        raise ValidationError("sector opening must lie in (0, 2π)")
    if theta < math.pi:
        return -1.0 / math.sin(0.5 * theta) ** 2
    return -1.0


def threshold_limits(model: FiberModel, j: int, sign: int) -> float:
    """Limit of ``λ_j(k)`` as ``k → sign·∞`` (``math.inf`` when it diverges)."""
    _check_index(j)
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    f = model.family
    if f in (Family.HALF_PLANE_DIRICHLET, Family.HALF_PLANE_NEUMANN):
        return landau(j) if sign > 0 else math.inf
    if f is Family.IWATSUKA:
        return landau(j) * (model.B_plus if sign > 0 else model.B_minus)
    if f is Family.MAGNETIC_STEP:
        if sign < 0:
            return math.inf
        cap = j + 1
        return splitting_set(model.b, cap).values[j - 1]
    if f is Family.WIRE:
        return 0.0 if sign > 0 else math.inf
    raise ValidationError("no reference limits for custom models")


@dataclass(frozen=True)
class ReferenceConstants:
    """Analytic constants used as oracles and targets."""

    theta0_coarse: float = THETA0_COARSE
    delta_hyperplane: float = DELTA_HYPERPLANE

    @staticmethod
    def landau(j: int) -> float:
        return landau(j)

    @staticmethod
    def threshold_limits(model: FiberModel, j: int, sign: int) -> float:
        return threshold_limits(model, j, sign)

    @staticmethod
    def sector_energy(theta: float) -> float:
        return sector_energy(theta)


REFERENCE = ReferenceConstants()


def reference(model: Optional[FiberModel], quantity: str, *args) -> float:
    """Look up a reference constant by name.

    ``quantity`` is one of ``landau`` (args: j), ``threshold_limit``
    (args: j, sign; needs a model), ``theta0_coarse``, ``sector_energy``
    (args: θ) and ``delta_hyperplane``.
    """
    if quantity == "landau":
        return landau(*args)
    if quantity == "threshold_limit":
        if model is None:
            raise ValidationError("threshold_limit needs a model")
        return threshold_limits(model, *args)
    if quantity == "theta0_coarse":
        return THETA0_COARSE
    if quantity == "sector_energy":
        return sector_energy(*args)
    if quantity == "delta_hyperplane":
        return DELTA_HYPERPLANE
    raise ValidationError(f"unknown reference quantity {quantity!r}")


# ---------------------------------------------------------------------------
# asymptotic predictors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticPredictor:
    """Closed-form large-``k`` law for one band.

    Attributes
    ----------
    theorem_id : str
        Label of the asymptotic law.
    predict : callable
        ``k ↦`` predicted gap ``λ_p(k) - limit`` (or, for ``form ==
        "wire-exponential"``, the predicted eigenvalue itself; its limit is
        0 so the two coincide).
    validity : (float, float)
        k-range over which the law is expected to be accurate.
    form : str
        ``exponential``, ``power`` or ``wire-exponential``.
    limit : float
        Threshold approached by the band.
    band : int
        Index ``p`` of the band (1-based) in the sorted slice.
    fit_mode : bool
        True when the prefactor is unknown and only the k-exponent is
        meaningful.
    exponent : float, optional
        Power of ``k`` in front of the Gaussian factor (fit mode).
    """

    theorem_id: str
    predict: Callable[[np.ndarray], np.ndarray]
    validity: tuple[float, float]
    form: str
    limit: float
    band: int
    fit_mode: bool = False
    exponent: Optional[float] = None
    sign: int = -1


def _as_array(k):
    return np.asarray(k, dtype=float)


def predictor(model: FiberModel, j: int, ell: Optional[int] = None, kind: str = "landau"):
    """Asymptotic law for band ``j`` of ``model``.

    Parameters
    ----------
    model : FiberModel
    j : int
        Level index.  For the half-plane, Iwatsuka and wire models this is
        the band index.  For the magnetic step it indexes the limit level:
        ``E_j`` when ``kind == "landau"`` or ``b·E_j`` when
        ``kind == "b-landau"``; the band index ``p`` is derived.
    ell : int, optional
        Magnetic step only: request the splitting pair for
        ``b = (2ℓ-1)/(2j-1)``, i.e. the level ``E_ℓ = b·E_j``.
    kind : str
        Magnetic step non-splitting case selector.

    Returns
    -------
    AsymptoticPredictor or tuple of two
        The splitting case returns ``(lower, upper)`` predictors for bands
        ``p`` and ``p + 1``.
    """
    _check_index(j)
    f = model.family
    if f in (Family.HALF_PLANE_DIRICHLET, Family.HALF_PLANE_NEUMANN):
        sign = 1 if f is Family.HALF_PLANE_DIRICHLET else -1
        p = 2 * j - 1

        def shape(k, p=p, sign=sign):
            k = _as_array(k)
            return sign * k**p * np.exp(-k * k)

        return AsymptoticPredictor(
            theorem_id=f"half-plane-{model.wall}-gaussian",
            predict=shape,
            validity=(2.0, 4.0),
            form="exponential",
            limit=landau(j),
            band=j,
            fit_mode=True,
            exponent=float(p),
            sign=sign,
        )
    if f is Family.IWATSUKA:
        if model.B_minus == model.B_plus:
            raise ValidationError("constant field has flat bands: no asymptotic law")
        prim = magnetic_primitive(model)
        # the law is stated for the primitive without additive constant
        shift = prim.offset if model.gauge == "origin" else 0.0
        e, bp, M = landau(j), model.B_plus, model.M

        def power(k, e=e, bp=bp, M=M, shift=shift):
            k = _as_array(k)
            return -e * bp**M / (k - shift) ** M

        return AsymptoticPredictor(
            theorem_id="iwatsuka-power",
            predict=power,
            validity=(20.0, math.inf),
            form="power",
            limit=e * bp,
            band=j,
            exponent=-M,
        )
    if f is Family.MAGNETIC_STEP:
        return _step_predictor(model, j, ell, kind)
    if f is Family.WIRE:
        m = model.m
        c2 = m * m - 0.25 - j * (j - 1) / 2.0
        e = landau(j)

        def wire(k, e=e, c2=c2):
            k = _as_array(k)
            return e * np.exp(-k) - c2 * np.exp(-2.0 * k)

        return AsymptoticPredictor(
            theorem_id="wire-exponential",
            predict=wire,
            validity=(4.0, math.inf),
            form="wire-exponential",
            limit=0.0,
            band=j,
            exponent=None,
            sign=1,
        )
    raise ValidationError("custom models carry no asymptotic predictor")


def _step_predictor(model: FiberModel, j: int, ell: Optional[int], kind: str):
    b = model.b
    sqrt_pi = math.sqrt(math.pi)
    if ell is not None:
        _check_index(ell, "ell")
        if not _is_split(b, j, ell):
            raise ValidationError(
                f"b={b!r} is not (2ℓ-1)/(2j-1) for j={j}, ℓ={ell}: no splitting"
            )
        # Level λ = E_ℓ = b·E_j.  The lower band carries the Landau index ℓ,
        # the upper one the b-Landau index j.
        lam = landau(ell)
        p = step_band_index(b, lam)
        c_minus = -(2.0 ** (ell - 1.5)) * (1 + b) / (math.factorial(ell - 1) * sqrt_pi)
        c_plus = 2.0 ** (j + 1.5) * b ** (-j + 1.5) / (math.factorial(j - 1) * (1 + b) * sqrt_pi)

        def eps_minus(k, c=c_minus, n=2 * ell - 3):
            k = _as_array(k)
            return c * k**n * np.exp(-k * k)

        def eps_plus(k, c=c_plus, n=2 * j + 1, b=b):
            k = _as_array(k)
            return c * k**n * np.exp(-k * k / b)

        lower = AsymptoticPredictor("step-splitting-minus", eps_minus, (2.0, 4.0), "exponential", lam, p, sign=-1)
        upper = AsymptoticPredictor("step-splitting-plus", eps_plus, (2.0, 4.0), "exponential", lam, p + 1, sign=1)
        return lower, upper
    if kind not in ("landau", "b-landau"):
        raise ValidationError("kind must be 'landau' or 'b-landau'")
    lam = landau(j) if kind == "landau" else b * landau(j)
    # refuse levels that belong to the splitting set
    for other in range(1, 4 * j + 4):
        if kind == "landau" and _is_split(b, other, j):
            raise ValidationError(f"E_{j} = {lam:g} is a splitting level for b={b!r}; pass ell")
        if kind == "b-landau" and _is_split(b, j, other):
            raise ValidationError(f"b·E_{j} = {lam:g} is a splitting level for b={b!r}; pass ell")
    p = step_band_index(b, lam)
    base = 2.0 ** (j - 2) * (1 + b) / (math.factorial(j - 1) * sqrt_pi)
    if kind == "landau":

        def eps(k, c=base, n=2 * j - 3):
            k = _as_array(k)
            return -c * k**n * np.exp(-k * k)

    else:

        def eps(k, c=base * b ** (1.5 - j), n=2 * j - 3, b=b):
            k = _as_array(k)
            return -c * k**n * np.exp(-k * k / b)

    return AsymptoticPredictor(f"step-{kind}", eps, (2.0, 4.0), "exponential", lam, p, sign=-1)


def as_fraction(b: float, max_denominator: int = 1000) -> Fraction:
    """Best rational approximation of ``b`` (used for reporting)."""
    return Fraction(b).limit_denominator(max_denominator)
