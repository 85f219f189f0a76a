"""Command-line interface.

Every command takes its parameters from an optional JSON config file
(``--config``) and from flags; flags override file values and unknown
config fields are rejected.  The whole configuration is validated before
any solve, and output files are written only once all computations have
succeeded.

Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.

Output formats
--------------
* band tables: CSV with columns ``k, j, lambda, velocity, err``, and JSON;
* localisation profiles: CSV with columns ``x, density``;
* convergence studies: CSV with columns ``param, value, estimate``;
* reports: JSON (sorted keys, fixed indentation);
* figures: SVG, 800×600, without timestamps.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from fiberband import __version__, plotting, registry
from fiberband.bands import (
    BandTable,
    SolverSettings,
    band_scan,
    compare_asymptotics,
    detect_thresholds,
    theta0,
)
from fiberband.effective import (
    PerturbationField,
    count_negative,
    effective_halfplane,
    ellipse_profile,
    harmonic_levels,
    phase_space_count,
    robin_effective_boundary,
    robin_sector_numeric,
)
from fiberband.errors import FiberbandError, NumericalError, ValidationError
from fiberband.mesh import TruncationPolicy
from fiberband.models import Family, FiberModel, predictor
from fiberband.states import current, localization_profile, make_packet, velocity_range

COMMANDS = (
    "band-scan",
    "theta0",
    "asymptotics",
    "thresholds",
    "current",
    "effective",
    "robin",
    "figures",
    "cache-purge",
)

MODEL_ALIASES = {
    "dirichlet": "half-plane-dirichlet",
    "neumann": "half-plane-neumann",
    "half-plane-dirichlet": "half-plane-dirichlet",
    "half-plane-neumann": "half-plane-neumann",
    "iwatsuka": "iwatsuka",
    "step": "magnetic-step",
    "magnetic-step": "magnetic-step",
    "wire": "wire",
}

# parameters filled in when a model descriptor leaves them out
MODEL_DEFAULTS = {
    "iwatsuka": {"B_plus": 1.0, "B_minus": 0.5, "M": 2.0, "gauge": "origin"},
    "wire": {"m": 0},
}

# default k-ranges for asymptotic comparisons, per family
ASYMPTOTIC_RANGES = {
    "half-plane-dirichlet": (2.5, 3.5),
    "half-plane-neumann": (2.5, 3.5),
    "iwatsuka": (20.0, 60.0),
    "magnetic-step": (2.6, 3.2),
    "wire": (4.0, 10.0),
}

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RANGE = re.compile(rf"^\s*({_NUMBER})\s*\.\.\s*({_NUMBER})\s*$")
_ANGLE = re.compile(rf"^\s*({_NUMBER})?\s*\*?\s*pi\s*(?:/\s*({_NUMBER}))?\s*$")


def parse_range(text: Union[str, Sequence[float]], name: str = "range") -> tuple[float, float]:
    """``"a..b"`` (or a two-element list) → ``(a, b)`` with ``a < b``."""
    if isinstance(text, str):
        match = _RANGE.match(text)
        if not match:
            raise ValidationError(f"malformed {name} {text!r}: expected 'a..b'")
        lo, hi = float(match.group(1)), float(match.group(2))
    else:
        try:
            lo, hi = (float(v) for v in text)
        except (TypeError, ValueError):
            raise ValidationError(f"malformed {name} {text!r}: expected two numbers") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValidationError(f"malformed {name}: need finite a < b, got {lo!r}..{hi!r}")
    return lo, hi


def parse_int_set(text: Union[str, int, Sequence[int]], name: str) -> list[int]:
    """``"a..b"``, ``"a,b,c"``, a single integer or a list → sorted integers."""
    if isinstance(text, bool):
        raise ValidationError(f"{name} must be integers")
    if isinstance(text, int):
        return [text]
    if isinstance(text, str):
        text = text.strip()
        if ".." in text:
            lo, hi = parse_range(text, name)
            if lo != int(lo) or hi != int(hi):
                raise ValidationError(f"{name} range must have integer ends")
            return list(range(int(lo), int(hi) + 1))
        try:
            return sorted(int(v) for v in text.split(","))
        except ValueError:
            raise ValidationError(f"malformed {name} {text!r}") from None
    try:
        values = [int(v) for v in text]
    except (TypeError, ValueError):
        raise ValidationError(f"malformed {name} {text!r}") from None
    if any(v != w for v, w in zip(values, text)):
        raise ValidationError(f"{name} must be integers")
    return sorted(values)


def parse_floats(text: Union[str, float, Sequence[float]], name: str) -> list[float]:
    """Comma-separated numbers, a number, or a list of numbers."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return [float(text)]
    if isinstance(text, str):
        parts = [p for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    try:
        return [float(p) for p in parts]
    except (TypeError, ValueError):
        raise ValidationError(f"malformed {name} {text!r}") from None


def parse_angle(text: Union[str, float]) -> float:
    """An angle given as a number or as ``pi``, ``pi/3``, ``2pi/3``, ``2*pi/3``."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    match = _ANGLE.match(str(text))
    if match:
        num = float(match.group(1)) if match.group(1) else 1.0
        den = float(match.group(2)) if match.group(2) else 1.0
        if den == 0:
            raise ValidationError(f"malformed angle {text!r}")
        return num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"malformed angle {text!r}") from None


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Validated parameters of one command invocation.

    Field names double as the keys of the JSON config file.  Values left at
    ``None`` take command-specific defaults.
    """

    command: str
    model: Optional[dict] = None
    k: Optional[tuple[float, float]] = None
    nk: Optional[int] = None
    j_max: Optional[int] = None
    j: Optional[list[int]] = None
    m: Optional[list[int]] = None
    ell: Optional[int] = None
    kind: str = "landau"
    policy: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    out_dir: str = "."
    prefix: Optional[str] = None
    formats: list[str] = field(default_factory=lambda: ["csv", "json", "svg"])
    log_scale: bool = False
    cache: bool = True
    cache_dir: Optional[str] = None
    threads: Optional[int] = None
    tolerance: Optional[float] = None
    window: Optional[tuple[float, float]] = None
    shape: str = "flat"
    x_cut: float = 0.0
    perturbation: Optional[dict] = None
    lam: Optional[list[float]] = None
    y_max: float = 20.0
    n_y: int = 2000
    mode: str = "sector"
    theta: Optional[list[float]] = None
    sizes: Optional[list[list[int]]] = None
    ellipse: Optional[tuple[float, float]] = None
    alpha: Optional[list[float]] = None
    count: int = 3

    # -- construction --------------------------------------------------------

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_sources(cls, command: str, file_values: dict, flag_values: dict) -> "RunConfig":
        """Merge file and flag values (flags win) and validate."""
        unknown = set(file_values) - cls.field_names()
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        if "command" in file_values and file_values["command"] != command:
            raise ValidationError(f"config is for command {file_values['command']!r}, not {command!r}")
        merged = {k: v for k, v in file_values.items() if k != "command"}
        for key, value in flag_values.items():
            if key in ("policy", "settings", "model") and isinstance(value, dict):
                base = dict(merged.get(key) or {})
                if key == "model" and "family" in value and base.get("family") not in (None, value["family"]):
                    base = {}
                base.update(value)
                merged[key] = base
            else:
                merged[key] = value
        cfg = cls(command=command)
        for key, value in merged.items():
            setattr(cfg, key, value)
        cfg.normalise()
        return cfg

    def normalise(self) -> None:
        """Parse loosely typed values and check every precondition."""
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.k is not None:
            self.k = parse_range(self.k, "k-range")
        if self.window is not None:
            self.window = parse_range(self.window, "energy window")
        if self.j is not None:
            self.j = parse_int_set(self.j, "j")
            if not self.j or min(self.j) < 1:
                raise ValidationError("band indices must be at least 1")
        if self.m is not None:
            self.m = parse_int_set(self.m, "m")
            if not self.m:
                raise ValidationError("m must not be empty")
        for name in ("nk", "j_max", "ell", "threads", "n_y", "count"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
                raise ValidationError(f"{name} must be a positive integer")
        if self.nk is not None and self.nk < 2:
            raise ValidationError("nk must be at least 2")
        if self.kind not in ("landau", "b-landau"):
            raise ValidationError("kind must be 'landau' or 'b-landau'")
        if self.shape not in ("flat", "bump"):
            raise ValidationError("shape must be 'flat' or 'bump'")
        if self.mode not in ("sector", "boundary"):
            raise ValidationError("mode must be 'sector' or 'boundary'")
        if not isinstance(self.formats, list) or not set(self.formats) <= {"csv", "json", "svg"}:
            raise ValidationError("formats must be a subset of csv, json, svg")
        for name in ("x_cut", "y_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number")
        if self.tolerance is not None and not (isinstance(self.tolerance, (int, float)) and self.tolerance > 0):
            raise ValidationError("tolerance must be positive")
        if self.lam is not None:
            self.lam = parse_floats(self.lam, "lam")
            if any(not v > 0 for v in self.lam):
                raise ValidationError("phase-space levels must be positive")
        if self.theta is not None:
            values = self.theta if isinstance(self.theta, list) else str(self.theta).split(",")
            self.theta = [parse_angle(v) for v in values]
        if self.alpha is not None:
            self.alpha = parse_floats(self.alpha, "alpha")
            if any(not a > 0 for a in self.alpha):
                raise ValidationError("alpha values must be positive")
        if self.ellipse is not None:
            axes = parse_floats(self.ellipse, "ellipse")
            if len(axes) != 2 or min(axes) <= 0:
                raise ValidationError("ellipse needs two positive semi-axes")
            self.ellipse = (axes[0], axes[1])
        if self.sizes is not None:
            try:
                self.sizes = [[int(a), int(b)] for a, b in self.sizes]
            except (TypeError, ValueError):
                raise ValidationError("sizes must be a list of [n_r, n_phi] pairs") from None
        if not isinstance(self.policy, dict) or not isinstance(self.settings, dict):
            raise ValidationError("policy and settings must be objects")
        # build the numerical objects once to validate their fields
        self.truncation_policy()
        self.solver_settings()
        if self.model is not None:
            self._model_defaults()
            self.fiber_model()
        self._check_command()

    def _model_defaults(self) -> None:
        if not isinstance(self.model, dict):
            raise ValidationError("model must be an object with a 'family' field")
        family = self.model.get("family")
        defaults = MODEL_DEFAULTS.get(family, {})
        if family == "wire" and self.m:
            defaults = {"m": self.m[0]}
        self.model = {**defaults, **self.model}

    def _check_command(self) -> None:
        needs_model = {"band-scan", "asymptotics", "thresholds", "current", "figures"}
        if self.command in needs_model and self.model is None:
            raise ValidationError(f"{self.command} needs a model (--model)")
        if self.command in ("band-scan", "thresholds", "current") and self.k is None:
            raise ValidationError(f"{self.command} needs a k-range (--k a..b)")
        if self.command == "current" and self.window is None:
            raise ValidationError("current needs an energy window (--window lo..hi)")
        if self.command == "robin" and self.mode == "boundary" and self.alpha is None:
            raise ValidationError("robin boundary mode needs --alpha")
        if self.command == "figures" and self.model.get("family") == "wire" and self.k is None:
            self.k = (-2.0, 6.0)

    # -- derived objects -----------------------------------------------------

    def fiber_model(self, m: Optional[int] = None) -> FiberModel:
        if not isinstance(self.model, dict):
            raise ValidationError("model must be an object with a 'family' field")
        data = dict(self.model)
        if m is not None:
            data["m"] = m
        model = FiberModel.from_dict(data)
        if model.family is Family.CUSTOM:
            raise ValidationError("custom models are not available from the command line")
        return model

    def truncation_policy(self) -> TruncationPolicy:
        return TruncationPolicy.from_dict(self.policy)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings.from_dict(self.settings)

    def k_nodes(self, default_nk: int = 81) -> np.ndarray:
        lo, hi = self.k
        return np.linspace(lo, hi, self.nk or default_nk)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


class Outputs:
    """Files produced by a command, written together at the end."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.items: list[tuple[str, Union[str, Callable[[Path], Any]]]] = []

    def _name(self, stem: str, ext: str) -> str:
        prefix = self.cfg.prefix
        return f"{prefix}_{stem}.{ext}" if prefix else f"{stem}.{ext}"

    def text(self, stem: str, ext: str, content: str) -> None:
        if ext in self.cfg.formats:
            self.items.append((self._name(stem, ext), content))

    def json(self, stem: str, data: Any) -> None:
        self.text(stem, "json", dumps(data))

    def svg(self, stem: str, draw: Callable[[Path], Any]) -> None:
        if "svg" in self.cfg.formats:
            self.items.append((self._name(stem, "svg"), draw))

    def write(self) -> list[Path]:
        out_dir = Path(self.cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, item in self.items:
            path = out_dir / name
            if callable(item):
                item(path)
            else:
                path.write_text(item)
            paths.append(path)
        return paths


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(data: Any) -> str:
    """Deterministic JSON (sorted keys, non-finite numbers as null)."""
    return json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"


def convergence_csv(rows: Sequence[tuple[str, float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "value", "estimate"])
    for param, value, estimate in rows:
        writer.writerow([param, repr(float(value)), repr(float(estimate))])
    return buf.getvalue()


def get_table(cfg: RunConfig, model: FiberModel, k_nodes: np.ndarray, j_max: int) -> BandTable:
    """Band table from the cache when enabled, else by a fresh scan."""
    policy, settings = cfg.truncation_policy(), cfg.solver_settings()
    key = registry.CacheKey.for_scan(model, k_nodes, j_max, policy, settings)
    if cfg.cache:
        hit = registry.load(key, cfg.cache_dir)
        if hit is not None:
            return hit
    table = band_scan(model, k_nodes, j_max, policy, settings, cfg.threads)
    if cfg.cache:
        registry.store(table, cfg.cache_dir)
    return table


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_band_scan(cfg: RunConfig, out: Outputs) -> dict:
    model = cfg.fiber_model()
    table = get_table(cfg, model, cfg.k_nodes(), cfg.j_max or 4)
    out.text("bands", "csv", table.to_csv())
    out.text("bands", "json", table.to_json())
    out.svg("bands", lambda p: plotting.plot_table(table, p))
    return {"model": model.to_dict(), "n_k": int(table.k_nodes.size), "j_max": table.j_max}


def cmd_theta0(cfg: RunConfig, out: Outputs) -> dict:
    res = theta0(tolerance=cfg.tolerance or 1e-6, settings=cfg.solver_settings())
    report = res.to_dict()
    out.json("theta0", report)
    return report


def cmd_asymptotics(cfg: RunConfig, out: Outputs) -> dict:
    model = cfg.fiber_model()
    family = model.family.value
    j = (cfg.j or [1])[0]
    preds = predictor(model, j, cfg.ell, cfg.kind)
    preds = preds if isinstance(preds, tuple) else (preds,)
    k_range = cfg.k or ASYMPTOTIC_RANGES[family]
    k_nodes = np.linspace(k_range[0], k_range[1], cfg.nk or 41)
    j_max = max(p.band for p in preds)
    table = get_table(cfg, model, k_nodes, j_max)
    reports = [compare_asymptotics(table, p, cfg.tolerance, k_range) for p in preds]
    data = {"model": model.to_dict(), "k_range": list(k_range), "reports": [r.to_dict() for r in reports]}
    out.json("asymptotics", data)
    if cfg.log_scale:
        curves = [(f"|gap| band {r.band}", np.abs(r.gap)) for r in reports]
        overlays = [(f"|predicted| band {r.band}", np.abs(r.predicted)) for r in reports]
        ks = reports[0].k
        if all(np.array_equal(r.k, ks) for r in reports):
            out.svg("asymptotics", lambda p: plotting.plot_bands(ks, curves, p, title=model.label, ylabel="gap", log=True, overlays=overlays))
    else:
        r0 = reports[0]
        band = None if r0.fitted_exponent is not None else r0.tolerance
        out.svg("asymptotics", lambda p: plotting.plot_ratio(r0.k, r0.ratio, p, title=model.label, band=band))
    return data


def cmd_thresholds(cfg: RunConfig, out: Outputs) -> dict:
    model = cfg.fiber_model()
    table = get_table(cfg, model, cfg.k_nodes(), cfg.j_max or 4)
    report = detect_thresholds(table)
    data = report.to_dict()
    data["thresholds"] = report.thresholds()
    out.json("thresholds", data)
    curves = [(f"j={j}", table.values[j - 1]) for j in range(1, table.j_max + 1)]
    levels = report.thresholds()
    out.svg("thresholds", lambda p: plotting.plot_bands(table.k_nodes, curves, p, title=model.label, hlines=levels))
    return data


def cmd_current(cfg: RunConfig, out: Outputs) -> dict:
    model = cfg.fiber_model()
    j = (cfg.j or [1])[0]
    table = get_table(cfg, model, cfg.k_nodes(201), max(cfg.j_max or j, j))
    packet = make_packet(table, j, cfg.window, cfg.shape)
    value = current(packet, table)
    vmin, vmax = velocity_range(packet, table)
    profile = localization_profile(packet, model, cfg.x_cut, cfg.truncation_policy(), cfg.solver_settings())
    data = {
        "model": model.to_dict(),
        "j": j,
        "window": list(cfg.window),
        "current": value,
        "velocity_min": vmin,
        "velocity_max": vmax,
        "sandwich": bool(vmin <= value <= vmax),
        "support_nodes": int(np.count_nonzero(packet.support)),
        "x_cut": cfg.x_cut,
        "mass_below": profile.mass_below,
        "total_mass": profile.total_mass,
    }
    out.json("current", data)
    out.text("localization", "csv", profile.to_csv())
    out.svg("localization", lambda p: plotting.plot_profile(profile, p, title=f"{model.label}, band {j}"))
    return data


def perturbation_from(spec: Optional[dict]) -> PerturbationField:
    """Build a perturbation from its descriptor.

    ``{"kind": "gaussian", "amplitude": A, "width": w, "x0": x0, "y0": y0}``
    or ``{"kind": "power", "amplitude": A, "decay": m}`` for
    ``A·⟨(x, y)⟩^{-m}``.
    """
    spec = dict(spec or {"kind": "gaussian"})
    kind = spec.pop("kind", "gaussian")
    allowed = {"gaussian": {"amplitude", "width", "x0", "y0"}, "power": {"amplitude", "decay"}}
    if kind not in allowed:
        raise ValidationError("perturbation kind must be 'gaussian' or 'power'")
    unknown = set(spec) - allowed[kind]
    if unknown:
        raise ValidationError(f"unknown perturbation fields: {sorted(unknown)}")
    try:
        values = {k: float(v) for k, v in spec.items()}
    except (TypeError, ValueError):
        raise ValidationError("perturbation parameters must be numbers") from None
    amp = values.get("amplitude", 1.0)
    if not amp >= 0:
        raise ValidationError("perturbation amplitude must be nonnegative")
    if kind == "gaussian":
        width, x0, y0 = values.get("width", 1.0), values.get("x0", 0.0), values.get("y0", 0.0)
        if not width > 0:
            raise ValidationError("perturbation width must be positive")
        return PerturbationField(
            lambda x, y: amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / width**2),
            decay=math.inf,
        )
    decay = values.get("decay", 2.0)
    if not decay > 0:
        raise ValidationError("perturbation decay must be positive")
    return PerturbationField(lambda x, y: amp * (1.0 + x * x + y * y) ** (-0.5 * decay), decay=decay)


def cmd_effective(cfg: RunConfig, out: Outputs) -> dict:
    V = perturbation_from(cfg.perturbation)
    settings = cfg.solver_settings()
    t0 = theta0(settings=settings)
    op = effective_halfplane(V, y_max=cfg.y_max, n=cfg.n_y, theta=t0, settings=settings)
    n_neg = count_negative(op)
    eigs = op.eigenvalues(min(max(n_neg, 1), op.n // 4)) if n_neg else np.array([])
    # semiclassical count of the 1D effective operator: (1/π)∫ √(v/μ)₊ dy
    v = np.maximum(-op.potential, 0.0)
    weyl = float(np.sum(np.sqrt(v / op.mass)) * op.spacing / math.pi)
    data = {
        "perturbation": cfg.perturbation or {"kind": "gaussian"},
        "k0": t0.k0,
        "theta0": t0.theta0,
        "mu": op.mass,
        "negative_count": n_neg,
        "negative_eigenvalues": eigs,
        "weyl_count": weyl,
        "count_ratio": n_neg / weyl if weyl > 0 else None,
        "phase_space": [{"lambda": lam, "N0": phase_space_count(V, lam)} for lam in (cfg.lam or [])],
    }
    out.json("effective", data)
    return data


def cmd_robin(cfg: RunConfig, out: Outputs) -> dict:
    if cfg.mode == "boundary":
        return _robin_boundary(cfg, out)
    thetas = cfg.theta or [math.pi / 3, math.pi / 2]
    sizes = cfg.sizes or [[100, 20], [200, 40], [400, 80]]
    results = []
    rows = []
    for th in thetas:
        study = [robin_sector_numeric(th, n_r=nr, n_phi=nphi) for nr, nphi in sizes]
        results.append([r.to_dict() for r in study])
        for r in study:
            rows.append((f"theta={th:.6g};R={r.R:.6g};n_r={r.n_r};n_phi={r.n_phi}", r.energy, r.target))
    data = {"mode": "sector", "theta": thetas, "studies": results}
    out.json("robin", data)
    out.text("robin_convergence", "csv", convergence_csv(rows))
    out.svg("robin_convergence", lambda p: plotting.plot_convergence(rows, p, title="Robin sector ground energy"))
    return data


def _robin_boundary(cfg: RunConfig, out: Outputs) -> dict:
    a, b = cfg.ellipse or (2.0, 1.0)
    profile = ellipse_profile(a, b)
    gmax, hess = profile.hessian_at_max()
    e1 = harmonic_levels([hess], 1)[0] if hess > 0 else math.nan
    entries = []
    rows = []
    for alpha in cfg.alpha:
        _, mus = robin_effective_boundary(profile, alpha, cfg.count)
        ratio = (mus[0] + alpha * gmax) / (e1 * math.sqrt(alpha))
        entries.append({"alpha": alpha, "mu": mus, "mu1_over_alpha": mus[0] / alpha, "harmonic_ratio": ratio})
        rows.append((f"alpha={alpha:g}", ratio, 1.0))
    data = {"mode": "boundary", "ellipse": [a, b], "gamma_max": gmax, "hessian": hess, "e1": e1, "results": entries}
    out.json("robin_boundary", data)
    out.text("robin_boundary_convergence", "csv", convergence_csv(rows))
    return data


def cmd_figures(cfg: RunConfig, out: Outputs) -> dict:
    model = cfg.fiber_model()
    js = cfg.j or [1, 2, 3, 4]
    j_max = max(js)
    if model.is_wire:
        ms = cfg.m or [0, 1, 2]
        k_nodes = cfg.k_nodes(161)
        tables = {}
        for m in ms:
            tables[m] = get_table(cfg, cfg.fiber_model(m), k_nodes, j_max)
            out.text(f"wire_m{m}", "csv", tables[m].to_csv())
        chosen = {m: _select_bands(t, js) for m, t in tables.items()}
        out.svg("wire_bands", lambda p: plotting.plot_wire_bands(chosen, p))
        out.svg("wire_zoom", lambda p: plotting.plot_wire_zoom(chosen, p, levels=js))
        return {"model": "wire", "m": ms, "j": js, "curves": len(ms) * len(js)}
    if cfg.k is None:
        raise ValidationError("figures needs a k-range for non-wire models")
    table = _select_bands(get_table(cfg, model, cfg.k_nodes(161), j_max), js)
    out.text("figure_bands", "csv", table.to_csv())
    out.svg("figure_bands", lambda p: plotting.plot_table(table, p))
    return {"model": model.to_dict(), "j": js, "curves": len(js)}


def _select_bands(table: BandTable, js: Sequence[int]) -> BandTable:
    if list(js) == list(range(1, table.j_max + 1)):
        return table
    idx = [j - 1 for j in js]
    return dataclasses.replace(
        table, values=table.values[idx], velocity=table.velocity[idx], error=table.error[idx]
    )


def cmd_cache_purge(cfg: RunConfig, out: Outputs) -> dict:
    removed = registry.purge(cfg.cache_dir)
    return {"removed": removed, "directory": str(registry.cache_dir(cfg.cache_dir))}


HANDLERS = {
    "band-scan": cmd_band_scan,
    "theta0": cmd_theta0,
    "asymptotics": cmd_asymptotics,
    "thresholds": cmd_thresholds,
    "current": cmd_current,
    "effective": cmd_effective,
    "robin": cmd_robin,
    "figures": cmd_figures,
    "cache-purge": cmd_cache_purge,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

# options whose values may legitimately start with '-'
_VALUE_OPTIONS = ("--k", "--window", "--m", "--j", "--x-cut", "--lam", "--theta", "--energy-cap")


def _preprocess(argv: Sequence[str]) -> list[str]:
    """Glue ``--k -2..6`` into ``--k=-2..6`` so argparse keeps the value."""
    out = []
    i = 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_OPTIONS and i + 1 < len(argv) and re.match(r"^-[\d.]", argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 2, like every validation failure
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fiberband", description="Band functions of fibered magnetic and Robin models.")
    parser.add_argument("--version", action="version", version=f"fiberband {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--out-dir", dest="out_dir", help="output directory (default: .)")
    g.add_argument("--prefix", help="prefix for output file names")
    g.add_argument("--format", dest="formats", help="comma-separated subset of csv,json,svg")
    g.add_argument("--no-cache", dest="cache", action="store_const", const=False, help="bypass the band-table cache")
    g.add_argument("--cache-dir", dest="cache_dir", help="cache directory (default: $FIBERBAND_CACHE or ./.fiberband-cache)")
    g.add_argument("--threads", type=int, help="worker threads for band scans (default: $FIBERBAND_THREADS or 1)")

    modelargs = argparse.ArgumentParser(add_help=False)
    g = modelargs.add_argument_group("model")
    g.add_argument("--model", choices=sorted(MODEL_ALIASES), help="model family")
    g.add_argument("--B-plus", dest="B_plus", type=float, help="Iwatsuka field limit at +infinity")
    g.add_argument("--B-minus", dest="B_minus", type=float, help="Iwatsuka field limit at -infinity")
    g.add_argument("--M", dest="M", type=float, help="Iwatsuka decay exponent")
    g.add_argument("--gauge", choices=["origin", "power"], help="Iwatsuka gauge")
    g.add_argument("--b", type=float, help="magnetic step ratio b")
    g.add_argument("--m", help="wire angular momentum: integer, list or range a..b")
    g.add_argument("--k", help="k-range a..b")
    g.add_argument("--nk", type=int, help="number of k-nodes")
    g.add_argument("--j-max", dest="j_max", type=int, help="number of bands")
    g.add_argument("--j", help="band index (or range a..b for figures)")
    g.add_argument("--margin", type=float, help="truncation margin")
    g.add_argument("--energy-cap", dest="energy_cap", type=float, help="fixed truncation energy cap")
    g.add_argument("--cap-factor", dest="cap_factor", type=float, help="adaptive cap factor")
    g.add_argument("--rho-min", dest="wire_rho_min", type=float, help="wire: floor of the rho window (default 1e-3)")
    g.add_argument("--ppl", dest="points_per_length", type=int, help="grid points per natural length")
    g.add_argument("--levels", type=int, choices=[2, 3], help="Richardson levels")
    g.add_argument("--tol", type=float, help="bisection tolerance")

    sub.add_parser("band-scan", parents=[common, modelargs], help="scan band functions over a k-range")
    p = sub.add_parser("theta0", parents=[common], help="minimum of the first Neumann half-plane band")
    p.add_argument("--tolerance", type=float, help="minimiser tolerance (default 1e-6)")
    p = sub.add_parser("asymptotics", parents=[common, modelargs], help="compare bands with asymptotic laws")
    p.add_argument("--ell", type=int, help="magnetic step splitting partner index")
    p.add_argument("--kind", choices=["landau", "b-landau"], help="magnetic step limit family")
    p.add_argument("--tolerance", type=float, help="ratio (or exponent) tolerance")
    p.add_argument("--log", dest="log_scale", action="store_const", const=True, help="plot |gap| on a log scale")
    sub.add_parser("thresholds", parents=[common, modelargs], help="critical values and band limits")
    p = sub.add_parser("current", parents=[common, modelargs], help="current and localisation of a packet")
    p.add_argument("--window", help="energy window lo..hi")
    p.add_argument("--shape", choices=["flat", "bump"], help="packet profile")
    p.add_argument("--x-cut", dest="x_cut", type=float, help="cut for the mass-below report")
    p = sub.add_parser("effective", parents=[common], help="effective operator of a perturbed Neumann half-plane")
    p.add_argument("--perturbation", help='JSON descriptor, e.g. {"kind":"gaussian","amplitude":0.5}')
    p.add_argument("--lam", help="comma-separated levels for the phase-space count")
    p.add_argument("--y-max", dest="y_max", type=float, help="half-width of the effective window")
    p.add_argument("--n-y", dest="n_y", type=int, help="effective grid size")
    p.add_argument("--ppl", dest="points_per_length", type=int, help="grid points per natural length")
    p = sub.add_parser("robin", parents=[common], help="Robin sector energies or curved-boundary operator")
    p.add_argument("--mode", choices=["sector", "boundary"], help="sector (2D) or boundary (ellipse) study")
    p.add_argument("--theta", help="comma-separated openings, e.g. pi/3,pi/2")
    p.add_argument("--ellipse", help="semi-axes a,b (boundary mode)")
    p.add_argument("--alpha", help="comma-separated Robin parameters (boundary mode)")
    p.add_argument("--count", type=int, help="eigenvalues per alpha (boundary mode)")
    sub.add_parser("figures", parents=[common, modelargs], help="band figures (wire: full set and zoom)")
    sub.add_parser("cache-purge", parents=[common], help="delete every cached band table")
    return parser


_MODEL_FLAGS = ("B_plus", "B_minus", "M", "gauge", "b")
_POLICY_FLAGS = ("margin", "energy_cap", "cap_factor", "wire_rho_min")
_SETTINGS_FLAGS = {"points_per_length": "points_per_length", "levels": "levels", "tol": "tol"}


def _flag_values(ns: argparse.Namespace) -> dict:
    raw = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "config")}
    flags: dict = {}
    model: dict = {}
    if "model" in raw:
        model["family"] = MODEL_ALIASES[raw.pop("model")]
    for name in _MODEL_FLAGS:
        if name in raw:
            model[name] = raw.pop(name)
    policy = {name: raw.pop(name) for name in _POLICY_FLAGS if name in raw}
    settings = {dest: raw.pop(name) for name, dest in _SETTINGS_FLAGS.items() if name in raw}
    if "m" in raw:
        ms = parse_int_set(raw["m"], "m")
        if len(ms) == 1:
            model["m"] = ms[0]
        flags["m"] = ms
        raw.pop("m")
    if "formats" in raw:
        raw["formats"] = [f.strip() for f in raw["formats"].split(",") if f.strip()]
    if "perturbation" in raw:
        try:
            raw["perturbation"] = json.loads(raw["perturbation"])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"perturbation is not valid JSON: {exc}") from None
    flags.update(raw)
    if model:
        flags["model"] = model
    if policy:
        flags["policy"] = policy
    if settings:
        flags["settings"] = settings
    return flags


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    if isinstance(data.get("model"), dict) and "family" in data["model"]:
        fam = data["model"]["family"]
        data["model"] = {**data["model"], "family": MODEL_ALIASES.get(fam, fam)}
    return data


def run(argv: Optional[Sequence[str]] = None) -> tuple[int, Optional[dict]]:
    """Parse, validate, compute and write; returns ``(exit_code, summary)``."""
    parser = build_parser()
    ns = parser.parse_args(_preprocess(sys.argv[1:] if argv is None else argv))
    try:
        cfg = RunConfig.from_sources(ns.command, _load_config(ns.config), _flag_values(ns))
        out = Outputs(cfg)
        summary = HANDLERS[cfg.command](cfg, out)
        out.write()
    except ValidationError as exc:
        print(f"fiberband: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID, None
    except NumericalError as exc:
        print(f"fiberband: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    except FiberbandError as exc:  # pragma: no cover - no other subclasses today
        print(f"fiberband: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    return EXIT_OK, summary


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, summary = run(argv)
    if summary is not None:
        sys.stdout.write(dumps(summary))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
