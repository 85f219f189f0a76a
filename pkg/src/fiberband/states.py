"""Energy-localised single-band wavepackets, their currents and profiles.

A packet is described spectrally: a profile ``f(k)`` on the k-nodes of a
band table whose band value lies in an energy window ``I``.  Its current
along the invariant direction is ``∫ λ_j'(k) |f(k)|² dk`` and, by
Parseval, its density across the invariant direction is
``x ↦ ∫ |u_j(x, k) f(k)|² dk``.  Both integrals use the trapezoid rule on
the table's k-grid, so the current is a convex combination of the
velocities on the support.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from fiberband.bands import BandTable, SolverSettings, solve_slice
from fiberband.errors import ValidationError
from fiberband.mesh import TruncationPolicy
from fiberband.models import FiberModel


def trapezoid_weights(k: np.ndarray) -> np.ndarray:
    """Trapezoid weights on a (possibly non-uniform) increasing grid."""
    k = np.asarray(k, dtype=float)
    w = np.zeros_like(k)
    if k.size == 1:
        w[0] = 1.0
        return w
    dk = np.diff(k)
    w[:-1] += 0.5 * dk
    w[1:] += 0.5 * dk
    return w


@dataclass(frozen=True)
class Wavepacket:
    """Single-band packet localised in the energy window ``(lo, hi)``.

    ``profile`` lives on the full k-grid of the originating table and
    vanishes off ``support``.  ``norm`` is the norm of the profile before
    normalisation; the stored profile has unit trapezoid norm.
    """

    j: int
    k_nodes: np.ndarray
    profile: np.ndarray
    window: tuple[float, float]
    norm: float

    @property
    def support(self) -> np.ndarray:
        return self.profile != 0.0

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights times ``|f|²`` (sum to one)."""
        return trapezoid_weights(self.k_nodes) * self.profile**2


def _bump(k: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Smooth bump on each contiguous run of the support."""
    out = np.zeros_like(k)
    idx = np.flatnonzero(support)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        if run.size == 1:
            out[run] = 1.0
            continue
        a, b = k[run[0]], k[run[-1]]
        # map the run to (-1, 1) with a small pad so the end nodes stay nonzero
        pad = 0.5 * (b - a) / (run.size - 1)
        tau = (k[run] - 0.5 * (a + b)) / (0.5 * (b - a) + pad)
        out[run] = np.exp(-1.0 / (1.0 - tau**2))
    return out


def make_packet(table: BandTable, j: int, window: tuple[float, float], shape: str = "flat") -> Wavepacket:
    """Packet in band ``j`` supported where ``λ_j(k)`` lies in the open window.

    Parameters
    ----------
    table : BandTable
    j : int
        Band index.
    window : (float, float)
        Open energy interval ``I``.
    shape : {"flat", "bump"}
        Profile shape on the support.

    Raises
    ------
    ValidationError
        If no k-node of the table has ``λ_j(k) ∈ I``.
    """
    if not 1 <= j <= table.j_max:
        raise ValidationError(f"band {j} not in table (j_max={table.j_max})")
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValidationError("energy window must satisfy lo < hi")
    lam = table.values[j - 1]
    support = (lam > lo) & (lam < hi)
    if not np.any(support):
        raise ValidationError(f"empty preimage: band {j} never enters ({lo:g}, {hi:g}) on the scanned k-range")
    if shape == "flat":
        f = support.astype(float)
    elif shape == "bump":
        f = _bump(table.k_nodes, support)
    else:
        raise ValidationError("shape must be 'flat' or 'bump'")
    w = trapezoid_weights(table.k_nodes)
    norm = math.sqrt(float(np.sum(w * f * f)))
    if norm == 0.0:
        # a single isolated node at the end of a run still has positive weight
        raise ValidationError("packet has zero norm on the scanned grid")
    return Wavepacket(j, table.k_nodes.copy(), f / norm, (lo, hi), norm)


def point_packet(table: BandTable, j: int, index: int) -> Wavepacket:
    """Packet concentrated on the single k-node ``index``."""
    f = np.zeros(table.k_nodes.size)
    f[index] = 1.0
    w = trapezoid_weights(table.k_nodes)
    norm = math.sqrt(w[index])
    lam = table.values[j - 1, index]
    return Wavepacket(j, table.k_nodes.copy(), f / norm, (lam, lam), norm)


def current(packet: Wavepacket, table: BandTable) -> float:
    """``∫ λ_j'(k) |f(k)|² dk`` on the table's k-grid."""
    if packet.k_nodes.shape != table.k_nodes.shape or not np.array_equal(packet.k_nodes, table.k_nodes):
        raise ValidationError("packet and table k-grids differ")
    return float(np.sum(packet.weights * table.velocity[packet.j - 1]))


def velocity_range(packet: Wavepacket, table: BandTable) -> tuple[float, float]:
    """``(inf, sup)`` of ``λ_j'`` over the packet support."""
    v = table.velocity[packet.j - 1][packet.support]
    return float(v.min()), float(v.max())


@dataclass(frozen=True)
class LocalizationProfile:
    """Density ``x ↦ ∫|u_j(x,k) f(k)|² dk`` and the mass below ``x_cut``.

    For the wire ``x`` is ``log r``.
    """

    x: np.ndarray
    density: np.ndarray
    x_cut: float
    mass_below: float
    total_mass: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "density"])
        for xi, di in zip(self.x, self.density):
            writer.writerow([repr(float(xi)), repr(float(di))])
        return buf.getvalue()


def localization_profile(
    packet: Wavepacket,
    model: FiberModel,
    x_cut: float,
    policy: Optional[TruncationPolicy] = None,
    settings: Optional[SolverSettings] = None,
    n_points: int = 801,
) -> LocalizationProfile:
    """Spatial density of a packet across the invariant direction.

    Eigenvectors are recomputed on the finest grid of each support slice
    (they are not stored on band tables).  The mass below ``x_cut`` is
    integrated per slice on the slice's own grid and then averaged with the
    packet weights, so it does not depend on the display grid.
    """
    weights = packet.weights
    idx = np.flatnonzero(packet.support)
    slices = []
    for i in idx:
        sol = solve_slice(model, packet.k_nodes[i], packet.j, policy, settings, want_vectors=True)
        x = sol.grid.nodes
        if sol.coordinate == "log_rho":
            x = x + sol.k  # log r = log ρ + k
        slices.append((weights[i], x, sol.vectors[packet.j - 1] ** 2))
    lo = min(s[1][0] for s in slices)
    hi = max(s[1][-1] for s in slices)
    x_out = np.linspace(lo, hi, n_points)
    density = np.zeros_like(x_out)
    mass_below = 0.0
    total = 0.0
    for w, x, u2 in slices:
        density += w * np.interp(x_out, x, u2, left=0.0, right=0.0)
        tw = trapezoid_weights(x)
        total += w * float(np.sum(tw * u2))
        mass_below += w * _cumulative_below(x, u2, x_cut)
    return LocalizationProfile(x_out, density, float(x_cut), float(mass_below), float(total))


def _cumulative_below(x: np.ndarray, u2: np.ndarray, x_cut: float) -> float:
    """Trapezoid integral of ``u2`` over ``x ≤ x_cut`` (partial cell interpolated)."""
    if x_cut <= x[0]:
        return 0.0
    if x_cut >= x[-1]:
        return float(np.sum(trapezoid_weights(x) * u2))
    i = int(np.searchsorted(x, x_cut, side="right")) - 1
    full = float(np.sum(trapezoid_weights(x[: i + 1]) * u2[: i + 1])) if i >= 1 else 0.0
    t = (x_cut - x[i]) / (x[i + 1] - x[i])
    u_cut = u2[i] + t * (u2[i + 1] - u2[i])
    return full + 0.5 * (u2[i] + u_cut) * (x_cut - x[i])
