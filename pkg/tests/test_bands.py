import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from fiberband.bands import (
    BandTable,
    SolverSettings,
    band_scan,
    compare_asymptotics,
    detect_thresholds,
    finite_difference_velocity,
    overlap_diagnostic,
    solve_slice,
    theta0,
    worker_count,
)
from fiberband.errors import NumericalError, ValidationError
from fiberband.mesh import TruncationPolicy, flatten_wire
from fiberband.models import FiberModel, magnetic_primitive, predictor

DIRICHLET = FiberModel.half_plane("dirichlet")
NEUMANN = FiberModel.half_plane("neumann")

# Lowest roots of D_ν(-√2k) = 0 (Dirichlet) and D_ν'(-√2k) = 0 (Neumann), λ = 2ν + 1,
# and of the Wronskian matching of parabolic-cylinder functions across the step,
# computed with mpmath at 30 digits (sign-change scan, then refinement).
PARABOLIC_CYLINDER = [
    (DIRICHLET, 1.0, 1, 1.46846774346709),
    (DIRICHLET, 1.0, 2, 4.3949256772583),
    (DIRICHLET, 2.0, 1, 1.03576339460551),
    (DIRICHLET, -1.0, 1, 6.07439106160788),
    (DIRICHLET, -1.0, 2, 11.2076468346341),
    (NEUMANN, 1.0, 1, 0.618919327380134),
    (NEUMANN, 2.0, 1, 0.951418841305427),
    (NEUMANN, 2.0, 2, 2.73503542743642),
    (NEUMANN, -1.0, 1, 3.0),
    (FiberModel.step(0.5), 0.0, 1, 0.678619321261098),
    (FiberModel.step(0.5), 1.0, 1, 0.432129719580399),
    (FiberModel.step(0.5), 2.0, 1, 0.499903507037822),
    (FiberModel.step(1 / 3), 1.0, 1, 0.317853574989057),
]

# Minimum of the first Neumann band: k₀ solves D'_ν(-√2k) = 0 with λ = k² (mpmath).
THETA0_K0 = 0.768183653139166
THETA0_VALUE = 0.590106124950234
THETA0_SECOND = 1.17102580057


@pytest.mark.parametrize("model,k,j,exact", PARABOLIC_CYLINDER, ids=lambda v: getattr(v, "label", str(v)))
def test_parabolic_cylinder_oracle(model, k, j, exact):
    sol = solve_slice(model, k, j)
    assert sol.values[j - 1] == pytest.approx(exact, abs=1e-7)
    # the reported error bounds the true error (with a safety factor)
    assert abs(sol.values[j - 1] - exact) <= 10 * sol.error[j - 1]


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_half_plane_at_zero(j):
    d = solve_slice(DIRICHLET, 0.0, j)
    n = solve_slice(NEUMANN, 0.0, j)
    assert d.values[j - 1] == pytest.approx(4 * j - 1, abs=1e-7)
    assert n.values[j - 1] == pytest.approx(4 * j - 3, abs=1e-7)
    assert d.order[j - 1] == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("B", [0.5, 1.0, 3.0])
def test_constant_field_landau_levels(B):
    sol = solve_slice(FiberModel.iwatsuka(B, B, 2.0), 1.7, 4)
    np.testing.assert_allclose(sol.values, B * np.array([1, 3, 5, 7]), atol=1e-7)
    np.testing.assert_allclose(sol.velocity, 0.0, atol=1e-6)


def test_theta0_oracle():
    res = theta0()
    assert res.theta0 == pytest.approx(THETA0_VALUE, abs=1e-8)
    assert res.k0 == pytest.approx(THETA0_K0, abs=1e-4)
    assert res.second_derivative == pytest.approx(THETA0_SECOND, abs=2e-3)
    assert abs(res.velocity) < 1e-3
    assert res.to_dict().keys() == {"k0", "theta0", "second_derivative"}


@given(st.floats(-3.0, 25.0))
def test_iwatsuka_gauge_is_a_frequency_shift(k):
    origin = FiberModel.iwatsuka(gauge="origin")
    power = FiberModel.iwatsuka(gauge="power")
    offset = magnetic_primitive(origin).offset
    a = solve_slice(origin, k, 2).values
    b = solve_slice(power, k - offset, 2).values
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8)


def _wire_rho_form(m, k, n=40000, rho_max=12.0, rho_min=1e-3):
    """Independent route: finite differences on the flat ρ-form of the wire fiber."""
    c = flatten_wire(m, k)
    rho = np.linspace(rho_min, rho_max, n)
    h = rho[1] - rho[0]
    inner = rho[1:-1]
    d = 2 * c.kinetic / h**2 + c.potential(inner)
    e = np.full(inner.size - 1, -c.kinetic / h**2)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 2))


@pytest.mark.parametrize("m,k", [(1, 0.0), (2, 0.5), (1, 1.5)])
def test_wire_log_form_matches_rho_form(m, k):
    log_form = solve_slice(FiberModel.wire(m), k, 3).values
    np.testing.assert_allclose(log_form, _wire_rho_form(m, k), rtol=2e-4)


def test_wire_depends_on_m_squared():
    a = solve_slice(FiberModel.wire(2), 0.3, 2).values
    b = solve_slice(FiberModel.wire(-2), 0.3, 2).values
    np.testing.assert_array_equal(a, b)


FH_CASES = [
    (DIRICHLET, st.floats(-1.5, 3.0)),
    (NEUMANN, st.floats(-1.5, 3.0)),
    (FiberModel.iwatsuka(), st.floats(-2.0, 15.0)),
    (FiberModel.step(0.5), st.floats(-2.0, 3.0)),
    (FiberModel.wire(1), st.floats(-1.0, 4.0)),
]


@pytest.mark.parametrize("model,ks", FH_CASES, ids=lambda v: getattr(v, "label", ""))
def test_feynman_hellmann_matches_finite_differences(model, ks):
    @given(ks, st.integers(1, 2))
    def check(k, j):
        dk = 1e-3
        fh = solve_slice(model, k, j).velocity[j - 1]
        fd = finite_difference_velocity(model, k, j, dk=dk)
        assert fh == pytest.approx(fd, abs=max(1e-4, 5 * dk * dk * max(1.0, k * k)))

    check()


@pytest.fixture(scope="module")
def table():
    return band_scan(NEUMANN, np.linspace(-1, 2, 7), 2)


class TestBandTable:
    def test_csv_layout(self, table):
        lines = table.to_csv().splitlines()
        assert lines[0] == "k,j,lambda,velocity,err"
        assert len(lines) == 1 + 7 * 2
        k, j, lam, vel, err = lines[1].split(",")
        assert float(k) == -1.0 and int(j) == 1 and float(lam) == pytest.approx(3.0, abs=1e-7)

    def test_json_round_trip(self, table):
        again = BandTable.from_dict(json.loads(table.to_json()))
        np.testing.assert_array_equal(again.values, table.values)
        np.testing.assert_array_equal(again.velocity, table.velocity)
        assert again.model == table.model and again.policy == table.policy

    def test_threads_do_not_change_results(self, table):
        threaded = band_scan(NEUMANN, table.k_nodes, 2, threads=3)
        np.testing.assert_array_equal(threaded.values, table.values)
        np.testing.assert_array_equal(threaded.error, table.error)

    def test_rejects_bad_grids(self):
        with pytest.raises(ValidationError):
            band_scan(NEUMANN, [0.0, 0.0, 1.0], 1)
        with pytest.raises(ValidationError):
            band_scan(NEUMANN, [0.0, 1.0], 0)

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("FIBERBAND_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("FIBERBAND_THREADS", "many")
        with pytest.raises(ValidationError):
            worker_count()


@pytest.mark.parametrize(
    "model,ks,sign",
    [
        (FiberModel.iwatsuka(), (-1.0, 12.0), +1),
        (DIRICHLET, (-1.0, 3.0), -1),
        (FiberModel.wire(0), (-1.0, 5.0), -1),
    ],
    ids=["iwatsuka-increasing", "dirichlet-decreasing", "wire-decreasing"],
)
def test_monotone_bands(model, ks, sign):
    table = band_scan(model, np.linspace(*ks, 17), 3)
    assert np.all(sign * np.diff(table.values, axis=1) > 0)
    assert np.all(np.diff(table.values, axis=0) > 0)  # bands are ordered at every k


def test_window_independence():
    base = solve_slice(NEUMANN, 0.77, 1, window=(0.0, 8.77)).values[0]
    wider = solve_slice(NEUMANN, 0.77, 1, window=(0.0, 10.77)).values[0]
    assert abs(base - wider) < 1e-9


def test_policy_margin_does_not_change_values():
    a = solve_slice(FiberModel.step(0.5), 1.0, 3).values
    b = solve_slice(FiberModel.step(0.5), 1.0, 3, policy=TruncationPolicy(margin=4.0)).values
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_fixed_cap_too_low():
    with pytest.raises(ValidationError):
        solve_slice(NEUMANN, 0.0, 2, policy=TruncationPolicy(energy_cap=2.0))


def test_two_level_richardson_agrees():
    three = solve_slice(DIRICHLET, 1.0, 2).values
    two = solve_slice(DIRICHLET, 1.0, 2, settings=SolverSettings(levels=2)).values
    np.testing.assert_allclose(two, three, atol=1e-6)


def test_numerical_errors_carry_context(monkeypatch):
    import fiberband.bands as bands_module

    def failing(op, j_max, tol=None):
        raise NumericalError("inverse iteration did not converge", j=j_max)

    monkeypatch.setattr(bands_module, "eigenpairs", failing)
    with pytest.raises(NumericalError) as info:
        solve_slice(FiberModel.step(1 / 3), 2.5, 3)
    assert info.value.context == {"model": "magnetic-step(b=0.333333)", "k": 2.5, "j": 3}
    assert "k=2.5" in str(info.value)


def test_split_pair_stays_resolved():
    # E₁ = b·E₂ for b = 1/3: the two bands share the limit 1 but stay distinct
    values = solve_slice(FiberModel.step(1 / 3), 6.0, 3).values
    assert values[1] <= values[2]
    np.testing.assert_allclose(values, [1 / 3, 1.0, 1.0], atol=1e-7)


def test_neumann_thresholds():
    table = band_scan(NEUMANN, np.linspace(-2.0, 5.0, 36), 1)
    report = detect_thresholds(table)
    band = report.bands[0]
    assert len(band.critical_points) == 1
    cp = band.critical_points[0]
    assert cp.kind == "min"
    assert cp.k == pytest.approx(THETA0_K0, abs=1e-4)
    assert cp.value == pytest.approx(THETA0_VALUE, abs=1e-8)
    assert band.limit_minus.status == "infinite"
    assert band.limit_plus.status == "finite"
    assert band.limit_plus.value == pytest.approx(1.0, abs=1e-3)
    assert "has-minimum" in band.tags


def test_iwatsuka_limits():
    table = band_scan(FiberModel.iwatsuka(), np.linspace(-15.0, 25.0, 41), 2)
    report = detect_thresholds(table)
    for band, (low, high) in zip(report.bands, [(0.5, 1.0), (1.5, 3.0)]):
        assert band.critical_points == ()
        assert band.tags == ("increasing",)
        assert band.limit_minus.value == pytest.approx(low, abs=1e-6)
        assert band.limit_plus.value == pytest.approx(high, abs=max(1e-3, band.limit_plus.uncertainty))


def test_compare_asymptotics_power_gauge():
    model = FiberModel.iwatsuka(gauge="power")
    table = band_scan(model, np.linspace(20.0, 40.0, 5), 1)
    report = compare_asymptotics(table, predictor(model, 1))
    assert report.passed
    assert report.trend == "toward-1"
    assert np.all(np.abs(report.ratio - 1) < 0.05)


def test_overlap_diagnostic_is_consistent():
    diag = overlap_diagnostic(FiberModel.iwatsuka(), np.linspace(0.0, 2.0, 5), 2)
    assert np.all(diag < 0)
