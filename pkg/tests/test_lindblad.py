import math
import warnings

import numpy as np
import pytest
from scipy import linalg

from purcellkit import lindblad, model
from purcellkit.errors import DomainError, FitError, GridError
from purcellkit.lindblad import MomentState
from purcellkit.model import FieldPoint
from purcellkit.params import SystemParams

TWO_PI = 2 * math.pi


def _density_matrix_populations(p: SystemParams, delta: float, times: np.ndarray) -> np.ndarray:
    """Reference: Lindblad evolution of rho in the {vacuum, photon, magnon} manifold."""
    d, g = TWO_PI * delta, TWO_PI * p.g
    H = np.array([[0, 0, 0], [0, 0, g], [0, g, d]], dtype=complex)
    jumps = [math.sqrt(TWO_PI * p.kappa_c) * np.outer([1, 0, 0], [0, 1, 0]),
             math.sqrt(TWO_PI * p.kappa_m) * np.outer([1, 0, 0], [0, 0, 1])]
    eye = np.eye(3)

    def left(A):  # vec(A rho), column stacking
        return np.kron(eye, A)

    def right(B):  # vec(rho B)
        return np.kron(B.T, eye)

    L = -1j * (left(H) - right(H))
    for J in jumps:
        JdJ = J.conj().T @ J
        L += np.kron(J.conj(), J) - 0.5 * (left(JdJ) + right(JdJ))
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[1, 1] = 1.0
    out = []
    for t in times:
        rho = (linalg.expm(L * t) @ rho0.reshape(-1, order="F")).reshape(3, 3, order="F")
        out.append([rho[1, 1].real, rho[2, 2].real, abs(rho[2, 1])])
    return np.array(out)


@pytest.mark.parametrize("delta_over_km", [0.0, 0.7, -2.0])
def test_moments_match_density_matrix(row1, delta_over_km):
    d = delta_over_km * row1.kappa_m
    t = np.linspace(0, 60e-9, 61)
    traj = lindblad.evolve(MomentState(n_a=1.0), FieldPoint.from_detuning(d, row1), row1, t)
    ref = _density_matrix_populations(row1, d, t)
    np.testing.assert_allclose(traj.n_a, ref[:, 0], rtol=1e-9, atol=1e-13)
    np.testing.assert_allclose(traj.n_m, ref[:, 1], rtol=1e-9, atol=1e-13)
    np.testing.assert_allclose(np.abs(traj.coh), ref[:, 2], rtol=1e-9, atol=1e-13)


def _rk4(omega, x0, t_end, n_steps):
    h = t_end / n_steps
    x = x0.copy()
    for _ in range(n_steps):
        k1 = omega @ x
        k2 = omega @ (x + 0.5 * h * k1)
        k3 = omega @ (x + 0.5 * h * k2)
        k4 = omega @ (x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_expm_propagation_matches_step_doubled_rk4(row1):
    fp = FieldPoint.from_detuning(0.3 * row1.kappa_m, row1)
    omega = lindblad.build_omega_matrix(fp, row1)
    x0 = MomentState(n_a=1.0).as_vector()
    t_end = 20e-9
    coarse, fine = _rk4(omega, x0, t_end, 20000), _rk4(omega, x0, t_end, 40000)
    assert np.max(np.abs(coarse - fine)) < 1e-9  # RK4 converged
    x = lindblad.evolve(MomentState(n_a=1.0), fp, row1, [0.0, t_end]).states[-1]
    np.testing.assert_allclose(x, fine, rtol=1e-8, atol=1e-12)


def test_dissipation_identity_along_trace(row1):
    fp = FieldPoint.from_detuning(0.5 * row1.kappa_m, row1)
    dt = 1e-12
    t = np.arange(3001) * dt
    traj = lindblad.evolve(MomentState(n_a=0.6, n_m=0.4, coh=0.1 + 0.2j, coh_conj=0.1 - 0.2j), fp, row1, t)
    total = traj.n_a + traj.n_m
    deriv = (-total[4:] + 8 * total[3:-1] - 8 * total[1:-3] + total[:-4]) / (12 * dt)
    rhs = -TWO_PI * (row1.kappa_c * traj.n_a + row1.kappa_m * traj.n_m)[2:-2]
    assert np.max(np.abs(deriv - rhs)) / np.max(np.abs(rhs)) < 1e-6


def test_omega_matrix_structure(row1):
    fp = FieldPoint.from_detuning(1e8, row1)
    om = lindblad.build_omega_matrix(fp, row1)
    # column sums of the population rows: coupling terms cancel in d(n_a + n_m)/dt
    np.testing.assert_allclose(om[0, 2:] + om[1, 2:], 0, atol=0)
    assert om[0, 0] == pytest.approx(-TWO_PI * row1.kappa_c)
    assert om[1, 1] == pytest.approx(-TWO_PI * row1.kappa_m)
    assert om[2, 2] == pytest.approx(-1j * TWO_PI * 1e8 - math.pi * (row1.kappa_c + row1.kappa_m))
    assert om[3, 3] == np.conj(om[2, 2])


def test_uniform_and_general_grids_agree(row1):
    fp = FieldPoint.from_detuning(0.0, row1)
    t = np.linspace(0, 50e-9, 51)
    uniform = lindblad.evolve(MomentState(), fp, row1, t).states
    om = lindblad.build_omega_matrix(fp, row1)
    direct = np.array([linalg.expm(om * ti) @ MomentState().as_vector() for ti in t])
    np.testing.assert_allclose(uniform, direct, rtol=1e-10, atol=1e-14)
    jagged = np.concatenate([[0.0], np.sort(np.random.default_rng(1).uniform(0, 50e-9, 20))])
    traj = lindblad.evolve(MomentState(), fp, row1, jagged)
    ref = np.array([linalg.expm(om * ti) @ MomentState().as_vector() for ti in jagged])
    np.testing.assert_allclose(traj.states, ref, rtol=1e-12, atol=1e-15)


def test_time_grid_validation(row1):
    fp = FieldPoint.from_detuning(0.0, row1)
    for bad in ([1e-9, 2e-9], [0.0, 2e-9, 1e-9], [], [[0.0, 1e-9]]):
        with pytest.raises(GridError):
            lindblad.evolve(MomentState(), fp, row1, bad)


def test_trajectory_accessors(row1):
    traj = lindblad.evolve(MomentState(), FieldPoint.from_detuning(0.0, row1), row1, [0.0, 1e-9, 2e-9])
    assert len(traj) == 3
    assert traj[0] == MomentState()
    assert traj.n_a[-1] < 1


def test_bare_cavity_lifetime_exact(row1):
    p = row1.with_(g=0.0)
    trace = lindblad.synthesize_ringdown(FieldPoint.from_field(0.0, p), p)
    fit = lindblad.fit_lifetime(trace)
    assert fit.tau == pytest.approx(1 / (TWO_PI * p.kappa_c), rel=1e-9)
    assert fit.rate_hz == pytest.approx(p.kappa_c, rel=1e-9)
    assert fit.monotone


def test_resonant_ringdown_rate_matches_dressed_linewidth(row1):
    fp = FieldPoint.from_detuning(0.0, row1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = lindblad.fit_lifetime(lindblad.synthesize_ringdown(fp, row1))
    assert fit.rate_hz == pytest.approx(model.purcell_broadening(fp, row1), rel=0.03)


def test_scale_offset_and_edge_shift(row1):
    p = row1.with_(g=0.0)
    fp = FieldPoint.from_field(0.0, p)
    t = np.arange(1001) * 1e-9
    trace = lindblad.synthesize_ringdown(fp, p, scale=3.0, offset=0.5, times=t, t_shift=362e-9)
    assert np.all(trace.power[t < 362e-9] == 3.5)
    assert trace.power[362] == pytest.approx(3.5)
    fit = lindblad.fit_lifetime(trace)
    assert fit.window[0] == pytest.approx(362e-9)
    assert fit.tau == pytest.approx(1 / (TWO_PI * p.kappa_c), rel=1e-6)
    assert fit.amplitude == pytest.approx(3.0 * math.exp(362e-9 / fit.tau), rel=1e-6)


def test_ringdown_argument_errors(row1):
    fp = FieldPoint.from_field(0.0, row1)
    with pytest.raises(DomainError):
        lindblad.synthesize_ringdown(fp, row1, scale=0.0)
    with pytest.raises(GridError):
        lindblad.synthesize_ringdown(fp, row1, times=[0.0, 0.0])


def test_fit_threshold_and_window_errors(row1):
    p = row1.with_(g=0.0)
    trace = lindblad.synthesize_ringdown(FieldPoint.from_field(0.0, p), p)
    with pytest.raises(FitError, match="samples above threshold"):
        lindblad.fit_lifetime(trace, floor=0.5)
    with pytest.raises(FitError, match="not inside"):
        lindblad.fit_lifetime(trace, fit_window=(0.0, 2e-6))
    flat = lindblad.RingdownTrace(times=trace.times, power=np.ones_like(trace.times))
    with pytest.raises(FitError, match="not decaying"):
        lindblad.fit_lifetime(flat)


def test_threshold_restricts_fit_to_signal(row1):
    p = row1.with_(g=0.0)
    trace = lindblad.synthesize_ringdown(FieldPoint.from_field(0.0, p), p)
    fit = lindblad.fit_lifetime(trace, floor=1e-3)
    tau = 1 / (TWO_PI * p.kappa_c)
    assert fit.n_samples == int(np.sum(np.exp(-trace.times / tau) > 3e-3))


def test_rabi_oscillating_trace_warns():
    p = SystemParams(omega_c=7.4e9, kappa_c=1e6, kappa_m=1e6, g=20e6)
    trace = lindblad.synthesize_ringdown(FieldPoint.from_detuning(0.0, p), p, times=np.arange(401) * 1e-9)
    with pytest.warns(RuntimeWarning, match="not monotone"):
        fit = lindblad.fit_lifetime(trace)
    assert not fit.monotone


def test_lifetime_sweep_dips_at_resonance(row9):
    B_res = model.kittel_field(row9.omega_c, row9)
    B = np.sort(np.append(np.linspace(0.0, 0.12, 48), B_res))
    table = lindblad.lifetime_vs_field(B, row9)
    i = int(np.argmin(table.tau))
    assert table.fields[i] == B_res
    np.testing.assert_allclose(table.tau, table.inv_kappa, rtol=0.03)
    assert table.inv_kappa[0] / table.inv_kappa.min() == pytest.approx(model.purcell_factor(row9), rel=0.02)
    doc = table.to_dict()
    assert len(doc["tau_ns"]) == 49 and set(doc) == {"B_mT", "tau_ns", "tau_stderr_ns", "inv_kappa_ns", "flags"}
    assert table.to_columns().startswith("# B_mT tau_ns inv_kappa_ns flag")


def test_lifetime_sweep_flags_failed_points(row1):
    table = lindblad.lifetime_vs_field([0.0, 0.05], row1, floor=10.0)
    assert all(f.startswith("fit-failed") for f in table.flags)
    assert np.all(np.isnan(table.tau))
    assert '"tau_ns": [\n    null' in table.to_json()
    with pytest.raises(GridError):
        lindblad.lifetime_vs_field([0.05, 0.0], row1)
