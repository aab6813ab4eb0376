import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purcellkit import eigen, model
from purcellkit.acceptance import expansion_error_slope
from purcellkit.errors import DomainError, GridError
from purcellkit.model import FieldPoint
from purcellkit.params import SystemParams
from purcellkit.reference import TABLE_ROWS


def _numeric(fp, p):
    return np.linalg.eigvals(eigen.reduced_matrix(fp, p))


def _paired_error(modes, ref):
    a = np.array([m.complex for m in modes])
    if abs(a[0] - ref[0]) + abs(a[1] - ref[1]) > abs(a[0] - ref[1]) + abs(a[1] - ref[0]):
        ref = ref[::-1]
    return np.max(np.abs(a - ref) / np.abs(ref))


@settings(max_examples=300, deadline=None)
@given(
    wc=st.floats(1e9, 2e10),
    logs=st.tuples(st.floats(3, 9), st.floats(3, 9), st.floats(3, 9)),
    d=st.floats(-5, 5),
)
def test_split_matches_numerical_diagonalization(wc, logs, d):
    kc, km, g = (10**x for x in logs)
    p = SystemParams(omega_c=wc, kappa_c=kc, kappa_m=km, g=g)
    fp = FieldPoint.from_detuning(d * max(kc, km, g), p)
    m1, m2, _ = eigen.split_eigen_real_imag(fp, p)
    assert _paired_error((m1, m2), _numeric(fp, p)) < 1e-10
    assert _paired_error(eigen.exact_eigenfrequencies(fp, p), _numeric(fp, p)) < 1e-10


def test_split_and_principal_root_agree_in_order(row1):
    for d in np.linspace(-3, 3, 61) * row1.kappa_m:
        fp = FieldPoint.from_detuning(d, row1)
        m1, m2, _ = eigen.split_eigen_real_imag(fp, row1)
        e1, e2 = eigen.exact_eigenfrequencies(fp, row1)
        assert abs(m1.complex - e1.complex) <= 1e-6 and abs(m2.complex - e2.complex) <= 1e-6


def test_trace_and_determinant(row1):
    for d in np.linspace(-4, 4, 17) * row1.kappa_m:
        fp = FieldPoint.from_detuning(d, row1)
        m1, m2, _ = eigen.split_eigen_real_imag(fp, row1)
        M = eigen.reduced_matrix(fp, row1)
        assert abs(m1.complex + m2.complex - np.trace(M)) <= 1e-12 * abs(np.trace(M))
        assert abs(m1.complex * m2.complex - np.linalg.det(M)) <= 1e-12 * abs(np.linalg.det(M))


def test_z_decomposition_sign_tie(row1):
    zd = eigen.z_decomposition(FieldPoint.from_detuning(0.0, row1), row1)
    assert zd.im_z == 0 and math.copysign(1, zd.im_z) == 1
    assert zd.sign_im == 1.0
    assert zd.z == pytest.approx(4 * row1.g**2 - ((row1.kappa_m - row1.kappa_c) / 2) ** 2)


def test_zero_coupling_gives_bare_modes(row1):
    p = row1.with_(g=0.0)
    fp = FieldPoint.from_detuning(-2e8, p)
    modes = eigen.split_eigen_real_imag(fp, p)[:2]
    cav = eigen.cavity_like(modes, -2e8)
    assert cav.omega == pytest.approx(p.omega_c, rel=1e-15)
    assert cav.gamma_half == pytest.approx(p.kappa_c / 2, rel=1e-9)


def test_complex_mode_round_trip():
    m = eigen.ComplexMode(7.4e9, 3e6)
    assert m.complex == complex(7.4e9, -3e6)
    assert eigen.ComplexMode.from_complex(m.complex) == m


@pytest.mark.parametrize("row", TABLE_ROWS, ids=lambda r: r.label)
def test_quartic_oracle(row):
    p = row.params(with_ports=False)
    bound_cav = (p.g / p.omega_c) ** 2 * p.omega_c
    bound_mag = (p.g**2 + p.kappa_m**2 / 4) / p.omega_c
    for d in np.linspace(-2, 2, 41) * p.kappa_m:
        fp = FieldPoint.from_detuning(d, p)
        modes = eigen.split_eigen_real_imag(fp, p)[:2]
        cav = eigen.cavity_like(modes, d)
        mag = modes[1] if cav is modes[0] else modes[0]
        q_mag, q_cav = eigen.quartic_roots(fp, p)
        assert abs(cav.complex - q_cav.complex) <= bound_cav
        assert abs(mag.complex - q_mag.complex) <= bound_mag


def test_cavity_like_on_resonance_picks_cavity(row1):
    # regression: the Im z = 0 tie must select the narrow mode for both forms
    fp = FieldPoint.from_detuning(0.0, row1)
    exact = eigen.cavity_like(eigen.split_eigen_real_imag(fp, row1)[:2], 0.0)
    approx = eigen.cavity_like(eigen.purcell_expansion(fp, row1), 0.0)
    assert exact.gamma_half < row1.kappa_m / 4
    assert approx.gamma_half == pytest.approx(exact.gamma_half, rel=0.01)


def test_expansion_printed_form_equals_purcell_expressions(row1):
    for d in np.linspace(-3, 3, 31) * row1.kappa_m:
        fp = FieldPoint.from_detuning(d, row1)
        cav = eigen.cavity_like(eigen.purcell_expansion(fp, row1, neglect_cavity_width=True), d)
        assert cav.omega == pytest.approx(model.purcell_shift(fp, row1), rel=1e-14)
        assert 2 * cav.gamma_half == pytest.approx(model.purcell_broadening(fp, row1), rel=1e-9)


def test_expansion_error_is_fourth_order():
    slope, _, errs = expansion_error_slope(n_g=6, n_delta=601)
    assert slope == pytest.approx(4.0, abs=0.3)
    assert np.all(np.diff(errs) > 0)


def test_printed_expansion_is_second_order_in_cavity_width():
    # with W = Gamma_m the error keeps an O(g^2 Gamma_c) piece
    km, kc = 660e6, 6.6e6
    gs = np.geomspace(km / 100, km / 10, 6)
    errs = []
    for g in gs:
        p = SystemParams(omega_c=7.4e9, kappa_c=kc, kappa_m=km, g=g)
        worst = 0.0
        for d in np.linspace(-3, 3, 301) * km:
            fp = FieldPoint.from_detuning(d, p)
            ex = eigen.cavity_like(eigen.split_eigen_real_imag(fp, p)[:2], d).complex
            ap = eigen.cavity_like(eigen.purcell_expansion(fp, p, neglect_cavity_width=True), d).complex
            worst = max(worst, abs(ex - ap))
        errs.append(worst)
    slope = np.polyfit(np.log(gs), np.log(errs), 1)[0]
    assert slope < 3.5


def test_expansion_requires_lossy_magnon():
    p = SystemParams(omega_c=7e9, kappa_c=10e6, kappa_m=5e6, g=1e6)
    with pytest.raises(DomainError):
        eigen.purcell_expansion(FieldPoint.from_detuning(0.0, p), p)


def _demo(km):
    return SystemParams(omega_c=7.4e9, kappa_c=5e6, kappa_m=km, g=5e6)


def test_branch_sweep_avoided_crossing_and_crossing():
    for km, check in ((5e6, lambda s: s >= 1.9 * 5e6), (500e6, lambda s: s <= 0.5 * 5e6)):
        p = _demo(km)
        Br = model.kittel_field(p.omega_c, p)
        br = eigen.branch_sweep(np.linspace(Br - 0.02, Br + 0.02, 1001), p)
        assert check(br.min_separation()[0])
    # equal widths: the minimum splitting is exactly 2g on resonance
    p = _demo(5e6)
    Br = model.kittel_field(p.omega_c, p)
    sep, B_at = eigen.branch_sweep(np.linspace(Br - 0.02, Br + 0.02, 1001), p).min_separation()
    assert sep == pytest.approx(2 * p.g, rel=1e-6)
    assert B_at == pytest.approx(Br, abs=1e-4)


def test_branch_sweep_labels_follow_continuity():
    strong = _demo(5e6)
    Br = model.kittel_field(strong.omega_c, strong)
    br = eigen.branch_sweep(np.linspace(Br - 0.01, Br + 0.01, 401), strong)
    a = br.as_arrays()
    # anticrossing: the upper branch starts cavity-like and ends magnon-like
    assert a["omega_1"][0] == pytest.approx(strong.omega_c, abs=2e6)
    assert a["omega_1"][-1] == pytest.approx(br.omega_m[-1], abs=2e6)
    assert np.all(a["omega_1"] > a["omega_2"])

    purcell = _demo(500e6)
    br = eigen.branch_sweep(np.linspace(Br - 0.01, Br + 0.01, 401), purcell)
    a = br.as_arrays()
    # crossing: the narrow cavity-like mode stays on one label
    assert np.all(a["gamma_1"] < 20e6)
    assert np.all(np.abs(a["omega_1"] - purcell.omega_c) < 5e6)
    jumps = np.abs(np.diff(a["omega_1"]))
    assert np.max(jumps) < 10 * np.median(np.abs(np.diff(br.detunings)))
    assert br.meta["max_slope"] < 5.0


def test_branch_sweep_output_formats(row1):
    Br = model.kittel_field(row1.omega_c, row1)
    br = eigen.branch_sweep(np.linspace(Br - 0.01, Br + 0.01, 21), row1)
    lines = br.to_columns().splitlines()
    assert lines[0].startswith("# B_T") and len(lines) == 22
    assert len(lines[1].split()) == 7
    assert '"min_separation_hz"' in br.summary_json()


def test_branch_sweep_grid_errors(row1):
    with pytest.raises(GridError):
        eigen.branch_sweep([0.07], row1)
    with pytest.raises(GridError):
        eigen.branch_sweep([0.08, 0.07, 0.09], row1)
