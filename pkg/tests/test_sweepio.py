import json
import warnings

import numpy as np
import pytest

from purcellkit import model
from purcellkit.config import load_config, parse_config
from purcellkit.errors import GridError, SchemaError
from purcellkit.sweepio import (
    ResultEnvelope,
    background_subtract,
    format_sweep_csv,
    forward_sweep,
    generate_sweep,
    parse_sweep_csv,
    payload_text,
    read_sweep_csv,
    sweep_grids,
)

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def _small(row1, **kw):
    B = np.linspace(0.06, 0.09, 13)
    w = row1.omega_c + np.linspace(-40e6, 40e6, 161)
    return forward_sweep(row1, B, w, **kw)


def test_generated_csv_is_byte_identical(tmp_path):
    cfg = load_config(CONFIGS / "row1_noisy.json")
    _, (a,) = generate_sweep(cfg, tmp_path / "a")
    _, (b,) = generate_sweep(cfg, tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    _, (c,) = generate_sweep(load_config(CONFIGS / "row1_noisy.json", seed=8), tmp_path / "c")
    assert a.read_bytes() != c.read_bytes()


def test_deepest_transmission_near_resonance_field(row1):
    B = np.linspace(0.04, 0.12, 161)
    w = row1.omega_c + np.linspace(-5e6, 5e6, 41)
    sw = forward_sweep(row1, B, w)
    deepest = B[int(np.argmin(sw.power["S21"].max(axis=1)))]
    assert deepest == pytest.approx(model.kittel_field(row1.omega_c, row1), abs=1e-3)
    assert deepest == pytest.approx(0.076, abs=1.5e-3)


def test_s22_follows_s21(row1):
    sw = _small(row1, parameters=("S21", "S22"))
    ratio = np.sqrt(row1.kappa_2_ex / row1.kappa_1_ex)
    for s21, s22 in zip(sw.spectra["S21"], sw.spectra["S22"]):
        np.testing.assert_allclose(s22.values, 1 + ratio * s21.values, rtol=1e-12)


def test_noise_needs_seed_and_is_multiplicative(row1):
    with pytest.raises(SchemaError):
        _small(row1, noise=0.01)
    clean = _small(row1).power["S21"]
    noisy = _small(row1, noise=0.01, seed=5).power["S21"]
    rel = noisy / clean - 1
    assert abs(rel.std() - 0.01) < 0.001
    np.testing.assert_array_equal(noisy, _small(row1, noise=0.01, seed=5).power["S21"])


def test_forward_sweep_grid_errors(row1):
    with pytest.raises(GridError):
        forward_sweep(row1, [], [7e9])
    with pytest.raises(GridError):
        forward_sweep(row1, [[0.07]], [7e9])


@pytest.mark.parametrize("power", ["linear", "db"])
def test_csv_round_trip(row1, power):
    sw = _small(row1)
    data = parse_sweep_csv(format_sweep_csv(sw.power_items(), power=power))
    assert data.power_column == f"power_{power}"
    assert data.comments == ["parameter: S21"]
    np.testing.assert_allclose(data.fields, sw.fields, rtol=1e-12)
    for (B, w, p), (B0, w0, p0) in zip(data.items, sw.power_items()):
        np.testing.assert_allclose(w, w0, rtol=0, atol=1e-3)
        np.testing.assert_allclose(p, p0, rtol=1e-10)


def test_csv_blocks_are_optional(row1):
    text = format_sweep_csv(_small(row1).power_items())
    long_form = "\n".join(line for line in text.splitlines() if line) + "\n"
    a, b = parse_sweep_csv(text), parse_sweep_csv(long_form)
    assert len(a.items) == len(b.items) == 13
    np.testing.assert_array_equal(a.items[4][2], b.items[4][2])


@pytest.mark.parametrize("text, where", [
    ("B,freq,power\n1,2,3\n", "<csv>:1"),
    ("B_mT,freq_GHz,power_linear\n1,2\n", "<csv>:2"),
    ("# only\n", "<csv>"),
    ("B_mT,freq_GHz,power_db\n1,x,3\n", "<csv>:2"),
    ("B_mT,freq_GHz,power_db\n", "<csv>"),
])
def test_csv_errors_name_the_line(text, where):
    with pytest.raises(SchemaError) as exc:
        parse_sweep_csv(text)
    assert exc.value.path == where


def test_read_sweep_csv_from_file(tmp_path, row1):
    from purcellkit.sweepio import write_sweep_csv

    path = write_sweep_csv(tmp_path / "x" / "s.csv", _small(row1).power_items(), parameter="S22")
    assert read_sweep_csv(path).comments == ["parameter: S22"]


def test_background_subtraction(row1):
    B = np.linspace(0.04, 0.35, 63)
    w = row1.omega_c + np.linspace(-30e6, 30e6, 121)
    sw = forward_sweep(row1, B, w)
    disp = background_subtract(sw.pairs(), 0.345, row1)
    i_ref = int(np.argmin(np.abs(B - 0.345)))
    np.testing.assert_array_equal(disp.values[i_ref], 0.0)
    assert disp.reference_B == B[i_ref]
    B_res = model.kittel_field(row1.omega_c, row1)
    strongest = B[int(np.argmax(np.abs(disp.values[:, 60])))]
    lo, hi = model.kittel_field(row1.omega_c + np.array([-1, 1]) * row1.kappa_m, row1)
    assert lo <= strongest <= hi and abs(strongest - B_res) < 0.01
    assert disp.to_columns().startswith("# reference_B_mT 345.0")


def test_background_subtraction_uncoupled_is_zero(row1):
    p = row1.with_(g=0.0)
    sw = forward_sweep(p, np.linspace(0.04, 0.35, 20), p.omega_c + np.linspace(-30e6, 30e6, 61))
    np.testing.assert_allclose(background_subtract(sw.pairs(), 0.345).values, 0.0, atol=1e-15)


def test_background_subtraction_guards(row1):
    sw = _small(row1)
    with pytest.raises(GridError, match="outside"):
        background_subtract(sw.pairs(), 0.2)
    with pytest.raises(GridError):
        background_subtract([], 0.07)
    with pytest.warns(RuntimeWarning, match="kappa_m from resonance"):
        background_subtract(sw.pairs(), 0.076, row1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        background_subtract(sw.pairs(), 0.076)


def test_sweep_grids_follow_config():
    cfg = load_config(CONFIGS / "row1.json")
    B, w = sweep_grids(cfg, cfg.system_params())
    assert B[0] == pytest.approx(0.04) and B[-1] == pytest.approx(0.12) and B.size == 241
    assert w.size == 1201 and (w[0] + w[-1]) / 2 == pytest.approx(7.401e9)
    with pytest.raises(SchemaError):
        sweep_grids(parse_config({}), cfg.system_params())


def test_envelope_round_trip(tmp_path):
    cfg = load_config(CONFIGS / "row1.json")
    env = ResultEnvelope.create("demo", cfg, {"x": [1.0, 2.0], "a": "b"})
    p_path, e_path = env.write(tmp_path)
    back = ResultEnvelope.from_json(e_path.read_text())
    assert back == env
    assert back.config_hash == cfg.config_hash()
    assert set(back.files) == {"demo.payload.json"}
    # payload write -> read -> write is a fixed point
    again = payload_text(json.loads(p_path.read_text()))
    assert again == p_path.read_text()
    with pytest.raises(SchemaError):
        ResultEnvelope.from_json('{"task": "x"}')
