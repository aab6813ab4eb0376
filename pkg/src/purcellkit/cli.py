"""Command-line entry point.

Every subcommand writes ``<task>.payload.json`` (deterministic for a given
configuration and seed), ``<task>.envelope.json`` (payload plus provenance)
and plain column text for plotting into ``--out``.

Exit status: 0 success, 1 usage or configuration error, 2 data or
convergence failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import acceptance, eigen, lindblad, model
from .config import RunConfig, load_config, parse_config
from .errors import DomainError, FitError, GridError, SchemaError, SingularityError
from .extraction import (
    extract_height_waist,
    extract_least_squares,
    fit_lorentzian_power,
    reduce_sweep,
    summarize_configuration,
)
from .model import FieldPoint
from .params import GAMMA_OVER_2PI, SystemParams
from .reference import MagneticEstimateInputs
from .sweepio import (
    ResultEnvelope,
    background_subtract,
    file_digest,
    generate_sweep,
    read_sweep_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class DataError(Exception):
    """Input data that cannot be used (maps to exit status 2)."""


def _mhz(x: float) -> float:
    return x / 1e6


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _config(args, required: bool = True) -> RunConfig | None:
    if args.config is None:
        if required:
            raise UsageError("--config is required for this subcommand")
        return parse_config({}, seed=args.seed)
    return load_config(args.config, seed=args.seed)


def _finish(task: str, cfg: RunConfig | None, payload: dict, files: list[Path], out: Path) -> ResultEnvelope:
    env = ResultEnvelope.create(task, cfg, payload, files)
    env.write(out)
    return env


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


# -- subcommands ------------------------------------------------------------------------


def cmd_spectra(args, out: Path) -> int:
    cfg = _config(args)
    cfg.require("params", "spectra")
    p = cfg.system_params()
    sp = cfg.spectra
    B = sp.b_mt * 1e-3
    centre = sp.freq_center_ghz * 1e9 if sp.freq_center_ghz is not None else p.omega_c
    w = centre + np.linspace(-0.5, 0.5, sp.n_freq) * sp.freq_span_mhz * 1e6
    fp = FieldPoint.from_field(B, p)
    t21 = model.s21(w, fp, p)
    p21 = np.abs(t21) ** 2
    if not np.any(p21 > 0):
        raise DomainError("S21 vanishes: set kappa_1_ex_khz and kappa_2_ex_khz in params")
    cols = ["# freq_GHz abs_S21_sq" + (" abs_S22_sq" if p.kappa_1_ex > 0 else "")]
    p22 = np.abs(model.s22(w, fp, p)) ** 2 if p.kappa_1_ex > 0 else None
    for i, wi in enumerate(w):
        row = f"{wi / 1e9:.12f} {p21[i]:.12e}"
        cols.append(row + (f" {p22[i]:.12e}" if p22 is not None else ""))
    files = [_write(out, "spectra.txt", "\n".join(cols) + "\n")]
    fit = fit_lorentzian_power(w, p21, residual_cap=cfg.extraction.residual_cap)
    payload = {
        "B_mT": sp.b_mt,
        "delta_mhz": _mhz(float(fp.delta)),
        "fit": {"center_ghz": fit.center / 1e9, "fwhm_mhz": _mhz(fit.fwhm), "converged": fit.converged,
                "residual_norm": _finite(fit.residual_norm)},
        "model": {"omega_sys_ghz": model.purcell_shift(fp, p) / 1e9,
                  "kappa_sys_mhz": _mhz(model.purcell_broadening(fp, p))},
        "regime": model.regime_classify(p).value,
    }
    _finish("spectra", cfg, payload, files, out)
    print(f"center {fit.center / 1e9:.6f} GHz, FWHM {fit.fwhm / 1e6:.4f} MHz ({payload['regime']})")
    return EXIT_OK if fit.converged else EXIT_DATA


def cmd_sweep(args, out: Path) -> int:
    cfg = _config(args)
    cfg.require("params", "sweep")
    p = cfg.system_params()
    sw, files = generate_sweep(cfg, out)
    payload = {
        "n_fields": int(sw.fields.size),
        "n_freq": int(sw.frequencies.size),
        "parameters": list(sw.power),
        "power": cfg.sweep.power,
        "noise_relative": cfg.noise.relative,
        "seed": cfg.noise.seed,
        "csv_sha256": {f.name: file_digest(f) for f in files},
    }
    if "S21" in sw.spectra:
        # field where the transmission peak is most suppressed
        peak = np.array([np.max(np.abs(s.values)) for s in sw.spectra["S21"]])
        payload["field_of_deepest_s21_mt"] = float(sw.fields[int(np.argmin(peak))] * 1e3)
    if cfg.sweep.reference_mt is not None:
        kind = "S22" if "S22" in sw.spectra else "S21"
        mat = background_subtract(sw.pairs(kind), cfg.sweep.reference_mt * 1e-3, p)
        files.append(_write(out, f"background_subtracted_{kind}.txt", mat.to_columns()))
        payload["background_reference_mt"] = mat.reference_B * 1e3
    _finish("sweep", cfg, payload, files, out)
    print(f"wrote {', '.join(f.name for f in files)}")
    return EXIT_OK


def cmd_eigen(args, out: Path) -> int:
    cfg = _config(args)
    cfg.require("params", "eigen")
    base = cfg.system_params()
    eb = cfg.eigen
    B = np.linspace(eb.b_min_mt, eb.b_max_mt, eb.n_fields) * 1e-3
    items, files, failures = [], [], []
    for km in eb.kappa_m_mhz:
        p = base.with_(kappa_m=km * 1e6)
        try:
            br = eigen.branch_sweep(B, p)
        except GridError as exc:
            failures.append({"kappa_m_mhz": km, "error": str(exc)})
            continue
        sep, B_at = br.min_separation()
        files.append(_write(out, f"eigen_kappa_m_{km:g}MHz.txt", br.to_columns()))
        items.append({"kappa_m_mhz": km, "min_separation_mhz": _mhz(sep), "min_separation_over_g":
                      sep / p.g if p.g > 0 else None, "field_at_min_mt": B_at * 1e3,
                      "max_slope": br.meta.get("max_slope"), "regime": model.regime_classify(p).value})
    _finish("eigen", cfg, {"branches": items, "failures": failures}, files, out)
    for it in items:
        print(f"kappa_m {it['kappa_m_mhz']:g} MHz: min splitting {it['min_separation_mhz']:.4f} MHz ({it['regime']})")
    _report_failures(failures)
    return EXIT_DATA if failures else EXIT_OK


def _times(rb) -> np.ndarray:
    return np.linspace(0.0, rb.t_max_ns * 1e-9, rb.n_times)


def _window(rb):
    return None if rb.fit_window_ns is None else (rb.fit_window_ns[0] * 1e-9, rb.fit_window_ns[1] * 1e-9)


def cmd_ringdown(args, out: Path) -> int:
    cfg = _config(args)
    cfg.require("params", "ringdown")
    p = cfg.system_params()
    rb = cfg.ringdown
    t = _times(rb)
    items, files, failures = [], [], []
    for b_mt in rb.fields_mt:
        fp = FieldPoint.from_field(b_mt * 1e-3, p)
        trace = lindblad.synthesize_ringdown(fp, p, scale=rb.scale, offset=rb.offset, times=t,
                                             t_shift=rb.t_shift_ns * 1e-9)
        files.append(_write(out, f"ringdown_{b_mt:g}mT.txt", trace.to_columns()))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fit = lindblad.fit_lifetime(trace, fit_window=_window(rb), floor=rb.floor)
        except FitError as exc:
            failures.append({"B_mT": b_mt, "error": str(exc)})
            continue
        k_sys = model.purcell_broadening(fp, p)
        items.append({"B_mT": b_mt, "tau_ns": fit.tau * 1e9, "tau_stderr_ns": fit.tau_stderr * 1e9,
                      "rate_mhz": _mhz(fit.rate_hz), "kappa_sys_mhz": _mhz(k_sys),
                      "inv_kappa_sys_ns": 1e9 / (2 * math.pi * k_sys), "monotone": fit.monotone})
    payload = {"fits": items, "failures": failures}
    if p.kappa_c > 0 and p.kappa_m > 0:
        payload["purcell_factor"] = model.purcell_factor(p)
    _finish("ringdown", cfg, payload, files, out)
    for it in items:
        print(f"B = {it['B_mT']:g} mT: tau = {it['tau_ns']:.3f} ns (1/kappa_sys = {it['inv_kappa_sys_ns']:.3f} ns)")
    _report_failures(failures)
    return EXIT_DATA if failures else EXIT_OK


def cmd_lifetime_sweep(args, out: Path) -> int:
    cfg = _config(args)
    cfg.require("params", "lifetime")
    p = cfg.system_params()
    lb = cfg.lifetime
    B = np.linspace(lb.b_min_mt, lb.b_max_mt, lb.n_fields) * 1e-3
    opts = {}
    if cfg.ringdown is not None:
        rb = cfg.ringdown
        opts = dict(scale=rb.scale, offset=rb.offset, times=_times(rb), fit_window=_window(rb), floor=rb.floor)
    table = lindblad.lifetime_vs_field(B, p, **opts)
    files = [_write(out, "lifetime_sweep.txt", table.to_columns())]
    _finish("lifetime-sweep", cfg, table.to_dict(), files, out)
    failures = [{"B_mT": float(b * 1e3), "error": f} for b, f in zip(table.fields, table.flags)
                if f.startswith("fit-failed")]
    i = int(np.nanargmin(table.tau)) if np.any(np.isfinite(table.tau)) else None
    if i is not None:
        print(f"shortest lifetime {table.tau[i] * 1e9:.3f} ns at {table.fields[i] * 1e3:.2f} mT")
    _report_failures(failures)
    return EXIT_DATA if failures else EXIT_OK


def cmd_extract(args, out: Path) -> int:
    cfg = _config(args, required=False)
    gamma = cfg.params.gamma_over_2pi_ghz_per_t * 1e9 if cfg.params is not None else GAMMA_OVER_2PI
    # only the gyromagnetic ratio is taken from the configuration
    hint = SystemParams(omega_c=1.0, kappa_c=0.0, kappa_m=0.0, g=0.0, gamma_over_2pi=gamma)
    xb = cfg.extraction
    try:
        data = read_sweep_csv(args.input)
    except SchemaError as exc:
        raise DataError(str(exc)) from None
    sweep = reduce_sweep(data.items, residual_cap=xb.residual_cap)
    files = [_write(out, "reduced_sweep.txt", sweep.to_columns())]
    ext = extract_height_waist(sweep, hint, asymptote_factor=xb.asymptote_factor, tail_factor=xb.tail_factor,
                               extremum_window=xb.extremum_window, pole_correction=xb.pole_correction)
    row = summarize_configuration(ext)
    payload = {
        "input": {"file": Path(args.input).name, "sha256": file_digest(args.input),
                  "n_fields": len(data.items), "flagged": int((~sweep.converged).sum())},
        "extracted": ext.to_dict(),
        "table_row": row.to_text(),
    }
    if xb.least_squares_check:
        payload["least_squares"] = extract_least_squares(sweep, ext, hint).to_dict()
    _finish("extract", cfg, payload, files, out)
    print("omega_c/GHz  g/MHz  kappa_m/MHz  kappa_c/MHz  C")
    print(row.to_text())
    return EXIT_OK


def cmd_estimate_g(args, out: Path) -> int:
    if args.config is None and not args.reference_inputs:
        raise UsageError("estimate-g needs --config or --reference-inputs")
    payload: dict = {}
    if args.config is None:
        ref = MagneticEstimateInputs()
        mode = args.mode or "magnetic"
        if mode != "magnetic":
            raise UsageError("--reference-inputs only covers the magnetic estimate")
        p = SystemParams(omega_c=ref.omega_c, kappa_c=0.0, kappa_m=0.0, g=0.0, mu0_Ms=ref.mu0_Ms)
        length, radius, volume = ref.wire_length, ref.wire_radius, ref.cavity_volume
        cfg = None
        payload["inputs"] = "reference"
    else:
        cfg = _config(args)
        cfg.require("params", "estimate")
        p = cfg.system_params()
        eb = cfg.estimate
        mode = args.mode or eb.mode
        length, radius = eb.wire_length_mm * 1e-3, eb.wire_radius_um * 1e-6
        volume = float(np.prod(eb.cavity_dims_mm)) * 1e-9
        payload["inputs"] = "config"
    if mode in ("magnetic", "both"):
        N = model.spins_from_magnet(p.mu0_Ms, radius, length)
        g = model.coupling_estimate_magnetic(N, volume, p)
        payload["magnetic"] = {"spins": N, "cavity_volume_m3": volume, "g_mhz": _mhz(g)}
        print(f"magnetic antinode: g = {g / 1e6:.3f} MHz (N = {N:.3e})")
    if mode in ("electric", "both"):
        eb = cfg.estimate
        if eb.e_zpf_v_per_m is None or eb.spins_per_length_per_m is None:
            raise SchemaError("electric estimate needs e_zpf_v_per_m and spins_per_length_per_m", "estimate")
        g = model.coupling_estimate_electric(length, radius, eb.e_zpf_v_per_m, p, eb.spins_per_length_per_m)
        payload["electric"] = {"g_mhz": _mhz(g)}
        print(f"electric antinode: g = {g / 1e6:.3f} MHz")
    payload["mode"] = mode
    _finish("estimate-g", cfg, payload, [], out)
    return EXIT_OK


def cmd_verify(args, out: Path) -> int:
    results = acceptance.run_all(args.criteria)
    for r in results:
        print(r.line())
    payload = {"results": [{k: v for k, v in r.to_dict().items() if k != "values"} for r in results],
               "all_passed": all(r.passed for r in results)}
    _finish("verify", None, payload, [], out)
    return EXIT_OK if payload["all_passed"] else EXIT_DATA


def _report_failures(failures: list[dict]) -> None:
    for f in failures:
        where = ", ".join(f"{k}={v}" for k, v in f.items() if k != "error")
        print(f"failed: {where}: {f['error']}", file=sys.stderr)


COMMANDS: dict[str, tuple[Callable, str]] = {
    "spectra": (cmd_spectra, "S21/S22 at a single bias field"),
    "sweep": (cmd_sweep, "forward field sweep written as CSV"),
    "eigen": (cmd_eigen, "tracked normal-mode branches per kappa_m"),
    "ringdown": (cmd_ringdown, "synthesize and fit ringdown traces"),
    "lifetime-sweep": (cmd_lifetime_sweep, "ringdown lifetime versus bias field"),
    "extract": (cmd_extract, "height-waist extraction from a sweep CSV"),
    "estimate-g": (cmd_estimate_g, "coupling-strength estimates from geometry"),
    "verify": (cmd_verify, "run the acceptance checks"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("purcellkit-out"), help="output directory")
    common.add_argument("--seed", type=int, help="noise seed (overrides noise.seed)")
    parser = _Parser(prog="purcellkit",
                     description="Cavity magnonics in the Purcell regime: forward models, ringdown and extraction.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "extract":
            sp.add_argument("input", type=Path, help="sweep CSV (B_mT, freq_GHz, power_linear|power_db)")
        elif name == "estimate-g":
            sp.add_argument("--mode", choices=["magnetic", "electric", "both"])
            sp.add_argument("--reference-inputs", action="store_true",
                            help="use the built-in 4 mm wire / 26x8x36 mm cavity example")
        elif name == "verify":
            sp.add_argument("--criteria", type=int, nargs="+", choices=sorted(acceptance.CHECKS),
                            help="subset of criteria to run")
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    previous, warnings.showwarning = warnings.showwarning, _show_warning
    try:
        return handler(args, args.out)
    except (UsageError, SchemaError) as exc:
        print(f"purcellkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FitError, GridError, DomainError, SingularityError, FloatingPointError) as exc:
        print(f"purcellkit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"purcellkit {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        warnings.showwarning = previous


if __name__ == "__main__":
    raise SystemExit(main())
