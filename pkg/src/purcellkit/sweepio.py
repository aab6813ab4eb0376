"""Forward sweeps, the sweep CSV format and result envelopes.

CSV layout (one file per S-parameter)::

    # parameter: S21
    B_mT,freq_GHz,power_linear
    76.000000000,7.341000000000,1.234567890123e-06
    ...
    <blank line between field blocks>

The third header column is ``power_linear`` or ``power_db``. Lines starting
with ``#`` are comments. A plain long-format file without blank separators
is read the same way, grouping rows by field value.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .config import RunConfig
from .errors import GridError, SchemaError
from .model import FieldPoint, kittel_frequency, s21, s22
from .params import ComplexSpectrum, SParameter, SystemParams

POWER_COLUMNS = ("power_linear", "power_db")


def _version() -> str:
    from . import __version__

    return __version__


# -- forward sweeps ------------------------------------------------------------------


@dataclass
class ForwardSweep:
    """Model spectra on a field x frequency grid, one entry per S-parameter."""

    fields: np.ndarray
    frequencies: np.ndarray
    spectra: dict[str, list[ComplexSpectrum]]
    power: dict[str, np.ndarray]

    def pairs(self, kind: str = "S21") -> list[tuple[float, ComplexSpectrum]]:
        return list(zip(self.fields.tolist(), self.spectra[kind]))

    def power_items(self, kind: str = "S21") -> list[tuple[float, np.ndarray, np.ndarray]]:
        """``(B, frequencies, power)`` triples including any applied noise."""
        return [(float(B), self.frequencies, p) for B, p in zip(self.fields, self.power[kind])]


def sweep_grids(config: RunConfig, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Field (T) and frequency (Hz) grids described by the ``sweep`` block."""
    config.require("sweep")
    sw = config.sweep
    B = np.linspace(sw.b_min_mt, sw.b_max_mt, sw.n_fields) * 1e-3
    centre = sw.freq_center_ghz * 1e9 if sw.freq_center_ghz is not None else params.omega_c
    half = 0.5 * sw.freq_span_mhz * 1e6
    return B, np.linspace(centre - half, centre + half, sw.n_freq)


def forward_sweep(
    params: SystemParams,
    fields: Sequence[float],
    frequencies: Sequence[float],
    parameters: Iterable[str] = ("S21",),
    noise: float = 0.0,
    seed: int | None = None,
) -> ForwardSweep:
    """Evaluate S-parameters over a grid and optionally add multiplicative noise.

    Noise multiplies every |S|^2 sample by ``1 + noise * N(0, 1)``; draws are made
    field by field in parameter order, so a seed fixes the result.
    """
    B = np.asarray(fields, dtype=float)
    w = np.asarray(frequencies, dtype=float)
    if B.ndim != 1 or B.size == 0 or w.ndim != 1 or w.size == 0:
        raise GridError("field and frequency grids must be non-empty 1-D arrays")
    if noise > 0 and seed is None:
        raise SchemaError("seed is required when noise > 0", "noise.seed")
    kinds = [SParameter(k).value for k in parameters]
    rng = np.random.default_rng(seed) if noise > 0 else None
    spectra: dict[str, list[ComplexSpectrum]] = {k: [] for k in kinds}
    for b in B:
        fp = FieldPoint.from_field(float(b), params)
        for k in kinds:
            vals = s21(w, fp, params) if k == "S21" else s22(w, fp, params)
            spectra[k].append(ComplexSpectrum(w, vals, SParameter(k), B0=float(b)))
    power = {}
    for k in kinds:
        p = np.array([s.power for s in spectra[k]])
        if rng is not None:
            p = p * (1 + noise * rng.standard_normal(p.shape))
        power[k] = p
    return ForwardSweep(fields=B, frequencies=w, spectra=spectra, power=power)


def generate_sweep(config: RunConfig, out_dir: str | Path | None = None) -> tuple[ForwardSweep, list[Path]]:
    """Forward sweep for a configuration; writes one CSV per S-parameter to ``out_dir``."""
    params = config.system_params()
    B, w = sweep_grids(config, params)
    sw = forward_sweep(params, B, w, config.sweep.parameters, config.noise.relative, config.noise.seed)
    files: list[Path] = []
    if out_dir is not None:
        out = Path(out_dir)
        for k in sw.power:
            path = out / f"sweep_{k}.csv"
            write_sweep_csv(path, sw.power_items(k), power=config.sweep.power, parameter=k)
            files.append(path)
    return sw, files


# -- CSV --------------------------------------------------------------------------------


def format_sweep_csv(
    items: Iterable[tuple[float, np.ndarray, np.ndarray]],
    power: str = "linear",
    parameter: str = "S21",
) -> str:
    if power not in ("linear", "db"):
        raise ValueError("power must be 'linear' or 'db'")
    col = f"power_{power}"
    buf = io.StringIO()
    buf.write(f"# parameter: {parameter}\n")
    buf.write(f"B_mT,freq_GHz,{col}\n")
    first = True
    for B, w, p in items:
        if not first:
            buf.write("\n")
        first = False
        p = np.asarray(p, dtype=float)
        if power == "db":
            with np.errstate(divide="ignore"):
                p = 10 * np.log10(p)
        for wi, pi in zip(np.asarray(w, dtype=float), p):
            buf.write(f"{B * 1e3:.9f},{wi / 1e9:.12f},{pi:.12e}\n")
    return buf.getvalue()


def write_sweep_csv(path: str | Path, items, power: str = "linear", parameter: str = "S21") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_sweep_csv(items, power=power, parameter=parameter))
    return path


@dataclass
class SweepData:
    """Power spectra read from a sweep CSV (fields in T, frequencies in Hz)."""

    items: list[tuple[float, np.ndarray, np.ndarray]]
    power_column: str
    comments: list[str] = field(default_factory=list)

    @property
    def fields(self) -> np.ndarray:
        return np.array([it[0] for it in self.items])


def parse_sweep_csv(text: str, source: str = "<csv>") -> SweepData:
    comments: list[str] = []
    rows: list[tuple[float, float, float]] = []
    header = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = [c.strip() for c in cells]
            if len(header) != 3 or header[:2] != ["B_mT", "freq_GHz"] or header[2] not in POWER_COLUMNS:
                raise SchemaError(f"header must be B_mT,freq_GHz,power_linear|power_db; got {line!r}",
                                  f"{source}:{n}")
            continue
        if len(cells) != 3:
            raise SchemaError(f"expected 3 columns, got {len(cells)}", f"{source}:{n}")
        try:
            rows.append(tuple(float(c) for c in cells))
        except ValueError:
            raise SchemaError(f"non-numeric value in {line!r}", f"{source}:{n}") from None
    if header is None:
        raise SchemaError("missing header line", source)
    if not rows:
        raise SchemaError("no data rows", source)
    data = np.array(rows)
    power = data[:, 2] if header[2] == "power_linear" else 10 ** (data[:, 2] / 10)
    fields_mt = data[:, 0]
    items = []
    for b in np.unique(fields_mt):
        sel = fields_mt == b
        w = data[sel, 1] * 1e9
        order = np.argsort(w, kind="stable")
        items.append((float(b) * 1e-3, w[order], power[sel][order]))
    return SweepData(items=items, power_column=header[2], comments=comments)


def read_sweep_csv(path: str | Path) -> SweepData:
    path = Path(path)
    return parse_sweep_csv(path.read_text(), source=str(path))


# -- display transform --------------------------------------------------------------------


@dataclass
class DisplayMatrix:
    """``|S|(B, w) - |S|(B_ref, w)``; rows follow ``fields``, columns ``frequencies``."""

    fields: np.ndarray
    frequencies: np.ndarray
    values: np.ndarray
    reference_B: float

    def to_columns(self) -> str:
        lines = [f"# reference_B_mT {self.reference_B * 1e3:.6f}", "# B_mT freq_GHz delta_abs_S"]
        for i, B in enumerate(self.fields):
            for j, w in enumerate(self.frequencies):
                lines.append(f"{B * 1e3:.9f} {w / 1e9:.12f} {self.values[i, j]:.12e}")
            lines.append("")
        return "\n".join(lines)


def background_subtract(
    sweep: Sequence[tuple[float, ComplexSpectrum]],
    reference_B: float,
    params: SystemParams | None = None,
    min_detuning: float = 5.0,
) -> DisplayMatrix:
    """Subtract the |S| column at the sweep field nearest ``reference_B``.

    With ``params`` given, a reference closer than ``min_detuning * kappa_m`` to
    the magnon resonance triggers a warning, since the subtraction would then
    remove part of the coupling signature.
    """
    items = sorted(sweep, key=lambda it: it[0])
    if not items:
        raise GridError("empty sweep")
    B = np.array([it[0] for it in items], dtype=float)
    w = items[0][1].frequencies
    if any(it[1].frequencies.shape != w.shape or not np.array_equal(it[1].frequencies, w) for it in items):
        raise GridError("all spectra must share one frequency grid")
    if not B[0] <= reference_B <= B[-1]:
        raise GridError(f"reference field {reference_B} T lies outside the sweep")
    i_ref = int(np.argmin(np.abs(B - reference_B)))
    mag = np.array([np.abs(it[1].values) for it in items])
    if params is not None and params.kappa_m > 0:
        delta = kittel_frequency(B[i_ref], params) - params.omega_c
        if abs(delta) < min_detuning * params.kappa_m:
            warnings.warn(
                f"reference field {B[i_ref] * 1e3:.1f} mT is only {abs(delta) / params.kappa_m:.2f} "
                "kappa_m from resonance", RuntimeWarning, stacklevel=2)
    return DisplayMatrix(fields=B, frequencies=w, values=mag - mag[i_ref], reference_B=float(B[i_ref]))


# -- result envelopes -----------------------------------------------------------------------


def payload_text(payload: Any) -> str:
    """Stable, human-readable JSON for a task payload."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ResultEnvelope:
    task: str
    config_hash: str
    version: str
    timestamp: str
    payload: dict
    files: dict[str, str] = field(default_factory=dict)

    @classmethod
    def create(cls, task: str, config: RunConfig | None, payload: dict, files: Iterable[Path] = ()):
        chash = config.config_hash() if config is not None else hashlib.sha256(b"{}").hexdigest()
        return cls(task=task, config_hash=chash, version=_version(),
                   timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                   payload=payload, files={Path(p).name: file_digest(p) for p in files})

    def to_dict(self) -> dict:
        return {"task": self.task, "config_hash": self.config_hash, "version": self.version,
                "timestamp": self.timestamp, "payload": self.payload, "files": dict(self.files)}

    def to_json(self) -> str:
        return payload_text(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ResultEnvelope":
        doc = json.loads(text)
        keys = {"task", "config_hash", "version", "timestamp", "payload", "files"}
        if set(doc) != keys:
            raise SchemaError(f"envelope keys must be {sorted(keys)}", "envelope")
        return cls(**doc)

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write ``<task>.payload.json`` (deterministic) and ``<task>.envelope.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        p_path = out / f"{self.task}.payload.json"
        p_path.write_text(payload_text(self.payload))
        self.files[p_path.name] = file_digest(p_path)
        e_path = out / f"{self.task}.envelope.json"
        e_path.write_text(self.to_json())
        return p_path, e_path

