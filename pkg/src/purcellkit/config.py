"""Run configuration: one JSON document with unit-suffixed keys drives every task.

Blocks are optional at the document level, but a task refuses to run when a
block it needs is missing; nothing is silently filled in at block level.
Fields inside a block may have defaults, and the fully expanded configuration
(defaults included) is what gets hashed and recorded with each result.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import SchemaError
from .params import SystemParams


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class ParamsBlock(_Block):
    omega_c_ghz: float
    kappa_c_mhz: float
    kappa_m_mhz: float
    g_mhz: float
    kappa_1_ex_khz: float = 0.0
    kappa_2_ex_khz: float = 0.0
    gamma_over_2pi_ghz_per_t: float = 28.0
    mu0_ms_t: float = 0.84

    def to_params(self) -> SystemParams:
        return SystemParams.from_json_dict(self.model_dump(), path="params")


class _FieldRange(_Block):
    b_min_mt: float
    b_max_mt: float
    n_fields: int = Field(ge=2)

    @model_validator(mode="after")
    def _range(self):
        if not self.b_max_mt > self.b_min_mt:
            raise ValueError("b_max_mt must exceed b_min_mt")
        if self.b_min_mt < 0:
            raise ValueError("b_min_mt must be >= 0")
        return self


class SweepBlock(_FieldRange):
    freq_center_ghz: Optional[float] = None
    freq_span_mhz: float = Field(gt=0)
    n_freq: int = Field(ge=7)
    parameters: list[Literal["S21", "S22"]] = Field(default_factory=lambda: ["S21"], min_length=1)
    power: Literal["linear", "db"] = "linear"
    reference_mt: Optional[float] = None


class NoiseBlock(_Block):
    relative: float = Field(default=0.0, ge=0)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _seed(self):
        if self.relative > 0 and self.seed is None:
            raise ValueError("seed is required when relative noise is > 0")
        return self


class SpectraBlock(_Block):
    b_mt: float = Field(ge=0)
    freq_center_ghz: Optional[float] = None
    freq_span_mhz: float = Field(gt=0)
    n_freq: int = Field(ge=7)


class RingdownBlock(_Block):
    fields_mt: list[float] = Field(min_length=1)
    t_max_ns: float = Field(default=1000.0, gt=0)
    n_times: int = Field(default=1001, ge=11)
    scale: float = Field(default=1.0, gt=0)
    offset: float = 0.0
    t_shift_ns: float = Field(default=0.0, ge=0)
    fit_window_ns: Optional[list[float]] = Field(default=None, min_length=2, max_length=2)
    floor: float = Field(default=0.0, ge=0)


class LifetimeBlock(_FieldRange):
    pass


class ExtractionBlock(_Block):
    asymptote_factor: float = Field(default=3.0, gt=0)
    tail_factor: float = Field(default=3.0, gt=0)
    extremum_window: Optional[float] = Field(default=None, gt=0)
    pole_correction: bool = True
    residual_cap: float = Field(default=0.2, gt=0)
    least_squares_check: bool = False


class EigenBlock(_FieldRange):
    kappa_m_mhz: list[float] = Field(min_length=1)


class EstimateBlock(_Block):
    mode: Literal["magnetic", "electric", "both"] = "both"
    wire_length_mm: float = Field(gt=0)
    wire_radius_um: float = Field(gt=0)
    cavity_dims_mm: list[float] = Field(min_length=3, max_length=3)
    e_zpf_v_per_m: Optional[float] = Field(default=None, gt=0)
    spins_per_length_per_m: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _electric_inputs(self):
        if self.mode != "magnetic" and (self.e_zpf_v_per_m is None or self.spins_per_length_per_m is None):
            raise ValueError("electric estimate needs e_zpf_v_per_m and spins_per_length_per_m")
        if min(self.cavity_dims_mm) <= 0:
            raise ValueError("cavity dimensions must be > 0")
        return self


class RunConfig(_Block):
    params: Optional[ParamsBlock] = None
    sweep: Optional[SweepBlock] = None
    noise: NoiseBlock = Field(default_factory=NoiseBlock)
    spectra: Optional[SpectraBlock] = None
    ringdown: Optional[RingdownBlock] = None
    lifetime: Optional[LifetimeBlock] = None
    extraction: ExtractionBlock = Field(default_factory=ExtractionBlock)
    eigen: Optional[EigenBlock] = None
    estimate: Optional[EstimateBlock] = None

    def require(self, *names: str) -> None:
        """Raise :class:`SchemaError` naming the first missing block."""
        for name in names:
            if getattr(self, name) is None:
                raise SchemaError("block is required for this task", name)

    def system_params(self) -> SystemParams:
        self.require("params")
        return self.params.to_params()

    def canonical(self) -> str:
        return canonical_json(self.model_dump(mode="json"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def canonical_json(doc: Any) -> str:
    """Compact, key-sorted JSON text; the basis of hashes and byte comparisons."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _schema_error(exc: ValidationError) -> SchemaError:
    err = exc.errors()[0]
    path = ".".join(str(p) for p in err["loc"]) or "config"
    return SchemaError(err["msg"], path)


def parse_config(doc: Any, seed: int | None = None) -> RunConfig:
    """Validate a decoded JSON document; ``seed`` overrides ``noise.seed``."""
    if not isinstance(doc, dict):
        raise SchemaError("expected a JSON object", "config")
    if seed is not None:
        doc = {**doc, "noise": {**doc.get("noise", {}), "seed": seed}}
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise _schema_error(exc) from None
    if cfg.params is not None:
        cfg.params.to_params()
    return cfg


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", "config") from None
    return parse_config(doc, seed=seed)


def params_block(params: SystemParams) -> dict:
    """JSON ``params`` block describing ``params``."""
    return params.to_json_dict()
