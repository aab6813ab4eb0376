"""System parameterization of the two-mode cavity-magnon model.

All frequencies and rates are cyclic (Hz). Only the time-domain module
converts to angular units, and it does so in exactly one place.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, SchemaError

#: Default gyromagnetic ratio gamma/2pi for a free-electron g-factor of 2 (Hz/T).
GAMMA_OVER_2PI = 28.0e9


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the coupled cavity-magnon model.

    Parameters
    ----------
    omega_c : float
        Bare cavity resonance (Hz).
    kappa_c : float
        Total cavity decay rate, internal plus external (Hz).
    kappa_m : float
        Magnon decay rate (Hz).
    g : float
        Cavity-magnon coupling strength (Hz).
    kappa_1_ex, kappa_2_ex : float
        External coupling rates of the input and output ports (Hz).
    gamma_over_2pi : float
        Gyromagnetic ratio (Hz/T).
    mu0_Ms : float
        Saturation magnetization expressed as mu0*Ms (T).
    """

    omega_c: float
    kappa_c: float
    kappa_m: float
    g: float
    kappa_1_ex: float = 0.0
    kappa_2_ex: float = 0.0
    gamma_over_2pi: float = GAMMA_OVER_2PI
    mu0_Ms: float = 0.84

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise DomainError(f"{name} must be >= 0, got {value!r}")
        if self.omega_c <= 0:
            raise DomainError("omega_c must be > 0")
        # relative slack keeps round-tripped JSON values valid
        if self.kappa_1_ex + self.kappa_2_ex > self.kappa_c * (1 + 1e-12):
            raise DomainError(
                "external port rates exceed the total cavity decay rate: "
                f"{self.kappa_1_ex} + {self.kappa_2_ex} > {self.kappa_c}"
            )

    def with_(self, **changes: float) -> "SystemParams":
        """Return a copy with some fields replaced (revalidated)."""
        return replace(self, **changes)

    def scaled(self, s: float) -> "SystemParams":
        """Multiply all rates (not omega_c) by ``s``."""
        return replace(
            self,
            kappa_c=self.kappa_c * s,
            kappa_m=self.kappa_m * s,
            g=self.g * s,
            kappa_1_ex=self.kappa_1_ex * s,
            kappa_2_ex=self.kappa_2_ex * s,
        )

    # -- JSON -----------------------------------------------------------

    def to_json_dict(self) -> dict[str, float]:
        return {key: getattr(self, attr) / scale for key, (attr, scale) in _JSON_KEYS.items()}

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any], path: str = "params") -> "SystemParams":
        if not isinstance(doc, Mapping):
            raise SchemaError("expected an object", path)
        unknown = sorted(set(doc) - set(_JSON_KEYS))
        if unknown:
            raise SchemaError(f"unknown key(s) {unknown}", f"{path}.{unknown[0]}")
        missing = [k for k in _REQUIRED_KEYS if k not in doc]
        if missing:
            raise SchemaError(f"missing required key(s) {missing}", f"{path}.{missing[0]}")
        kwargs = {}
        for key, value in doc.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"expected a number, got {value!r}", f"{path}.{key}")
            attr, scale = _JSON_KEYS[key]
            kwargs[attr] = float(value) * scale
        try:
            return cls(**kwargs)
        except DomainError as exc:
            raise SchemaError(str(exc), path) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SystemParams":
        return cls.from_json_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "SystemParams":
        return cls.loads(Path(path).read_text())


# json key -> (attribute, multiplier to SI)
_JSON_KEYS: dict[str, tuple[str, float]] = {
    "omega_c_ghz": ("omega_c", 1e9),
    "kappa_c_mhz": ("kappa_c", 1e6),
    "kappa_m_mhz": ("kappa_m", 1e6),
    "g_mhz": ("g", 1e6),
    "kappa_1_ex_khz": ("kappa_1_ex", 1e3),
    "kappa_2_ex_khz": ("kappa_2_ex", 1e3),
    "gamma_over_2pi_ghz_per_t": ("gamma_over_2pi", 1e9),
    "mu0_ms_t": ("mu0_Ms", 1.0),
}
_REQUIRED_KEYS = ("omega_c_ghz", "kappa_c_mhz", "kappa_m_mhz", "g_mhz")


class RegimeLabel(str, enum.Enum):
    PURCELL = "Purcell"
    STRONG_COUPLING = "StrongCoupling"
    MAGNETICALLY_INDUCED_TRANSPARENCY = "MagneticallyInducedTransparency"
    INTERMEDIATE = "Intermediate"


class SParameter(str, enum.Enum):
    S21 = "S21"
    S22 = "S22"


@dataclass(frozen=True)
class ComplexSpectrum:
    """Complex S-parameter values on a strictly increasing frequency grid (Hz)."""

    frequencies: np.ndarray
    values: np.ndarray
    kind: SParameter = SParameter.S21
    B0: float | None = field(default=None, compare=False)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if f.ndim != 1 or f.shape != v.shape:
            raise DomainError("frequencies and values must be 1-D arrays of equal length")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise DomainError("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("spectrum values must be finite")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", SParameter(self.kind))

    @property
    def power(self) -> np.ndarray:
        """|S|^2 on the grid."""
        return np.abs(self.values) ** 2
