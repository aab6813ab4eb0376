"""Closed-form frequency-domain physics of the cavity-magnon system.

Everything here is in cyclic units (Hz). The S-parameter and Purcell
expressions are homogeneous in the rates, so no 2*pi conversion is needed;
the coupling estimators convert explicitly where physical constants enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import constants

from .errors import DomainError, SingularityError
from .params import RegimeLabel, SystemParams

ArrayLike = Union[float, np.ndarray]

MU0 = constants.mu_0
HBAR = constants.hbar
EPS0 = constants.epsilon_0
MU_B = constants.physical_constants["Bohr magneton"][0]


# -- Kittel relation ------------------------------------------------------------


def kittel_frequency(B0: ArrayLike, params: SystemParams) -> ArrayLike:
    """Kittel-mode frequency (Hz) of the axially saturated wire at bias ``B0`` (T)."""
    B = np.asarray(B0, dtype=float)
    if np.any(B < 0):
        raise DomainError("B0 must be >= 0 (only the saturated state is modelled)")
    f = params.gamma_over_2pi * np.sqrt(B * (B + params.mu0_Ms))
    return float(f) if f.ndim == 0 else f


def kittel_field(omega_m: ArrayLike, params: SystemParams) -> ArrayLike:
    """Inverse of :func:`kittel_frequency`: the bias field (T) giving ``omega_m`` (Hz)."""
    w = np.asarray(omega_m, dtype=float)
    if np.any(w < 0):
        raise DomainError("omega_m must be >= 0")
    half = 0.5 * params.mu0_Ms
    x = w / params.gamma_over_2pi
    # x^2 / (half + sqrt(half^2 + x^2)) avoids cancellation at small fields
    with np.errstate(invalid="ignore", divide="ignore"):
        B = np.where(x == 0, 0.0, x * x / (half + np.sqrt(half * half + x * x)))
    return float(B) if B.ndim == 0 else B


@dataclass(frozen=True)
class FieldPoint:
    """Bias field and the derived magnon frequency and detuning.

    ``B0`` is ``None`` when the point was specified by detuning only. All three
    fields may be numpy arrays of a common shape for vectorized evaluation.
    """

    B0: ArrayLike | None
    omega_m: ArrayLike
    delta: ArrayLike

    @classmethod
    def from_field(cls, B0: ArrayLike, params: SystemParams) -> "FieldPoint":
        wm = kittel_frequency(B0, params)
        return cls(B0=B0, omega_m=wm, delta=wm - params.omega_c)

    @classmethod
    def from_detuning(cls, delta: ArrayLike, params: SystemParams) -> "FieldPoint":
        wm = params.omega_c + np.asarray(delta, dtype=float)
        wm = float(wm) if wm.ndim == 0 else wm
        return cls(B0=None, omega_m=wm, delta=delta)

    @classmethod
    def from_magnon_frequency(cls, omega_m: ArrayLike, params: SystemParams) -> "FieldPoint":
        B0 = kittel_field(omega_m, params) if np.all(np.asarray(omega_m) >= 0) else None
        return cls(B0=B0, omega_m=omega_m, delta=np.asarray(omega_m) - params.omega_c)


def _require_magnon_loss(params: SystemParams) -> None:
    if params.g > 0 and params.kappa_m <= 0:
        raise DomainError("kappa_m must be > 0 when g > 0")


# -- S-parameters -------------------------------------------------------------------


def s21(omega: ArrayLike, field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Complex transmission from input-output theory."""
    _require_magnon_loss(params)
    w = np.asarray(omega, dtype=float)
    denom = 1j * (w - params.omega_c) - 0.5 * params.kappa_c
    if params.g > 0:
        denom = denom + params.g**2 / (1j * (w - field.omega_m) - 0.5 * params.kappa_m)
    if np.any(denom == 0):
        raise SingularityError("S21 denominator vanishes (lossless mode on resonance)")
    out = math.sqrt(params.kappa_1_ex * params.kappa_2_ex) / denom
    return complex(out) if np.ndim(out) == 0 else out


def s22(omega: ArrayLike, field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Complex reflection at the output port, ``1 + sqrt(k2/k1) * S21``."""
    if params.kappa_1_ex <= 0:
        raise SingularityError("S22 needs kappa_1_ex > 0")
    return 1 + math.sqrt(params.kappa_2_ex / params.kappa_1_ex) * s21(omega, field, params)


# -- Purcell-regime perturbation ----------------------------------------------------


def _lorentz_denominator(field: FieldPoint, params: SystemParams) -> ArrayLike:
    if params.kappa_m <= 0:
        if params.g > 0:
            raise DomainError("kappa_m must be > 0 for the Purcell expressions")
        return np.inf
    return np.asarray(field.delta, dtype=float) ** 2 + (0.5 * params.kappa_m) ** 2


def purcell_shift(field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Dressed cavity frequency omega_sys (Hz)."""
    d = np.asarray(field.delta, dtype=float)
    out = params.omega_c - params.g**2 * d / _lorentz_denominator(field, params)
    return float(out) if np.ndim(out) == 0 else out


def purcell_broadening(field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Dressed cavity linewidth kappa_sys (Hz)."""
    den = _lorentz_denominator(field, params)
    out = params.kappa_c + params.g**2 * params.kappa_m / den
    out = np.broadcast_to(out, np.shape(field.delta)) if np.ndim(out) == 0 else out
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def cooperativity(params: SystemParams) -> float:
    """C = 4 g^2 / (kappa_m kappa_c)."""
    if params.kappa_m <= 0 or params.kappa_c <= 0:
        raise SingularityError("cooperativity needs kappa_m > 0 and kappa_c > 0")
    return 4 * params.g**2 / (params.kappa_m * params.kappa_c)


def purcell_factor(params: SystemParams) -> float:
    """Enhancement of the cavity decay rate on resonance, 1 + C."""
    return 1.0 + cooperativity(params)


def regime_classify(params: SystemParams, dominance: float = 5.0) -> RegimeLabel:
    """Label the coupling regime, reading each ">>" as "at least ``dominance`` times"."""
    if dominance <= 1:
        raise DomainError("dominance must be > 1")
    g, kc, km = params.g, params.kappa_c, params.kappa_m
    if km >= dominance * g and g >= dominance * kc:
        return RegimeLabel.PURCELL
    if kc >= dominance * g and g >= dominance * km:
        return RegimeLabel.MAGNETICALLY_INDUCED_TRANSPARENCY
    if g >= dominance * kc and g >= dominance * km:
        return RegimeLabel.STRONG_COUPLING
    return RegimeLabel.INTERMEDIATE


# -- Density of states / golden rule ------------------------------------------------


def dos_lorentzian(E: ArrayLike, field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Lorentzian magnon density of states (1/J) at energy ``E`` (J).

    Centered at hbar*omega_m with half-width hbar*kappa_m/2, angular units.
    """
    if params.kappa_m <= 0:
        raise DomainError("kappa_m must be > 0")
    w = np.asarray(E, dtype=float) / HBAR
    wm = 2 * np.pi * np.asarray(field.omega_m, dtype=float)
    half = np.pi * params.kappa_m
    out = half / ((wm - w) ** 2 + half**2) / (np.pi * HBAR)
    return float(out) if np.ndim(out) == 0 else out


def golden_rule_rate(field: FieldPoint, params: SystemParams) -> ArrayLike:
    """Cavity-to-magnon transfer rate (Hz) from Fermi's golden rule.

    Reproduces the excess term of :func:`purcell_broadening`.
    """
    g_ang = 2 * np.pi * params.g
    rate = 2 * np.pi * g_ang**2 * HBAR * dos_lorentzian(HBAR * 2 * np.pi * params.omega_c, field, params)
    return rate / (2 * np.pi)


# -- Coupling estimators -------------------------------------------------------------


def spins_from_magnet(mu0_Ms: float, radius: float, length: float) -> float:
    """Number of Bohr-magneton spins in a cylinder of saturation ``mu0_Ms`` (T)."""
    if mu0_Ms < 0 or radius < 0 or length < 0:
        raise DomainError("mu0_Ms, radius and length must be >= 0")
    return (mu0_Ms / MU0) * (np.pi * radius**2 * length) / MU_B


def coupling_estimate_magnetic(N: float, cavity_volume: float, params: SystemParams) -> float:
    """Dipolar coupling g (Hz) of N spins at the cavity magnetic antinode.

    g = (gamma/2pi) * sqrt(mu0 hbar w_c N / V), with w_c = 2pi*omega_c angular
    inside the zero-point field.
    """
    if N < 0:
        raise DomainError("N must be >= 0")
    if cavity_volume <= 0:
        raise DomainError("cavity_volume must be > 0")
    b_zpf = math.sqrt(MU0 * HBAR * 2 * math.pi * params.omega_c / cavity_volume)
    return params.gamma_over_2pi * b_zpf * math.sqrt(N)


def coupling_estimate_electric(
    L: float,
    R: float,
    E_zpf: float,
    params: SystemParams,
    spins_per_length: float,
) -> float:
    """Antenna-driven coupling estimate (Hz) for a wire at the electric antinode.

    The axial current induced by the zero-point field produces a circumferential
    field ``mu0 eps0 w_c E_zpf L^2 / (2 pi R)``; the spin count grows as
    ``spins_per_length * L``, so g scales as L^(5/2)/R. Order of magnitude only.
    """
    if L <= 0 or R <= 0 or E_zpf <= 0:
        raise DomainError("L, R and E_zpf must be > 0")
    if spins_per_length < 0:
        raise DomainError("spins_per_length must be >= 0")
    w_c = 2 * math.pi * params.omega_c
    b_drive = MU0 * EPS0 * w_c * E_zpf * L**2 / (2 * math.pi * R)
    return params.gamma_over_2pi * b_drive * math.sqrt(spins_per_length * L)
