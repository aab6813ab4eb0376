"""Complex eigenfrequencies of the dissipative two-mode system.

Modes are written as ``omega - i*Gamma`` with half-linewidths
``Gamma = kappa/2``. The reduced secular problem is the eigenvalue problem of

    [[omega_m - i*Gamma_m, g], [g, omega_c - i*Gamma_c]]

and everything in this module is cyclic (Hz).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GridError
from .model import FieldPoint, kittel_frequency
from .params import SystemParams


@dataclass(frozen=True)
class ComplexMode:
    """One normal mode: real frequency and positive half-linewidth (Hz)."""

    omega: float
    gamma_half: float

    @property
    def complex(self) -> complex:
        return complex(self.omega, -self.gamma_half)

    @classmethod
    def from_complex(cls, value: complex) -> "ComplexMode":
        return cls(float(np.real(value)), float(-np.imag(value)))


@dataclass(frozen=True)
class ZDecomposition:
    """Auxiliary z = 4g^2 + [omega_c - omega_m - i(Gamma_c - Gamma_m)]^2 (Hz^2)."""

    z: complex
    abs_z: float
    re_z: float
    im_z: float

    @property
    def sign_im(self) -> float:
        # Im z == 0 only on degenerate lines; +1 fixes the branch there
        return 1.0 if self.im_z >= 0 else -1.0


def _half_widths(params: SystemParams) -> tuple[float, float]:
    return 0.5 * params.kappa_c, 0.5 * params.kappa_m


def reduced_matrix(field: FieldPoint, params: SystemParams) -> np.ndarray:
    """The 2x2 complex matrix whose eigenvalues are the normal modes."""
    gc, gm = _half_widths(params)
    return np.array(
        [
            [field.omega_m - 1j * gm, params.g],
            [params.g, params.omega_c - 1j * gc],
        ],
        dtype=complex,
    )


def exact_eigenfrequencies(field: FieldPoint, params: SystemParams) -> tuple[ComplexMode, ComplexMode]:
    """Both roots of the reduced secular problem.

    The first mode takes the ``+`` sign in front of the principal square root.
    Sums and offsets are formed relative to omega_c so that GHz carriers do not
    swamp MHz rates.
    """
    gc, gm = _half_widths(params)
    delta = float(field.delta)
    half_sum = 0.5 * delta - 0.5j * (gc + gm)
    z = z_decomposition(field, params).z
    root = 0.5 * np.sqrt(z)
    lam1 = params.omega_c + half_sum + root
    lam2 = params.omega_c + half_sum - root
    return ComplexMode.from_complex(lam1), ComplexMode.from_complex(lam2)


def z_decomposition(field: FieldPoint, params: SystemParams) -> ZDecomposition:
    gc, gm = _half_widths(params)
    z = 4 * params.g**2 + (-float(field.delta) - 1j * (gc - gm)) ** 2
    # signed zero would flip the principal root on the cut; pin it to +0
    z = complex(z.real, z.imag if z.imag != 0 else 0.0)
    return ZDecomposition(z=z, abs_z=abs(z), re_z=z.real, im_z=z.imag)


def split_eigen_real_imag(
    field: FieldPoint, params: SystemParams
) -> tuple[ComplexMode, ComplexMode, ZDecomposition]:
    """Normal modes from explicit real/imaginary formulas in terms of z.

    omega_{1,2} = [(w_c + w_m) +- sqrt((|z| + Re z)/2)] / 2
    Gamma_{1,2} = [(G_c + G_m) -+ sgn(Im z) sqrt((|z| - Re z)/2)] / 2
    """
    gc, gm = _half_widths(params)
    zd = z_decomposition(field, params)
    # the smaller of |z| +- Re z is rebuilt as Im(z)^2 / (larger) to avoid cancellation
    if zd.re_z >= 0:
        plus = zd.abs_z + zd.re_z
        minus = zd.im_z**2 / plus if plus > 0 else 0.0
    else:
        minus = zd.abs_z - zd.re_z
        plus = zd.im_z**2 / minus if minus > 0 else 0.0
    re_root = np.sqrt(plus / 2)
    im_root = zd.sign_im * np.sqrt(minus / 2)
    mid_omega = params.omega_c + 0.5 * float(field.delta)
    mid_gamma = 0.5 * (gc + gm)
    m1 = ComplexMode(mid_omega + 0.5 * re_root, mid_gamma - 0.5 * im_root)
    m2 = ComplexMode(mid_omega - 0.5 * re_root, mid_gamma + 0.5 * im_root)
    return m1, m2, zd


def purcell_expansion(
    field: FieldPoint, params: SystemParams, neglect_cavity_width: bool = False
) -> tuple[ComplexMode, ComplexMode]:
    """Second-order-in-g expansion of the normal modes for Gamma_m > Gamma_c.

    Returned in the same ``(+, -)`` order as :func:`split_eigen_real_imag`:

        omega_{1,2} = (w_c + w_m)/2 +- |D| (1/2 + g^2 / (D^2 + W^2))
        Gamma_{1,2} = (G_c + G_m)/2 +- sgn(D) ((G_m - G_c)/2 - W g^2 / (D^2 + W^2))

    with ``W = Gamma_m - Gamma_c``, which makes the error O(g^4), and sgn(0)
    taken as -1. With
    ``neglect_cavity_width`` the width ``W`` is replaced by ``Gamma_m``; the
    cavity-like branch then coincides exactly with
    :func:`~purcellkit.model.purcell_shift` and half of
    :func:`~purcellkit.model.purcell_broadening`, at the price of an O(g^2 G_c)
    error.
    """
    gc, gm = _half_widths(params)
    if not gm > gc:
        raise DomainError(
            "purcell_expansion needs kappa_m > kappa_c; use exact_eigenfrequencies instead"
        )
    width = gm if neglect_cavity_width else gm - gc
    delta = float(field.delta)
    # delta = 0 sides with delta < 0, matching the Im z = 0 tie of the exact split
    sgn = 1.0 if delta > 0 else -1.0
    frac = params.g**2 / (delta**2 + width**2)
    mid_omega = params.omega_c + 0.5 * delta
    mid_gamma = 0.5 * (gc + gm)
    d_omega = abs(delta) * (0.5 + frac)
    d_gamma = sgn * (0.5 * (gm - gc) - width * frac)
    return (
        ComplexMode(mid_omega + d_omega, mid_gamma + d_gamma),
        ComplexMode(mid_omega - d_omega, mid_gamma - d_gamma),
    )


def cavity_like(modes: tuple[ComplexMode, ComplexMode], delta: float) -> ComplexMode:
    """Pick the cavity-like member of an ordered ``(+, -)`` pair.

    Below resonance (delta < 0) the magnon sits below the cavity, so the cavity
    is the ``+`` branch; above resonance it switches to the ``-`` branch. Exactly
    on resonance the ``+`` branch is taken, consistent with the sign convention
    of :func:`split_eigen_real_imag`.
    """
    return modes[0] if delta <= 0 else modes[1]


def quartic_roots(field: FieldPoint, params: SystemParams) -> tuple[ComplexMode, ComplexMode]:
    """Physical roots of the full classical-oscillator secular equation.

    det [[w^2 - w_m^2 + i w k_m, 2 g w_m], [2 g w_c, w^2 - w_c^2 + i w k_c]] = 0

    Used only as a validation oracle for the reduced 2x2 problem. Roots are
    computed in units of omega_c and the two with positive real part are
    returned, magnon-like first.
    """
    s = params.omega_c
    wc, wm = 1.0, float(field.omega_m) / s
    kc, km, g = params.kappa_c / s, params.kappa_m / s, params.g / s
    p_m = np.array([1.0, 1j * km, -(wm**2)])
    p_c = np.array([1.0, 1j * kc, -(wc**2)])
    poly = np.polymul(p_m, p_c)
    poly[-1] -= 4 * g**2 * wm * wc
    roots = np.roots(poly)
    phys = roots[roots.real > 0]
    if phys.size != 2:
        raise DomainError("could not isolate two physical quartic roots")
    # magnon-like root is the one closer to the bare magnon pole
    bare_m = wm - 0.5j * km
    phys = sorted(phys, key=lambda r: abs(r - bare_m))
    return ComplexMode.from_complex(phys[0] * s), ComplexMode.from_complex(phys[1] * s)


# -- branch tracking -------------------------------------------------------------


@dataclass
class EigenBranch:
    """Two continuously tracked normal-mode branches along a field sweep.

    ``modes_upper`` is the branch that starts as the higher-frequency mode at
    the most negative detuning; continuity decides the labels afterwards.
    """

    fields: np.ndarray
    detunings: np.ndarray
    modes_upper: list[ComplexMode]
    modes_lower: list[ComplexMode]
    omega_c: float
    omega_m: np.ndarray
    meta: dict = field(default_factory=dict)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {
            "omega_1": np.array([m.omega for m in self.modes_upper]),
            "gamma_1": np.array([m.gamma_half for m in self.modes_upper]),
            "omega_2": np.array([m.omega for m in self.modes_lower]),
            "gamma_2": np.array([m.gamma_half for m in self.modes_lower]),
        }

    def separation(self) -> np.ndarray:
        a = self.as_arrays()
        return np.abs(a["omega_1"] - a["omega_2"])

    def min_separation(self) -> tuple[float, float]:
        """Smallest real-part splitting (Hz) and the field (T) where it occurs."""
        sep = self.separation()
        i = int(np.argmin(sep))
        return float(sep[i]), float(self.fields[i])

    def to_columns(self) -> str:
        """Whitespace-separated columns B, omega_1, Gamma_1, omega_2, Gamma_2, omega_c, omega_m."""
        a = self.as_arrays()
        lines = ["# B_T omega_1_Hz gamma_1_Hz omega_2_Hz gamma_2_Hz omega_c_Hz omega_m_Hz"]
        for i, B in enumerate(self.fields):
            row = (B, a["omega_1"][i], a["gamma_1"][i], a["omega_2"][i], a["gamma_2"][i],
                   self.omega_c, self.omega_m[i])
            lines.append(" ".join(f"{v:.12e}" for v in row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        sep, B_at = self.min_separation()
        return {"min_separation_hz": sep, "field_at_min_t": B_at, "n_points": int(len(self.fields)),
                **self.meta}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def branch_sweep(B_grid: Sequence[float], params: SystemParams, slope_bound: float = 5.0) -> EigenBranch:
    """Exact modes along a Kittel-mapped field sweep, tracked by continuation.

    Each new pair is matched to a linear prediction from the previous two
    points. A step whose eigenvalue change exceeds ``slope_bound`` times the
    detuning step is treated as a lost track.
    """
    B = np.asarray(B_grid, dtype=float)
    if B.ndim != 1 or B.size < 2:
        raise GridError("B_grid needs at least two points")
    if not np.all(np.diff(B) > 0):
        raise GridError("B_grid must be strictly increasing")
    wm = np.asarray(kittel_frequency(B, params))
    delta = wm - params.omega_c

    raw = []
    for d in delta:
        m1, m2 = exact_eigenfrequencies(FieldPoint(B0=None, omega_m=params.omega_c + d, delta=d), params)
        raw.append((m1.complex, m2.complex))

    first = sorted(raw[0], key=lambda c: -c.real)
    upper, lower = [first[0]], [first[1]]
    max_slope = 0.0
    for i in range(1, len(raw)):
        if i >= 2:
            pu, pl = 2 * upper[-1] - upper[-2], 2 * lower[-1] - lower[-2]
        else:
            pu, pl = upper[-1], lower[-1]
        a, b = raw[i]
        keep = abs(a - pu) + abs(b - pl)
        swap = abs(b - pu) + abs(a - pl)
        nu, nl = (a, b) if keep <= swap else (b, a)
        step = max(abs(delta[i] - delta[i - 1]), 1e-12 * params.omega_c)
        jump = max(abs(nu - upper[-1]), abs(nl - lower[-1]))
        # a steep step is only fatal when the pairing itself is uncertain
        ambiguous = min(keep, swap) > 0.5 * max(keep, swap)
        if jump > slope_bound * step and ambiguous:
            raise GridError(
                f"branch continuation lost between B={B[i-1]:.6g} T and B={B[i]:.6g} T "
                f"(jump {jump:.3g} Hz over detuning step {step:.3g} Hz); refine the grid"
            )
        max_slope = max(max_slope, jump / step)
        upper.append(nu)
        lower.append(nl)

    return EigenBranch(
        fields=B,
        detunings=delta,
        modes_upper=[ComplexMode.from_complex(c) for c in upper],
        modes_lower=[ComplexMode.from_complex(c) for c in lower],
        omega_c=params.omega_c,
        omega_m=wm,
        meta={"g_hz": params.g, "kappa_c_hz": params.kappa_c, "kappa_m_hz": params.kappa_m,
              "max_slope": max_slope},
    )
