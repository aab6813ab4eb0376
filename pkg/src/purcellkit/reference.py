"""Published measurement configurations used as fixtures and reference values.

Rates are cyclic (Hz). ``printed_c`` is the cooperativity as listed, kept at its
printed precision so that rounding comparisons stay honest.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import SystemParams

#: External port rates of the rectangular cavity (Hz).
KAPPA_1_EX = 5.8e3
KAPPA_2_EX = 540e3

#: Saturation magnetization from the Kittel fits, room temperature and 7 mK (T).
MU0_MS_ROOM = 0.84
MU0_MS_COLD = 1.19

#: Ringdown Purcell factor measured as tau(0) / tau(resonance).
MEASURED_PURCELL_FACTOR = 2.4

#: Resonance fields read off the room-temperature and 7 mK sweeps (T).
RESONANCE_FIELD_ROOM = 76e-3
RESONANCE_FIELD_COLD = 53e-3

#: Field used for the off-resonant display subtraction (T).
OFF_RESONANT_FIELD = 345e-3


@dataclass(frozen=True)
class ReferenceRow:
    label: str
    omega_c: float
    g: float
    kappa_m: float
    kappa_c: float
    printed_c: float
    printed_c_digits: int
    wire_length: float
    mu0_Ms: float = MU0_MS_ROOM

    def params(self, with_ports: bool = True) -> SystemParams:
        ports = dict(kappa_1_ex=KAPPA_1_EX, kappa_2_ex=KAPPA_2_EX) if with_ports else {}
        return SystemParams(omega_c=self.omega_c, kappa_c=self.kappa_c, kappa_m=self.kappa_m,
                            g=self.g, mu0_Ms=self.mu0_Ms, **ports)


def _row(label, wc_ghz, g_mhz, km_mhz, kc_mhz, c, digits, length_mm, mu0_Ms=MU0_MS_ROOM):
    return ReferenceRow(label, wc_ghz * 1e9, g_mhz * 1e6, km_mhz * 1e6, kc_mhz * 1e6, c, digits,
                        length_mm * 1e-3, mu0_Ms)


TABLE_ROWS: tuple[ReferenceRow, ...] = (
    _row("w1 L=4 mm", 7.401, 37, 660, 5.6, 1.5, 2, 4.0),
    _row("w1 5 mm shifted", 7.410, 31, 670, 4.2, 1.4, 2, 4.0),
    _row("w1 8 mm shifted", 7.425, 19, 680, 2.9, 0.7, 1, 4.0),
    _row("L=3 mm", 7.415, 21, 680, 6.1, 0.42, 2, 3.0),
    _row("L=4 mm", 7.403, 35, 660, 7.6, 0.98, 2, 4.0),
    _row("L=5 mm", 7.392, 56, 730, 9.6, 1.8, 2, 5.0),
    _row("w2 on Si, Al cavity, 300 K", 7.206, 17, 660, 2.9, 0.60, 2, 2.5),
    _row("w2 on Si, Cu cavity, 300 K", 7.178, 25, 660, 4.1, 0.92, 2, 2.5),
    _row("w2 on Si, Cu cavity, 7 mK", 7.210, 32, 680, 3.7, 1.6, 2, 2.5, MU0_MS_COLD),
)


def table_row(n: int) -> ReferenceRow:
    """Row by its 1-based configuration number."""
    if not 1 <= n <= len(TABLE_ROWS):
        raise IndexError(f"row must be in 1..{len(TABLE_ROWS)}, got {n}")
    return TABLE_ROWS[n - 1]


@dataclass(frozen=True)
class MagneticEstimateInputs:
    """Single wire at the cavity magnetic antinode."""

    wire_length: float = 4e-3
    wire_radius: float = 4e-6
    mu0_Ms: float = MU0_MS_ROOM
    cavity_dims: tuple[float, float, float] = (26e-3, 8e-3, 36e-3)
    omega_c: float = 7.4e9
    expected_g: float = 3e6

    @property
    def cavity_volume(self) -> float:
        a, b, c = self.cavity_dims
        return a * b * c


#: Parameters of the regime-transition eigenfrequency maps (Hz).
TRANSITION_DEMO = dict(omega_c=7.4e9, g=5e6, kappa_c=5e6, kappa_m_values=(5e6, 500e6), mu0_Ms=MU0_MS_ROOM)
