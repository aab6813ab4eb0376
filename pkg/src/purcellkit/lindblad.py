"""Free ringdown of the second moments under the Lindblad equation.

The state vector is (<a+a>, <m+m>, <a+m>, <am+>) and evolves as x' = Omega x.
Rates from :class:`SystemParams` are cyclic; they are converted to angular
units once, in :func:`build_omega_matrix`, and times are in seconds.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .errors import DomainError, FitError, GridError
from .model import FieldPoint, purcell_broadening
from .params import SystemParams

TWO_PI = 2 * np.pi

#: Default trace grid: 0 to 1000 ns in 1 ns steps.
DEFAULT_TIMES = np.arange(1001) * 1e-9


@dataclass(frozen=True)
class MomentState:
    n_a: float = 1.0
    n_m: float = 0.0
    coh: complex = 0j
    coh_conj: complex = 0j

    def as_vector(self) -> np.ndarray:
        return np.array([self.n_a, self.n_m, self.coh, self.coh_conj], dtype=complex)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "MomentState":
        return cls(float(v[0].real), float(v[1].real), complex(v[2]), complex(v[3]))


@dataclass(frozen=True)
class MomentTrajectory:
    """Moment vectors at each requested time; ``states`` has shape (n_times, 4)."""

    times: np.ndarray
    states: np.ndarray

    @property
    def n_a(self) -> np.ndarray:
        return self.states[:, 0].real

    @property
    def n_m(self) -> np.ndarray:
        return self.states[:, 1].real

    @property
    def coh(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def coh_conj(self) -> np.ndarray:
        return self.states[:, 3]

    def __getitem__(self, i: int) -> MomentState:
        return MomentState.from_vector(self.states[i])

    def __len__(self) -> int:
        return len(self.times)


def build_omega_matrix(field: FieldPoint, params: SystemParams) -> np.ndarray:
    """Generator of the moment dynamics (rad/s)."""
    kc = TWO_PI * params.kappa_c
    km = TWO_PI * params.kappa_m
    g = TWO_PI * params.g
    d = TWO_PI * float(field.delta)
    avg = 0.5 * (kc + km)
    return np.array(
        [
            [-kc, 0, -1j * g, 1j * g],
            [0, -km, 1j * g, -1j * g],
            [-1j * g, 1j * g, -1j * d - avg, 0],
            [1j * g, -1j * g, 0, 1j * d - avg],
        ],
        dtype=complex,
    )


def _check_times(times: Sequence[float]) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise GridError("times must be a non-empty 1-D grid")
    if t[0] != 0:
        raise GridError("times must start at 0")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise GridError("times must be strictly increasing")
    return t


def propagate(omega: np.ndarray, x0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """exp(omega t) x0 for each t; uniform grids reuse a single step propagator."""
    out = np.empty((times.size, x0.size), dtype=complex)
    out[0] = x0
    if times.size == 1:
        return out
    steps = np.diff(times)
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        # step propagator from the exact grid step; drift from float steps stays ~1e-15
        dt = (times[-1] - times[0]) / (times.size - 1)
        P = linalg.expm(omega * dt)
        x = x0
        for k in range(1, times.size):
            x = P @ x
            out[k] = x
    else:
        for k in range(1, times.size):
            out[k] = linalg.expm(omega * times[k]) @ x0
    return out


def evolve(
    initial: MomentState,
    field: FieldPoint,
    params: SystemParams,
    times: Sequence[float] = DEFAULT_TIMES,
) -> MomentTrajectory:
    """Evolve the moment vector from ``initial`` over ``times`` (s)."""
    t = _check_times(times)
    states = propagate(build_omega_matrix(field, params), initial.as_vector(), t)
    if not np.all(np.isfinite(states)):
        raise FloatingPointError("moment evolution produced non-finite values")
    return MomentTrajectory(times=t, states=states)


# -- ringdown traces ---------------------------------------------------------------


@dataclass
class RingdownTrace:
    """Detected power after the pulse edge: ``scale * n_a(t - t_shift) + offset``."""

    times: np.ndarray
    power: np.ndarray
    scale: float = 1.0
    offset: float = 0.0
    t_shift: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_columns(self) -> str:
        lines = ["# t_ns power"]
        lines += [f"{t * 1e9:.6f} {p:.12e}" for t, p in zip(self.times, self.power)]
        return "\n".join(lines) + "\n"


def synthesize_ringdown(
    field: FieldPoint,
    params: SystemParams,
    scale: float = 1.0,
    offset: float = 0.0,
    times: Sequence[float] = DEFAULT_TIMES,
    t_shift: float = 0.0,
    n_a: float = 1.0,
) -> RingdownTrace:
    """Model ringdown trace for an initially populated, magnon-empty cavity.

    Before ``t_shift`` the trace sits on the plateau ``scale * n_a + offset``.
    """
    if scale <= 0:
        raise DomainError("scale must be > 0")
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0 or (t.size > 1 and not np.all(np.diff(t) > 0)):
        raise GridError("times must be a strictly increasing 1-D grid")
    local = t - t_shift
    decaying = local >= 0
    power = np.full(t.shape, scale * n_a + offset, dtype=float)
    if np.any(decaying):
        tl = local[decaying]
        # propagate on the shifted grid, which starts at the first sample past the edge
        grid = np.concatenate([[0.0], tl]) if tl[0] > 0 else tl
        traj = evolve(MomentState(n_a=n_a), field, params, grid)
        na = traj.n_a[1:] if tl[0] > 0 else traj.n_a
        power[decaying] = scale * na + offset
    return RingdownTrace(times=t, power=power, scale=scale, offset=offset, t_shift=t_shift)


@dataclass(frozen=True)
class LifetimeFit:
    tau: float
    tau_stderr: float
    amplitude: float
    n_samples: int
    window: tuple[float, float]
    monotone: bool

    @property
    def rate_hz(self) -> float:
        """Decay rate as a cyclic linewidth, 1/(2 pi tau)."""
        return 1.0 / (TWO_PI * self.tau)


def fit_lifetime(
    trace: RingdownTrace,
    fit_window: tuple[float, float] | None = None,
    floor: float = 0.0,
    threshold_factor: float = 3.0,
    min_samples: int = 10,
) -> LifetimeFit:
    """Single-exponential lifetime by log-linear least squares.

    ``floor`` is the noise level of the background-subtracted trace; only
    samples exceeding ``threshold_factor * floor`` enter the fit. Noiseless traces
    are additionally cut where they fall 12 decades below their maximum.
    """
    t = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.power, dtype=float) - trace.offset
    lo, hi = fit_window if fit_window is not None else (max(t[0], trace.t_shift), t[-1])
    if lo < t[0] or hi > t[-1] or hi <= lo:
        raise FitError(f"fit window ({lo}, {hi}) is not inside the trace")
    sel = (t >= lo) & (t <= hi)
    tw, yw = t[sel], y[sel]
    monotone = bool(np.all(np.diff(yw) <= 0))
    cut = max(threshold_factor * floor, 1e-12 * (np.max(yw) if yw.size else 0.0), 0.0)
    ok = yw > cut
    if ok.sum() < min_samples:
        raise FitError(f"only {int(ok.sum())} samples above threshold {cut:.3g}; need {min_samples}")
    res = stats.linregress(tw[ok], np.log(yw[ok]))
    if not res.slope < 0:
        raise FitError("trace is not decaying inside the fit window")
    tau = -1.0 / res.slope
    stderr = res.stderr / res.slope**2
    if not monotone:
        warnings.warn("ringdown trace is not monotone inside the fit window", RuntimeWarning, stacklevel=2)
    return LifetimeFit(
        tau=float(tau),
        tau_stderr=float(stderr),
        amplitude=float(np.exp(res.intercept)),
        n_samples=int(ok.sum()),
        window=(float(lo), float(hi)),
        monotone=monotone,
    )


@dataclass
class LifetimeTable:
    """Ringdown lifetime and frequency-domain prediction per bias field."""

    fields: np.ndarray
    tau: np.ndarray
    tau_stderr: np.ndarray
    inv_kappa: np.ndarray
    flags: list[str]

    def to_columns(self) -> str:
        lines = ["# B_mT tau_ns inv_kappa_ns flag"]
        for B, tau, ik, fl in zip(self.fields, self.tau, self.inv_kappa, self.flags):
            lines.append(f"{B * 1e3:.6f} {tau * 1e9:.9e} {ik * 1e9:.9e} {fl or 'ok'}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "B_mT": [float(b * 1e3) for b in self.fields],
            "tau_ns": [float(v * 1e9) if np.isfinite(v) else None for v in self.tau],
            "tau_stderr_ns": [float(v * 1e9) if np.isfinite(v) else None for v in self.tau_stderr],
            "inv_kappa_ns": [float(v * 1e9) for v in self.inv_kappa],
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def lifetime_vs_field(
    B_grid: Sequence[float],
    params: SystemParams,
    scale: float = 1.0,
    offset: float = 0.0,
    times: Sequence[float] = DEFAULT_TIMES,
    fit_window: tuple[float, float] | None = None,
    floor: float = 0.0,
) -> LifetimeTable:
    """Synthesize and fit a ringdown at every field; failed points are flagged."""
    B = np.asarray(B_grid, dtype=float)
    if B.ndim != 1 or (B.size > 1 and not np.all(np.diff(B) > 0)):
        raise GridError("B_grid must be strictly increasing")
    tau = np.full(B.shape, np.nan)
    err = np.full(B.shape, np.nan)
    flags: list[str] = []
    for i, b in enumerate(B):
        fp = FieldPoint.from_field(b, params)
        trace = synthesize_ringdown(fp, params, scale=scale, offset=offset, times=times)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fit = fit_lifetime(trace, fit_window=fit_window, floor=floor)
        except FitError as exc:
            flags.append(f"fit-failed:{exc}")
            continue
        tau[i], err[i] = fit.tau, fit.tau_stderr
        flags.append("" if fit.monotone else "non-monotone")
    inv_kappa = 1.0 / (TWO_PI * purcell_broadening(FieldPoint.from_field(B, params), params))
    return LifetimeTable(fields=B, tau=tau, tau_stderr=err, inv_kappa=np.asarray(inv_kappa), flags=flags)
