"""Inverse problem: from field-swept power spectra to coupling and loss rates.

Each spectrum is reduced to a Lorentzian center and width, giving the dressed
cavity frequency and linewidth versus field. The height-waist reading of those
two curves then yields omega_c, kappa_c, kappa_m and g:

* dressed frequency: extrema separated by kappa_m, peak-to-peak 2 g^2/kappa_m,
  far tails approach omega_c - g^2/Delta;
* dressed linewidth: baseline kappa_c, peak excess 4 g^2/kappa_m, FWHM kappa_m.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import FitError, GridError
from .model import FieldPoint, s21
from .params import GAMMA_OVER_2PI, ComplexSpectrum, SystemParams


@dataclass(frozen=True)
class LorentzianFit:
    """``amplitude / ((w - center)^2 + (fwhm/2)^2) + background``."""

    center: float
    fwhm: float
    amplitude: float
    background: float
    residual_norm: float
    converged: bool
    message: str = ""

    @property
    def peak(self) -> float:
        """Height of the line above background (negative for a dip)."""
        return self.amplitude / (0.5 * self.fwhm) ** 2


def _edge_background(y: np.ndarray) -> float:
    n = max(2, y.size // 20)
    return float(np.median(np.concatenate([y[:n], y[-n:]])))


def _half_max_width(w: np.ndarray, y: np.ndarray, i: int, level: float) -> float | None:
    """Full width where ``y`` (peak at ``i``) crosses ``level``; linear interpolation."""
    left = right = None
    j = i
    while j > 0 and y[j] > level:
        j -= 1
    if y[j] <= level < y[j + 1]:
        left = w[j] + (level - y[j]) * (w[j + 1] - w[j]) / (y[j + 1] - y[j])
    j = i
    while j < y.size - 1 and y[j] > level:
        j += 1
    if y[j] <= level < y[j - 1]:
        right = w[j - 1] + (y[j - 1] - level) * (w[j] - w[j - 1]) / (y[j - 1] - y[j])
    if left is None and right is None:
        return None
    if left is None:
        return 2 * (right - w[i])
    if right is None:
        return 2 * (w[i] - left)
    return right - left


def fit_lorentzian_power(
    spectrum: ComplexSpectrum | np.ndarray,
    power: np.ndarray | None = None,
    residual_cap: float = 0.2,
) -> LorentzianFit:
    """Least-squares Lorentzian fit of a power spectrum (peak or dip).

    Pass either a :class:`ComplexSpectrum` or a frequency grid plus ``power``.
    A truncated line (extremum on the grid edge) raises :class:`FitError`; a fit
    whose relative residual exceeds ``residual_cap`` is returned with
    ``converged=False``.
    """
    if isinstance(spectrum, ComplexSpectrum):
        w, y = spectrum.frequencies, spectrum.power
    else:
        if power is None:
            raise TypeError("power is required when passing a frequency grid")
        w, y = np.asarray(spectrum, dtype=float), np.asarray(power, dtype=float)
    if w.size < 7 or w.shape != y.shape:
        raise FitError("need at least 7 grid points with matching power values")

    b0 = _edge_background(y)
    sign = 1.0 if np.max(y) - b0 >= b0 - np.min(y) else -1.0
    yy = sign * (y - b0)
    i = int(np.argmax(yy))
    if i == 0 or i == y.size - 1:
        raise FitError("resonance extremum lies on the grid edge (truncated line)")
    h0 = float(yy[i])
    width0 = _half_max_width(w, yy, i, 0.5 * h0)
    if width0 is None or width0 <= 0:
        width0 = 10 * float(np.min(np.diff(w)))

    # scaled coordinates keep the Jacobian well conditioned
    u = (w - w[i]) / width0
    scale_y = h0 if h0 > 0 else 1.0
    v = yy / scale_y

    def resid(p):
        h, u0, fw, b = p
        return h / (1 + (2 * (u - u0) / fw) ** 2) + b - v

    def jac(p):
        h, u0, fw, b = p
        x = 2 * (u - u0) / fw
        den = 1 + x * x
        d_h = 1 / den
        d_u0 = h * 2 * x / den**2 * (2 / fw)
        d_fw = h * 2 * x * x / den**2 / fw
        return np.column_stack([d_h, d_u0, d_fw, np.ones_like(u)])

    try:
        sol = optimize.least_squares(resid, x0=[1.0, 0.0, 1.0, 0.0], jac=jac, method="lm",
                                     xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return LorentzianFit(float(w[i]), float(width0), sign * h0 * (width0 / 2) ** 2, b0,
                             math.inf, False, f"fit failed: {exc}")
    h, u0, fw, b = sol.x
    fw = abs(fw)
    center = w[i] + u0 * width0
    fwhm = fw * width0
    peak = sign * h * scale_y
    background = b0 + sign * b * scale_y
    denom = np.linalg.norm(v - b)
    rel = float(np.linalg.norm(sol.fun) / denom) if denom > 0 else math.inf
    converged = bool(sol.success and fwhm > 0 and math.isfinite(rel) and rel <= residual_cap)
    msg = "" if converged else (f"relative residual {rel:.3g} above cap" if sol.success else sol.message)
    return LorentzianFit(
        center=float(center),
        fwhm=float(fwhm),
        amplitude=float(peak * (fwhm / 2) ** 2),
        background=float(background),
        residual_norm=rel,
        converged=converged,
        message=msg,
    )


# -- field sweeps -------------------------------------------------------------------


@dataclass
class FieldSweepResult:
    """Dressed cavity frequency and linewidth (Hz) versus bias field (T)."""

    fields: np.ndarray
    omega_sys: np.ndarray
    kappa_sys: np.ndarray
    fits: list[LorentzianFit] = field(default_factory=list)

    @property
    def converged(self) -> np.ndarray:
        if not self.fits:
            return np.ones(self.fields.shape, dtype=bool)
        return np.array([f.converged for f in self.fits])

    def to_columns(self) -> str:
        lines = ["# B_mT omega_sys_GHz kappa_sys_MHz converged"]
        for B, w, k, ok in zip(self.fields, self.omega_sys, self.kappa_sys, self.converged):
            lines.append(f"{B * 1e3:.9f} {w / 1e9:.12f} {k / 1e6:.9f} {int(ok)}")
        return "\n".join(lines) + "\n"


def reduce_sweep(
    spectra: Iterable[tuple],
    residual_cap: float = 0.2,
    max_flagged_fraction: float = 0.2,
) -> FieldSweepResult:
    """Fit every spectrum of a field sweep.

    ``spectra`` yields ``(B, ComplexSpectrum)`` or ``(B, frequencies, power)``.
    Spectra that cannot be fitted are kept with ``converged=False``; more than
    ``max_flagged_fraction`` of them raises :class:`FitError`.
    """
    items = []
    for item in spectra:
        if len(item) == 2:
            B, spectrum = item
            items.append((float(B), spectrum.frequencies, spectrum.power))
        else:
            B, w, p = item
            items.append((float(B), np.asarray(w, dtype=float), np.asarray(p, dtype=float)))
    if len(items) < 10:
        raise GridError(f"a sweep needs at least 10 field points, got {len(items)}")
    items.sort(key=lambda it: it[0])
    B = np.array([it[0] for it in items])
    if not np.all(np.diff(B) > 0):
        raise GridError("field values must be distinct")
    fits = []
    for _, w, p in items:
        try:
            fits.append(fit_lorentzian_power(w, p, residual_cap=residual_cap))
        except FitError as exc:
            # truncated line: flag the point, keep the sweep
            i = int(np.argmax(np.abs(p - np.median(p))))
            fits.append(LorentzianFit(float(w[i]), math.nan, math.nan, math.nan, math.inf, False, str(exc)))
    flagged = sum(not f.converged for f in fits)
    if flagged > max_flagged_fraction * len(fits):
        raise FitError(f"{flagged} of {len(fits)} spectra failed to fit")
    return FieldSweepResult(
        fields=B,
        omega_sys=np.array([f.center for f in fits]),
        kappa_sys=np.array([f.fwhm for f in fits]),
        fits=fits,
    )


# -- height-waist extraction ----------------------------------------------------------


@dataclass(frozen=True)
class ExtractedParams:
    omega_c: float
    kappa_c: float
    kappa_m_shift: float
    kappa_m_linewidth: float
    g_shift: float
    g_linewidth: float
    kappa_m_mean: float
    g_mean: float
    cooperativity: float
    B_res: float
    mu0_Ms_fit: float
    omega_c_method: str = "asymptote"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExtractedParams":
        return cls(**doc)

    def as_params(self, **extra: float) -> SystemParams:
        """Model parameters built from the representative (mean) estimates."""
        return SystemParams(omega_c=self.omega_c, kappa_c=self.kappa_c, kappa_m=self.kappa_m_mean,
                            g=self.g_mean, mu0_Ms=self.mu0_Ms_fit, **extra)


def _vertex(x: np.ndarray, y: np.ndarray, i: int, half_window: float | None) -> tuple[float, float]:
    """Location and value of a local extremum near grid index ``i``.

    Parabola through the three neighbouring samples, or a least-squares
    parabola over ``|x - x[i]| <= half_window`` when that holds more points.
    """
    if half_window is not None:
        sel = np.flatnonzero(np.abs(x - x[i]) <= half_window)
    else:
        sel = np.array([i - 1, i, i + 1])
    if sel.size < 3:
        sel = np.array([i - 1, i, i + 1])
    xs = x[sel] - x[i]
    c2, c1, c0 = np.polyfit(xs, y[sel], 2)
    if c2 == 0:
        return float(x[i]), float(y[i])
    xv = -c1 / (2 * c2)
    if abs(xv) > max(abs(xs.min()), abs(xs.max())):
        # vertex outside the local window: keep the grid sample
        return float(x[i]), float(y[i])
    return float(x[i] + xv), float(c0 - c1 * c1 / (4 * c2))


def _crossings(x: np.ndarray, y: np.ndarray, i: int, level: float) -> tuple[float, float]:
    """Nearest points left and right of the peak index ``i`` where ``y`` falls to ``level``."""
    j = i
    while j > 0 and y[j] > level:
        j -= 1
    if y[j] > level:
        raise GridError("sweep does not reach the linewidth half maximum below resonance")
    left = x[j] + (level - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    j = i
    while j < y.size - 1 and y[j] > level:
        j += 1
    if y[j] > level:
        raise GridError("sweep does not reach the linewidth half maximum above resonance")
    right = x[j - 1] + (y[j - 1] - level) * (x[j] - x[j - 1]) / (y[j - 1] - y[j])
    return float(left), float(right)


def _kittel(B: np.ndarray, mu0_Ms: float, gamma: float) -> np.ndarray:
    return gamma * np.sqrt(B * (B + mu0_Ms))


@dataclass(frozen=True)
class _LinewidthReading:
    kappa_c: float
    height: float
    fwhm: float


def _read_linewidth(delta: np.ndarray, k: np.ndarray, i_peak: int, k_peak: float,
                    tail_factor: float, iterations: int = 50) -> _LinewidthReading:
    """Baseline, peak excess and FWHM of the dressed-linewidth curve.

    The baseline is the tail mean with the Lorentzian excess implied by the
    current height and width removed, iterated to self-consistency.
    """
    kc = float(np.min(k))
    fwhm = None
    for _ in range(iterations):
        height = k_peak - kc
        if height <= 0:
            raise FitError("no linewidth excess above baseline: data inconsistent with the model")
        left, right = _crossings(delta, k, i_peak, kc + 0.5 * height)
        fwhm = right - left
        centre = 0.5 * (left + right)
        tail = np.abs(delta - centre) > tail_factor * fwhm
        if tail.sum() < 3:
            order = np.argsort(-np.abs(delta - centre))
            tail = np.zeros(delta.shape, dtype=bool)
            tail[order[: max(3, delta.size // 10)]] = True
        excess = height / (1 + (2 * (delta[tail] - centre) / fwhm) ** 2)
        new_kc = float(np.mean(k[tail] - excess))
        if abs(new_kc - kc) <= 1e-12 * abs(kc):
            kc = new_kc
            break
        kc = new_kc
    height = k_peak - kc
    left, right = _crossings(delta, k, i_peak, kc + 0.5 * height)
    return _LinewidthReading(kappa_c=kc, height=height, fwhm=right - left)


def extract_height_waist(
    sweep: FieldSweepResult,
    params_hint: SystemParams | None = None,
    asymptote_factor: float = 3.0,
    tail_factor: float = 3.0,
    extremum_window: float | None = None,
    passes: int = 2,
    pole_correction: bool = True,
) -> ExtractedParams:
    """Read omega_c, kappa_c, kappa_m and g off a reduced field sweep.

    Only ``params_hint.gamma_over_2pi`` is used; every other quantity comes from
    the data. ``extremum_window`` (fraction of kappa_m) switches the extremum
    search from three-point interpolation to a local least-squares parabola,
    which tolerates noisy curves.

    The measured curves follow the exact cavity pole, whose self-energy sees
    the magnon width reduced by the dressed cavity width. To first order both
    waists equal ``kappa_m - kappa_c - 3H/2`` (``H`` the linewidth excess at
    resonance), and the heights scale with ``waist + H/2`` (linewidth) or
    ``waist + H`` (shift) instead of the waist. ``pole_correction`` applies
    these relations; without it the waist is read directly as kappa_m.
    """
    gamma = params_hint.gamma_over_2pi if params_hint is not None else GAMMA_OVER_2PI
    ok = sweep.converged
    B = np.asarray(sweep.fields, dtype=float)[ok]
    w = np.asarray(sweep.omega_sys, dtype=float)[ok]
    k = np.asarray(sweep.kappa_sys, dtype=float)[ok]
    if B.size < 10:
        raise GridError("fewer than 10 usable field points")

    i_peak = int(np.argmax(k))
    if i_peak == 0 or i_peak == B.size - 1:
        raise GridError("linewidth maximum lies on the sweep edge")
    B_res, k_peak = _vertex(B, k, i_peak, None)
    if B_res <= 0:
        raise GridError("resonance field must be positive")
    omega_c = float(np.interp(B_res, B, w))
    method = "resonance"

    for n_pass in range(passes):
        mu0_Ms = (omega_c / gamma) ** 2 / B_res - B_res
        if mu0_Ms < 0:
            raise FitError("inferred saturation magnetization is negative")
        delta = _kittel(B, mu0_Ms, gamma) - omega_c

        lw = _read_linewidth(delta, k, i_peak, k_peak, tail_factor)
        if pole_correction:
            kappa_m_lw = lw.fwhm + lw.kappa_c + 1.5 * lw.height
            g_lw = math.sqrt(lw.height * (lw.fwhm + 0.5 * lw.height) / 4)
        else:
            kappa_m_lw = lw.fwhm
            g_lw = math.sqrt(lw.height * lw.fwhm / 4)

        if n_pass < passes - 1:
            far = np.abs(delta) > asymptote_factor * kappa_m_lw
            if far.sum() >= 4 and np.any(delta[far] < 0) and np.any(delta[far] > 0):
                A = np.column_stack([np.ones(far.sum()), 1.0 / delta[far]])
                coef, *_ = np.linalg.lstsq(A, w[far], rcond=None)
                omega_c = float(coef[0])
                method = "asymptote"

    near = np.abs(delta) <= 2 * kappa_m_lw
    idx = np.flatnonzero(near)
    if idx.size < 5:
        raise GridError("too few samples near resonance to locate the shift extrema")
    i_max = int(idx[np.argmax(w[idx])])
    i_min = int(idx[np.argmin(w[idx])])
    for i_ext in (i_max, i_min):
        if i_ext in (0, B.size - 1) or i_ext in (idx[0], idx[-1]):
            raise GridError("frequency-shift extrema are not bracketed by the sweep")
    hw = extremum_window * kappa_m_lw if extremum_window is not None else None
    d_max, w_max = _vertex(delta, w, i_max, hw)
    d_min, w_min = _vertex(delta, w, i_min, hw)
    waist = d_min - d_max
    height = w_max - w_min
    if waist <= 0 or height <= 0:
        raise FitError("frequency-shift curve has the wrong shape for the model")
    if pole_correction:
        kappa_m_shift = waist + lw.kappa_c + 1.5 * lw.height
        g_shift = math.sqrt(height * (waist + lw.height) / 2)
    else:
        kappa_m_shift = waist
        g_shift = math.sqrt(height * waist / 2)

    kappa_m_mean = 0.5 * (kappa_m_shift + kappa_m_lw)
    g_mean = 0.5 * (g_shift + g_lw)
    coop = 4 * g_mean**2 / (kappa_m_mean * lw.kappa_c) if lw.kappa_c > 0 else math.inf
    return ExtractedParams(
        omega_c=omega_c,
        kappa_c=lw.kappa_c,
        kappa_m_shift=kappa_m_shift,
        kappa_m_linewidth=kappa_m_lw,
        g_shift=g_shift,
        g_linewidth=g_lw,
        kappa_m_mean=kappa_m_mean,
        g_mean=g_mean,
        cooperativity=coop,
        B_res=B_res,
        mu0_Ms_fit=mu0_Ms,
        omega_c_method=method,
    )


def extract_least_squares(
    sweep: FieldSweepResult,
    initial: ExtractedParams,
    params_hint: SystemParams | None = None,
) -> ExtractedParams:
    """Joint least-squares fit of the dressed frequency and linewidth curves.

    Cross-check only: heavy Lorentzian tails in measured curves bias kappa_m
    upward with this estimator. The Kittel mapping of ``initial`` is kept fixed.
    """
    gamma = params_hint.gamma_over_2pi if params_hint is not None else GAMMA_OVER_2PI
    ok = sweep.converged
    B, w, k = sweep.fields[ok], sweep.omega_sys[ok], sweep.kappa_sys[ok]
    wm = _kittel(B, initial.mu0_Ms_fit, gamma)
    s = initial.kappa_m_mean

    def resid(p):
        wc, kc, g, km = p[0] * s + initial.omega_c, p[1] * s, p[2] * s, p[3] * s
        d = wm - wc
        den = d * d + (0.5 * km) ** 2
        return np.concatenate([(wc - g * g * d / den - w) / s, (kc + g * g * km / den - k) / s])

    x0 = [0.0, initial.kappa_c / s, initial.g_mean / s, 1.0]
    sol = optimize.least_squares(resid, x0, method="lm", xtol=1e-14, ftol=1e-14)
    wc, kc, g, km = sol.x[0] * s + initial.omega_c, sol.x[1] * s, abs(sol.x[2]) * s, abs(sol.x[3]) * s
    return ExtractedParams(
        omega_c=wc, kappa_c=kc, kappa_m_shift=km, kappa_m_linewidth=km, g_shift=g, g_linewidth=g,
        kappa_m_mean=km, g_mean=g, cooperativity=4 * g * g / (km * kc),
        B_res=initial.B_res, mu0_Ms_fit=initial.mu0_Ms_fit, omega_c_method="least-squares",
    )


# -- reporting ----------------------------------------------------------------------------


def _sig(x: float, digits: int) -> str:
    if x == 0:
        return "0." + "0" * (digits - 1)
    exp = int(math.floor(math.log10(abs(x))))
    places = digits - 1 - exp
    return f"{round(x, places):.{max(places, 0)}f}"


@dataclass(frozen=True)
class ReportRow:
    omega_c_ghz: str
    g_mhz: str
    kappa_m_mhz: str
    kappa_c_mhz: str
    cooperativity: str

    def to_text(self) -> str:
        return "  ".join(
            [self.omega_c_ghz, self.g_mhz, self.kappa_m_mhz, self.kappa_c_mhz, self.cooperativity]
        )


def summarize_configuration(extracted: ExtractedParams) -> ReportRow:
    """Round the representative values the way a parameter table would."""
    return ReportRow(
        omega_c_ghz=_sig(extracted.omega_c / 1e9, 4),
        g_mhz=_sig(extracted.g_mean / 1e6, 2),
        kappa_m_mhz=_sig(extracted.kappa_m_mean / 1e6, 2),
        kappa_c_mhz=_sig(extracted.kappa_c / 1e6, 2),
        cooperativity=_sig(extracted.cooperativity, 2),
    )


def spectra_from_params(
    params: SystemParams,
    fields: Sequence[float],
    frequencies: np.ndarray,
) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """|S21|^2 spectra at each field; convenience for forward round trips."""
    out = []
    for B in fields:
        fp = FieldPoint.from_field(B, params)
        out.append((float(B), frequencies, np.abs(s21(frequencies, fp, params)) ** 2))
    return out
