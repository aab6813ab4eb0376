"""Purcell-regime cavity magnonics: forward models, eigen-analysis, ringdown and extraction."""

__version__ = "0.1.0"

from .eigen import (
    ComplexMode,
    branch_sweep,
    cavity_like,
    exact_eigenfrequencies,
    purcell_expansion,
    split_eigen_real_imag,
)
from .errors import DomainError, FitError, GridError, PurcellKitError, SchemaError, SingularityError
from .extraction import (
    ExtractedParams,
    FieldSweepResult,
    LorentzianFit,
    extract_height_waist,
    fit_lorentzian_power,
    reduce_sweep,
    summarize_configuration,
)
from .lindblad import MomentState, evolve, fit_lifetime, lifetime_vs_field, synthesize_ringdown
from .model import (
    FieldPoint,
    cooperativity,
    coupling_estimate_electric,
    coupling_estimate_magnetic,
    kittel_field,
    kittel_frequency,
    purcell_broadening,
    purcell_factor,
    purcell_shift,
    regime_classify,
    s21,
    s22,
)
from .params import ComplexSpectrum, RegimeLabel, SParameter, SystemParams
