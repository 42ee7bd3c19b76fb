"""Fourier components of modulation functions, exact and reconstructed.

The exact component is the closed-form integral

    |f(w, T)| = | (1/sqrt(2 pi)) * integral_0^T F(t) exp(-i w t) dt |

of the piecewise-constant toggling modulation.  The reconstruction estimates
the same quantity from an ensemble of sensing runs against a single random
tone whose phase is drawn from a uniform grid (a wide-sense-stationary tone
with a delta-function spectral density):  the accumulated phase of each run is
inverted from the survival probability and the component follows from the
ensemble mean of its square.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import EngineConfig, ModulationFunction, survival_after
from .sequence import SCHEME_GD_PARALLEL, SCHEME_XY, PulseSequence
from .signal import FRAME_ROTATING, SignalSpec, Tone, phase_grid

SOURCE_EXACT = "exact"
SOURCE_RECONSTRUCTED = "reconstructed"

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Survival probabilities this close to 0 sit at the arcsin branch limit
# |Phi| = pi, where the readout stops being bijective.
_BRANCH_LIMIT_PROBABILITY = 1e-9


@dataclass(frozen=True)
class FilterCurve:
    """|f(w, T)| sampled on a frequency grid."""

    omegas: np.ndarray  # rad/s, strictly increasing
    magnitudes: np.ndarray  # sqrt(s)
    source: str
    ensemble_size: int | None = None
    amplitude_schedule: np.ndarray | None = None  # b_R per grid point (reconstruction)

    def __post_init__(self) -> None:
        omegas = np.asarray(self.omegas, dtype=float)
        magnitudes = np.asarray(self.magnitudes, dtype=float)
        if omegas.shape != magnitudes.shape:
            raise ValueError("grid and magnitude arrays must match")
        if np.any(np.diff(omegas) <= 0.0):
            raise ValueError("frequency grid must be strictly increasing")
        finite = magnitudes[np.isfinite(magnitudes)]
        if np.any(finite < 0.0):
            raise ValueError("magnitudes must be non-negative")
        if self.source not in (SOURCE_EXACT, SOURCE_RECONSTRUCTED):
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "magnitudes", magnitudes)


def exact_fourier_component(modfn: ModulationFunction, omega: float, upto: float | None = None) -> float:
    """Closed-form |f(omega, T)| of a piecewise-constant modulation function."""
    if upto is None:
        upto = modfn.end_time
    if upto < 0.0 or upto > modfn.end_time * (1.0 + 1e-12):
        raise ValueError("upto must lie within the modulation function's domain")
    keep = modfn.starts < upto
    t0 = modfn.starts[keep]
    t1 = np.minimum(modfn.ends[keep], upto)
    v = modfn.values[keep]
    if omega == 0.0:
        integral = complex(np.sum(v * (t1 - t0)))
    else:
        integral = complex(np.sum(v * (np.exp(-1j * omega * t0) - np.exp(-1j * omega * t1)))) / (
            1j * omega
        )
    return abs(integral) / _SQRT_2PI


def exact_filter_curve(
    modfn: ModulationFunction, omegas, upto: float | None = None
) -> FilterCurve:
    omegas = np.asarray(omegas, dtype=float)
    mags = np.array([exact_fourier_component(modfn, w, upto) for w in omegas])
    return FilterCurve(omegas, mags, SOURCE_EXACT)


def _probe_spec(scheme: str, amplitude: float, omega: float, phase: float) -> SignalSpec:
    """Single random tone seen by the scheme: parallel in the lab frame for the
    MHz schemes, a rotating-frame detuning tone (per-quadrature amplitude b/2)
    for the heterodyne schemes."""
    if scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        return SignalSpec(parallel_tones=(Tone(amplitude, omega, phase),))
    return SignalSpec(
        perpendicular_tones=(Tone(amplitude / 2.0, omega, phase),),
        frame=FRAME_ROTATING,
    )


def extract_phase_magnitude(probability: float) -> float:
    """Invert P = (1 + cos(Phi))/2 to |Phi| on the principal branch [0, pi]."""
    return 0.5 * math.pi - math.asin(max(-1.0, min(1.0, 2.0 * probability - 1.0)))


def reconstruct_filter(
    seq: PulseSequence,
    omegas,
    amplitudes,
    ensemble_size: int,
    phase_grid_size: int = 6,
    engine: EngineConfig | None = None,
    rng: np.random.Generator | None = None,
    stratified: bool = False,
) -> FilterCurve:
    """Reconstruct |f(w, T)| from random-phase sensing ensembles.

    For each grid frequency, ``ensemble_size`` sensing procedures run against a
    single tone of amplitude ``amplitudes`` (scalar or per-point) whose phase is
    drawn from the uniform ``phase_grid_size``-point grid -- randomly by
    default, or cycled evenly when ``stratified`` is set.  Each run must keep
    |Phi| < pi; samples at the arcsin branch limit are excluded with a warning.
    Deterministic under a fixed ``rng`` state.

    A zero-mean random tone of amplitude b has the two-time correlation
    (b^2/2) cos(w dt), hence a delta spectral density, and the ensemble mean
    obeys mean(Phi^2) = pi b^2 |f|^2; the returned magnitude is
    sqrt(mean(Phi^2) / (pi b^2)), which agrees with
    :func:`exact_fourier_component` for every scheme (GD-perp through its
    complex single-sideband staircase).
    """
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    if engine is None:
        engine = EngineConfig()
    omegas = np.asarray(omegas, dtype=float)
    schedule = np.broadcast_to(np.asarray(amplitudes, dtype=float), omegas.shape).copy()
    if np.any(schedule <= 0.0):
        raise ValueError("probe amplitudes must be positive")
    grid = phase_grid(phase_grid_size)
    if not stratified and rng is None:
        raise ValueError("random sampling needs an rng; pass one or set stratified=True")

    magnitudes = np.empty_like(omegas)
    for i, (omega, amplitude) in enumerate(zip(omegas, schedule)):
        if stratified:
            phases = np.tile(grid, math.ceil(ensemble_size / phase_grid_size))[:ensemble_size]
        else:
            phases = grid[rng.integers(phase_grid_size, size=ensemble_size)]
        squared = []
        excluded = 0
        for phase in phases:
            spec = _probe_spec(seq.scheme, amplitude, omega, float(phase))
            p = survival_after(seq, spec, engine)
            if p <= _BRANCH_LIMIT_PROBABILITY:
                excluded += 1
                continue
            squared.append(extract_phase_magnitude(p) ** 2)
        if excluded:
            warnings.warn(
                f"{excluded}/{len(phases)} samples at w = {omega:.6g} rad/s hit the "
                "|Phi| = pi readout branch limit and were excluded",
                stacklevel=2,
            )
        if not squared:
            magnitudes[i] = math.nan
            continue
        mean_sq = float(np.mean(squared))
        magnitudes[i] = math.sqrt(mean_sq / (math.pi * amplitude**2))

    return FilterCurve(
        omegas,
        magnitudes,
        SOURCE_RECONSTRUCTED,
        ensemble_size=ensemble_size,
        amplitude_schedule=schedule,
    )
