"""Frequency extraction: Lorentzian dip fits, DFT spectra, peaks, and aliases."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, peak_prominences

from .experiments import PhotonTrace, ScanResult


class NoDipError(ValueError):
    """Scan has no strict interior minimum to fit."""


@dataclass(frozen=True)
class LorentzianFit:
    """Dip fit P(w) = baseline - amplitude / (1 + ((w - center)/half_width)^2).

    ``2 * half_width`` is the full width at half maximum.  The model is
    dip-oriented with a free baseline because measured probabilities start
    near 1 and decrease at resonance.
    """

    center: float  # rad/s
    half_width: float  # rad/s, > 0
    amplitude: float
    baseline: float
    residual_norm: float
    converged: bool
    n_iterations: int
    message: str = ""


def _halfwidth_guess(x: np.ndarray, y: np.ndarray, imin: int, baseline: float) -> float:
    depth = baseline - y[imin]
    level = baseline - 0.5 * depth
    left = x[0]
    for i in range(imin, 0, -1):
        if y[i - 1] >= level:
            frac = (level - y[i]) / (y[i - 1] - y[i])
            left = x[i] + frac * (x[i - 1] - x[i])
            break
    right = x[-1]
    for i in range(imin, len(x) - 1):
        if y[i + 1] >= level:
            frac = (level - y[i]) / (y[i + 1] - y[i])
            right = x[i] + frac * (x[i + 1] - x[i])
            break
    guess = 0.5 * (right - left)
    if not (guess > 0.0):
        guess = (x[-1] - x[0]) / 6.0
    return guess


def fit_lorentzian_dip(x, y, max_iterations: int = 200, tol: float = 1e-8) -> LorentzianFit:
    """Damped Gauss-Newton least-squares fit of a Lorentzian dip.

    Initialization: centre at the grid minimum, baseline at the grid maximum,
    half-width at half the distance between the two half-depth crossings.
    Iterates until the relative parameter change drops below ``tol`` or the
    iteration budget runs out; singular normal equations return a
    non-converged result with diagnostics instead of raising.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 7:
        raise NoDipError("need at least 7 points to fit a dip")
    imin = int(np.argmin(y))
    if imin in (0, len(y) - 1) or not (y[imin] < y[imin - 1] and y[imin] < y[imin + 1]):
        raise NoDipError("no strict interior minimum in the scan")

    span = x[-1] - x[0]
    x0 = x[imin]
    xs = (x - x0) / span

    baseline = float(np.max(y))
    amplitude = baseline - float(y[imin])
    center_s = 0.0
    gamma_s = _halfwidth_guess(x, y, imin, baseline) / span

    params = np.array([center_s, gamma_s, amplitude, baseline])
    damping = 1e-3
    converged = False
    message = ""
    iteration = 0

    def residuals(p: np.ndarray) -> np.ndarray:
        u = (xs - p[0]) / p[1]
        return p[3] - p[2] / (1.0 + u * u) - y

    cost = float(np.sum(residuals(params) ** 2))
    for iteration in range(1, max_iterations + 1):
        c, g, a, b = params
        u = (xs - c) / g
        denom = 1.0 + u * u
        r = b - a / denom - y
        # Jacobian of the model wrt (centre, half-width, amplitude, baseline)
        d_center = -2.0 * a * u / (g * denom**2)
        d_gamma = -2.0 * a * u * u / (g * denom**2)
        d_amp = -1.0 / denom
        d_base = np.ones_like(xs)
        jac = np.column_stack([d_center, d_gamma, d_amp, d_base])

        jtj = jac.T @ jac
        jtr = jac.T @ r
        step = None
        for _ in range(20):
            try:
                step = np.linalg.solve(jtj + damping * np.diag(np.diag(jtj)), -jtr)
            except np.linalg.LinAlgError:
                message = "singular normal equations"
                break
            trial = params + step
            if trial[1] == 0.0:
                trial[1] = np.finfo(float).tiny
            new_cost = float(np.sum(residuals(trial) ** 2))
            if new_cost <= cost:
                params = trial
                cost = new_cost
                damping = max(damping / 3.0, 1e-12)
                break
            damping *= 10.0
            step = None
        if message:
            break
        if step is None:
            message = "damping exhausted without cost decrease"
            break
        rel_change = float(np.max(np.abs(step) / (np.abs(params) + 1e-300)))
        if rel_change < tol:
            converged = True
            break

    center = x0 + params[0] * span
    half_width = abs(params[1]) * span
    if not (x[0] <= center <= x[-1]):
        converged = False
        message = message or "fitted centre left the grid span"
    return LorentzianFit(
        center=center,
        half_width=half_width,
        amplitude=float(params[2]),
        baseline=float(params[3]),
        residual_norm=math.sqrt(cost),
        converged=converged,
        n_iterations=iteration,
        message=message,
    )


def fit_lorentzian(scan: ScanResult, **kwargs) -> LorentzianFit:
    """Fit the scan's resonance dip; NaN points (builder failures) are dropped."""
    ok = np.isfinite(scan.probabilities)
    return fit_lorentzian_dip(scan.omegas[ok], scan.probabilities[ok], **kwargs)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralPeak:
    bin_index: int
    frequency: float  # Hz
    magnitude: float
    snr: float


@dataclass(frozen=True)
class SpectrumResult:
    """One-sided magnitude spectrum of a photon trace."""

    frequencies: np.ndarray  # Hz, spanning [0, 1/(2 T_L)]
    magnitudes: np.ndarray
    bin_width: float  # Hz, 1/(n_fft * T_L)
    peaks: tuple[SpectralPeak, ...]
    n_samples: int
    n_fft: int

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.magnitudes) < 0.0):
            raise ValueError("magnitudes must be non-negative")

    def two_sided_power(self) -> float:
        """Sum of |X_k|^2 over the full DFT, reconstructed from the one-sided bins."""
        mags_sq = np.asarray(self.magnitudes) ** 2
        total = 2.0 * float(np.sum(mags_sq[1:]))
        total += float(mags_sq[0])
        if self.n_fft % 2 == 0:
            total -= float(mags_sq[-1])  # Nyquist bin is not doubled
        return total


def peak_snr(magnitudes: np.ndarray, index: int, exclude: int = 3) -> float:
    """Peak magnitude over the median magnitude of bins outside the peak's +/- exclude."""
    mask = np.ones(len(magnitudes), dtype=bool)
    mask[max(0, index - exclude) : index + exclude + 1] = False
    floor = float(np.median(magnitudes[mask])) if np.any(mask) else 0.0
    if floor == 0.0:
        return math.inf if magnitudes[index] > 0.0 else 0.0
    return float(magnitudes[index]) / floor


def dft_spectrum(
    trace: PhotonTrace,
    zero_pad_factor: int = 1,
    snr_min: float = 5.0,
) -> SpectrumResult:
    """Mean-subtracted, rectangular-window magnitude spectrum of the counts.

    Bins sit at j / (n_fft * T_L); no window or padding is applied by default
    so bin frequencies stay directly interpretable.  Peaks are strict local
    maxima whose SNR (magnitude over the median of bins excluding the peak's
    +/- 3 neighbours) reaches ``snr_min``, sorted by magnitude.
    """
    if trace.n_samples < 16:
        raise ValueError("spectrum needs at least 16 samples")
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    x = trace.counts.astype(float)
    x -= x.mean()
    n_fft = trace.n_samples * zero_pad_factor
    mags = np.abs(np.fft.rfft(x, n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, d=trace.interval)

    # Cheap pre-screen against the global median floor; the exact SNR with the
    # +/- 3-bin exclusion is only computed for the survivors.
    candidates, _ = find_peaks(mags)
    floor = float(np.median(mags))
    if floor > 0.0:
        candidates = candidates[mags[candidates] >= snr_min * floor]
    peaks = []
    for idx in candidates:
        snr = peak_snr(mags, int(idx))
        if snr >= snr_min:
            peaks.append(SpectralPeak(int(idx), float(freqs[idx]), float(mags[idx]), snr))
    peaks.sort(key=lambda p: p.magnitude, reverse=True)

    return SpectrumResult(
        frequencies=freqs,
        magnitudes=mags,
        bin_width=1.0 / (n_fft * trace.interval),
        peaks=tuple(peaks),
        n_samples=trace.n_samples,
        n_fft=n_fft,
    )


def peak_fwhm(spectrum: SpectrumResult, bin_index: int) -> float:
    """Full width at half maximum of a spectral peak, in Hz.

    Half-max crossings are located by linear interpolation between bins; use a
    zero-padded spectrum to resolve the window mainlobe when the tone does not
    sit on a bin centre.
    """
    mags = spectrum.magnitudes
    if not (0 <= bin_index < len(mags)):
        raise ValueError("bin_index out of range")
    half = 0.5 * mags[bin_index]
    li = bin_index
    while li > 0 and mags[li] > half:
        li -= 1
    ri = bin_index
    while ri < len(mags) - 1 and mags[ri] > half:
        ri += 1
    if mags[li] > half or mags[ri] > half:
        raise ValueError("peak does not drop to half maximum inside the spectrum")
    left = li + (half - mags[li]) / (mags[li + 1] - mags[li])
    right = ri - (half - mags[ri]) / (mags[ri - 1] - mags[ri])
    return float((right - left) * spectrum.bin_width)


def predict_alias(frequency: float, interval: float) -> float:
    """Folded frequency |f - round(f T_L)/T_L| of an undersampled tone, in [0, 1/(2 T_L)]."""
    if interval <= 0.0:
        raise ValueError("interval must be positive")
    return abs(frequency - round(frequency * interval) / interval)


# ---------------------------------------------------------------------------
# extrema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Extremum:
    index: int
    location: float
    value: float
    prominence: float


def find_extrema(
    series,
    kind: str = "minima",
    prominence: float = 0.0,
    locations=None,
) -> tuple[Extremum, ...]:
    """Strict local extrema with at least the given prominence, most prominent first.

    ``locations`` supplies the x-axis (defaults to indices); NaN entries in the
    series are treated as flat gaps and never become extrema.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or len(y) < 3:
        raise ValueError("series must be 1-d with at least 3 points")
    if kind not in ("minima", "maxima"):
        raise ValueError(f"kind must be 'minima' or 'maxima', got {kind!r}")
    x = np.arange(len(y), dtype=float) if locations is None else np.asarray(locations, dtype=float)
    signed = -y if kind == "minima" else y
    signed = np.where(np.isfinite(signed), signed, -np.inf)
    indices, _ = find_peaks(signed)
    if len(indices) == 0:
        return ()
    proms = peak_prominences(signed, indices)[0]
    keep = proms >= prominence
    found = [
        Extremum(int(i), float(x[i]), float(y[i]), float(p))
        for i, p in zip(indices[keep], proms[keep])
    ]
    found.sort(key=lambda e: e.prominence, reverse=True)
    return tuple(found)
