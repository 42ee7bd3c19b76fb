"""Shared test oracles: independent numerical quadrature of the defining
integrals, kept free of the closed-form code paths they check."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from gdsense import SignalSpec, Tone, toggling_modulation
from gdsense.dynamics import _staircase_values, _segment_bounds  # noqa: the oracle
# reuses only the segment *definition* (boundaries and staircase values); the
# integration itself is adaptive quadrature, independent of the analytic path.

TWO_PI = 2.0 * math.pi


def _integrate_segments(starts, ends, values, integrand, upto=None):
    total = 0.0
    for t0, t1, v in zip(starts, ends, values):
        if upto is not None:
            if t0 >= upto:
                break
            t1 = min(t1, upto)
        if t1 <= t0:
            continue
        part, _ = quad(integrand, t0, t1, limit=400, epsabs=1e-13, epsrel=1e-12)
        total += v * part
    return total


def quadrature_phase(seq, spec: SignalSpec, upto=None) -> float:
    """Accumulated phase by adaptive quadrature of F(t) * B(t) per segment."""
    starts, ends = _segment_bounds(seq)
    cos_values = _staircase_values(seq, "cos")

    if seq.scheme in ("xy", "gd_parallel"):
        tones = spec.parallel_tones

        def b_field(t):
            return sum(tn.amplitude * math.cos(tn.frequency * t + tn.phase) for tn in tones)

        return _integrate_segments(starts, ends, cos_values, b_field, upto)

    tones = spec.perpendicular_tones
    if seq.scheme == "cpmg":

        def b_y(t):
            return sum(2.0 * tn.amplitude * math.sin(tn.frequency * t + tn.phase) for tn in tones)

        return _integrate_segments(starts, ends, cos_values, b_y, upto)

    # gd_perp: both quadrature staircases
    sin_values = _staircase_values(seq, "sin")

    def b_x(t):
        return sum(2.0 * tn.amplitude * math.cos(tn.frequency * t + tn.phase) for tn in tones)

    def b_y(t):
        return sum(2.0 * tn.amplitude * math.sin(tn.frequency * t + tn.phase) for tn in tones)

    return _integrate_segments(starts, ends, cos_values, b_x, upto) + _integrate_segments(
        starts, ends, sin_values, b_y, upto
    )


def quadrature_fourier_component(seq, omega: float, upto=None) -> float:
    """|f(w, T)| by adaptive quadrature of F(t) exp(-i w t) per segment."""
    modfn = toggling_modulation(seq)
    values = np.asarray(modfn.values, dtype=complex)
    real = 0.0
    imag = 0.0
    for t0, t1, v in zip(modfn.starts, modfn.ends, values):
        if upto is not None:
            if t0 >= upto:
                break
            t1 = min(t1, upto)
        if t1 <= t0:
            continue
        cos_part, _ = quad(lambda t: math.cos(omega * t), t0, t1, limit=400, epsabs=1e-14)
        sin_part, _ = quad(lambda t: math.sin(omega * t), t0, t1, limit=400, epsabs=1e-14)
        # integral of v * exp(-i w t)
        real += v.real * cos_part + v.imag * sin_part
        imag += v.imag * cos_part - v.real * sin_part
    return math.hypot(real, imag) / math.sqrt(TWO_PI)


def single_parallel_tone(amplitude, frequency, phase=0.0) -> SignalSpec:
    return SignalSpec(parallel_tones=(Tone(amplitude, frequency, phase),))


def single_rotating_tone(lab_amplitude, detuning, phase=0.0) -> SignalSpec:
    """Rotating-frame spec for a lab transverse tone (per-quadrature b/2)."""
    return SignalSpec(
        perpendicular_tones=(Tone(lab_amplitude / 2.0, detuning, phase),),
        frame="rotating",
    )
