"""Experiment orchestration: frequency scans, robustness sweeps, heterodyne
scans, and synchronized readout with photon statistics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .dynamics import (
    ENGINE_ANALYTIC,
    EngineConfig,
    accumulated_phase_analytic,
    apply_contrast_envelope,
    apply_unitary,
    phase_quadrature_responses,
    prepared_state,
    propagate_bruteforce,
    require_frame_match,
    rotation_matrix,
    survival_after,
    survival_probability,
)
from .sequence import (
    PLANE_XY,
    PLANE_XZ,
    SCHEME_CPMG,
    SCHEME_GD_PARALLEL,
    SCHEME_GD_PERP,
    SCHEME_XY,
    OverlapError,
    PulseSequence,
    build_cpmg,
    build_gd,
    build_xy,
)
from .signal import TWO_PI, SignalSpec, Tone, to_rotating_frame

DEFAULT_READOUT_TIME = 1e-6  # optical readout window appended to each shot


@dataclass(frozen=True)
class SequenceParams:
    """Scheme-independent knobs of the pulse-program builders.

    ``n_pulses`` is the geodesic block size N and is ignored by XY/CPMG.
    """

    n_blocks: int
    pulse_duration: float
    n_pulses: int = 10
    cpmg_naive_spacing: bool = False


def build_for_scheme(scheme: str, omega_scan: float, params: SequenceParams) -> PulseSequence:
    if scheme == SCHEME_XY:
        return build_xy(omega_scan, params.n_blocks, params.pulse_duration)
    if scheme == SCHEME_CPMG:
        return build_cpmg(
            omega_scan, params.n_blocks, params.pulse_duration, params.cpmg_naive_spacing
        )
    if scheme == SCHEME_GD_PARALLEL:
        return build_gd(PLANE_XZ, omega_scan, params.n_pulses, params.n_blocks, params.pulse_duration)
    if scheme == SCHEME_GD_PERP:
        return build_gd(PLANE_XY, omega_scan, params.n_pulses, params.n_blocks, params.pulse_duration)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class ScanResult:
    """Survival probability versus scan frequency (detuning for heterodyne runs)."""

    scheme: str
    omegas: np.ndarray  # rad/s, strictly increasing
    probabilities: np.ndarray
    phases: np.ndarray | None  # accumulated phases, analytic engine only
    engine: EngineConfig
    params: SequenceParams
    point_errors: tuple[tuple[int, str], ...] = ()
    reference_frequency: float | None = None
    shots: int | None = None

    def __post_init__(self) -> None:
        omegas = np.asarray(self.omegas, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if omegas.shape != probs.shape:
            raise ValueError("grid and probability arrays must match")
        if np.any(np.diff(omegas) <= 0.0):
            raise ValueError("scan grid must be strictly increasing")
        finite = probs[np.isfinite(probs)]
        if np.any((finite < 0.0) | (finite > 1.0)):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "probabilities", probs)
        if self.phases is not None:
            object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))


def _map_ordered(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_frequency_scan(
    scheme: str,
    spec: SignalSpec,
    omega_grid,
    params: SequenceParams,
    engine: EngineConfig | None = None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> ScanResult:
    """Sweep the scan frequency, rebuilding the sequence at every grid point.

    Grid points whose builder rejects the parameters (pulse overlap) are
    recorded as NaN with a per-point error note and the scan continues.
    Optional binomial shot noise replaces each probability by a ``shots``-shot
    estimate.
    """
    if engine is None:
        engine = EngineConfig()
    if shots is not None and rng is None:
        raise ValueError("shot noise requires an rng")
    omega_grid = np.asarray(omega_grid, dtype=float)
    analytic = engine.engine == ENGINE_ANALYTIC

    def evaluate(omega: float):
        try:
            seq = build_for_scheme(scheme, omega, params)
        except OverlapError as exc:
            return math.nan, math.nan, str(exc)
        if analytic:
            phi = accumulated_phase_analytic(seq, spec)
            p = apply_contrast_envelope(
                0.5 * (1.0 + math.cos(phi)), seq.total_duration, engine.dephasing_t2star
            )
            return p, phi, None
        return survival_after(seq, spec, engine), math.nan, None

    rows = _map_ordered(evaluate, omega_grid, threads)
    probs = np.array([row[0] for row in rows])
    phases = np.array([row[1] for row in rows]) if analytic else None
    errors = tuple((i, row[2]) for i, row in enumerate(rows) if row[2] is not None)

    if shots is not None:
        ok = np.isfinite(probs)
        noisy = probs.copy()
        noisy[ok] = rng.binomial(shots, probs[ok]) / shots
        probs = noisy

    return ScanResult(
        scheme=scheme,
        omegas=omega_grid,
        probabilities=probs,
        phases=phases,
        engine=engine,
        params=params,
        point_errors=errors,
        shots=shots,
    )


@dataclass(frozen=True)
class RobustnessResult:
    """Final-state fidelity versus noise amplitude at a fixed harmonic."""

    scheme: str
    harmonic: int
    amplitudes: np.ndarray  # lab-frame noise amplitudes, rad/s
    fidelities: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "fidelities", np.asarray(self.fidelities, dtype=float))


def _noise_spec(scheme: str, amplitude: float, omega_noise: float) -> SignalSpec:
    if scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        return SignalSpec(parallel_tones=(Tone(amplitude, omega_noise, 0.0),))
    return SignalSpec(
        perpendicular_tones=(Tone(amplitude / 2.0, omega_noise, 0.0),),
        frame="rotating",
    )


def run_robustness(
    scheme: str,
    harmonic: int,
    amplitudes,
    omega_scan: float,
    params: SequenceParams,
    engine: EngineConfig | None = None,
    threads: int = 1,
) -> RobustnessResult:
    """Fidelity of the prepared state under a single noise tone at k * w_scan.

    The target signal is absent; the noise amplitude grid is swept at fixed
    odd harmonic k >= 3 (lab amplitudes; the heterodyne schemes see the
    corresponding rotating-frame quadrature tone).
    """
    if harmonic < 3 or harmonic % 2 == 0:
        raise ValueError("harmonic must be odd and >= 3")
    if engine is None:
        engine = EngineConfig()
    amplitudes = np.asarray(amplitudes, dtype=float)
    seq = build_for_scheme(scheme, omega_scan, params)
    omega_noise = harmonic * omega_scan

    def evaluate(amplitude: float) -> float:
        return survival_after(seq, _noise_spec(scheme, amplitude, omega_noise), engine)

    fidelities = np.array(_map_ordered(evaluate, amplitudes, threads))
    return RobustnessResult(scheme, harmonic, amplitudes, fidelities)


def run_heterodyne_scan(
    scheme: str,
    lab_spec: SignalSpec,
    omega0: float,
    detuning_grid,
    params: SequenceParams,
    engine: EngineConfig | None = None,
    strict: bool = False,
    threads: int = 1,
) -> ScanResult:
    """Transform a lab-frame transverse signal to the rotating frame and scan.

    The result grid is in detuning units; the target lab frequency is
    recoverable as omega0 + detuning via ``reference_frequency``.
    """
    if scheme not in (SCHEME_CPMG, SCHEME_GD_PERP):
        raise ValueError("heterodyne scans support the rotating-frame schemes only")
    rotating = to_rotating_frame(lab_spec, omega0, strict=strict)
    result = run_frequency_scan(scheme, rotating, detuning_grid, params, engine, threads=threads)
    return replace(result, reference_frequency=omega0)


# ---------------------------------------------------------------------------
# synchronized readout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhotonTrace:
    """Seeded photon-count record of repeated synchronized sensing shots."""

    interval: float  # s, shot-to-shot repetition time T_L
    counts: np.ndarray  # non-negative integers
    gain: float  # expected photons per readout
    contrast: float  # optical contrast in [0, 1]; 0 decouples counts from the spin
    seed: int
    scheme: str

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.size < 2:
            raise ValueError("a photon trace needs at least 2 samples")
        if not np.issubdtype(counts.dtype, np.integer) or np.any(counts < 0):
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "counts", counts)

    @property
    def n_samples(self) -> int:
        return int(self.counts.size)


def slice_phases(
    frequency: float, interval: float, n_samples: int, initial_phase: float = 0.0
) -> np.ndarray:
    """Per-shot phases of a continuous tone sampled every ``interval`` seconds.

    phi_m = initial_phase + m * (frequency * interval mod 2 pi), reduced to
    [0, 2 pi); the reduced increment keeps the arithmetic exact to float
    precision over long traces.
    """
    increment = math.fmod(frequency * interval, TWO_PI)
    return np.mod(initial_phase + increment * np.arange(n_samples), TWO_PI)


def synchronized_phase_period(
    frequency_hz, interval_s, max_period: int = 10
) -> int | None:
    """Smallest p <= max_period with p * f * T_L an integer number of cycles.

    Exact rational arithmetic on the configured values (pass strings,
    integers, or Fractions); returns None when no such period exists.
    """
    cycles = Fraction(str(frequency_hz)) * Fraction(str(interval_s))
    for p in range(1, max_period + 1):
        if (p * cycles).denominator == 1:
            return p
    return None


_READOUT_ROTATIONS = {
    SCHEME_XY: ("x", 0.5 * math.pi),
    SCHEME_GD_PARALLEL: ("x", 0.5 * math.pi),
    SCHEME_CPMG: ("y", 1.5 * math.pi),
    SCHEME_GD_PERP: None,
}


def _sync_probabilities_analytic(
    seq: PulseSequence,
    spec: SignalSpec,
    tone_phases: np.ndarray,
) -> np.ndarray:
    """Closed-form shot probabilities from the per-tone quadrature responses.

    The pre-readout rotation maps the accumulated phase onto the population of
    |0>, giving P = (1 +/- sin(Phi))/2 with the minus sign for CPMG's
    R_y(3 pi / 2).
    """
    a, b = phase_quadrature_responses(seq, spec)
    phi = np.cos(tone_phases) @ a + np.sin(tone_phases) @ b
    sign = -1.0 if seq.scheme == SCHEME_CPMG else 1.0
    return 0.5 * (1.0 + sign * np.sin(phi))


def _sync_probability_bruteforce(
    seq: PulseSequence, spec: SignalSpec, engine: EngineConfig
) -> float:
    final = propagate_bruteforce(seq, spec, prepared_state(seq.scheme), engine)
    rotation = _READOUT_ROTATIONS[seq.scheme]
    if rotation is not None:
        final = apply_unitary(final, rotation_matrix(*rotation))
    return survival_probability(final, "zero")


def run_synchronized_readout(
    scheme: str,
    spec: SignalSpec,
    params: SequenceParams,
    omega_scan: float,
    interval: float,
    n_samples: int,
    gain: float,
    contrast: float,
    seed: int,
    phase_offset: float = 0.0,
    engine: EngineConfig | None = None,
    readout_time: float = DEFAULT_READOUT_TIME,
) -> PhotonTrace:
    """Repeat one sensing procedure every ``interval`` seconds on a continuous signal.

    Shot m senses the signal slice whose tone phases have advanced by
    w * m * interval; the accumulated phase is mapped to a |0>-population by
    the scheme's pre-readout rotation and converted to photon counts through a
    Bernoulli projection followed by a Poisson readout of rate
    gain * (1 - contrast * outcome).  Deterministic under the seed.
    """
    if engine is None:
        engine = EngineConfig()
    if gain <= 0.0:
        raise ValueError("gain must be positive")
    if not (0.0 <= contrast <= 1.0):
        raise ValueError("contrast must lie in [0, 1]")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    seq = build_for_scheme(scheme, omega_scan, params)
    require_frame_match(seq, spec)
    if interval < seq.total_duration + readout_time:
        raise ValueError(
            f"interval {interval:.6g} s is shorter than sequence + readout "
            f"({seq.total_duration + readout_time:.6g} s)"
        )

    if scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        tones = spec.parallel_tones
    else:
        tones = spec.perpendicular_tones

    phases = np.empty((n_samples, len(tones)))
    for i, tone in enumerate(tones):
        phases[:, i] = slice_phases(tone.frequency, interval, n_samples, tone.phase + phase_offset)

    if engine.engine == ENGINE_ANALYTIC:
        probs = _sync_probabilities_analytic(seq, spec, phases)
    else:
        probs = np.empty(n_samples)
        tone_list = list(tones)
        for m in range(n_samples):
            shifted = tuple(
                Tone(t.amplitude, t.frequency, phases[m, i]) for i, t in enumerate(tone_list)
            )
            if scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
                spec_m = SignalSpec(parallel_tones=shifted)
            else:
                spec_m = SignalSpec(
                    perpendicular_tones=shifted,
                    frame="rotating",
                    reference_frequency=spec.reference_frequency,
                )
            probs[m] = _sync_probability_bruteforce(seq, spec_m, engine)

    probs = apply_contrast_envelope(probs, seq.total_duration, engine.dephasing_t2star)

    rng = np.random.default_rng(seed)
    bright = rng.random(n_samples) < probs
    counts = rng.poisson(gain * (1.0 - contrast * bright))
    return PhotonTrace(
        interval=interval,
        counts=counts,
        gain=gain,
        contrast=contrast,
        seed=seed,
        scheme=scheme,
    )
