"""Two-level sensor dynamics under pulse control and multi-tone signals.

Two engines are first-class:

* the **analytic** toggling-frame engine evaluates the accumulated phase
  Phi = integral F(t) B(t) dt in closed form per piecewise-constant segment of
  the modulation function (pulses toggle at their centres, i.e. the
  instantaneous-pulse picture), retaining the fast sum-frequency terms exactly;
* the **brute-force** engine integrates the full rotating-frame 2x2 Hamiltonian
  (control term during pulses, signal term everywhere) with a second-order
  midpoint exponential stepper, so finite pulse widths and all neglected
  toggling components are captured.

Everything is simulated in the rotating frame with the rotating-wave
approximation already applied; lab-frame carrier dynamics are out of scope.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .sequence import (
    SCHEME_CPMG,
    SCHEME_GD_PARALLEL,
    SCHEME_GD_PERP,
    SCHEME_XY,
    PulseSequence,
)
from .signal import FRAME_LAB, FRAME_ROTATING, FrameError, SignalSpec

BASIS_PLUS = "plus"  # (|0> + |1>)/sqrt(2)
BASIS_ELL = "ell"  # (|0> + i|1>)/sqrt(2)
BASIS_ZERO = "zero"

ENGINE_ANALYTIC = "analytic"
ENGINE_BRUTEFORCE = "bruteforce"

NORM_TOL = 1e-9

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class NumericalError(RuntimeError):
    """Propagation produced a non-finite or non-normalized state."""


@dataclass(frozen=True)
class SensorState:
    """Normalized two-level state with amplitudes over {|0>, |1>}."""

    c0: complex
    c1: complex

    @classmethod
    def zero(cls) -> "SensorState":
        return cls(1.0 + 0.0j, 0.0j)

    @classmethod
    def one(cls) -> "SensorState":
        return cls(0.0j, 1.0 + 0.0j)

    @classmethod
    def plus(cls) -> "SensorState":
        return cls(_INV_SQRT2 + 0.0j, _INV_SQRT2 + 0.0j)

    @classmethod
    def ell(cls) -> "SensorState":
        return cls(_INV_SQRT2 + 0.0j, 1j * _INV_SQRT2)

    @property
    def norm_squared(self) -> float:
        return abs(self.c0) ** 2 + abs(self.c1) ** 2

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm_squared - 1.0) > tol:
            raise ValueError(f"state norm^2 = {self.norm_squared:.12g} deviates from 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=complex)


@dataclass(frozen=True)
class EngineConfig:
    """Engine selection and brute-force resolution knobs.

    ``steps_per_gap_cycle`` counts midpoint steps per shortest signal period
    during free evolution; ``steps_per_pulse`` is the floor during pulses.
    ``dephasing_t2star`` (seconds), when set, is applied as a contrast envelope
    on readout probabilities only, never inside the unitary stepper.
    The rotating-wave approximation is always in effect.
    """

    engine: str = ENGINE_ANALYTIC
    steps_per_pulse: int = 32
    steps_per_gap_cycle: int = 128
    dephasing_t2star: float | None = None

    rwa: bool = True

    def __post_init__(self) -> None:
        if self.engine not in (ENGINE_ANALYTIC, ENGINE_BRUTEFORCE):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.steps_per_pulse < 8:
            raise ValueError("steps_per_pulse must be >= 8")
        if self.steps_per_gap_cycle < 16:
            raise ValueError("steps_per_gap_cycle must be >= 16")
        if self.dephasing_t2star is not None and not (self.dephasing_t2star > 0.0):
            raise ValueError("dephasing_t2star must be positive when set")
        if not self.rwa:
            raise ValueError("lab-frame carrier simulation is not supported; rwa is fixed true")


@dataclass(frozen=True)
class ModulationFunction:
    """Piecewise-constant toggling coefficient of the tracked Pauli axis.

    XY and GD-parallel track sigma_z, CPMG tracks sigma_y; their values are the
    real square wave (+/-1) or the staircase cos(2*pi*j/N).  GD-perp senses
    both quadratures of the rotating transverse field, so its tracked sigma_x
    coefficient is the complex single-sideband staircase exp(i 2 pi j / N),
    whose real part is the cosine staircase.  Segments partition
    [0, total duration] and |value| <= 1 everywhere.
    """

    scheme: str
    starts: np.ndarray
    ends: np.ndarray
    values: np.ndarray  # complex for GD-perp, real otherwise
    tracked_axis: str

    def __post_init__(self) -> None:
        starts = np.asarray(self.starts, dtype=float)
        ends = np.asarray(self.ends, dtype=float)
        values = np.asarray(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        if not (len(starts) == len(ends) == len(values)) or len(starts) == 0:
            raise ValueError("segment arrays must be non-empty and equal length")
        if starts[0] != 0.0 or np.any(starts[1:] != ends[:-1]):
            raise ValueError("segments must partition [0, T] without gaps")
        if np.any(ends < starts):
            raise ValueError("segment ends must not precede starts")
        if np.any(np.abs(values) > 1.0 + 1e-12):
            raise ValueError("modulation values must satisfy |value| <= 1")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "values", values)

    @property
    def end_time(self) -> float:
        return float(self.ends[-1])

    def value_at(self, t) -> np.ndarray:
        """Evaluate the staircase at time(s) t (right-continuous at boundaries)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, len(self.values) - 1)
        return self.values[idx]


def _staircase_values(seq: PulseSequence, kind: str) -> np.ndarray:
    """Toggling value after p pulses: sign flips for XY/CPMG, cosine or sine staircase for GD."""
    pulse_count = np.arange(len(seq.pulses) + 1)
    if seq.scheme in (SCHEME_XY, SCHEME_CPMG):
        if kind != "cos":
            raise ValueError("square-wave schemes have no sine staircase")
        return (-1.0) ** pulse_count
    n = seq.pulses_per_block
    angles = 2.0 * math.pi * (pulse_count % n) / n
    return np.cos(angles) if kind == "cos" else np.sin(angles)


def _segment_bounds(seq: PulseSequence) -> tuple[np.ndarray, np.ndarray]:
    centers = np.array(seq.pulse_centers, dtype=float)
    bounds = np.concatenate(([0.0], centers, [seq.total_duration]))
    return bounds[:-1], bounds[1:]


def toggling_modulation(seq: PulseSequence) -> ModulationFunction:
    """Instantaneous-pulse toggling modulation function of a sequence.

    The value switches at every pulse centre: XY and CPMG give sign-alternating
    square waves; a GD-parallel block gives the staircase cos(2*pi*j/N) after
    its j-th pulse (restarting every block), which approaches
    cos(2*pi*t/T_scan) for large N.  GD-perp carries the complex staircase
    exp(i 2 pi j / N): the rotating signal couples through the cosine and sine
    staircases together, so its frequency response is single-sideband (the
    brute-force propagator confirms the doubled on-resonance rotation rate this
    implies).
    """
    starts, ends = _segment_bounds(seq)
    if seq.scheme == SCHEME_GD_PERP:
        values = _staircase_values(seq, "cos") + 1j * _staircase_values(seq, "sin")
        axis = "x"
    else:
        values = _staircase_values(seq, "cos")
        axis = "z" if seq.scheme in (SCHEME_XY, SCHEME_GD_PARALLEL) else "y"
    return ModulationFunction(seq.scheme, starts, ends, values, axis)


def _clip_segments(
    starts: np.ndarray, ends: np.ndarray, upto: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    keep = starts < upto
    mask = np.flatnonzero(keep)
    clipped_ends = np.minimum(ends[keep], upto)
    return starts[keep], clipped_ends, mask


def _trig_integrals(starts: np.ndarray, ends: np.ndarray, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment integrals of cos(omega t) and sin(omega t)."""
    ic = (np.sin(omega * ends) - np.sin(omega * starts)) / omega
    isin = (np.cos(omega * starts) - np.cos(omega * ends)) / omega
    return ic, isin


def scheme_frame(scheme: str) -> str:
    """Signal frame a scheme senses in: lab/parallel for XY and GD-parallel,
    rotating for CPMG and GD-perp."""
    return FRAME_LAB if scheme in (SCHEME_XY, SCHEME_GD_PARALLEL) else FRAME_ROTATING


def require_frame_match(seq: PulseSequence, spec: SignalSpec) -> None:
    required = scheme_frame(seq.scheme)
    if spec.frame != required:
        raise FrameError(
            f"scheme {seq.scheme!r} requires a {required}-frame signal, got {spec.frame!r}"
        )


def phase_quadrature_responses(
    seq: PulseSequence, spec: SignalSpec, upto: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-tone quadrature responses (A_i, B_i) of the accumulated phase.

    For tone phases phi_i the accumulated phase is exactly
    Phi = sum_i A_i cos(phi_i) + B_i sin(phi_i); the responses are computed for
    the zero-phase version of each tone, so synchronized-readout slice phases
    can be applied afterwards.  Rotating-frame tone amplitudes enter doubled,
    restoring the lab amplitude of the transverse field whose quadratures they
    describe.
    """
    require_frame_match(seq, spec)
    if upto is None:
        upto = seq.total_duration
    if upto < 0.0 or upto > seq.total_duration * (1.0 + 1e-12):
        raise ValueError("upto must lie within [0, total_duration]")

    starts, ends = _segment_bounds(seq)
    cos_values = _staircase_values(seq, "cos")
    starts, ends, mask = _clip_segments(starts, ends, upto)
    cos_values = cos_values[mask]

    if seq.scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        tones = spec.parallel_tones
    else:
        tones = spec.perpendicular_tones

    a = np.zeros(len(tones))
    b = np.zeros(len(tones))
    if seq.scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        # Phi = integral F(t) * sum_i b_i cos(w_i t + phi_i) dt
        for i, tone in enumerate(tones):
            ic, isin = _trig_integrals(starts, ends, tone.frequency)
            a[i] = tone.amplitude * float(cos_values @ ic)
            b[i] = -tone.amplitude * float(cos_values @ isin)
    elif seq.scheme == SCHEME_CPMG:
        # Phi = integral F(t) * sum_i 2 b_i sin(delta_i t + phi_i) dt
        for i, tone in enumerate(tones):
            ic, isin = _trig_integrals(starts, ends, tone.frequency)
            a[i] = 2.0 * tone.amplitude * float(cos_values @ isin)
            b[i] = 2.0 * tone.amplitude * float(cos_values @ ic)
    else:
        # GD-perp couples through both quadrature staircases:
        # Phi = integral [C(t) B_x(t) + S(t) B_y(t)] dt with C = cos, S = sin staircase.
        sin_values = _staircase_values(seq, "sin")[mask]
        for i, tone in enumerate(tones):
            ic, isin = _trig_integrals(starts, ends, tone.frequency)
            c_cos = float(cos_values @ ic)
            c_sin = float(cos_values @ isin)
            s_cos = float(sin_values @ ic)
            s_sin = float(sin_values @ isin)
            a[i] = 2.0 * tone.amplitude * (c_cos + s_sin)
            b[i] = 2.0 * tone.amplitude * (s_cos - c_sin)
    return a, b


def accumulated_phase_analytic(
    seq: PulseSequence, spec: SignalSpec, upto: float | None = None
) -> float:
    """Accumulated phase of the toggling-frame rotation up to time ``upto``.

    Evaluated in closed form per staircase segment; the fast sum-frequency
    terms are retained automatically by the exact integral.
    """
    a, b = phase_quadrature_responses(seq, spec, upto)
    if seq.scheme in (SCHEME_XY, SCHEME_GD_PARALLEL):
        tones = spec.parallel_tones
    else:
        tones = spec.perpendicular_tones
    phases = np.array([tone.phase for tone in tones])
    if len(phases) == 0:
        return 0.0
    return float(a @ np.cos(phases) + b @ np.sin(phases))


def analytic_survival_probability(
    seq: PulseSequence, spec: SignalSpec, upto: float | None = None
) -> float:
    """Survival probability (1 + cos(Phi))/2 of the scheme's prepared state."""
    phi = accumulated_phase_analytic(seq, spec, upto)
    return 0.5 * (1.0 + math.cos(phi))


# ---------------------------------------------------------------------------
# brute-force propagation
# ---------------------------------------------------------------------------


def _signal_coefficients(spec: SignalSpec, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pauli coefficients (hx, hy, hz) of the signal Hamiltonian at times t.

    Lab frame: the parallel field enters as B(t) sigma_z / 2; perpendicular
    tones oscillate at the carrier and vanish under the RWA.  Rotating frame:
    each perpendicular tone contributes b [cos(d t + phi) sigma_x
    - sin(d t + phi) sigma_y] while parallel tones pass through on sigma_z.
    """
    hx = np.zeros_like(t)
    hy = np.zeros_like(t)
    hz = np.zeros_like(t)
    for tone in spec.parallel_tones:
        hz += 0.5 * tone.amplitude * np.cos(tone.frequency * t + tone.phase)
    if spec.is_rotating:
        for tone in spec.perpendicular_tones:
            arg = tone.frequency * t + tone.phase
            hx += tone.amplitude * np.cos(arg)
            hy -= tone.amplitude * np.sin(arg)
    return hx, hy, hz


def _shortest_signal_period(spec: SignalSpec) -> float | None:
    freqs = [tone.frequency for tone in spec.parallel_tones]
    if spec.is_rotating:
        freqs += [tone.frequency for tone in spec.perpendicular_tones]
    freqs = [f for f in freqs if f > 0.0]
    if not freqs:
        return None
    return 2.0 * math.pi / max(freqs)


def _apply_steps(c0: complex, c1: complex, hx, hy, hz, dt: float) -> tuple[complex, complex]:
    """Apply the exact 2x2 exponential of each midpoint-sampled Hamiltonian step."""
    for k in range(len(hx)):
        x = hx[k]
        y = hy[k]
        z = hz[k]
        h = math.sqrt(x * x + y * y + z * z)
        if h == 0.0:
            continue
        theta = h * dt
        cosv = math.cos(theta)
        sinv = math.sin(theta)
        nx = x / h
        ny = y / h
        nz = z / h
        u00 = cosv - 1j * sinv * nz
        u01 = -1j * sinv * (nx - 1j * ny)
        u10 = -1j * sinv * (nx + 1j * ny)
        u11 = cosv + 1j * sinv * nz
        c0, c1 = u00 * c0 + u01 * c1, u10 * c0 + u11 * c1
    return c0, c1


def _apply_instantaneous_pi(c0: complex, c1: complex, axis) -> tuple[complex, complex]:
    nx, ny, nz = axis
    # exp(-i pi (n.sigma) / 2) = -i (n.sigma)
    u00 = -1j * nz
    u01 = -1j * (nx - 1j * ny)
    u10 = -1j * (nx + 1j * ny)
    u11 = 1j * nz
    return u00 * c0 + u01 * c1, u10 * c0 + u11 * c1


def propagate_bruteforce(
    seq: PulseSequence,
    spec: SignalSpec,
    psi0: SensorState,
    cfg: EngineConfig,
    upto: float | None = None,
) -> SensorState:
    """Integrate the full 2x2 Hamiltonian and return the final state.

    During pulses the constant-axis control term and the signal term act
    together; between pulses only the signal acts.  Each step applies the exact
    exponential of the midpoint Hamiltonian, so the norm is conserved to
    machine precision.  Instantaneous (zero-duration) pulses are applied as
    exact pi rotations.
    """
    psi0.require_normalized()
    if upto is None:
        upto = seq.total_duration
    if upto < 0.0 or upto > seq.total_duration * (1.0 + 1e-12):
        raise ValueError("upto must lie within [0, total_duration]")

    period = _shortest_signal_period(spec)
    c0 = complex(psi0.c0)
    c1 = complex(psi0.c1)

    def signal_steps(t0: float, t1: float, floor: int) -> int:
        if period is None:
            return floor
        return max(floor, math.ceil((t1 - t0) / period * cfg.steps_per_gap_cycle))

    def evolve_gap(t0: float, t1: float) -> None:
        nonlocal c0, c1
        if t1 <= t0 or period is None:
            return
        n = signal_steps(t0, t1, 1)
        dt = (t1 - t0) / n
        mid = t0 + (np.arange(n) + 0.5) * dt
        hx, hy, hz = _signal_coefficients(spec, mid)
        if not spec.is_rotating:
            # sigma_z-only Hamiltonians commute: accumulate one diagonal phase.
            theta = float(np.sum(hz)) * dt
            c0 *= cmath.exp(-1j * theta)
            c1 *= cmath.exp(1j * theta)
        else:
            c0, c1 = _apply_steps(c0, c1, hx, hy, hz, dt)

    def evolve_pulse(pulse, t0: float, t1: float) -> None:
        nonlocal c0, c1
        if pulse.is_instantaneous:
            c0, c1 = _apply_instantaneous_pi(c0, c1, pulse.rotation_axis())
            return
        if t1 <= t0:
            return
        n = signal_steps(t0, t1, cfg.steps_per_pulse)
        dt = (t1 - t0) / n
        mid = t0 + (np.arange(n) + 0.5) * dt
        hx, hy, hz = _signal_coefficients(spec, mid)
        ax, ay, az = pulse.rotation_axis()
        half_rabi = 0.5 * pulse.rabi
        hx = hx + half_rabi * ax
        hy = hy + half_rabi * ay
        hz = hz + half_rabi * az
        c0, c1 = _apply_steps(c0, c1, hx, hy, hz, dt)

    cursor = 0.0
    for pulse in seq.pulses:
        if pulse.start >= upto:
            break
        evolve_gap(cursor, min(pulse.start, upto))
        pulse_end = min(pulse.end, upto)
        evolve_pulse(pulse, pulse.start, pulse_end)
        cursor = pulse_end
        if cursor >= upto:
            break
    evolve_gap(cursor, upto)

    if not (cmath.isfinite(c0) and cmath.isfinite(c1)):
        raise NumericalError(
            f"propagation produced non-finite amplitudes at t = {upto:.6g} s "
            f"(scheme {seq.scheme}, {len(seq.pulses)} pulses)"
        )
    final = SensorState(c0, c1)
    if abs(final.norm_squared - 1.0) > NORM_TOL:
        raise NumericalError(
            f"norm drifted to {final.norm_squared:.12g} at t = {upto:.6g} s"
        )
    return final


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

_BASIS_STATES = {
    BASIS_PLUS: (complex(_INV_SQRT2), complex(_INV_SQRT2)),
    BASIS_ELL: (complex(_INV_SQRT2), 1j * _INV_SQRT2),
    BASIS_ZERO: (1.0 + 0.0j, 0.0j),
}


def survival_probability(state: SensorState, basis: str) -> float:
    """|<basis|state>|^2 for basis in {"plus", "ell", "zero"}."""
    state.require_normalized()
    try:
        b0, b1 = _BASIS_STATES[basis]
    except KeyError:
        raise ValueError(f"unknown readout basis {basis!r}") from None
    amp = b0.conjugate() * state.c0 + b1.conjugate() * state.c1
    return min(1.0, abs(amp) ** 2)


def state_fidelity(state: SensorState, target: SensorState) -> float:
    """|<target|state>|^2 of two normalized pure states."""
    state.require_normalized()
    target.require_normalized()
    amp = target.c0.conjugate() * state.c0 + target.c1.conjugate() * state.c1
    return min(1.0, abs(amp) ** 2)


def apply_contrast_envelope(probability: float, duration: float, t2star: float | None) -> float:
    """Phenomenological dephasing knob: shrink the contrast of a probability.

    Maps p to 1/2 + (p - 1/2) * exp(-duration / t2star); the unitary dynamics
    are never touched.
    """
    if t2star is None:
        return probability
    return 0.5 + (probability - 0.5) * math.exp(-duration / t2star)


_PREPARED_BASIS = {
    SCHEME_XY: BASIS_PLUS,
    SCHEME_GD_PARALLEL: BASIS_PLUS,
    SCHEME_CPMG: BASIS_ZERO,
    SCHEME_GD_PERP: BASIS_ELL,
}

_STATE_FACTORY = {
    BASIS_PLUS: SensorState.plus,
    BASIS_ELL: SensorState.ell,
    BASIS_ZERO: SensorState.zero,
}


def readout_basis(scheme: str) -> str:
    """Sensing basis of a scheme: the state it prepares and projects back onto."""
    try:
        return _PREPARED_BASIS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}") from None


def prepared_state(scheme: str) -> SensorState:
    return _STATE_FACTORY[readout_basis(scheme)]()


def survival_after(seq: PulseSequence, spec: SignalSpec, cfg: EngineConfig) -> float:
    """One-shot sensing probability of a sequence on a signal, engine-dispatched.

    Prepares the scheme's initial state, evolves, and projects back onto it;
    the optional dephasing contrast envelope is applied here, at the readout
    layer.
    """
    if cfg.engine == ENGINE_ANALYTIC:
        p = analytic_survival_probability(seq, spec)
    else:
        final = propagate_bruteforce(seq, spec, prepared_state(seq.scheme), cfg)
        p = survival_probability(final, readout_basis(seq.scheme))
    return apply_contrast_envelope(p, seq.total_duration, cfg.dephasing_t2star)


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """2x2 rotation exp(-i angle sigma_axis / 2) for axis in {"x", "y", "z"}."""
    half = 0.5 * angle
    c = math.cos(half)
    s = math.sin(half)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "z":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]], dtype=complex)
    raise ValueError(f"unknown axis {axis!r}")


def apply_unitary(state: SensorState, u: np.ndarray) -> SensorState:
    vec = u @ state.as_array()
    return SensorState(complex(vec[0]), complex(vec[1]))
