"""Multi-tone AC signal descriptions, projections, and the heterodyne frame transform.

All amplitudes and frequencies are angular (rad/s).  A tone quoted in the
"2 pi x 24 kHz" convention is stored as ``2 * pi * 24e3`` directly; there is no
Tesla conversion layer (the gyromagnetic ratio only ever appears in docs).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi

FRAME_LAB = "lab"
FRAME_ROTATING = "rotating"

# Heterodyne validity: amplitude << |detuning| << carrier sum.  The inequalities
# carry no universal thresholds, so these are configuration constants; strict
# mode turns the warning into an error.
MAX_AMPLITUDE_DETUNING_RATIO = 0.2
MAX_DETUNING_CARRIER_RATIO = 0.01


class FrameError(ValueError):
    """Operation applied to a signal in the wrong reference frame."""


class HeterodyneValidityError(ValueError):
    """Rotating-frame transform requested outside its regime of validity."""


def reduce_phase(phase: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    reduced = math.fmod(phase, TWO_PI)
    if reduced < 0.0:
        reduced += TWO_PI
    return 0.0 if reduced == TWO_PI else reduced


@dataclass(frozen=True)
class Tone:
    """Single AC tone ``amplitude * cos(frequency * t + phase)``.

    In a rotating-frame spec the ``frequency`` of a perpendicular tone is a
    detuning and the ``amplitude`` is the per-quadrature value (half the lab
    amplitude, see :func:`to_rotating_frame`).
    """

    amplitude: float  # rad/s, >= 0
    frequency: float  # rad/s, > 0
    phase: float = 0.0  # rad, stored reduced to [0, 2*pi)

    def __post_init__(self) -> None:
        if not (self.amplitude >= 0.0):
            raise ValueError(f"tone amplitude must be >= 0, got {self.amplitude}")
        if not (self.frequency > 0.0):
            raise ValueError(f"tone frequency must be > 0, got {self.frequency}")
        object.__setattr__(self, "phase", reduce_phase(self.phase))

    def with_phase(self, phase: float) -> "Tone":
        return replace(self, phase=phase)


@dataclass(frozen=True)
class SignalSpec:
    """Multi-tone field split into components parallel/perpendicular to the sensor axis.

    ``frame`` is either "lab" or "rotating".  In the rotating frame the
    perpendicular tone frequencies are positive detunings relative to the qubit
    splitting; ``reference_frequency`` records that splitting when the spec was
    produced by :func:`to_rotating_frame` (it may be ``None`` for specs built
    directly in detuning space).
    """

    parallel_tones: tuple[Tone, ...] = ()
    perpendicular_tones: tuple[Tone, ...] = ()
    frame: str = FRAME_LAB
    reference_frequency: float | None = None

    def __post_init__(self) -> None:
        if self.frame not in (FRAME_LAB, FRAME_ROTATING):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.frame == FRAME_LAB and self.reference_frequency is not None:
            raise FrameError("lab-frame spec must not carry a reference frequency")
        object.__setattr__(self, "parallel_tones", tuple(self.parallel_tones))
        object.__setattr__(self, "perpendicular_tones", tuple(self.perpendicular_tones))

    @property
    def is_rotating(self) -> bool:
        return self.frame == FRAME_ROTATING


def field_parallel(spec: SignalSpec, t):
    """Evaluate the parallel field sum(b * cos(w*t + phi)) at time(s) ``t`` (lab frame).

    Accepts a scalar or ndarray ``t``; times must be non-negative.
    """
    if spec.is_rotating:
        raise FrameError("field_parallel is defined for lab-frame specs only")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("times must be non-negative")
    total = np.zeros_like(t)
    for tone in spec.parallel_tones:
        total = total + tone.amplitude * np.cos(tone.frequency * t + tone.phase)
    return total if total.ndim else float(total)


def to_rotating_frame(spec: SignalSpec, omega0: float, strict: bool = False) -> SignalSpec:
    """Transform a lab-frame spec into the rotating frame of qubit splitting ``omega0``.

    Each perpendicular tone at lab frequency w becomes a tone at detuning
    ``delta = w - omega0`` with amplitude ``b / 2`` (the per-quadrature
    coefficient of the effective low-frequency field).  Phases are preserved.
    Parallel tones commute with the frame rotation and pass through unchanged.

    The transform is valid only for ``b << |delta| << w + omega0``; violations
    warn by default and raise when ``strict`` is set.  Negative and zero
    detunings are rejected.
    """
    if spec.is_rotating:
        raise FrameError("spec is already in a rotating frame")
    if not (omega0 > 0.0):
        raise ValueError("reference frequency must be positive")

    rotated = []
    for tone in spec.perpendicular_tones:
        delta = tone.frequency - omega0
        if delta == 0.0:
            raise HeterodyneValidityError(
                "tone exactly at the reference frequency has zero detuning and is out of band"
            )
        if delta < 0.0:
            raise HeterodyneValidityError(
                f"negative detuning {delta:.6g} rad/s not supported: tones must sit above omega0"
            )
        problems = []
        if tone.amplitude > 0.0 and tone.amplitude / abs(delta) > MAX_AMPLITUDE_DETUNING_RATIO:
            problems.append(
                f"amplitude/detuning ratio {tone.amplitude / abs(delta):.3g} exceeds "
                f"{MAX_AMPLITUDE_DETUNING_RATIO}"
            )
        if abs(delta) / (tone.frequency + omega0) > MAX_DETUNING_CARRIER_RATIO:
            problems.append(
                f"detuning/carrier ratio {abs(delta) / (tone.frequency + omega0):.3g} exceeds "
                f"{MAX_DETUNING_CARRIER_RATIO}"
            )
        if problems:
            message = "heterodyne validity violated: " + "; ".join(problems)
            if strict:
                raise HeterodyneValidityError(message)
            warnings.warn(message, stacklevel=2)
        rotated.append(Tone(tone.amplitude / 2.0, delta, tone.phase))

    return SignalSpec(
        parallel_tones=spec.parallel_tones,
        perpendicular_tones=tuple(rotated),
        frame=FRAME_ROTATING,
        reference_frequency=omega0,
    )


def random_phase(rng: np.random.Generator, grid_size: int) -> float:
    """Draw a phase uniformly from the grid {2*pi*k/grid_size : k = 0..grid_size-1}."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    return TWO_PI * int(rng.integers(grid_size)) / grid_size


def phase_grid(grid_size: int) -> np.ndarray:
    """The full phase grid {2*pi*k/grid_size}, used by stratified sampling schedules."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    return TWO_PI * np.arange(grid_size) / grid_size
