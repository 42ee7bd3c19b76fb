"""Timed pi-pulse programs for the four sensing schemes.

Builders produce one of four schemes:

* ``xy``           -- (tau/2 - pi_x - tau - pi_y - tau - pi_y - tau - pi_x - tau/2)^Ns,
                      scan frequency   w_scan = pi / (tau + t_pi)
* ``cpmg``         -- (tau - pi_x - tau - pi_x)^Ns,
                      scan frequency   w_scan = pi / (tau + 3*t_pi/4)
* ``gd_parallel``  -- geodesic block of N pulses in the x-z plane,
                      pulse j centred at T_scan*(2j-1)/(2N) with axis phase
                      phi_j = 2*pi*T_j/T_scan
* ``gd_perp``      -- same geodesic timing with axes in the x-y plane

A pulse with ``duration == 0`` is an ideal instantaneous pi rotation (its Rabi
amplitude is stored as ``inf``); every finite pulse satisfies the pi-area
condition rabi * duration == pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .signal import TWO_PI, reduce_phase

PLANE_XZ = "xz"
PLANE_XY = "xy"

SCHEME_XY = "xy"
SCHEME_CPMG = "cpmg"
SCHEME_GD_PARALLEL = "gd_parallel"
SCHEME_GD_PERP = "gd_perp"
SCHEMES = (SCHEME_XY, SCHEME_CPMG, SCHEME_GD_PARALLEL, SCHEME_GD_PERP)

PI_AREA_RTOL = 1e-9
TIMING_RTOL = 1e-12


class OverlapError(ValueError):
    """Pulse program parameters produce overlapping pulses."""


@dataclass(frozen=True)
class Pulse:
    """Square pi pulse of given Rabi amplitude about a fixed axis.

    ``plane == "xz"`` rotates about (sin(phase), 0, -cos(phase));
    ``plane == "xy"`` rotates about (cos(phase), -sin(phase), 0).
    """

    center: float  # s
    duration: float  # s, 0 means instantaneous
    rabi: float  # rad/s, inf for instantaneous pulses
    axis_phase: float  # rad, reduced to [0, 2*pi)
    plane: str

    def __post_init__(self) -> None:
        if self.plane not in (PLANE_XZ, PLANE_XY):
            raise ValueError(f"unknown pulse plane {self.plane!r}")
        if self.duration < 0.0:
            raise ValueError("pulse duration must be >= 0")
        if self.center - self.duration / 2.0 < 0.0:
            raise ValueError("pulse extends before t = 0")
        if self.duration > 0.0 and abs(self.rabi * self.duration - math.pi) > PI_AREA_RTOL * math.pi:
            raise ValueError(
                f"pulse area {self.rabi * self.duration:.12g} rad is not pi"
            )
        object.__setattr__(self, "axis_phase", reduce_phase(self.axis_phase))

    @property
    def start(self) -> float:
        return self.center - self.duration / 2.0

    @property
    def end(self) -> float:
        return self.center + self.duration / 2.0

    @property
    def is_instantaneous(self) -> bool:
        return self.duration == 0.0

    def rotation_axis(self) -> tuple[float, float, float]:
        if self.plane == PLANE_XZ:
            return (math.sin(self.axis_phase), 0.0, -math.cos(self.axis_phase))
        return (math.cos(self.axis_phase), -math.sin(self.axis_phase), 0.0)


@dataclass(frozen=True)
class PulseSequence:
    """Time-ordered pi-pulse program of ``n_blocks`` identical blocks."""

    pulses: tuple[Pulse, ...]
    scheme: str
    scan_frequency: float  # rad/s
    pulses_per_block: int
    n_blocks: int
    block_length: float  # s
    total_duration: float  # s

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "pulses", tuple(self.pulses))

    @property
    def pulse_centers(self) -> tuple[float, ...]:
        return tuple(p.center for p in self.pulses)


def _pulse_width(pulse_duration: float, rabi_or_none=None) -> tuple[float, float]:
    if pulse_duration < 0.0:
        raise ValueError("pulse duration must be >= 0")
    if pulse_duration == 0.0:
        return 0.0, math.inf
    return pulse_duration, math.pi / pulse_duration


def build_gd(
    plane: str,
    omega_scan: float,
    n_pulses: int,
    n_blocks: int,
    pulse_duration: float,
) -> PulseSequence:
    """Geodesic block: N pulses per scan period with a linear axis-phase ramp.

    Within each block of length T_scan = 2*pi/omega_scan, pulse j (1-based) is
    centred at T_scan*(2j-1)/(2N) with axis phase phi_j = pi*(2j-1)/N.  The
    phase ramp restarts at every block.
    """
    if plane not in (PLANE_XZ, PLANE_XY):
        raise ValueError(f"unknown plane {plane!r}")
    if n_pulses < 2:
        raise ValueError("geodesic block needs at least 2 pulses")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if not (omega_scan > 0.0):
        raise ValueError("scan frequency must be positive")
    duration, rabi = _pulse_width(pulse_duration)
    t_scan = TWO_PI / omega_scan
    tau_gd = t_scan / n_pulses - duration
    if tau_gd <= 0.0:
        raise OverlapError(
            f"pulses overlap at this scan frequency/width: T_scan/N = {t_scan / n_pulses:.4g} s "
            f"<= pulse duration {duration:.4g} s"
        )
    scheme = SCHEME_GD_PARALLEL if plane == PLANE_XZ else SCHEME_GD_PERP
    pulses = []
    for block in range(n_blocks):
        offset = block * t_scan
        for j in range(1, n_pulses + 1):
            center = offset + t_scan * (2 * j - 1) / (2 * n_pulses)
            phase = math.pi * (2 * j - 1) / n_pulses
            pulses.append(Pulse(center, duration, rabi, phase, plane))
    return PulseSequence(
        pulses=tuple(pulses),
        scheme=scheme,
        scan_frequency=omega_scan,
        pulses_per_block=n_pulses,
        n_blocks=n_blocks,
        block_length=t_scan,
        total_duration=n_blocks * t_scan,
    )


def build_xy(omega_scan: float, n_blocks: int, pulse_duration: float) -> PulseSequence:
    """XY block of four pulses (x, y, y, x) with centres at odd multiples of (tau + t_pi)/2."""
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if not (omega_scan > 0.0):
        raise ValueError("scan frequency must be positive")
    duration, rabi = _pulse_width(pulse_duration)
    spacing = math.pi / omega_scan  # tau + t_pi
    tau = spacing - duration
    if tau <= 0.0:
        raise OverlapError(
            f"pulses overlap: pi/omega_scan = {spacing:.4g} s <= pulse duration {duration:.4g} s"
        )
    block = 4.0 * spacing
    phases = (0.0, -math.pi / 2.0, -math.pi / 2.0, 0.0)  # x, y, y, x
    pulses = []
    for b in range(n_blocks):
        offset = b * block
        for m in range(1, 5):
            center = offset + (2 * m - 1) * spacing / 2.0
            pulses.append(Pulse(center, duration, rabi, phases[m - 1], PLANE_XY))
    return PulseSequence(
        pulses=tuple(pulses),
        scheme=SCHEME_XY,
        scan_frequency=omega_scan,
        pulses_per_block=4,
        n_blocks=n_blocks,
        block_length=block,
        total_duration=n_blocks * block,
    )


def build_cpmg(
    omega_scan: float,
    n_blocks: int,
    pulse_duration: float,
    naive_spacing: bool = False,
) -> PulseSequence:
    """CPMG block (tau - pi_x - tau - pi_x) with w_scan = pi/(tau + 3*t_pi/4).

    ``naive_spacing`` switches the inversion to w_scan = pi/(tau + t_pi), the
    uniform-centre-spacing convention, for sensitivity studies.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if not (omega_scan > 0.0):
        raise ValueError("scan frequency must be positive")
    duration, rabi = _pulse_width(pulse_duration)
    correction = duration if naive_spacing else 0.75 * duration
    tau = math.pi / omega_scan - correction
    if tau <= 0.0:
        raise OverlapError(
            f"pulses overlap: pi/omega_scan = {math.pi / omega_scan:.4g} s <= "
            f"pulse-width correction {correction:.4g} s"
        )
    block = 2.0 * tau + 2.0 * duration
    pulses = []
    for b in range(n_blocks):
        offset = b * block
        pulses.append(Pulse(offset + tau + duration / 2.0, duration, rabi, 0.0, PLANE_XY))
        pulses.append(Pulse(offset + 2.0 * tau + 1.5 * duration, duration, rabi, 0.0, PLANE_XY))
    return PulseSequence(
        pulses=tuple(pulses),
        scheme=SCHEME_CPMG,
        scan_frequency=omega_scan,
        pulses_per_block=2,
        n_blocks=n_blocks,
        block_length=block,
        total_duration=n_blocks * block,
    )


def _close(a: float, b: float, rtol: float) -> bool:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) <= rtol * scale


def validate(seq: PulseSequence) -> list[str]:
    """Check ordering, non-overlap, pi areas, and per-scheme timing formulas.

    Returns a list of human-readable violations; an empty list means the
    sequence is consistent.
    """
    violations: list[str] = []
    pulses = seq.pulses

    for i, p in enumerate(pulses):
        if p.duration > 0.0 and abs(p.rabi * p.duration - math.pi) > PI_AREA_RTOL * math.pi:
            violations.append(f"pulse {i}: area {p.rabi * p.duration:.12g} rad is not pi")
        if p.start < 0.0:
            violations.append(f"pulse {i}: starts before t = 0")
        if p.end > seq.total_duration * (1.0 + TIMING_RTOL):
            violations.append(f"pulse {i}: extends past the sequence end")

    for i in range(1, len(pulses)):
        if pulses[i].center <= pulses[i - 1].center:
            violations.append(f"pulses {i - 1} and {i} are out of order or coincident")
        if pulses[i].start < pulses[i - 1].end:
            violations.append(f"pulses {i - 1} and {i} overlap")

    if not _close(seq.total_duration, seq.n_blocks * seq.block_length, TIMING_RTOL):
        violations.append("total_duration != n_blocks * block_length")
    if len(pulses) != seq.pulses_per_block * seq.n_blocks:
        violations.append("pulse count != pulses_per_block * n_blocks")

    if seq.scheme in (SCHEME_GD_PARALLEL, SCHEME_GD_PERP) and not violations:
        n = seq.pulses_per_block
        t_scan = seq.block_length
        for i, p in enumerate(pulses):
            j = i % n + 1
            block = i // n
            expected_center = block * t_scan + t_scan * (2 * j - 1) / (2 * n)
            expected_phase = reduce_phase(math.pi * (2 * j - 1) / n)
            if not _close(p.center, expected_center, TIMING_RTOL):
                violations.append(f"pulse {i}: centre deviates from the geodesic timing formula")
            if abs(p.axis_phase - expected_phase) > TIMING_RTOL * TWO_PI:
                violations.append(f"pulse {i}: axis phase deviates from the geodesic phase ramp")

    return violations
