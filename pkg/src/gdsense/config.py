"""Declarative experiment configuration (TOML) with strict validation.

Config files carry plain unit-suffixed numbers (``frequency_mhz = 0.3``,
``amplitude_khz = 24.0``, ``pulse_duration_ns = 50``); the single ``2 * pi``
multiplication onto angular units happens here, at load, and nowhere else.
Unknown keys are rejected, and a config that parses but fails validation
produces a complete violation report instead of a partial run.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import ENGINE_ANALYTIC, ENGINE_BRUTEFORCE, EngineConfig
from .experiments import SequenceParams, build_for_scheme
from .sequence import SCHEMES, OverlapError
from .signal import FRAME_LAB, FRAME_ROTATING, SignalSpec, Tone

TWO_PI = 2.0 * math.pi

KIND_SCAN = "scan"
KIND_ROBUSTNESS = "robustness"
KIND_FILTER = "filter"
KIND_HETERODYNE = "heterodyne"
KIND_SYNCREAD = "syncread"
KIND_DUMP_SEQUENCE = "dump-sequence"
KIND_DUMP_MODULATION = "dump-modulation"
KINDS = (
    KIND_SCAN,
    KIND_ROBUSTNESS,
    KIND_FILTER,
    KIND_HETERODYNE,
    KIND_SYNCREAD,
    KIND_DUMP_SEQUENCE,
    KIND_DUMP_MODULATION,
)

# Number of repetition intervals the signal generator synchronizes to: the
# sample count of a trace is rounded down to a multiple of this so the target
# completes an integer number of cycles over the record.
SYNC_SUPERPERIOD = 10


class ConfigError(ValueError):
    """Config file rejected; the message lists every violation found."""


@dataclass(frozen=True)
class FilterRange:
    omegas: np.ndarray  # rad/s
    amplitude: float  # rad/s


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    scheme: str
    seed: int
    signal: SignalSpec
    params: SequenceParams
    engine: EngineConfig
    scan_frequency: float | None = None  # rad/s, fixed-frequency experiments
    scan_grid: np.ndarray | None = None  # rad/s
    scan_shots: int | None = None
    reference_frequency: float | None = None  # rad/s, heterodyne transform
    harmonic: int | None = None
    noise_amplitudes: np.ndarray | None = None  # rad/s
    filter_ranges: tuple[FilterRange, ...] = ()
    filter_phase_grid: int = 6
    filter_ensemble_size: int = 72
    filter_stratified: bool = True
    sync_interval: float | None = None  # s
    sync_samples: int | None = None
    sync_gain: float | None = None
    sync_contrast: float | None = None
    sync_phase_offset: float = 0.0
    sync_readout_time: float = 1e-6
    output_directory: str = "out"


class _Section:
    """Tracks key consumption so leftovers can be reported as unknown keys."""

    def __init__(self, data: dict, path: str, errors: list[str]):
        self.data = dict(data)
        self.path = path
        self.errors = errors

    def take(self, key: str, default=None, required: bool = False):
        if key in self.data:
            return self.data.pop(key)
        if required:
            self.errors.append(f"{self.path}: missing required key {key!r}")
        return default

    def finish(self) -> None:
        for key in self.data:
            self.errors.append(f"{self.path}: unknown key {key!r}")


def _number(value, path: str, errors: list[str], minimum=None, strict_min=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{path}: expected a number, got {value!r}")
        return math.nan
    value = float(value)
    if minimum is not None:
        if strict_min and not (value > minimum):
            errors.append(f"{path}: must be > {minimum}, got {value}")
        if not strict_min and not (value >= minimum):
            errors.append(f"{path}: must be >= {minimum}, got {value}")
    return value


def _integer(value, path: str, errors: list[str], minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path}: expected an integer, got {value!r}")
        return 0
    if minimum is not None and value < minimum:
        errors.append(f"{path}: must be >= {minimum}, got {value}")
    return value


def _tone(raw: dict, path: str, errors: list[str]) -> Tone | None:
    sec = _Section(raw, path, errors)
    amp = _number(sec.take("amplitude_khz", required=True), f"{path}.amplitude_khz", errors, 0.0)
    freq = sec.take("frequency_mhz")
    freq_ghz = sec.take("frequency_ghz")
    phase = _number(sec.take("phase_rad", 0.0), f"{path}.phase_rad", errors)
    sec.finish()
    if freq is None and freq_ghz is None:
        errors.append(f"{path}: needs frequency_mhz or frequency_ghz")
        return None
    if freq is not None and freq_ghz is not None:
        errors.append(f"{path}: give only one of frequency_mhz / frequency_ghz")
        return None
    if freq is not None:
        freq_rad = TWO_PI * 1e6 * _number(freq, f"{path}.frequency_mhz", errors, 0.0, True)
    else:
        freq_rad = TWO_PI * 1e9 * _number(freq_ghz, f"{path}.frequency_ghz", errors, 0.0, True)
    if errors:
        # Tone construction below would raise on NaN inputs from earlier errors.
        if not (amp >= 0.0) or not (freq_rad > 0.0) or math.isnan(phase):
            return None
    return Tone(TWO_PI * 1e3 * amp, freq_rad, phase)


def _grid(start: float, stop: float, points: int, path: str, errors: list[str]) -> np.ndarray:
    if not (stop > start):
        errors.append(f"{path}: stop must exceed start")
        return np.array([])
    if points < 2:
        errors.append(f"{path}: needs at least 2 points")
        return np.array([])
    return np.linspace(start, stop, points)


def load_config(path) -> ExperimentConfig:
    """Parse and fully validate a TOML experiment config."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}")

    errors: list[str] = []
    root = _Section(raw, str(path), errors)

    exp = _Section(root.take("experiment", {}, required=True) or {}, "experiment", errors)
    kind = exp.take("kind", required=True)
    scheme = exp.take("scheme", required=True)
    seed = _integer(exp.take("seed", 0), "experiment.seed", errors, 0)
    exp.finish()
    if kind not in KINDS:
        errors.append(f"experiment.kind: unknown kind {kind!r} (expected one of {', '.join(KINDS)})")
    if scheme not in SCHEMES:
        errors.append(f"experiment.scheme: unknown scheme {scheme!r}")

    seq = _Section(root.take("sequence", {}, required=True) or {}, "sequence", errors)
    n_pulses = _integer(seq.take("n_pulses", 10), "sequence.n_pulses", errors, 2)
    n_blocks = _integer(seq.take("n_blocks", required=True), "sequence.n_blocks", errors, 1)
    t_pi_ns = _number(
        seq.take("pulse_duration_ns", required=True), "sequence.pulse_duration_ns", errors, 0.0
    )
    naive = seq.take("cpmg_naive_spacing", False)
    if not isinstance(naive, bool):
        errors.append("sequence.cpmg_naive_spacing: expected a boolean")
        naive = False
    scan_freq = seq.take("scan_frequency_mhz")
    if scan_freq is not None:
        scan_freq = TWO_PI * 1e6 * _number(
            scan_freq, "sequence.scan_frequency_mhz", errors, 0.0, True
        )
    seq.finish()
    params = SequenceParams(
        n_blocks=max(n_blocks, 1),
        pulse_duration=max(t_pi_ns, 0.0) * 1e-9,
        n_pulses=max(n_pulses, 2),
        cpmg_naive_spacing=naive,
    )

    sig = _Section(root.take("signal", {}) or {}, "signal", errors)
    frame = sig.take("frame", FRAME_LAB)
    if frame not in (FRAME_LAB, FRAME_ROTATING):
        errors.append(f"signal.frame: unknown frame {frame!r}")
        frame = FRAME_LAB
    ref = sig.take("reference_frequency_ghz")
    if ref is not None:
        ref = TWO_PI * 1e9 * _number(ref, "signal.reference_frequency_ghz", errors, 0.0, True)
    par, perp = [], []
    for i, raw_tone in enumerate(sig.take("parallel_tones", []) or []):
        tone = _tone(raw_tone, f"signal.parallel_tones[{i}]", errors)
        if tone:
            par.append(tone)
    for i, raw_tone in enumerate(sig.take("perpendicular_tones", []) or []):
        tone = _tone(raw_tone, f"signal.perpendicular_tones[{i}]", errors)
        if tone:
            perp.append(tone)
    sig.finish()

    eng = _Section(root.take("engine", {}) or {}, "engine", errors)
    engine_kind = eng.take("kind", ENGINE_ANALYTIC)
    if engine_kind not in (ENGINE_ANALYTIC, ENGINE_BRUTEFORCE):
        errors.append(f"engine.kind: unknown engine {engine_kind!r}")
        engine_kind = ENGINE_ANALYTIC
    spp = _integer(eng.take("steps_per_pulse", 32), "engine.steps_per_pulse", errors, 8)
    spg = _integer(eng.take("steps_per_gap_cycle", 128), "engine.steps_per_gap_cycle", errors, 16)
    t2 = eng.take("dephasing_t2star_us")
    if t2 is not None:
        t2 = _number(t2, "engine.dephasing_t2star_us", errors, 0.0, True) * 1e-6
        if math.isnan(t2):
            t2 = None
    eng.finish()

    out = _Section(root.take("output", {}) or {}, "output", errors)
    out_dir = out.take("directory", "out")
    out.finish()

    scan_grid = None
    scan_shots = None
    if kind in (KIND_SCAN, KIND_HETERODYNE):
        sc = _Section(root.take("scan", {}, required=True) or {}, "scan", errors)
        start = _number(sc.take("start_mhz", required=True), "scan.start_mhz", errors, 0.0, True)
        stop = _number(sc.take("stop_mhz", required=True), "scan.stop_mhz", errors, 0.0, True)
        points = _integer(sc.take("points", 121), "scan.points", errors, 2)
        shots = _integer(sc.take("shots", 0), "scan.shots", errors, 0)
        sc.finish()
        scan_grid = TWO_PI * 1e6 * _grid(start, stop, points, "scan", errors)
        scan_shots = shots if shots > 0 else None

    harmonic = None
    noise_amplitudes = None
    if kind == KIND_ROBUSTNESS:
        rb = _Section(root.take("robustness", {}, required=True) or {}, "robustness", errors)
        harmonic = _integer(rb.take("harmonic", required=True), "robustness.harmonic", errors, 3)
        if harmonic and harmonic % 2 == 0:
            errors.append("robustness.harmonic: must be odd")
        a0 = _number(rb.take("amplitude_start_khz", 0.0), "robustness.amplitude_start_khz", errors, 0.0)
        a1 = _number(
            rb.take("amplitude_stop_khz", required=True), "robustness.amplitude_stop_khz", errors, 0.0
        )
        npts = _integer(rb.take("amplitude_points", 12), "robustness.amplitude_points", errors, 2)
        rb.finish()
        noise_amplitudes = TWO_PI * 1e3 * _grid(a0, a1, npts, "robustness", errors)

    filter_ranges: list[FilterRange] = []
    phase_grid_size = 6
    ensemble_size = 72
    stratified = True
    if kind == KIND_FILTER:
        fl = _Section(root.take("filter", {}, required=True) or {}, "filter", errors)
        phase_grid_size = _integer(fl.take("phase_grid", 6), "filter.phase_grid", errors, 1)
        per_phase = _integer(
            fl.take("procedures_per_phase", 12), "filter.procedures_per_phase", errors, 1
        )
        override = _integer(fl.take("ensemble_size", 0), "filter.ensemble_size", errors, 0)
        ensemble_size = override if override > 0 else per_phase * phase_grid_size
        stratified = fl.take("stratified", True)
        if not isinstance(stratified, bool):
            errors.append("filter.stratified: expected a boolean")
            stratified = True
        ranges = fl.take("ranges", required=True) or []
        fl.finish()
        for i, raw_range in enumerate(ranges):
            rs = _Section(raw_range, f"filter.ranges[{i}]", errors)
            lo = _number(rs.take("start_mhz", required=True), f"filter.ranges[{i}].start_mhz", errors, 0.0, True)
            hi = _number(rs.take("stop_mhz", required=True), f"filter.ranges[{i}].stop_mhz", errors, 0.0, True)
            pts = _integer(rs.take("points", 10), f"filter.ranges[{i}].points", errors, 1)
            amp = _number(rs.take("amplitude_khz", required=True), f"filter.ranges[{i}].amplitude_khz", errors, 0.0, True)
            rs.finish()
            grid = (
                TWO_PI * 1e6 * np.linspace(lo, hi, pts)
                if pts >= 2
                else TWO_PI * 1e6 * np.array([lo])
            )
            if hi <= lo:
                errors.append(f"filter.ranges[{i}]: stop must exceed start")
                continue
            filter_ranges.append(FilterRange(grid, TWO_PI * 1e3 * amp))

    sync_interval = sync_samples = sync_gain = sync_contrast = None
    sync_phase_offset = 0.0
    sync_readout_time = 1e-6
    if kind == KIND_SYNCREAD:
        sy = _Section(root.take("syncread", {}, required=True) or {}, "syncread", errors)
        sync_interval = _number(sy.take("interval_us", required=True), "syncread.interval_us", errors, 0.0, True) * 1e-6
        samples = _integer(sy.take("samples", 0), "syncread.samples", errors, 0)
        duration = sy.take("duration_s")
        if samples > 0:
            sync_samples = samples
            if duration is not None:
                errors.append("syncread: give only one of samples / duration_s")
        elif duration is not None:
            duration = _number(duration, "syncread.duration_s", errors, 0.0, True)
            if sync_interval and not math.isnan(duration):
                raw_samples = int(duration / sync_interval)
                sync_samples = max(
                    (raw_samples // SYNC_SUPERPERIOD) * SYNC_SUPERPERIOD, SYNC_SUPERPERIOD
                )
        else:
            errors.append("syncread: needs samples or duration_s")
        sync_gain = _number(sy.take("gain", required=True), "syncread.gain", errors, 0.0, True)
        sync_contrast = _number(sy.take("contrast", required=True), "syncread.contrast", errors, 0.0)
        if sync_contrast is not None and not math.isnan(sync_contrast) and sync_contrast > 1.0:
            errors.append("syncread.contrast: must lie in [0, 1]")
        sync_phase_offset = _number(sy.take("phase_offset_rad", 0.0), "syncread.phase_offset_rad", errors)
        sync_readout_time = _number(sy.take("readout_time_us", 1.0), "syncread.readout_time_us", errors, 0.0) * 1e-6
        sy.finish()

    root.finish()

    # Cross-section physics validation (collected, not fail-fast).
    if scheme in SCHEMES and kind in KINDS:
        fixed_kinds = (KIND_ROBUSTNESS, KIND_FILTER, KIND_SYNCREAD, KIND_DUMP_SEQUENCE, KIND_DUMP_MODULATION)
        if kind in fixed_kinds and scan_freq is None:
            errors.append("sequence.scan_frequency_mhz: required for fixed-frequency experiments")
        probe_freqs = []
        if scan_freq is not None:
            probe_freqs.append(scan_freq)
        if scan_grid is not None and len(scan_grid):
            probe_freqs.extend([scan_grid[0], scan_grid[-1]])
        for w in probe_freqs:
            try:
                build_for_scheme(scheme, w, params)
            except OverlapError as exc:
                errors.append(f"sequence: {exc}")
                break
        expected_frame = FRAME_LAB if scheme in ("xy", "gd_parallel") else FRAME_ROTATING
        if kind == KIND_HETERODYNE:
            if scheme not in ("cpmg", "gd_perp"):
                errors.append("experiment: heterodyne runs support cpmg/gd_perp only")
            if frame != FRAME_LAB:
                errors.append("signal.frame: heterodyne runs start from a lab-frame signal")
            if ref is None:
                errors.append("signal.reference_frequency_ghz: required for heterodyne runs")
            if not perp:
                errors.append("signal.perpendicular_tones: heterodyne runs need at least one tone")
        elif kind in (KIND_SCAN, KIND_ROBUSTNESS, KIND_SYNCREAD):
            if frame != expected_frame:
                errors.append(
                    f"signal.frame: scheme {scheme!r} senses in the {expected_frame} frame"
                )
        if kind == KIND_SYNCREAD and sync_interval is not None and scan_freq is not None:
            try:
                built = build_for_scheme(scheme, scan_freq, params)
                if sync_interval < built.total_duration + sync_readout_time:
                    errors.append(
                        "syncread.interval_us: shorter than sequence duration + readout time"
                    )
            except OverlapError:
                pass

    if errors:
        raise ConfigError(
            f"{path}: {len(errors)} violation(s):\n  - " + "\n  - ".join(errors)
        )

    if frame == FRAME_ROTATING:
        signal_spec = SignalSpec(tuple(par), tuple(perp), FRAME_ROTATING, ref)
    else:
        signal_spec = SignalSpec(tuple(par), tuple(perp), FRAME_LAB, None)

    return ExperimentConfig(
        kind=kind,
        scheme=scheme,
        seed=seed,
        signal=signal_spec,
        params=params,
        engine=EngineConfig(
            engine=engine_kind,
            steps_per_pulse=spp,
            steps_per_gap_cycle=spg,
            dephasing_t2star=t2,
        ),
        scan_frequency=scan_freq,
        scan_grid=scan_grid,
        scan_shots=scan_shots,
        reference_frequency=ref,
        harmonic=harmonic,
        noise_amplitudes=noise_amplitudes,
        filter_ranges=tuple(filter_ranges),
        filter_phase_grid=phase_grid_size,
        filter_ensemble_size=ensemble_size,
        filter_stratified=stratified,
        sync_interval=sync_interval,
        sync_samples=sync_samples,
        sync_gain=sync_gain,
        sync_contrast=sync_contrast,
        sync_phase_offset=sync_phase_offset,
        sync_readout_time=sync_readout_time,
        output_directory=out_dir,
    )
