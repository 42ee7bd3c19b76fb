"""Acceptance suite: one test per exit criterion, each printed as a PASS/FAIL
line with its measured numbers (run with ``pytest -s`` to see the lines).

Sequence depths for the scan/robustness reproductions follow the bundled
reference configs; probe schedules follow the four-range, range-scaled
amplitude pattern of the reconstruction protocol.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from gdsense import (
    EngineConfig,
    SensorState,
    SequenceParams,
    SignalSpec,
    Tone,
    build_cpmg,
    build_gd,
    build_for_scheme,
    build_xy,
    dft_spectrum,
    exact_fourier_component,
    find_extrema,
    fit_lorentzian,
    peak_fwhm,
    predict_alias,
    propagate_bruteforce,
    reconstruct_filter,
    run_frequency_scan,
    run_heterodyne_scan,
    run_robustness,
    run_synchronized_readout,
    survival_after,
    toggling_modulation,
)
from gdsense.cli import run as cli_run
from gdsense.config import load_config

TWO_PI = 2.0 * math.pi
W_SCAN = TWO_PI * 0.3e6
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

THREE_TONE_MHZ_SIGNAL = SignalSpec(
    parallel_tones=(
        Tone(TWO_PI * 24e3, TWO_PI * 0.3e6, 0.0),
        Tone(TWO_PI * 48e3, TWO_PI * 0.903e6, 0.0),
        Tone(TWO_PI * 48e3, TWO_PI * 1.497e6, 0.0),
    )
)
TWO_TONE_GHZ_SIGNAL = SignalSpec(
    perpendicular_tones=(
        Tone(TWO_PI * 30e3, TWO_PI * 1.47e9 + TWO_PI * 0.3e6, 0.0),
        Tone(TWO_PI * 60e3, TWO_PI * 1.47e9 + TWO_PI * 0.908e6, 0.0),
    )
)
SCAN_GRID = TWO_PI * np.linspace(0.24e6, 0.36e6, 121)
BRUTE = EngineConfig(engine="bruteforce")


def report(name: str, passed: bool, detail: str, elapsed: float, budget: float) -> None:
    in_time = elapsed <= budget
    status = "PASS" if (passed and in_time) else "FAIL"
    print(f"\n[ACCEPTANCE] {name}: {status} ({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")
    assert passed, f"{name}: {detail}"
    assert in_time, f"{name}: exceeded runtime budget ({elapsed:.1f}s > {budget:.0f}s)"


def test_criterion_1_xy_harmonic_ladder():
    start = time.monotonic()
    modfn = toggling_modulation(build_xy(W_SCAN, 8, 0.0))
    fundamental = exact_fourier_component(modfn, W_SCAN)
    ratios = {k: exact_fourier_component(modfn, k * W_SCAN) / fundamental for k in (3, 5, 7)}
    ok = all(abs(ratios[k] * k - 1.0) <= 0.02 for k in ratios)
    report(
        "1 XY harmonic ladder",
        ok,
        "ratios " + ", ".join(f"k={k}: {r:.5f} (1/k={1 / k:.5f})" for k, r in ratios.items()),
        time.monotonic() - start,
        1.0,
    )


def test_criterion_2_gd_harmonic_suppression():
    start = time.monotonic()
    worst = 0.0
    for plane in ("xz", "xy"):
        modfn = toggling_modulation(build_gd(plane, W_SCAN, 10, 8, 0.0))
        fundamental = exact_fourier_component(modfn, W_SCAN)
        for k in (3, 5, 7):
            worst = max(worst, exact_fourier_component(modfn, k * W_SCAN) / fundamental)
    report(
        "2 GD harmonic suppression",
        worst <= 1e-3,
        f"worst |f(k w)|/|f(w)| = {worst:.2e} for k in 3,5,7 (both planes)",
        time.monotonic() - start,
        1.0,
    )


def test_criterion_3_engine_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(314159)
    schemes = ["xy", "cpmg", "gd_parallel", "gd_perp"]
    worst = 0.0
    for case in range(50):
        scheme = schemes[case % 4]
        w_scan = TWO_PI * rng.uniform(0.2e6, 0.8e6)
        n_blocks = int(rng.integers(1, 5))
        n = int(2 * rng.integers(2, 7))  # even geodesic block sizes
        t_scan = TWO_PI / w_scan
        t_pi = rng.uniform(0.3, 1.0) * 1e-3 * t_scan
        params = SequenceParams(n_blocks=n_blocks, pulse_duration=t_pi, n_pulses=n)
        seq = build_for_scheme(scheme, w_scan, params)
        tone_w = TWO_PI * rng.uniform(0.15e6, 1.2e6)
        phase = rng.uniform(0.0, TWO_PI)
        if scheme in ("xy", "gd_parallel"):
            b = TWO_PI * rng.uniform(2e3, 25e3)
            spec = SignalSpec(parallel_tones=(Tone(b, tone_w, phase),))
        else:
            # heterodyne validity b << delta keeps the dropped co-rotating
            # term negligible for both engines
            b = TWO_PI * rng.uniform(0.2e3, 1.0e3)
            spec = SignalSpec(
                perpendicular_tones=(Tone(b / 2.0, tone_w, phase),), frame="rotating"
            )
        p_analytic = survival_after(seq, spec, EngineConfig())
        p_brute = survival_after(seq, spec, BRUTE)
        worst = max(worst, abs(p_analytic - p_brute))
    report(
        "3 engine equivalence",
        worst <= 2e-3,
        f"worst |P_brute - P_analytic| = {worst:.2e} over 50 cases",
        time.monotonic() - start,
        120.0,
    )


def test_criterion_4_mhz_scan_reproduction():
    start = time.monotonic()
    gd_params = SequenceParams(n_blocks=6, pulse_duration=50e-9, n_pulses=10)
    gd_scan = run_frequency_scan("gd_parallel", THREE_TONE_MHZ_SIGNAL, SCAN_GRID, gd_params)
    gd_dips = find_extrema(gd_scan.probabilities, "minima", 0.05, gd_scan.omegas)
    fit = fit_lorentzian(gd_scan)
    bias = fit.center - TWO_PI * 0.3e6

    xy_params = SequenceParams(n_blocks=8, pulse_duration=50e-9)
    xy_scan = run_frequency_scan("xy", THREE_TONE_MHZ_SIGNAL, SCAN_GRID, xy_params)
    xy_dips = find_extrema(xy_scan.probabilities, "minima", 0.05, xy_scan.omegas)

    ok = (
        len(gd_dips) == 1
        and fit.converged
        and abs(bias) <= TWO_PI * 1e3
        and len(xy_dips) >= 3
    )
    report(
        "4 MHz scan reproduction",
        ok,
        f"GD dips={len(gd_dips)}, bias=2pi x {bias / TWO_PI / 1e3:+.3f} kHz "
        f"(|bias| <= 1 kHz), XY dips={len(xy_dips)} (>= 3)",
        time.monotonic() - start,
        120.0,
    )


def test_criterion_5_ghz_scan_reproduction():
    start = time.monotonic()
    omega0 = TWO_PI * 1.47e9
    gd_params = SequenceParams(n_blocks=3, pulse_duration=50e-9, n_pulses=10)
    gd_scan = run_heterodyne_scan("gd_perp", TWO_TONE_GHZ_SIGNAL, omega0, SCAN_GRID, gd_params)
    gd_dips = find_extrema(gd_scan.probabilities, "minima", 0.05, gd_scan.omegas)
    fit = fit_lorentzian(gd_scan)
    bias = fit.center - TWO_PI * 0.3e6

    cp_params = SequenceParams(n_blocks=8, pulse_duration=50e-9)
    cp_scan = run_heterodyne_scan("cpmg", TWO_TONE_GHZ_SIGNAL, omega0, SCAN_GRID, cp_params)
    cp_dips = find_extrema(cp_scan.probabilities, "minima", 0.05, cp_scan.omegas)

    ok = (
        len(gd_dips) == 1
        and fit.converged
        and abs(bias) <= TWO_PI * 1.5e3
        and len(cp_dips) >= 2
    )
    report(
        "5 GHz heterodyne scan",
        ok,
        f"GDperp dips={len(gd_dips)}, bias=2pi x {bias / TWO_PI / 1e3:+.3f} kHz "
        f"(|bias| <= 1.5 kHz), CPMG dips={len(cp_dips)} (>= 2)",
        time.monotonic() - start,
        120.0,
    )


def test_criterion_6_harmonic_noise_robustness():
    start = time.monotonic()
    amplitudes = TWO_PI * np.linspace(0.0, 85e3, 12)
    gd_params = SequenceParams(n_blocks=8, pulse_duration=50e-9, n_pulses=10)
    gd_min = 1.0
    gd_curves = {}
    for k in (3, 5, 7):
        result = run_robustness("gd_parallel", k, amplitudes, W_SCAN, gd_params, BRUTE)
        gd_curves[k] = result.fidelities
        gd_min = min(gd_min, float(result.fidelities.min()))

    # XY at the geodesic run's total sensing duration (matched comparison)
    xy_params = SequenceParams(n_blocks=4, pulse_duration=50e-9)
    xy = run_robustness("xy", 3, amplitudes, W_SCAN, xy_params, BRUTE)
    mhz_gap = float(gd_curves[3][-1] - xy.fidelities[-1])

    perp_params = SequenceParams(n_blocks=4, pulse_duration=50e-9, n_pulses=10)
    gd_perp = run_robustness("gd_perp", 3, amplitudes, W_SCAN, perp_params, BRUTE)
    cpmg = run_robustness("cpmg", 3, amplitudes, W_SCAN, perp_params, BRUTE)
    ghz_gap = float(gd_perp.fidelities[-1] - cpmg.fidelities[-1])

    ok = (
        gd_min >= 0.9
        and mhz_gap >= 0.2
        and float(gd_perp.fidelities.min()) >= 0.9
        and ghz_gap >= 0.2
    )
    report(
        "6 harmonic-noise robustness",
        ok,
        f"GDpar min fidelity {gd_min:.4f} (>= 0.9), XY gap at max amp {mhz_gap:.3f} (>= 0.2), "
        f"GDperp min {gd_perp.fidelities.min():.4f}, CPMG gap {ghz_gap:.3f} (>= 0.2)",
        time.monotonic() - start,
        180.0,
    )


FILTER_SCHEDULES = {
    "xy": ([(0.17e6, 0.56e6, 24e3), (0.64e6, 1.24e6, 72e3), (1.32e6, 1.76e6, 120e3), (1.85e6, 2.36e6, 168e3)],
           SequenceParams(n_blocks=4, pulse_duration=0.0)),
    "gd_parallel": ([(0.17e6, 0.56e6, 24e3), (0.64e6, 1.24e6, 72e3), (1.32e6, 1.76e6, 120e3), (1.85e6, 2.36e6, 168e3)],
                    SequenceParams(n_blocks=8, pulse_duration=0.0, n_pulses=10)),
    "cpmg": ([(0.118e6, 0.558e6, 39e3), (0.642e6, 1.104e6, 117e3), (1.2e6, 1.752e6, 195e3), (1.85e6, 2.352e6, 273e3)],
             SequenceParams(n_blocks=4, pulse_duration=0.0)),
    "gd_perp": ([(0.118e6, 0.558e6, 25e3), (0.642e6, 1.104e6, 75e3), (1.2e6, 1.752e6, 125e3), (1.85e6, 2.352e6, 175e3)],
                SequenceParams(n_blocks=4, pulse_duration=0.0, n_pulses=10)),
}


def test_criterion_7_filter_reconstruction():
    start = time.monotonic()
    details = []
    ok = True
    for scheme, (ranges, params) in FILTER_SCHEDULES.items():
        seq = build_for_scheme(scheme, W_SCAN, params)
        omegas, amps = [], []
        for lo, hi, b_khz in ranges:
            omegas.extend(TWO_PI * np.linspace(lo, hi, 9))
            amps.extend([TWO_PI * b_khz] * 9)
        omegas, amps = np.array(omegas), np.array(amps)
        rec = reconstruct_filter(seq, omegas, amps, ensemble_size=72, stratified=True)
        modfn = toggling_modulation(seq)
        exact = np.array([exact_fourier_component(modfn, w) for w in omegas])
        sel = exact >= 0.1 * exact.max()
        worst = float(np.max(np.abs(rec.magnitudes[sel] - exact[sel]) / exact[sel]))
        ok = ok and worst <= 0.05
        details.append(f"{scheme}: {worst:.2e}")
    report(
        "7 filter reconstruction",
        ok,
        "worst rel err where |f| >= 10% of max: " + ", ".join(details),
        time.monotonic() - start,
        180.0,
    )


def test_criterion_8_synchronized_readout():
    start = time.monotonic()
    interval = 71e-6
    n_samples = (int(10.0 / interval) // 10) * 10  # ten-interval synchronization
    total = n_samples * interval
    gd_trace = run_synchronized_readout(
        "gd_parallel",
        THREE_TONE_MHZ_SIGNAL,
        SequenceParams(n_blocks=8, pulse_duration=50e-9, n_pulses=10),
        W_SCAN,
        interval,
        n_samples,
        gain=0.09,
        contrast=0.3,
        seed=20260808,
    )
    spectrum = dft_spectrum(gd_trace)
    alias = predict_alias(0.3e6, interval)
    peak = spectrum.peaks[0] if spectrum.peaks else None
    in_bin = peak is not None and abs(peak.frequency - alias) <= spectrum.bin_width
    snr_ok = peak is not None and peak.snr >= 5.0
    padded = dft_spectrum(gd_trace, zero_pad_factor=8)
    fwhm = peak_fwhm(padded, padded.peaks[0].bin_index)
    fwhm_ok = (1.0 / 1.3) <= fwhm * total <= 1.3

    xy_trace = run_synchronized_readout(
        "xy",
        THREE_TONE_MHZ_SIGNAL,
        SequenceParams(n_blocks=8, pulse_duration=50e-9),
        W_SCAN,
        interval,
        n_samples,
        gain=0.09,
        contrast=0.3,
        seed=20260809,
    )
    xy_spectrum = dft_spectrum(xy_trace)
    target_bin = round(alias / xy_spectrum.bin_width)
    target_mag = float(xy_spectrum.magnitudes[target_bin - 1 : target_bin + 2].max())
    global_bin = 1 + int(np.argmax(xy_spectrum.magnitudes[1:]))
    xy_ok = abs(global_bin - target_bin) > 1 and xy_spectrum.magnitudes[global_bin] > target_mag

    ok = in_bin and snr_ok and fwhm_ok and xy_ok
    report(
        "8 synchronized readout",
        ok,
        f"GD peak at {peak.frequency:.4f} Hz vs alias {alias:.4f} Hz (bin {spectrum.bin_width:.3f} Hz), "
        f"SNR {peak.snr:.1f} (>= 5), FWHM x T = {fwhm * total:.2f} (within 1.3x), "
        f"XY target mag {target_mag:.0f} < global max {xy_spectrum.magnitudes[global_bin]:.0f}",
        time.monotonic() - start,
        120.0,
    )


def test_criterion_9_numerical_hygiene(tmp_path):
    start = time.monotonic()
    # norm conservation across schemes with finite pulses and active signals
    norm_worst = 0.0
    cases = [
        ("gd_parallel", THREE_TONE_MHZ_SIGNAL, SequenceParams(n_blocks=6, pulse_duration=50e-9, n_pulses=10)),
        ("xy", THREE_TONE_MHZ_SIGNAL, SequenceParams(n_blocks=4, pulse_duration=50e-9)),
        (
            "gd_perp",
            SignalSpec(perpendicular_tones=(Tone(TWO_PI * 15e3, TWO_PI * 0.3e6, 0.2),), frame="rotating"),
            SequenceParams(n_blocks=4, pulse_duration=50e-9, n_pulses=10),
        ),
        (
            "cpmg",
            SignalSpec(perpendicular_tones=(Tone(TWO_PI * 15e3, TWO_PI * 0.3e6, 0.0),), frame="rotating"),
            SequenceParams(n_blocks=4, pulse_duration=50e-9),
        ),
    ]
    from gdsense.dynamics import prepared_state

    halving_worst = 0.0
    for scheme, spec, params in cases:
        seq = build_for_scheme(scheme, W_SCAN, params)
        final = propagate_bruteforce(seq, spec, prepared_state(scheme), BRUTE)
        norm_worst = max(norm_worst, abs(final.norm_squared - 1.0))
        p_default = survival_after(seq, spec, BRUTE)
        p_doubled = survival_after(
            seq, spec, EngineConfig(engine="bruteforce", steps_per_pulse=64, steps_per_gap_cycle=256)
        )
        halving_worst = max(halving_worst, abs(p_default - p_doubled))

    # Parseval on a stochastic trace spectrum
    trace = run_synchronized_readout(
        "gd_parallel",
        THREE_TONE_MHZ_SIGNAL,
        SequenceParams(n_blocks=8, pulse_duration=50e-9, n_pulses=10),
        W_SCAN,
        71e-6,
        20000,
        gain=0.09,
        contrast=0.3,
        seed=11,
    )
    spectrum = dft_spectrum(trace)
    x = trace.counts - trace.counts.mean()
    parseval = abs(spectrum.two_sided_power() / spectrum.n_fft - float(np.sum(x**2))) / float(
        np.sum(x**2)
    )

    # byte-identical artifacts under a fixed seed
    config = load_config(CONFIG_DIR / "scan_mhz_gd.toml")
    cli_run(config, out_dir=tmp_path / "a")
    cli_run(config, out_dir=tmp_path / "b")
    identical = all(
        (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        for name in ("scan.csv", "summary.json")
    )

    ok = norm_worst <= 1e-9 and halving_worst <= 1e-4 and parseval <= 1e-9 and identical
    report(
        "9 numerical hygiene",
        ok,
        f"norm drift {norm_worst:.1e} (<= 1e-9), step-halving {halving_worst:.1e} (<= 1e-4), "
        f"Parseval {parseval:.1e} (<= 1e-9), byte-identical={identical}",
        time.monotonic() - start,
        60.0,
    )
