"""Command-line experiment runner: one config, one experiment, plot-ready CSV
plus a JSON summary.  Outputs are bit-identical for identical config + seed."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    KIND_DUMP_MODULATION,
    KIND_DUMP_SEQUENCE,
    KIND_FILTER,
    KIND_HETERODYNE,
    KIND_ROBUSTNESS,
    KIND_SCAN,
    KIND_SYNCREAD,
    KINDS,
    ConfigError,
    ExperimentConfig,
    load_config,
)
from .dynamics import toggling_modulation
from .estimation import (
    NoDipError,
    dft_spectrum,
    find_extrema,
    fit_lorentzian,
    peak_fwhm,
    predict_alias,
)
from .experiments import (
    build_for_scheme,
    run_frequency_scan,
    run_heterodyne_scan,
    run_robustness,
    run_synchronized_readout,
)
from .filters import exact_filter_curve, reconstruct_filter

DIP_PROMINENCE = 0.05


def _fmt(value) -> str:
    return repr(float(value))


class _ArtifactWriter:
    """Writes output files, removing partial artifacts if the run fails."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.written: list[Path] = []

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.directory / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
        self.written.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.directory / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        self.written.append(path)
        return path

    def discard(self) -> None:
        for path in self.written:
            path.unlink(missing_ok=True)


def _fit_summary(scan, target: float | None) -> dict:
    dips = find_extrema(scan.probabilities, "minima", DIP_PROMINENCE, scan.omegas)
    summary: dict = {"n_dips": len(dips)}
    summary["dips"] = [
        {"omega_rad_s": d.location, "probability": d.value, "prominence": d.prominence}
        for d in dips
    ]
    try:
        fit = fit_lorentzian(scan)
        summary["omega_c_rad_s"] = fit.center
        summary["gamma_rad_s"] = fit.half_width
        summary["converged"] = fit.converged
        summary["fit"] = {
            "omega_c_rad_s": fit.center,
            "gamma_rad_s": fit.half_width,
            "fwhm_rad_s": 2.0 * fit.half_width,
            "amplitude": fit.amplitude,
            "baseline": fit.baseline,
            "residual_norm": fit.residual_norm,
            "converged": fit.converged,
        }
        if target is not None:
            summary["target_rad_s"] = target
            summary["bias_rad_s"] = fit.center - target
    except NoDipError as exc:
        summary["fit"] = None
        summary["converged"] = False
        summary["fit_error"] = str(exc)
    return summary


def _scan_rows(scan):
    if scan.phases is not None:
        header = ["omega_scan_rad_s", "probability", "phase_rad"]
        rows = [
            (_fmt(w), _fmt(p), _fmt(phi))
            for w, p, phi in zip(scan.omegas, scan.probabilities, scan.phases)
        ]
    else:
        header = ["omega_scan_rad_s", "probability"]
        rows = [(_fmt(w), _fmt(p)) for w, p in zip(scan.omegas, scan.probabilities)]
    return header, rows


def run(config: ExperimentConfig, out_dir=None, threads: int = 1) -> dict:
    """Execute one configured experiment; returns the summary written to disk."""
    directory = Path(out_dir) if out_dir is not None else Path(config.output_directory)
    directory.mkdir(parents=True, exist_ok=True)
    writer = _ArtifactWriter(directory)
    summary: dict = {
        "experiment": config.kind,
        "scheme": config.scheme,
        "seed": config.seed,
        "engine": config.engine.engine,
        "version": __version__,
    }
    try:
        if config.kind == KIND_SCAN:
            rng = np.random.default_rng(config.seed) if config.scan_shots else None
            scan = run_frequency_scan(
                config.scheme,
                config.signal,
                config.scan_grid,
                config.params,
                config.engine,
                shots=config.scan_shots,
                rng=rng,
                threads=threads,
            )
            header, rows = _scan_rows(scan)
            writer.csv("scan.csv", header, rows)
            tones = (
                config.signal.parallel_tones
                if config.scheme in ("xy", "gd_parallel")
                else config.signal.perpendicular_tones
            )
            target = tones[0].frequency if tones else None
            summary.update(_fit_summary(scan, target))
            if scan.point_errors:
                summary["point_errors"] = [
                    {"index": i, "error": msg} for i, msg in scan.point_errors
                ]
            line = _describe_fit(summary)

        elif config.kind == KIND_HETERODYNE:
            scan = run_heterodyne_scan(
                config.scheme,
                config.signal,
                config.reference_frequency,
                config.scan_grid,
                config.params,
                config.engine,
                threads=threads,
            )
            header, rows = _scan_rows(scan)
            header[0] = "detuning_rad_s"
            writer.csv("scan.csv", header, rows)
            target = config.signal.perpendicular_tones[0].frequency - config.reference_frequency
            summary.update(_fit_summary(scan, target))
            summary["reference_frequency_rad_s"] = config.reference_frequency
            if summary.get("fit") and summary["fit"]["converged"]:
                summary["recovered_omega_s_rad_s"] = (
                    config.reference_frequency + summary["fit"]["omega_c_rad_s"]
                )
            line = _describe_fit(summary)

        elif config.kind == KIND_ROBUSTNESS:
            result = run_robustness(
                config.scheme,
                config.harmonic,
                config.noise_amplitudes,
                config.scan_frequency,
                config.params,
                config.engine,
                threads=threads,
            )
            writer.csv(
                "robustness.csv",
                ["noise_amplitude_rad_s", "fidelity"],
                [(_fmt(a), _fmt(f)) for a, f in zip(result.amplitudes, result.fidelities)],
            )
            summary["harmonic"] = config.harmonic
            summary["min_fidelity"] = float(result.fidelities.min())
            summary["fidelity_at_max_amplitude"] = float(result.fidelities[-1])
            line = (
                f"robustness {config.scheme} k={config.harmonic}: "
                f"min fidelity {summary['min_fidelity']:.4f}, "
                f"at max amplitude {summary['fidelity_at_max_amplitude']:.4f}"
            )

        elif config.kind == KIND_FILTER:
            seq = build_for_scheme(config.scheme, config.scan_frequency, config.params)
            modfn = toggling_modulation(seq)
            rng = np.random.default_rng(config.seed)
            rows = []
            n_points = 0
            for frange in config.filter_ranges:
                rec = reconstruct_filter(
                    seq,
                    frange.omegas,
                    frange.amplitude,
                    config.filter_ensemble_size,
                    config.filter_phase_grid,
                    config.engine,
                    rng=rng,
                    stratified=config.filter_stratified,
                )
                exact = exact_filter_curve(modfn, frange.omegas)
                for w, fr, fe in zip(frange.omegas, rec.magnitudes, exact.magnitudes):
                    rows.append((_fmt(w), _fmt(fr), "reconstructed", str(config.filter_ensemble_size)))
                    rows.append((_fmt(w), _fmt(fe), "exact", ""))
                n_points += len(frange.omegas)
            writer.csv("filter.csv", ["omega_rad_s", "f_abs", "source", "ensemble_size"], rows)
            summary["n_points"] = n_points
            summary["ensemble_size"] = config.filter_ensemble_size
            summary["phase_grid"] = config.filter_phase_grid
            line = f"filter {config.scheme}: {n_points} points reconstructed (M={config.filter_ensemble_size})"

        elif config.kind == KIND_SYNCREAD:
            trace = run_synchronized_readout(
                config.scheme,
                config.signal,
                config.params,
                config.scan_frequency,
                config.sync_interval,
                config.sync_samples,
                config.sync_gain,
                config.sync_contrast,
                config.seed,
                phase_offset=config.sync_phase_offset,
                engine=config.engine,
                readout_time=config.sync_readout_time,
            )
            writer.csv(
                "trace.csv",
                ["index", "count"],
                [(str(i), str(int(c))) for i, c in enumerate(trace.counts)],
            )
            spectrum = dft_spectrum(trace)
            writer.csv(
                "spectrum.csv",
                ["frequency_hz", "magnitude"],
                [(_fmt(f), _fmt(m)) for f, m in zip(spectrum.frequencies, spectrum.magnitudes)],
            )
            tones = (
                config.signal.parallel_tones
                if config.scheme in ("xy", "gd_parallel")
                else config.signal.perpendicular_tones
            )
            summary["n_samples"] = trace.n_samples
            summary["interval_s"] = trace.interval
            summary["bin_width_hz"] = spectrum.bin_width
            summary["alias_predictions_hz"] = [
                predict_alias(t.frequency / (2.0 * math.pi), trace.interval) for t in tones
            ]
            summary["peaks"] = [
                {"freq_hz": p.frequency, "mag": p.magnitude, "snr": p.snr}
                for p in spectrum.peaks[:16]
            ]
            if spectrum.peaks:
                padded = dft_spectrum(trace, zero_pad_factor=8)
                summary["dominant_peak_fwhm_hz"] = peak_fwhm(padded, padded.peaks[0].bin_index)
                top = spectrum.peaks[0]
                line = (
                    f"syncread {config.scheme}: dominant peak {top.frequency:.4f} Hz "
                    f"(snr {top.snr:.1f}), bin width {spectrum.bin_width:.4f} Hz"
                )
            else:
                line = f"syncread {config.scheme}: no peak above the detection threshold"

        elif config.kind == KIND_DUMP_SEQUENCE:
            seq = build_for_scheme(config.scheme, config.scan_frequency, config.params)
            writer.csv(
                "sequence.csv",
                ["center_s", "duration_s", "rabi_rad_s", "phase_rad", "plane"],
                [
                    (_fmt(p.center), _fmt(p.duration), _fmt(p.rabi), _fmt(p.axis_phase), p.plane)
                    for p in seq.pulses
                ],
            )
            summary["n_pulses"] = len(seq.pulses)
            summary["total_duration_s"] = seq.total_duration
            line = f"dump-sequence {config.scheme}: {len(seq.pulses)} pulses over {seq.total_duration:.6g} s"

        elif config.kind == KIND_DUMP_MODULATION:
            seq = build_for_scheme(config.scheme, config.scan_frequency, config.params)
            modfn = toggling_modulation(seq)
            values = np.asarray(modfn.values, dtype=complex)
            writer.csv(
                "modulation.csv",
                ["t_start_s", "t_end_s", "value_re", "value_im"],
                [
                    (_fmt(t0), _fmt(t1), _fmt(v.real), _fmt(v.imag))
                    for t0, t1, v in zip(modfn.starts, modfn.ends, values)
                ],
            )
            summary["n_segments"] = len(modfn.values)
            summary["tracked_axis"] = modfn.tracked_axis
            line = f"dump-modulation {config.scheme}: {len(modfn.values)} segments"

        else:  # pragma: no cover - kinds are validated at load
            raise ValueError(f"unhandled kind {config.kind!r}")

        writer.json("summary.json", summary)
    except Exception:
        writer.discard()
        raise
    print(line)
    return summary


def _describe_fit(summary: dict) -> str:
    fit = summary.get("fit")
    if not fit:
        return f"{summary['experiment']} {summary['scheme']}: no dip found"
    center_mhz = fit["omega_c_rad_s"] / (2.0 * math.pi * 1e6)
    text = (
        f"{summary['experiment']} {summary['scheme']}: {summary['n_dips']} dip(s), "
        f"fitted centre 2pi x {center_mhz:.6f} MHz"
    )
    if "bias_rad_s" in summary:
        text += f", bias 2pi x {summary['bias_rad_s'] / (2.0 * math.pi * 1e3):+.3f} kHz"
    return text


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gdsense",
        description="Geodesic-control frequency-sensing simulator and estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"gdsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        cmd = sub.add_parser(kind, help=f"run a {kind} experiment from a config file")
        cmd.add_argument("config", help="path to the TOML experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--threads", type=int, default=1, help="worker-thread cap")
        cmd.add_argument("--out", default=None, help="output directory (overrides config)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    if config.kind != args.command:
        print(
            f"config declares kind {config.kind!r} but the {args.command!r} subcommand was invoked",
            file=sys.stderr,
        )
        return 2
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    try:
        run(config, out_dir=args.out, threads=max(1, args.threads))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
