"""gdsense: desk-scale simulation and estimation for geodesic-control quantum
frequency sensing, benchmarked against conventional XY/CPMG dynamical
decoupling."""

from .signal import (
    FRAME_LAB,
    FRAME_ROTATING,
    FrameError,
    HeterodyneValidityError,
    SignalSpec,
    Tone,
    field_parallel,
    phase_grid,
    random_phase,
    to_rotating_frame,
)
from .sequence import (
    PLANE_XY,
    PLANE_XZ,
    SCHEME_CPMG,
    SCHEME_GD_PARALLEL,
    SCHEME_GD_PERP,
    SCHEME_XY,
    SCHEMES,
    OverlapError,
    Pulse,
    PulseSequence,
    build_cpmg,
    build_gd,
    build_xy,
    validate,
)
from .dynamics import (
    BASIS_ELL,
    BASIS_PLUS,
    BASIS_ZERO,
    ENGINE_ANALYTIC,
    ENGINE_BRUTEFORCE,
    EngineConfig,
    ModulationFunction,
    NumericalError,
    SensorState,
    accumulated_phase_analytic,
    analytic_survival_probability,
    apply_contrast_envelope,
    prepared_state,
    propagate_bruteforce,
    readout_basis,
    state_fidelity,
    survival_after,
    survival_probability,
    toggling_modulation,
)
from .filters import (
    FilterCurve,
    exact_filter_curve,
    exact_fourier_component,
    reconstruct_filter,
)
from .experiments import (
    PhotonTrace,
    RobustnessResult,
    ScanResult,
    SequenceParams,
    build_for_scheme,
    run_frequency_scan,
    run_heterodyne_scan,
    run_robustness,
    run_synchronized_readout,
    slice_phases,
    synchronized_phase_period,
)
from .estimation import (
    Extremum,
    LorentzianFit,
    NoDipError,
    SpectralPeak,
    SpectrumResult,
    dft_spectrum,
    find_extrema,
    fit_lorentzian,
    fit_lorentzian_dip,
    peak_fwhm,
    peak_snr,
    predict_alias,
)

__version__ = "0.1.0"
