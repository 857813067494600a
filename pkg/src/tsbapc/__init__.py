"""BAPC surrogate explanations for time-series corrections."""
from .attribution import (
    Attribution,
    Heatmaps,
    PrecisionError,
    attribute_bapc,
    ig_ar2,
    ig_damped_sinusoid,
    ig_heatmaps,
    ig_linear,
    ig_quadrature,
    integrated_gradients,
)
from .correction import (
    AutoregressiveNet,
    CorrectionOptions,
    LinearAutoregressor,
    NearestNeighbor1,
    fit_correction,
    predict_correction,
)
from .engine import BapcResult, SbapcResult, WindowScanResult, bapc, sbapc, surrogate_correction, window_scan
from .io import load_air_passengers
from .lime import InsufficientSamplesError, LimeExplanation, lime_explain
from .models import (
    BaseModel,
    DegenerateFitError,
    FitConfig,
    FitError,
    FitWarning,
    ar2_closed_form,
    ar2_to_sin,
    fit,
    fit_ar2_robust,
    phi,
    sin_to_ar2,
)
from .synthetic import SyntheticSpec, generate, verify_dynamics
from .timeseries import (
    CSVFormatError,
    InsufficientDataError,
    LagMatrix,
    TimeSeries,
    WindowConfig,
    build_lag_matrix,
    read_series_csv,
    slice_series,
)

__version__ = "0.1.0"
