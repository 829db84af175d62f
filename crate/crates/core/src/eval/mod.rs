//! Density estimates, goodness-of-fit tests and transmitter curves for
//! checking learned components against simulator ground truth.

pub mod curves;
pub mod density;
pub mod ks;
pub mod report;

pub use curves::{
    amplitude_grid, compare_curves, learned_curves, overlay, sspa_curves, waveform_overlay, AmpmCurves, CurveErrors,
    WaveformOverlay,
};
pub use density::{density_histogram_1d, density_spectrum_2d, DensitySpectrum2D, Histogram1D};
pub use ks::{kolmogorov_q, ks_test, ks_two_sample, normal_cdf, rayleigh_cdf, uniform_cdf, KsResult};
pub use report::{
    build_eval_report, EvalConfig, EvalOutput, EvalReport, FadingSection, NoiseSection, TransmitterSection, REPORT_SCHEMA,
};
