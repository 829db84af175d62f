//! Baseband simulator producing ground-truth radio datasets.

pub mod channel;
pub mod dataset;
pub mod modulation;
pub mod pulse;
pub mod rgds;
pub mod sspa;

pub use channel::{draw_awgn, draw_fading, noise_power, ChannelConfig, FadingMode};
pub use dataset::{
    build_dataset, split_into_points, synthesize_pure, synthesize_sample, BatchCursor, Dataset, DatasetConfig,
    RadioSample, SamplingPointBatch, SignalModel,
};
pub use modulation::{constellation, ModulationScheme};
pub use pulse::{pulse_shape, rrc_taps, PureSignalConfig};
pub use sspa::{apply_sspa, DeviceTable, SspaCoefficients};
