//! Flag definitions and the merge with `--run-config` files.
//!
//! Every flag has a matching kebab-case key in the config file. A flag
//! given on the command line wins over the file, the file wins over the
//! flag's default.

use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Command, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "radiogan", version, args_override_self = true, about = "Simulate radio datasets, train unrolled GAN generators and evaluate them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Write a simulated RGDS dataset.
    Simulate(SimulateArgs),
    /// Train a generator on an RGDS dataset.
    Train(TrainArgs),
    /// Two-stage training: transmitter and noise on a fixed channel, then fading.
    TrainIndirect(IndirectArgs),
    /// Evaluate a generator checkpoint against its dataset's ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Signal model: n, an, hn or han.
    #[arg(long)]
    pub model: Option<String>,
    /// Modulation: bpsk, qpsk, 8psk, 16qam, 32qam or 64qam.
    #[arg(long = "mod", default_value = "qpsk")]
    #[serde(rename = "mod")]
    pub modulation: String,
    /// Signal-to-noise ratio in dB.
    #[arg(long, default_value_t = 18.0)]
    pub snr: f64,
    /// Radio samples per device (per dataset without devices).
    #[arg(long, default_value_t = 9000)]
    pub samples: usize,
    /// Sampling points per radio sample.
    #[arg(long, default_value_t = 1024)]
    pub len: usize,
    /// Samples per symbol.
    #[arg(long, default_value_t = 8)]
    pub osr: usize,
    /// Root-raised-cosine rolloff.
    #[arg(long, default_value_t = 0.35)]
    pub rolloff: f64,
    /// Average power of the pure signal.
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// none, rayleigh:<gain> or fixed:<re>,<im>.
    #[arg(long, default_value = "none")]
    pub fading: String,
    /// Device ids, e.g. `0..9` (inclusive) or `0,3,5`; empty for none.
    #[arg(long, default_value = "")]
    pub devices: String,
    /// Run seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output RGDS path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with any of these flags as keys.
    #[arg(long)]
    #[serde(skip)]
    pub run_config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// RGDS training dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// gnn (unconstrained) or energy (with --constraint).
    #[arg(long, default_value = "gnn")]
    pub algo: String,
    /// transmit-power=<c>, noise-power=<c> or channel-gain=<c>.
    #[arg(long)]
    pub constraint: Option<String>,
    #[arg(long, default_value_t = 10000)]
    pub epochs: u64,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    /// Discriminator steps per epoch.
    #[arg(long, default_value_t = 5)]
    pub d_steps: usize,
    /// Constraint steps per epoch.
    #[arg(long, default_value_t = 3)]
    pub k_steps: usize,
    /// Run seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    /// TOML file with any of these flags as keys.
    #[arg(long)]
    #[serde(skip)]
    pub run_config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IndirectArgs {
    /// Stage-1 dataset: hn, or han with fixed fading.
    #[arg(long)]
    pub stable: Option<PathBuf>,
    /// Stage-2 dataset: han with Rayleigh fading.
    #[arg(long)]
    pub dynamic: Option<PathBuf>,
    /// Stage-1 transmit power constraint [default: the stable dataset's recorded transmit power].
    #[arg(long)]
    pub transmit_power: Option<f64>,
    #[arg(long, default_value_t = 10000)]
    pub epochs: u64,
    /// Stage-2 epochs [default: --epochs].
    #[arg(long)]
    pub stage2_epochs: Option<u64>,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub d_steps: usize,
    #[arg(long, default_value_t = 3)]
    pub k_steps: usize,
    /// Run seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    /// TOML file with any of these flags as keys.
    #[arg(long)]
    #[serde(skip)]
    pub run_config: Option<PathBuf>,
}

/// Architecture and estimator settings shared by both training commands.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelFlags {
    /// Initialization: glorot, glorot_zero_output or zero.
    #[arg(long, default_value = "glorot_zero_output")]
    pub init: String,
    /// Range of the transmitter's relative amplitude offset, `lo,hi`.
    #[arg(long, default_value = "-1,3", allow_hyphen_values = true)]
    pub amplitude_limit: String,
    /// Output range of each sub-generator component, `lo,hi`.
    #[arg(long, default_value = "-2,2", allow_hyphen_values = true)]
    pub sub_limit: String,
    /// Hidden widths of every generator MLP.
    #[arg(long, default_value = "128,32")]
    pub hidden: String,
    /// Latent dimension of each marginal MLP.
    #[arg(long, default_value_t = 8)]
    pub latent_half: usize,
    /// Critic hidden widths.
    #[arg(long, default_value = "64,64")]
    pub disc_hidden: String,
    /// Critic normalization: gradient_and_value or gradient.
    #[arg(long, default_value = "gradient_and_value")]
    pub normalization: String,
    /// Checkpoint selection: auto, noise_power, received_power or last_epoch.
    #[arg(long, default_value = "auto")]
    pub selection: String,
    /// Trailing fraction of epochs eligible for selection.
    #[arg(long, default_value_t = 0.2)]
    pub window: f64,
    /// Latent draws behind each per-epoch power estimate.
    #[arg(long, default_value_t = 4096)]
    pub estimate_draws: usize,
    /// Pure waveforms regenerated for the generator's signal prior.
    #[arg(long, default_value_t = 256)]
    pub prior_waveforms: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Generator checkpoint (RGCK).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Dataset the checkpoint was trained for: an RGDS file or a simulate config echo.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// The noise density covers [-region, region) on both axes.
    #[arg(long, default_value_t = 2.0)]
    pub density_region: f64,
    /// Density bins per axis.
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Generator draws.
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    /// Probe phases per amplitude for transmitter curves.
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
    /// Run seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with any of these flags as keys.
    #[arg(long)]
    #[serde(skip)]
    pub run_config: Option<PathBuf>,
}

/// Overlays `file` onto `args` for every key not given on the command line.
pub fn merge<T: Serialize + DeserializeOwned>(
    args: &T,
    command: &Command,
    matches: &ArgMatches,
    file: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(args).expect("flags serialize"))
            .expect("flags round trip"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(args).expect("flags serialize");
    let obj = merged.as_object_mut().expect("flags form an object");
    for (key, value) in table {
        let arg = command
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "run_config")
            .ok_or_else(|| CliError::Usage(format!("{}: unknown key '{key}'", path.display())))?;
        let id = arg.get_id().as_str();
        if matches.value_source(id) != Some(ValueSource::CommandLine) {
            let v = serde_json::to_value(value).expect("toml values are plain data");
            obj.insert(key, v);
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// The effective configuration as a file `--run-config` accepts.
pub fn echo<T: Serialize>(args: &T) -> String {
    toml::to_string(args).expect("flags serialize to TOML")
}
