//! The `radiogan` command-line driver.
//!
//! Every command is a pure function of its flags, its `--run-config` file
//! and its input files; outputs never carry timestamps or wall times.

pub mod args;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches};
use radiogan_autodiff::{AdError, Checkpoint};
use radiogan_core::error::CoreError;
use radiogan_core::eval::{build_eval_report, EvalConfig};
use radiogan_core::sim::{
    build_dataset, rgds, ChannelConfig, Dataset, DatasetConfig, FadingMode, ModulationScheme, PureSignalConfig,
    SignalModel,
};
use radiogan_core::train::{
    train_energy_constrained, train_gan_n, train_indirect, ConstraintKind, EpochRecord, Normalization, SelectionMetric,
    TrainConfig, TrainOutcome,
};
use radiogan_core::unrolled::{GeneratorConfig, InitMode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Cmd, EvalArgs, IndirectArgs, ModelFlags, SimulateArgs, TrainArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const CONFIG_ECHO: &str = "effective-config.toml";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Divergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Divergence(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::Usage(e.to_string()),
            CoreError::Divergence { .. } => CliError::Divergence(e.to_string()),
            CoreError::Format(_) | CoreError::Io(_) => CliError::Io(e.to_string()),
            CoreError::Ad(ad) => ad.into(),
        }
    }
}

impl From<AdError> for CliError {
    fn from(e: AdError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command();
    let matches = match command.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from this parser");
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let sub_command = command.find_subcommand(name).expect("parsed subcommand exists");
    let result = match cli.command {
        Cmd::Simulate(a) => {
            args::merge(&a, sub_command, sub, a.run_config.as_deref()).and_then(|a| simulate(&a))
        }
        Cmd::Train(a) => args::merge(&a, sub_command, sub, a.run_config.as_deref()).and_then(|a| train(&a)),
        Cmd::TrainIndirect(a) => {
            args::merge(&a, sub_command, sub, a.run_config.as_deref()).and_then(|a| indirect(&a))
        }
        Cmd::Eval(a) => args::merge(&a, sub_command, sub, a.run_config.as_deref()).and_then(|a| eval(&a)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("radiogan: {e}");
            e.exit_code()
        }
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn parse<T: std::str::FromStr<Err = CoreError>>(s: &str) -> Result<T, CliError> {
    Ok(s.parse::<T>()?)
}

/// Parses a snake_case serde enum name.
fn parse_named<T: DeserializeOwned>(s: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| CliError::Usage(format!("unknown {what} '{s}'")))
}

/// `0..9` (inclusive), `0,3,5`, mixtures of both, or empty.
pub fn parse_devices(s: &str) -> Result<Vec<u16>, CliError> {
    let bad = || CliError::Usage(format!("device list '{s}' is not like 0..9 or 0,3,5"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u16, u16) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| CliError::Usage(format!("{what} '{s}' is not a comma-separated list"))))
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("{what} '{s}' is not lo,hi"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// `kind=value`.
pub fn parse_constraint(s: &str) -> Result<(ConstraintKind, f64), CliError> {
    let bad = || CliError::Usage(format!("constraint '{s}' is not kind=value"));
    let (k, v) = s.split_once('=').ok_or_else(bad)?;
    Ok((parse(k.trim())?, v.trim().parse().map_err(|_| bad())?))
}

pub fn dataset_config(a: &SimulateArgs) -> Result<DatasetConfig, CliError> {
    let model: SignalModel = parse(required(&a.model, "model")?)?;
    let channel = ChannelConfig {
        fading: parse::<FadingMode>(&a.fading)?,
        snr_db: a.snr,
        avg_transmit_power: a.power,
    };
    let mut cfg = DatasetConfig::new(model, channel, parse_devices(&a.devices)?, a.samples, *required(&a.seed, "seed")?);
    cfg.pure = PureSignalConfig {
        scheme: parse::<ModulationScheme>(&a.modulation)?,
        oversampling_ratio: a.osr,
        rolloff: a.rolloff,
        sample_len: a.len,
        ..PureSignalConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn echo_config<T: Serialize>(dir: &Path, a: &T) -> Result<(), CliError> {
    write_file(&dir.join(CONFIG_ECHO), args::echo(a))
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = dataset_config(a)?;
    let out = required(&a.out, "out")?;
    let ds = build_dataset(&cfg)?;
    rgds::write(&ds, out)?;
    let mut echo = out.clone().into_os_string();
    echo.push(".config.toml");
    write_file(Path::new(&echo), args::echo(a))?;
    let meta = rgds::DatasetMeta::describe(&ds)?;
    println!(
        "wrote {}: {} samples x {} points, model {}, {} devices",
        out.display(),
        meta.num_samples,
        cfg.pure.sample_len,
        cfg.model,
        cfg.devices.len()
    );
    println!(
        "noise power {:.6}, received power {:.6}, transmit power {:.6}",
        meta.noise_power, meta.received_power, meta.transmit_power
    );
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(rgds::read(path)?)
}

fn generator_config(kind: SignalModel, m: &ModelFlags) -> Result<GeneratorConfig, CliError> {
    let mut g = GeneratorConfig::new(kind);
    g.init = parse_named::<InitMode>(&m.init, "init mode")?;
    g.amplitude_limit = parse_pair(&m.amplitude_limit, "amplitude limit")?;
    g.sub_limit = parse_pair(&m.sub_limit, "sub-generator limit")?;
    g.h_hidden = parse_list(&m.hidden, "hidden widths")?;
    g.sub_hidden = g.h_hidden.clone();
    g.latent_half = m.latent_half;
    Ok(g)
}

fn selection(m: &ModelFlags, ds: &Dataset) -> Result<SelectionMetric, CliError> {
    let noise = SelectionMetric::NoisePower {
        target: ds.config.noise_power(),
    };
    let received = SelectionMetric::ReceivedPower {
        target: ds.received_power(),
    };
    Ok(match m.selection.replace('-', "_").as_str() {
        "auto" if ds.config.model.has_fading() => received,
        "auto" | "noise_power" => noise,
        "received_power" => received,
        "last_epoch" => SelectionMetric::LastEpoch,
        other => return Err(CliError::Usage(format!("unknown selection '{other}'"))),
    })
}

#[allow(clippy::too_many_arguments)]
fn train_config(
    ds: &Dataset,
    kind: SignalModel,
    m: &ModelFlags,
    epochs: u64,
    batch: usize,
    lr: f64,
    d_steps: usize,
    k_steps: usize,
    seed: u64,
) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::new(generator_config(kind, m)?, ds.config.noise_power());
    cfg.epochs = epochs;
    cfg.batch = batch;
    cfg.adam.lr = lr;
    cfg.d_steps = d_steps;
    cfg.constraint_steps = k_steps;
    cfg.seed = seed;
    cfg.disc_hidden = parse_list(&m.disc_hidden, "critic widths")?;
    cfg.normalization = parse_named::<Normalization>(&m.normalization, "normalization")?;
    cfg.selection = selection(m, ds)?;
    cfg.selection_window = m.window;
    cfg.estimate_draws = m.estimate_draws;
    cfg.prior_waveforms = m.prior_waveforms;
    Ok(cfg)
}

/// Writes checkpoints and the report of one training run into `dir`.
fn write_outcome(dir: &Path, out: &TrainOutcome) -> Result<(), CliError> {
    create_dir(dir)?;
    if out.report.records.is_empty() {
        out.checkpoint().save(dir.join("init.rgck"))?;
    } else {
        out.checkpoint().save(dir.join("selected.rgck"))?;
        out.last_checkpoint().save(dir.join("final.rgck"))?;
    }
    write_file(&dir.join("report.jsonl"), out.report.to_jsonl())?;
    let summary = serde_json::json!({
        "epochs": out.report.records.len(),
        "selected_epoch": out.report.selected_epoch,
        "selection_value": out.report.selection_value,
        "selected": out.report.selected(),
    });
    write_file(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary is plain data") + "\n",
    )?;
    Ok(())
}

fn describe(label: &str, out: &TrainOutcome) {
    match out.report.selected() {
        Some(r) => println!("{label}selected epoch {} of {}: {}", r.epoch, out.report.records.len(), record_line(r)),
        None => println!("{label}no epochs run; wrote the initial generator"),
    }
    eprintln!("{label}wall time {:.1} s", out.wall_time.as_secs_f64());
}

fn record_line(r: &EpochRecord) -> String {
    let mut s = format!("noise power {:.6}", r.p_noise_hat);
    if let Some(t) = r.p_transmit_hat {
        s += &format!(", transmit power {t:.6}");
    }
    if let Some(g) = r.p_gain_hat {
        s += &format!(", channel gain {g:.6}");
    }
    s + &format!(", received power {:.6}", r.p_received_hat)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let ds = read_dataset(required(&a.dataset, "dataset")?)?;
    let out_dir = required(&a.out, "out")?;
    let mut cfg = train_config(
        &ds,
        ds.config.model,
        &a.model,
        a.epochs,
        a.batch,
        a.lr,
        a.d_steps,
        a.k_steps,
        *required(&a.seed, "seed")?,
    )?;
    let outcome = match (a.algo.as_str(), &a.constraint) {
        ("gnn", None) => train_gan_n(&ds, &cfg)?,
        ("gnn", Some(_)) => return Err(CliError::Usage("--algo gnn takes no --constraint".into())),
        ("energy", Some(c)) => {
            (cfg.constraint, cfg.constraint_target) = parse_constraint(c)?;
            train_energy_constrained(&ds, &cfg)?
        }
        ("energy", None) => return Err(CliError::Usage("--algo energy needs --constraint kind=value".into())),
        (other, _) => return Err(CliError::Usage(format!("unknown algorithm '{other}'"))),
    };
    write_outcome(out_dir, &outcome)?;
    echo_config(out_dir, a)?;
    describe("", &outcome);
    Ok(())
}

pub fn indirect(a: &IndirectArgs) -> Result<(), CliError> {
    let stable = read_dataset(required(&a.stable, "stable")?)?;
    let dynamic = read_dataset(required(&a.dynamic, "dynamic")?)?;
    let out_dir = required(&a.out, "out")?;
    let seed = *required(&a.seed, "seed")?;
    let mut first = train_config(
        &stable,
        SignalModel::Hn,
        &a.model,
        a.epochs,
        a.batch,
        a.lr,
        a.d_steps,
        a.k_steps,
        seed,
    )?;
    first.constraint = ConstraintKind::TransmitPower;
    first.constraint_target = match a.transmit_power {
        Some(c) => c,
        None => stable.transmit_power()?,
    };
    first.selection = SelectionMetric::NoisePower {
        target: stable.config.noise_power(),
    };
    let second = train_config(
        &dynamic,
        SignalModel::Han,
        &a.model,
        a.stage2_epochs.unwrap_or(a.epochs),
        a.batch,
        a.lr,
        a.d_steps,
        a.k_steps,
        seed,
    )?;
    let outcome = train_indirect(&stable, &dynamic, &first, &second)?;
    create_dir(out_dir)?;
    write_outcome(&out_dir.join("stage1"), &outcome.stage1)?;
    write_outcome(&out_dir.join("stage2"), &outcome.stage2)?;
    echo_config(out_dir, a)?;
    describe("stage 1: ", &outcome.stage1);
    describe("stage 2: ", &outcome.stage2);
    Ok(())
}

/// The dataset configuration behind `--config`: an RGDS header or a
/// simulate config echo.
pub fn load_dataset_config(path: &Path) -> Result<DatasetConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(rgds::MAGIC) {
        return Ok(rgds::parse_header(&bytes)?.0.config);
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError::Io(format!("{}: not RGDS or UTF-8", path.display())))?;
    let sim: SimulateArgs = toml::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    dataset_config(&sim)
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let ck_path = required(&a.ckpt, "ckpt")?;
    let dataset = load_dataset_config(required(&a.config, "config")?)?;
    let out_dir = required(&a.out, "out")?;
    let cfg = EvalConfig {
        density_region: a.density_region,
        bins: a.bins,
        draws: a.draws,
        probes: a.probes,
        seed: *required(&a.seed, "seed")?,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    let ck = Checkpoint::load(ck_path)?;
    let out = build_eval_report(&ck, &dataset, &cfg)?;
    out.write(out_dir)?;
    echo_config(out_dir, a)?;
    let r = &out.report;
    println!(
        "{} generator, epoch {}: noise power {:.6} (reference {:.6})",
        r.kind, r.epoch, r.noise.power, r.noise.reference_power
    );
    if let Some(f) = &r.fading {
        println!(
            "channel gain {:.5} (reference {:.5}), Rayleigh KS p = {:.4}",
            f.gain, f.reference_gain, f.ks.p_value
        );
    }
    for t in r.transmitter.iter().flatten() {
        println!(
            "device {}: max amplitude error {:.4}, max phase error {:.4} rad, waveform RMSE {:.4}",
            t.device, t.errors.max_rel_amplitude_error, t.errors.max_phase_error, t.waveform_rmse
        );
    }
    Ok(())
}

/// Path of the config echo `simulate` writes beside a dataset.
pub fn simulate_echo_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".config.toml");
    PathBuf::from(p)
}
