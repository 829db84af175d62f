use std::time::{Duration, Instant};

use num_complex::Complex64;
use radiogan_autodiff::{Adam, AdError, Checkpoint, Tape, Tensor};
use serde::{Deserialize, Serialize};

use super::config::{ConstraintKind, SelectionMetric, TrainConfig};
use super::disc::{constraint_loss, d_loss, g_loss, Discriminator};
use crate::error::{CoreError, Result};
use crate::rng::{purpose, stream, RadioRng};
use crate::sim::{split_into_points, BatchCursor, Dataset, FadingMode, SignalModel};
use crate::unrolled::{iq_matrix, Component, GenInput, PurePrior, UnrolledGenerator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Mean over the epoch's discriminator steps.
    pub d_loss: f64,
    pub g_loss: f64,
    /// Mean over the epoch's constraint steps; absent without any.
    pub constraint_loss: Option<f64>,
    pub p_noise_hat: f64,
    pub p_transmit_hat: Option<f64>,
    pub p_gain_hat: Option<f64>,
    pub p_received_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    /// 0 when no epoch ran.
    pub selected_epoch: u64,
    pub selection_value: Option<f64>,
}

impl TrainReport {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record is plain data") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Vec<EpochRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| CoreError::format(format!("report line: {e}"))))
            .collect()
    }

    pub fn selected(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.selected_epoch)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The generator at `report.selected_epoch`.
    pub selected: UnrolledGenerator,
    pub last: UnrolledGenerator,
    pub discriminator: Discriminator,
    pub report: TrainReport,
    pub seed: u64,
    /// Kept out of the report so reruns compare equal.
    pub wall_time: Duration,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        self.selected.to_checkpoint(self.report.selected_epoch, self.seed)
    }

    pub fn last_checkpoint(&self) -> Checkpoint {
        self.last.to_checkpoint(self.report.records.len() as u64, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct IndirectOutcome {
    pub stage1: TrainOutcome,
    pub stage2: TrainOutcome,
}

/// Unconstrained adversarial training.
pub fn train_gan_n(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.constraint != ConstraintKind::None {
        return Err(CoreError::config("unconstrained training takes constraint 'none'"));
    }
    train(dataset, cfg, None)
}

/// Adversarial training with `constraint_steps` power-constraint updates of
/// the constrained component after every generator step.
pub fn train_energy_constrained(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.constraint == ConstraintKind::None {
        return Err(CoreError::config("energy-constrained training needs a constraint"));
    }
    train(dataset, cfg, None)
}

/// Two stages: a transmitter-plus-noise generator trained with a transmit
/// power constraint on data with a fixed channel, then a fading generator
/// trained alone on block-fading data with the stage-1 `H` and `G_n`
/// frozen. Stage 2 reuses stage 1's architecture; only its kind, freeze
/// list and constraint are overridden.
pub fn train_indirect(
    stable: &Dataset,
    dynamic: &Dataset,
    stage1: &TrainConfig,
    stage2: &TrainConfig,
) -> Result<IndirectOutcome> {
    let stable_ok = match stable.config.model {
        SignalModel::Hn => true,
        SignalModel::Han => matches!(stable.config.channel.fading, FadingMode::Fixed { .. }),
        _ => false,
    };
    if !stable_ok {
        return Err(CoreError::config("stage 1 needs a transmitter dataset with a fixed channel"));
    }
    if dynamic.config.model != SignalModel::Han
        || !matches!(dynamic.config.channel.fading, FadingMode::BlockRayleigh { .. })
    {
        return Err(CoreError::config("stage 2 needs a transmitter dataset with block Rayleigh fading"));
    }
    if stable.config.devices != dynamic.config.devices {
        return Err(CoreError::config("both stages must cover the same devices"));
    }
    if stage1.generator.kind != SignalModel::Hn || stage1.constraint != ConstraintKind::TransmitPower {
        return Err(CoreError::config("stage 1 trains an hn generator under a transmit power constraint"));
    }
    let first = train_energy_constrained(stable, stage1)?;

    let mut cfg = stage2.clone();
    cfg.generator = first.selected.config.clone();
    cfg.generator.kind = SignalModel::Han;
    cfg.constraint = ConstraintKind::None;
    cfg.frozen = vec![Component::H, Component::GN];
    let mut init = UnrolledGenerator::new(cfg.generator.clone(), &mut stream(cfg.seed, purpose::INIT))?;
    init.transplant(&first.selected, Component::H)?;
    init.transplant(&first.selected, Component::GN)?;
    let second = train(dynamic, &cfg, Some(init))?;
    Ok(IndirectOutcome {
        stage1: first,
        stage2: second,
    })
}

/// Mean `|c|^2` over `n_draws` fresh inputs (pure-prior draws for `H`).
pub fn estimate_component_power(
    generator: &UnrolledGenerator,
    component: Component,
    prior: &PurePrior,
    rng: &mut RadioRng,
    n_draws: usize,
) -> Result<f64> {
    if n_draws == 0 {
        return Err(CoreError::config("need at least one draw"));
    }
    let input = GenInput::draw(&generator.config, prior, n_draws, rng);
    Ok(mean_power(&generator.component_output(component, &input)?))
}

pub fn mean_power(values: &[Complex64]) -> f64 {
    values.iter().map(|c| c.norm_sqr()).sum::<f64>() / values.len() as f64
}

fn label_indices(dataset: &Dataset, labels: &[Option<u16>]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            let id = l.ok_or_else(|| CoreError::config("multi-device dataset has unlabeled points"))?;
            dataset
                .config
                .devices
                .iter()
                .position(|&d| d == id)
                .ok_or_else(|| CoreError::config(format!("label {id} is not a dataset device")))
        })
        .collect()
}

fn diverged(epoch: u64, what: &str, last: Option<&EpochRecord>) -> CoreError {
    let last = last.map_or_else(|| "none".to_string(), |r| serde_json::to_string(r).expect("plain data"));
    CoreError::Divergence {
        epoch,
        reason: format!("{what}; last finite record: {last}"),
    }
}

fn check(value: f64, epoch: u64, what: &str, last: Option<&EpochRecord>) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(diverged(epoch, &format!("{what} is {value}"), last))
    }
}

fn step(opt: &mut Adam, params: &mut [&mut Tensor], grads: &[Tensor], epoch: u64, last: Option<&EpochRecord>) -> Result<()> {
    match opt.step(params, grads) {
        Err(AdError::NonFiniteGradient) => Err(diverged(epoch, "non-finite gradient", last)),
        other => Ok(other?),
    }
}

fn estimate(generator: &UnrolledGenerator, input: &GenInput) -> Result<(f64, Option<f64>, Option<f64>, f64)> {
    let noise = generator.component_output(Component::GN, input)?;
    let h = match generator.h {
        Some(_) => Some(generator.component_output(Component::H, input)?),
        None => None,
    };
    let alpha = match generator.g_alpha {
        Some(_) => Some(generator.component_output(Component::GAlpha, input)?),
        None => None,
    };
    let received: Vec<Complex64> = (0..input.len())
        .map(|i| {
            let base = h.as_ref().map_or(input.s[i], |h| h[i]);
            alpha.as_ref().map_or(base, |a| a[i] * base) + noise[i]
        })
        .collect();
    Ok((
        mean_power(&noise),
        h.as_deref().map(mean_power),
        alpha.as_deref().map(mean_power),
        mean_power(&received),
    ))
}

fn selection_value(metric: SelectionMetric, r: &EpochRecord) -> Option<f64> {
    match metric {
        SelectionMetric::NoisePower { target } => Some((r.p_noise_hat - target).abs()),
        SelectionMetric::ReceivedPower { target } => Some((r.p_received_hat - target).abs()),
        SelectionMetric::LastEpoch => None,
    }
}

/// The shared loop: `d_steps` critic updates, one generator update, then
/// `constraint_steps` updates of the constrained component, per epoch.
fn train(dataset: &Dataset, cfg: &TrainConfig, init: Option<UnrolledGenerator>) -> Result<TrainOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    dataset.config.validate()?;
    let points = split_into_points(dataset);
    if points.is_empty() {
        return Err(CoreError::config("dataset is empty"));
    }
    let classes = dataset.config.devices.len();
    let conditioned = classes > 1;
    let real_labels = if conditioned {
        Some(label_indices(dataset, &points.labels)?)
    } else {
        None
    };

    let mut gen_cfg = cfg.generator.clone();
    gen_cfg.num_devices = classes.max(1);
    let mut init_rng = stream(cfg.seed, purpose::INIT);
    let mut generator = match init {
        Some(g) => {
            if g.config != gen_cfg {
                return Err(CoreError::config("initial generator does not match the configuration"));
            }
            g
        }
        None => UnrolledGenerator::new(gen_cfg.clone(), &mut init_rng)?,
    };
    let mut critic = Discriminator::new(if conditioned { classes } else { 0 }, &cfg.disc_hidden, &mut init_rng);

    let prior = PurePrior::regenerate(
        &dataset.config.pure,
        dataset.config.channel.avg_transmit_power,
        cfg.prior_waveforms,
        cfg.seed,
    )?;
    let estimate_input = GenInput::draw(&gen_cfg, &prior, cfg.estimate_draws, &mut stream(cfg.seed, purpose::ESTIMATE));

    let trainable: Vec<Component> = generator
        .components()
        .into_iter()
        .filter(|c| !cfg.frozen.contains(c))
        .collect();
    let constrained = cfg.constraint.component();
    let mut opt_d = Adam::new(cfg.adam, &critic.mlp.param_shapes());
    let mut opt_g = Adam::new(cfg.adam, &generator.param_shapes(&trainable)?);
    let mut opt_c = match constrained {
        Some(c) => Some(Adam::new(cfg.adam, &generator.param_shapes(&[c])?)),
        None => None,
    };

    let mut rng = stream(cfg.seed, purpose::TRAIN);
    let mut cursor = BatchCursor::new(points.len(), cfg.batch)?;
    let mut records: Vec<EpochRecord> = Vec::with_capacity(cfg.epochs as usize);
    let mut best: Option<(u64, Option<f64>, UnrolledGenerator)> = None;
    let window_start = cfg.window_start();

    for epoch in 1..=cfg.epochs {
        let last = records.last();

        let mut d_sum = 0.0;
        for _ in 0..cfg.d_steps {
            let idx = cursor.next_batch(&mut rng).to_vec();
            let real: Vec<Complex64> = idx.iter().map(|&i| points.received[i]).collect();
            let real_cond = match &real_labels {
                Some(l) => critic.condition(Some(&idx.iter().map(|&i| l[i]).collect::<Vec<_>>()), idx.len())?,
                None => None,
            };
            let input = GenInput::draw(&gen_cfg, &prior, cfg.batch, &mut rng);
            let fake = generator.generate(&input)?;
            let fake_cond = critic.condition(input.labels.as_deref(), input.len())?;

            let tape = Tape::new();
            let bound = critic.mlp.bind(&tape);
            let loss = d_loss(
                &tape,
                &bound,
                tape.leaf(iq_matrix(&real)),
                tape.leaf(iq_matrix(&fake)),
                real_cond.as_ref(),
                fake_cond.as_ref(),
                cfg.normalization,
            )?;
            d_sum += check(loss.value().item(), epoch, "discriminator loss", last)?;
            let grads = tape.gradients(loss, &bound.params())?;
            step(&mut opt_d, &mut critic.mlp.params_mut(), &grads, epoch, last)?;
        }

        let g_value = {
            let input = GenInput::draw(&gen_cfg, &prior, cfg.batch, &mut rng);
            let cond = critic.condition(input.labels.as_deref(), input.len())?;
            let tape = Tape::new();
            let fwd = generator.forward(&tape, &input)?;
            let bound = critic.mlp.bind(&tape);
            let loss = g_loss(&tape, &bound, fwd.out.stacked(), cond.as_ref(), cfg.normalization)?;
            let value = check(loss.value().item(), epoch, "generator loss", last)?;
            let grads = tape.gradients(loss, &fwd.params_of(&trainable))?;
            step(&mut opt_g, &mut generator.params_of_mut(&trainable)?, &grads, epoch, last)?;
            value
        };

        let mut c_sum = 0.0;
        if let (Some(c), Some(opt)) = (constrained, opt_c.as_mut()) {
            for _ in 0..cfg.constraint_steps {
                let input = GenInput::draw(&gen_cfg, &prior, cfg.batch, &mut rng);
                let tape = Tape::new();
                let (out, params) = generator.component_forward(&tape, c, &input)?;
                let loss = constraint_loss(out.norm_sqr(), cfg.constraint_target)?;
                c_sum += check(loss.value().item(), epoch, "constraint loss", last)?;
                let grads = tape.gradients(loss, &params)?;
                step(opt, &mut generator.params_mut(c)?, &grads, epoch, last)?;
            }
        }

        let (noise, transmit, gain, received) = estimate(&generator, &estimate_input)?;
        let record = EpochRecord {
            epoch,
            d_loss: d_sum / cfg.d_steps as f64,
            g_loss: g_value,
            constraint_loss: (constrained.is_some() && cfg.constraint_steps > 0)
                .then(|| c_sum / cfg.constraint_steps as f64),
            p_noise_hat: check(noise, epoch, "noise power estimate", last)?,
            p_transmit_hat: transmit,
            p_gain_hat: gain,
            p_received_hat: check(received, epoch, "received power estimate", last)?,
        };

        if epoch >= window_start {
            let value = selection_value(cfg.selection, &record);
            // Ties keep the earlier epoch; without a metric the latest wins.
            let better = best.as_ref().map_or(true, |(_, b, _)| match (b, value) {
                (Some(b), Some(v)) => v < *b,
                _ => true,
            });
            if better {
                best = Some((epoch, value, generator.clone()));
            }
        }
        records.push(record);
    }

    let (selected_epoch, selection_value, selected) = best.unwrap_or_else(|| (0, None, generator.clone()));
    Ok(TrainOutcome {
        selected,
        last: generator,
        discriminator: critic,
        report: TrainReport {
            records,
            selected_epoch,
            selection_value,
        },
        seed: cfg.seed,
        wall_time: started.elapsed(),
    })
}
