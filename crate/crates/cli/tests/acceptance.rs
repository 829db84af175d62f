//! End-to-end acceptance suite: every criterion at its stated tolerance.
//!
//! One sequential test so the wall-clock budgets are measured on an
//! otherwise idle core. Each criterion prints a single PASS/FAIL line; the
//! test fails at the end if any criterion failed. Set `ACCEPTANCE_ONLY` to
//! a comma list of criterion numbers (e.g. `5,6,7`) to run a subset.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use radiogan_autodiff::{Activation, LayerSpec, Mlp, MlpSpec, Tape, Tensor};
use radiogan_core::eval::{build_eval_report, EvalConfig, EvalReport};
use radiogan_core::rng::{purpose, stream, RadioRng};
use radiogan_core::sim::*;
use radiogan_core::train::*;
use radiogan_core::unrolled::*;
use rand::Rng;

type Check = Result<(bool, String), String>;

struct Criterion {
    id: u8,
    name: &'static str,
    run: fn() -> Check,
}

fn wanted(id: u8) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) if !list.trim().is_empty() => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        _ => true,
    }
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, name: "noise learning", run: noise_learning },
        Criterion { id: 2, name: "fading learning", run: fading_learning },
        Criterion { id: 3, name: "transmitter learning", run: transmitter_learning },
        Criterion { id: 4, name: "indirect optimization", run: indirect_optimization },
        Criterion { id: 5, name: "autodiff correctness", run: autodiff_correctness },
        Criterion { id: 6, name: "simulator fidelity", run: simulator_fidelity },
        Criterion { id: 7, name: "structural invariants", run: structural_invariants },
        Criterion { id: 8, name: "energy-constraint efficacy", run: constraint_efficacy },
    ];
    let mut failed = Vec::new();
    // The harness has already printed "test acceptance ... " on this line.
    let _ = writeln!(std::io::stdout());
    for c in criteria.iter().filter(|c| wanted(c.id)) {
        let started = Instant::now();
        let (pass, detail) = match (c.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        // Straight to the process stdout: the harness captures `println!`
        // and would hide the lines of a passing run.
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(
            stdout,
            "ACCEPTANCE {} {} [{}] {} ({:.0} s)",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            detail,
            started.elapsed().as_secs_f64()
        );
        let _ = stdout.flush();
        drop(stdout);
        if !pass {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn channel(fading: FadingMode, snr_db: f64) -> ChannelConfig {
    ChannelConfig {
        fading,
        snr_db,
        avg_transmit_power: 1.0,
    }
}

/// The training point count used throughout: 256 waveforms of 1024 points.
fn standard_dataset(model: SignalModel, fading: FadingMode, snr_db: f64, devices: Vec<u16>, seed: u64) -> Result<Dataset, String> {
    build_dataset(&DatasetConfig::new(model, channel(fading, snr_db), devices, 256, seed)).map_err(err)
}

/// The same point count as 4096 waveforms of 64 points, so a block-fading
/// dataset holds 4096 independent channel draws instead of 256.
fn fading_dataset(model: SignalModel, fading: FadingMode, devices: Vec<u16>, seed: u64) -> Result<Dataset, String> {
    let mut cfg = DatasetConfig::new(model, channel(fading, 18.0), devices, 4096, seed);
    cfg.pure.sample_len = 64;
    build_dataset(&cfg).map_err(err)
}

/// The generator settings the command-line `train` uses by default.
fn generator(kind: SignalModel) -> GeneratorConfig {
    let mut g = GeneratorConfig::new(kind);
    g.init = InitMode::GlorotZeroOutput;
    if kind.has_transmitter() {
        g.amplitude_limit = (-1.0, 3.0);
    }
    g
}

fn eval_report(ck: &radiogan_autodiff::Checkpoint, ds: &DatasetConfig, draws: usize) -> Result<EvalReport, String> {
    let cfg = EvalConfig {
        draws,
        ..EvalConfig::default()
    };
    Ok(build_eval_report(ck, ds, &cfg).map_err(err)?.report)
}

// ---------------------------------------------------------------- 1

fn noise_run(snr_db: f64, epochs: u64) -> Result<(f64, f64, Duration), String> {
    let started = Instant::now();
    let ds = standard_dataset(SignalModel::N, FadingMode::None, snr_db, vec![], 11)?;
    let mut cfg = TrainConfig::new(generator(SignalModel::N), ds.config.noise_power());
    cfg.epochs = epochs;
    cfg.seed = 1;
    let out = train_gan_n(&ds, &cfg).map_err(err)?;
    let elapsed = started.elapsed();
    let during = out.report.selected().ok_or("no selected epoch")?.p_noise_hat;
    let report = eval_report(&out.checkpoint(), &ds.config, 1_000_000)?;
    Ok((report.noise.power, during, elapsed))
}

fn noise_learning() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    let profiles: [(f64, u64, f64, f64, u64); 4] = [
        (18.0, 2000, 0.01585, 0.15, 300),
        (6.0, 2000, 0.25119, 0.15, 300),
        (18.0, 10_000, 0.01585, 0.05, 1800),
        (6.0, 10_000, 0.25119, 0.10, 1800),
    ];
    for (snr, epochs, target, tol, budget) in profiles {
        let (power, during, elapsed) = noise_run(snr, epochs)?;
        let rel = (power - target).abs() / target;
        let ok = rel <= tol && elapsed.as_secs() <= budget;
        pass &= ok;
        parts.push(format!(
            "{snr} dB/{epochs} ep: P_n {power:.5} (training estimate {during:.5}) vs {target}, rel {rel:.3} <= {tol}, {:.0} s <= {budget} s",
            elapsed.as_secs_f64()
        ));
    }
    Ok((pass, parts.join("; ")))
}

// ---------------------------------------------------------------- 2

fn fading_learning() -> Check {
    let ds = fading_dataset(SignalModel::An, FadingMode::BlockRayleigh { avg_gain: 1.0 }, vec![], 12)?;
    let mut cfg = TrainConfig::new(generator(SignalModel::An), ds.config.noise_power());
    cfg.epochs = 10_000;
    cfg.seed = 2;
    cfg.constraint = ConstraintKind::NoisePower;
    cfg.constraint_target = ds.config.noise_power();
    cfg.selection = SelectionMetric::ReceivedPower {
        target: ds.received_power(),
    };
    let out = train_energy_constrained(&ds, &cfg).map_err(err)?;
    let report = eval_report(&out.checkpoint(), &ds.config, 100_000)?;
    let f = report.fading.ok_or("no fading section")?;
    let gain_err = (f.gain - 1.0).abs();
    let pass = f.ks.p_value > 0.01 && gain_err <= 0.02;
    Ok((
        pass,
        format!(
            "KS D {:.4} p {:.4} > 0.01 over {} draws; gain {:.4}, |err| {gain_err:.4} <= 0.02",
            f.ks.statistic, f.ks.p_value, f.ks.n, f.gain
        ),
    ))
}

// ---------------------------------------------------------------- 3

fn transmitter_learning() -> Check {
    let ds = standard_dataset(SignalModel::Hn, FadingMode::None, 18.0, vec![0], 13)?;
    let tp = ds.transmit_power().map_err(err)?;
    let mut cfg = TrainConfig::new(generator(SignalModel::Hn), ds.config.noise_power());
    cfg.epochs = 10_000;
    cfg.seed = 3;
    cfg.constraint = ConstraintKind::TransmitPower;
    cfg.constraint_target = tp;
    let out = train_energy_constrained(&ds, &cfg).map_err(err)?;
    let report = eval_report(&out.checkpoint(), &ds.config, 1_000_000)?;
    let t = &report.transmitter.ok_or("no transmitter section")?[0];
    let e = &t.errors;
    let pass = e.max_rel_amplitude_error < 0.05 && e.max_phase_error < 0.05 && t.waveform_rmse < 0.05;
    Ok((
        pass,
        format!(
            "device 0 on r in [0.1, 1.3]: max rel amplitude error {:.4} < 0.05, max phase error {:.4} rad < 0.05, overlay RMSE {:.4} < 0.05 (P_tx {:.4} vs {tp:.4}, P_n {:.5} vs {:.5})",
            e.max_rel_amplitude_error,
            e.max_phase_error,
            t.waveform_rmse,
            t.transmit_power,
            report.noise.power,
            ds.config.noise_power()
        ),
    ))
}

// ---------------------------------------------------------------- 4

fn indirect_optimization() -> Check {
    let stable = standard_dataset(SignalModel::Han, FadingMode::Fixed { re: 0.8, im: 0.6 }, 18.0, vec![0], 14)?;
    let dynamic = fading_dataset(SignalModel::Han, FadingMode::BlockRayleigh { avg_gain: 1.0 }, vec![0], 15)?;
    let mut stage1 = TrainConfig::new(generator(SignalModel::Hn), stable.config.noise_power());
    stage1.epochs = 10_000;
    stage1.seed = 4;
    stage1.constraint = ConstraintKind::TransmitPower;
    stage1.constraint_target = stable.transmit_power().map_err(err)?;
    let mut stage2 = TrainConfig::new(generator(SignalModel::Han), dynamic.config.noise_power());
    stage2.epochs = 10_000;
    stage2.seed = 5;
    stage2.selection = SelectionMetric::ReceivedPower {
        target: dynamic.received_power(),
    };
    let out = train_indirect(&stable, &dynamic, &stage1, &stage2).map_err(err)?;

    let s1 = out.stage1.checkpoint();
    let mut frozen = true;
    for ck in [out.stage2.checkpoint(), out.stage2.last_checkpoint()] {
        for name in ["H", "G_n"] {
            let a = ck.section(name).ok_or("missing section")?.payload();
            let b = s1.section(name).ok_or("missing section")?.payload();
            frozen &= a == b;
        }
    }
    let report = eval_report(&out.stage2.checkpoint(), &dynamic.config, 100_000)?;
    let f = report.fading.ok_or("no fading section")?;
    let gain_err = (f.gain - 1.0).abs();
    let pass = frozen && f.ks.p_value > 0.01 && gain_err <= 0.05;
    Ok((
        pass,
        format!(
            "H and G_n byte-frozen: {frozen}; KS D {:.4} p {:.4} > 0.01; gain {:.4}, |err| {gain_err:.4} <= 0.05",
            f.ks.statistic, f.ks.p_value, f.gain
        ),
    ))
}

// ---------------------------------------------------------------- 5

const FD_STEP: f64 = 1e-5;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn random_tensor(rng: &mut RadioRng, r: usize, c: usize) -> Tensor {
    Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.5..1.5)).collect()).expect("shape")
}

/// Central differences of `f` over every entry of every parameter tensor.
fn fd_params(params: &[Tensor], f: &dyn Fn(&[Tensor]) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..params.len() {
        for i in 0..params[k].len() {
            let mut p = params.to_vec();
            p[k].data_mut()[i] += FD_STEP;
            let plus = f(&p);
            p[k].data_mut()[i] -= 2.0 * FD_STEP;
            out.push((plus - f(&p)) / (2.0 * FD_STEP));
        }
    }
    out
}

fn flat(ts: &[Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Smallest `|pre-activation|` of any ReLU unit over the batch. Central
/// differences are only valid away from the kinks.
fn relu_margin(mlp: &Mlp, x: &Tensor) -> f64 {
    let mut h = x.clone();
    let mut margin = f64::INFINITY;
    for layer in mlp.layers() {
        let pre = h.matmul(&layer.weights, false, true).add_row(&layer.biases);
        h = match layer.activation {
            Activation::Relu => {
                margin = pre.data().iter().fold(margin, |m, v| m.min(v.abs()));
                pre.map(|v| v.max(0.0))
            }
            Activation::Tanh => pre.map(f64::tanh),
            Activation::Identity => pre,
        };
    }
    margin
}

fn random_mlp(rng: &mut RadioRng, input_dim: usize, activation: Activation, output: Activation) -> Mlp {
    let depth = rng.gen_range(1..=3);
    let mut layers: Vec<LayerSpec> = (0..depth)
        .map(|_| LayerSpec {
            width: rng.gen_range(2..=12),
            activation,
        })
        .collect();
    layers.push(LayerSpec {
        width: 1,
        activation: output,
    });
    let spec = MlpSpec {
        input_dim,
        layers,
        limit: None,
    };
    let params = spec.param_shapes().iter().map(|&(r, c)| random_tensor(rng, r, c)).collect();
    Mlp::from_params(spec, params).expect("shapes from spec")
}

/// `sum(w * mlp(x))` and its parameter gradient from the tape.
fn mlp_probe(mlp: &Mlp, x: &Tensor, w: &Tensor) -> (f64, Vec<f64>) {
    let tape = Tape::new();
    let bound = mlp.bind(&tape);
    let out = bound.forward(tape.leaf(x.clone())) * tape.leaf(w.clone());
    let loss = out.sum();
    let grads = tape.gradients(loss, &bound.params()).expect("scalar");
    (loss.value().item(), flat(&grads))
}

fn first_order_mlp(rng: &mut RadioRng) -> Result<f64, String> {
    let relu = rng.gen_bool(0.5);
    let activation = if relu { Activation::Relu } else { Activation::Tanh };
    let input_dim = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=6);
    let (mlp, x) = loop {
        let mlp = random_mlp(rng, input_dim, activation, Activation::Identity);
        let x = random_tensor(rng, n, input_dim);
        if !relu || relu_margin(&mlp, &x) > 1e-3 {
            break (mlp, x);
        }
    };
    let w = random_tensor(rng, n, 1);
    let (_, analytic) = mlp_probe(&mlp, &x, &w);
    let spec = mlp.spec().clone();
    let numeric = fd_params(&mlp.params().into_iter().cloned().collect::<Vec<_>>(), &|p| {
        let m = Mlp::from_params(spec.clone(), p.to_vec()).expect("shapes");
        mlp_probe(&m, &x, &w).0
    });
    Ok(rel_err(&analytic, &numeric))
}

fn small_generator(kind: SignalModel) -> GeneratorConfig {
    let mut g = GeneratorConfig::new(kind);
    g.h_hidden = vec![6, 4];
    g.sub_hidden = vec![6, 4];
    g.latent_half = 2;
    g
}

/// `sum(w * [Re, Im] of G(z|s))` over every generator parameter.
fn first_order_generator(rng: &mut RadioRng) -> Result<f64, String> {
    let kinds = [SignalModel::N, SignalModel::An, SignalModel::Hn, SignalModel::Han];
    let cfg = small_generator(kinds[rng.gen_range(0..kinds.len())]);
    let gen = UnrolledGenerator::new(cfg.clone(), rng).map_err(err)?;
    let points: Vec<Complex64> = (0..32).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let prior = PurePrior::from_points(points).map_err(err)?;
    let input = GenInput::draw(&cfg, &prior, rng.gen_range(1..=5), rng);
    let w = random_tensor(rng, input.len(), 2);
    let components = gen.components();

    let probe = |g: &UnrolledGenerator| -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let fwd = g.forward(&tape, &input).expect("forward");
        let loss = (fwd.out.stacked() * tape.leaf(w.clone())).sum();
        let grads = tape.gradients(loss, &fwd.params_of(&components)).expect("scalar");
        (loss.value().item(), flat(&grads))
    };
    let (_, analytic) = probe(&gen);
    let params: Vec<Tensor> = gen.clone().params_of_mut(&components).map_err(err)?.into_iter().map(|t| t.clone()).collect();
    let numeric = fd_params(&params, &|p| {
        let mut g = gen.clone();
        for (dst, src) in g.params_of_mut(&components).expect("components").into_iter().zip(p) {
            *dst = src.clone();
        }
        probe(&g).0
    });
    Ok(rel_err(&analytic, &numeric))
}

/// The critic objective `mean D^(fake) - mean D^(real)` differentiated in
/// the critic parameters, which runs back through the recorded input
/// gradient inside `D^`.
fn double_backprop(rng: &mut RadioRng) -> Result<f64, String> {
    let n = rng.gen_range(2..=6);
    let (mlp, real, fake) = loop {
        let mlp = random_mlp(rng, 2, Activation::Relu, Activation::Identity);
        let real = random_tensor(rng, n, 2);
        let fake = random_tensor(rng, n, 2);
        if relu_margin(&mlp, &real) > 1e-3 && relu_margin(&mlp, &fake) > 1e-3 {
            break (mlp, real, fake);
        }
    };
    let loss_of = |m: &Mlp, want_grad: bool| -> Result<(f64, Vec<f64>), String> {
        let tape = Tape::new();
        let bound = m.bind(&tape);
        let loss = d_loss(&tape, &bound, tape.leaf(real.clone()), tape.leaf(fake.clone()), None, None, Normalization::Gradient)
            .map_err(err)?;
        let grads = if want_grad {
            flat(&tape.gradients(loss, &bound.params()).map_err(err)?)
        } else {
            Vec::new()
        };
        Ok((loss.value().item(), grads))
    };
    let (_, analytic) = loss_of(&mlp, true)?;
    let spec = mlp.spec().clone();
    let numeric = fd_params(&mlp.params().into_iter().cloned().collect::<Vec<_>>(), &|p| {
        let m = Mlp::from_params(spec.clone(), p.to_vec()).expect("shapes");
        loss_of(&m, false).expect("loss").0
    });
    Ok(rel_err(&analytic, &numeric))
}

fn autodiff_correctness() -> Check {
    let started = Instant::now();
    let mut rng = stream(2024, 0);
    let mut first: f64 = 0.0;
    for i in 0..100 {
        let e = if i % 2 == 0 {
            first_order_mlp(&mut rng)?
        } else {
            first_order_generator(&mut rng)?
        };
        first = first.max(e);
    }
    let mut second: f64 = 0.0;
    for _ in 0..20 {
        second = second.max(double_backprop(&mut rng)?);
    }
    let elapsed = started.elapsed();
    let pass = first < 1e-6 && second < 1e-4 && elapsed.as_secs() < 60;
    Ok((
        pass,
        format!(
            "100 first-order checks, worst rel err {first:.2e} < 1e-6; 20 double-backprop checks, worst {second:.2e} < 1e-4; {:.1} s < 60 s",
            elapsed.as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------- 6

/// The ten devices and the reference amplifier, typed in independently of
/// the library table.
const DEVICES: [([f64; 4], [f64; 4]); 10] = [
    ([10.2598, 1.9926, -0.2782, 9.5297], [6.0838, 1.3190, -0.0375, 16.2325]),
    ([10.7344, 2.0668, -0.5015, 9.5297], [6.3304, 1.3058, -0.0348, 16.2325]),
    ([11.6849, 2.0193, -0.6689, 9.5297], [6.7758, 2.0689, -0.0280, 16.2325]),
    ([10.2963, 1.7932, -0.2929, 9.5297], [6.1256, 1.4660, -0.0297, 16.2325]),
    ([11.3625, 2.0100, -0.4304, 9.5297], [6.6729, 2.2441, -0.0168, 16.2325]),
    ([11.4996, 2.0766, -0.5835, 9.5297], [6.7440, 2.9490, -0.0454, 16.2325]),
    ([10.5223, 1.7999, -0.5658, 9.5297], [6.4241, 1.4531, -0.0425, 16.2325]),
    ([10.4870, 1.8997, -0.4515, 9.5297], [6.4135, 1.4193, -0.0305, 16.2325]),
    ([11.3525, 2.2360, -0.2442, 9.5297], [6.9513, 2.1135, -0.0366, 16.2325]),
    ([10.0237, 1.9307, -0.4582, 9.5297], [6.0633, 2.4454, -0.0363, 16.2325]),
];
const REFERENCE: ([f64; 4], [f64; 4]) = ([7.851, 1.5388, -0.4511, 6.3531], [4.6388, 2.0949, -0.0325, 10.8217]);

fn direct(c: &[f64; 4], r: f64) -> f64 {
    (c[0] * r.powf(c[1]) + c[2] * r.powf(c[1] + 1.0)) / (1.0 + c[3] * r.powf(c[1] + 1.0))
}

fn simulator_fidelity() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;

    let table = DeviceTable::standard();
    let mut worst: f64 = 0.0;
    let mut amps = vec![(SspaCoefficients::reference(), REFERENCE)];
    for (id, expected) in DEVICES.iter().enumerate() {
        amps.push((*table.get(id as u16).map_err(err)?, *expected));
    }
    for (lib, (a, b)) in &amps {
        for i in 1..=150 {
            let r = i as f64 * 0.01;
            worst = worst.max((lib.amam(r).map_err(err)? - direct(a, r)).abs());
            worst = worst.max((lib.ampm(r).map_err(err)? - direct(b, r)).abs());
            let s = Complex64::from_polar(r, 0.37 * i as f64);
            let want = Complex64::from_polar(direct(a, r), 0.37 * i as f64 + direct(b, r));
            worst = worst.max((lib.apply(s) - want).norm());
        }
    }
    pass &= worst <= 1e-12;
    parts.push(format!("SSPA curves of 11 amplifiers vs direct evaluation: max |diff| {worst:.1e} <= 1e-12"));

    for snr in [6.0, 12.0, 18.0] {
        let mut cfg = DatasetConfig::new(SignalModel::N, channel(FadingMode::None, snr), vec![], 64, 16);
        cfg.pure.sample_len = 1024;
        let ds = build_dataset(&cfg).map_err(err)?;
        let noise: Vec<f64> = ds
            .samples
            .iter()
            .flat_map(|s| s.points.iter().zip(&s.pure_points).map(|(x, p)| (x - p).norm_sqr()))
            .collect();
        let n = noise.len() as f64;
        let mean = noise.iter().sum::<f64>() / n;
        let expected = 10f64.powf(-snr / 10.0);
        // |n|^2 of a circular Gaussian is exponential: its sd equals its mean.
        let sigma = expected / n.sqrt();
        let z = (mean - expected).abs() / sigma;
        pass &= z <= 3.0;
        parts.push(format!("{snr} dB noise {mean:.6} vs {expected:.6} ({z:.2} sigma)"));
    }

    let schemes = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Qam16,
        ModulationScheme::Qam32,
        ModulationScheme::Qam64,
    ];
    let mut dev: f64 = 0.0;
    for s in schemes {
        let c = constellation(s);
        dev = dev.max((c.iter().map(|p| p.norm_sqr()).sum::<f64>() / c.len() as f64 - 1.0).abs());
    }
    pass &= dev <= 1e-15;
    parts.push(format!("constellation power deviation {dev:.1e}"));

    let mut energy_dev: f64 = 0.0;
    let mut symmetric = true;
    for (rolloff, osr, span) in [(0.35, 8, 8), (0.2, 4, 10), (0.5, 16, 6), (1.0, 2, 8)] {
        let taps = rrc_taps(rolloff, osr, span).map_err(err)?;
        energy_dev = energy_dev.max((taps.iter().map(|t| t * t).sum::<f64>() - 1.0).abs());
        symmetric &= taps.iter().zip(taps.iter().rev()).all(|(a, b)| a == b);
    }
    pass &= energy_dev <= 1e-12 && symmetric;
    parts.push(format!("RRC tap energy deviation {energy_dev:.1e}, symmetric {symmetric}"));
    Ok((pass, parts.join("; ")))
}

// ---------------------------------------------------------------- 7

fn radiogan(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_radiogan"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("radiogan {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<bool, String> {
    for n in names {
        if std::fs::read(a.join(n)).map_err(err)? != std::fs::read(b.join(n)).map_err(err)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn tiny_training(kind: SignalModel, epochs: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(small_generator(kind), 0.0631);
    cfg.epochs = epochs;
    cfg.batch = 64;
    cfg.disc_hidden = vec![8, 8];
    cfg.estimate_draws = 64;
    cfg.prior_waveforms = 2;
    cfg.seed = 7;
    cfg
}

fn structural_invariants() -> Check {
    let mut parts = Vec::new();

    // Each sub-generator holds one marginal network applied to both latent
    // halves, so equal halves must give equal real and imaginary parts.
    let mut tiny = DatasetConfig::new(SignalModel::An, channel(FadingMode::BlockRayleigh { avg_gain: 1.0 }, 12.0), vec![], 8, 17);
    tiny.pure.sample_len = 64;
    let ds = build_dataset(&tiny).map_err(err)?;
    let out = train_gan_n(&ds, &tiny_training(SignalModel::An, 20)).map_err(err)?;
    let mut shared = true;
    for (name, sub) in [("G_alpha", out.last.g_alpha.as_ref()), ("G_n", Some(&out.last.g_n))] {
        let sub = sub.ok_or("missing sub-generator")?;
        shared &= out.last_checkpoint().section(name).ok_or("missing section")?.networks.len() == 1;
        let mut rng = stream(9, 0);
        for _ in 0..100 {
            let half: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z: Vec<f64> = half.iter().chain(&half).copied().collect();
            let v = sub.apply(&z).map_err(err)?;
            shared &= v.re.to_bits() == v.im.to_bits();
        }
    }
    parts.push(format!("weight sharing after 20 epochs: {shared}"));

    let mut zero_cfg = small_generator(SignalModel::N);
    zero_cfg.init = InitMode::Zero;
    let zero = UnrolledGenerator::new(zero_cfg.clone(), &mut stream(1, purpose::INIT)).map_err(err)?;
    let prior = PurePrior::regenerate(&PureSignalConfig::default(), 1.0, 2, 1).map_err(err)?;
    let input = GenInput::draw(&zero_cfg, &prior, 4096, &mut stream(1, purpose::EVAL));
    let identity = zero.generate(&input).map_err(err)? == input.s;
    parts.push(format!("zero-initialized GAN_n output equals s: {identity}"));

    let mut frozen_cfg = tiny_training(SignalModel::An, 20);
    frozen_cfg.frozen = vec![Component::GAlpha];
    let out = train_gan_n(&ds, &frozen_cfg).map_err(err)?;
    let init = UnrolledGenerator::new(frozen_cfg.generator.clone(), &mut stream(frozen_cfg.seed, purpose::INIT)).map_err(err)?;
    let zero_delta = out.last.section(Component::GAlpha).map_err(err)?.payload() == init.section(Component::GAlpha).map_err(err)?.payload()
        && out.last.g_n != init.g_n;
    parts.push(format!("frozen G_alpha unchanged while G_n trains: {zero_delta}"));

    let dir = tempfile::tempdir().map_err(err)?;
    let p = dir.path();
    let sim = ["simulate", "--model", "hn", "--devices", "3", "--samples", "8", "--len", "64", "--seed", "3", "--out"];
    radiogan(&[&sim[..], &["a.rgds"]].concat(), p)?;
    radiogan(&[&sim[..], &["b.rgds"]].concat(), p)?;
    let sim_same = std::fs::read(p.join("a.rgds")).map_err(err)? == std::fs::read(p.join("b.rgds")).map_err(err)?;
    let train = [
        "train", "--dataset", "a.rgds", "--algo", "energy", "--constraint", "transmit-power=0.87", "--epochs", "20", "--batch",
        "64", "--hidden", "8,4", "--latent-half", "2", "--disc-hidden", "8,8", "--estimate-draws", "64", "--prior-waveforms",
        "2", "--seed", "5", "--out",
    ];
    radiogan(&[&train[..], &["t1"]].concat(), p)?;
    radiogan(&[&train[..], &["t2"]].concat(), p)?;
    let train_same = same_files(&p.join("t1"), &p.join("t2"), &["selected.rgck", "final.rgck", "report.jsonl", "summary.json"])?;
    for (ck, out) in [("t1/selected.rgck", "e1"), ("t2/selected.rgck", "e2")] {
        radiogan(&["eval", "--ckpt", ck, "--config", "a.rgds", "--draws", "20000", "--seed", "2", "--out", out], p)?;
    }
    let mut eval_files: Vec<String> = std::fs::read_dir(p.join("e1"))
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n != "effective-config.toml")
        .collect();
    eval_files.sort();
    let names: Vec<&str> = eval_files.iter().map(String::as_str).collect();
    let eval_same = !names.is_empty() && same_files(&p.join("e1"), &p.join("e2"), &names)?;
    parts.push(format!(
        "byte-identical reruns: simulate {sim_same}, train {train_same}, eval {eval_same} ({} files)",
        names.len()
    ));

    let pass = shared && identity && zero_delta && sim_same && train_same && eval_same;
    Ok((pass, parts.join("; ")))
}

// ---------------------------------------------------------------- 8

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn constraint_efficacy() -> Check {
    let ds = standard_dataset(SignalModel::Hn, FadingMode::None, 18.0, vec![0], 18)?;
    let tp = ds.transmit_power().map_err(err)?;
    let mut constrained = Vec::new();
    let mut unconstrained = Vec::new();
    for seed in 0..5 {
        let mut cfg = TrainConfig::new(generator(SignalModel::Hn), ds.config.noise_power());
        cfg.epochs = 500;
        cfg.seed = 100 + seed;
        let plain = train_gan_n(&ds, &cfg).map_err(err)?;
        cfg.constraint = ConstraintKind::TransmitPower;
        cfg.constraint_target = tp;
        let held = train_energy_constrained(&ds, &cfg).map_err(err)?;
        for (out, errs) in [(&plain, &mut unconstrained), (&held, &mut constrained)] {
            let p = out.report.selected().and_then(|r| r.p_transmit_hat).ok_or("no transmit estimate")?;
            errs.push((p - tp).abs());
        }
    }
    let diffs: Vec<f64> = constrained.iter().zip(&unconstrained).map(|(c, u)| c - u).collect();
    let paired = median(diffs);
    let pass = paired <= 0.0;
    Ok((
        pass,
        format!(
            "|P_tx - {tp:.4}| at the selected checkpoint over 5 seeds: constrained {:?}, unconstrained {:?}; median paired difference {paired:.4} <= 0 (medians {:.4} vs {:.4})",
            constrained.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            unconstrained.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            median(constrained.clone()),
            median(unconstrained.clone())
        ),
    ))
}
