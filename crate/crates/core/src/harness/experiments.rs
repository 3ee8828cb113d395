//! Seeded Monte Carlo experiments.
//!
//! Every trial owns its generators, keyed by `(masterSeed, purpose, trial)`,
//! so results do not depend on scheduling. All variants compared within a
//! trial see the same preambles, activity, channels and noise.

use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{phase1_symbol, synthesize_received, ChannelGenerator, ChannelModel, ExponentialCovarianceSpec};
use crate::detector::{
    decide_activity, error_rates, infinite_adc_detect, nsgd_detect, roc, DetectionModel, DetectionResult, ErrorRates,
    NsgdConfig,
};
use crate::error::{Error, Result};
use crate::estimator::{default_symbol, oea_estimate, pea_estimate, EstimatorConfig};
use crate::quantizer::{quantize, QuantizerCodebook};
use crate::signal_model::{
    real_expand_received, ActivityPattern, CMatrix, PreambleMatrix, RealReceivedSignal, StackedCovariance,
};

use super::config::{ExperimentConfig, ExperimentKind, KHatMode};
use super::metrics::{mdp_at_fap, mean_se, AveragedRoc};

const DRAWS: u64 = 0;
const PHASE1: u64 = 1;
const ALGORITHM: u64 = 100;
const ESTIMATOR: u64 = 200;

/// Execution options that never influence results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Generator for one `(purpose, trial)` pair.
pub fn trial_rng(master_seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial as u64);
    rng
}

fn run_trials<O, F>(trials: usize, opts: RunOptions, f: F) -> Result<Vec<O>>
where
    O: Send,
    F: Fn(usize) -> Result<O> + Sync + Send,
{
    let body = || (0..trials).into_par_iter().map(&f).collect::<Result<Vec<O>>>();
    match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(body),
        None => body(),
    }
}

/// Detection metrics of one variant aggregated over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub label: String,
    pub bits: Option<u32>,
    pub l_i: usize,
    pub l_n: usize,
    /// Thresholds in units of `β`.
    pub thresholds: Vec<f64>,
    pub roc: AveragedRoc,
    /// MDP at the target FAP on the averaged ROC.
    pub mdp_at_fap: f64,
    pub per_trial_mdp_at_fap: Vec<f64>,
    pub mdp_at_fap_se: f64,
    /// Rates at the point threshold.
    pub point: ErrorRates,
    pub iterations_mean: f64,
    pub converged_fraction: f64,
    pub k_hat_mean: f64,
    pub e_k: f64,
}

/// `E|K - K̂⁽ⁱ⁾|` per estimation step.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSummary {
    pub method: &'static str,
    pub channel: ChannelModel,
    pub k0: f64,
    /// Step indices the errors refer to.
    pub steps: Vec<usize>,
    pub e_k: Vec<f64>,
    pub e_k_se: Vec<f64>,
    pub k_hat_mean: Vec<f64>,
    pub iterations_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub bits: Option<u32>,
    pub per_trial_iterations: Vec<usize>,
    pub iterations_mean: f64,
    pub iterations_se: f64,
    pub converged_fraction: f64,
    /// Mean `δ` per iteration; finished runs contribute zero.
    pub delta_mean: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub config: ExperimentConfig,
    pub detection: Vec<VariantSummary>,
    pub estimation: Vec<EstimationSummary>,
    pub convergence: Vec<ConvergenceSummary>,
    pub elapsed: Duration,
}

impl MetricsRecord {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            detection: Vec::new(),
            estimation: Vec::new(),
            convergence: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn variant(&self, label: &str, bits: Option<u32>) -> Option<&VariantSummary> {
        self.detection.iter().find(|v| v.label == label && v.bits == bits)
    }
}

impl std::fmt::Display for MetricsRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = &self.config;
        writeln!(f, "{} trials={} seed={} elapsed={:.1?}", c.experiment.name(), c.trials, c.master_seed, self.elapsed)?;
        for v in &self.detection {
            writeln!(
                f,
                "  {:<12} B={:<3} L_I={:<3} MDP@FAP={}: {:.4} (se {:.4})  iterations {:.1}  K_hat {:.2}",
                v.label,
                super::config::bits_label(v.bits),
                v.l_i,
                c.fap_target,
                v.mdp_at_fap,
                v.mdp_at_fap_se,
                v.iterations_mean,
                v.k_hat_mean
            )?;
        }
        for e in &self.estimation {
            let steps: Vec<String> = e.e_k.iter().map(|v| format!("{v:.2}")).collect();
            writeln!(
                f,
                "  {} {} K0={}: E_K = {}",
                e.method,
                super::config::channel_label(&e.channel),
                e.k0,
                steps.join(" ")
            )?;
        }
        for s in &self.convergence {
            writeln!(
                f,
                "  B={:<3} iterations {:.1} (se {:.1})  converged {:.2}",
                super::config::bits_label(s.bits),
                s.iterations_mean,
                s.iterations_se,
                s.converged_fraction
            )?;
        }
        Ok(())
    }
}

/// Runs the experiment selected by `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<MetricsRecord> {
    match cfg.experiment {
        ExperimentKind::Detect => run_detection_experiment(cfg, opts),
        ExperimentKind::Protocol => run_protocol_experiment(cfg, opts),
        ExperimentKind::EstimateK => run_kestimation_experiment(cfg, opts),
        ExperimentKind::Converge => run_convergence_experiment(cfg, opts),
    }
}

/// One trial's draws for Phase II over `len` preamble symbols.
struct World {
    s: PreambleMatrix<f64>,
    pattern: ActivityPattern,
    h: CMatrix<f64>,
    y: CMatrix<f64>,
}

impl World {
    fn draw(cfg: &ExperimentConfig, len: usize, trial: usize) -> Result<Self> {
        let mut rng = trial_rng(cfg.master_seed, trial, DRAWS);
        let s = PreambleMatrix::generate(len, cfg.n, &mut rng)?;
        let pattern = crate::channel::draw_activity(cfg.n, cfg.k, &mut rng)?;
        let h = ChannelGenerator::new(cfg.channel, cfg.m)?.draw(cfg.n, &mut rng);
        let (y, _) = synthesize_received(&s, &pattern, cfg.beta, &h, cfg.sigma2, &mut rng)?;
        Ok(Self { s, pattern, h, y })
    }

    /// Preamble and stacked observation restricted to the first `rows` symbols.
    fn leading(&self, rows: usize) -> Result<(PreambleMatrix<f64>, RealReceivedSignal<f64>)> {
        let s = PreambleMatrix::from_entries(CMatrix::from_fn(rows, self.s.devices(), |r, c| self.s.entry(r, c)))?;
        let y = CMatrix::from_fn(rows, self.y.cols(), |r, c| self.y.get(r, c));
        Ok((s, real_expand_received(&y)))
    }

    fn aggregate(&self) -> Vec<Complex<f64>> {
        crate::channel::aggregate_channel(&self.pattern, &self.h)
    }
}

fn stacked_covariance(cfg: &ExperimentConfig) -> Result<StackedCovariance<f64>> {
    match cfg.channel {
        ChannelModel::Iid => Ok(StackedCovariance::iid(cfg.m, cfg.n)),
        ChannelModel::Exponential { c } => {
            let cn = ExponentialCovarianceSpec::new(c, cfg.m)?.matrix::<f64>();
            StackedCovariance::from_device_covariances(&vec![cn; cfg.n])
        }
    }
}

fn nsgd_config(cfg: &ExperimentConfig) -> NsgdConfig {
    NsgdConfig {
        max_iterations: cfg.max_iterations(),
        ..NsgdConfig::with_epsilon(cfg.epsilon)
    }
}

fn baseline_config(cfg: &ExperimentConfig) -> NsgdConfig {
    NsgdConfig {
        max_iterations: cfg.max_iterations(),
        ..NsgdConfig::with_epsilon(cfg.baseline_epsilon)
    }
}

fn detect(
    cfg: &ExperimentConfig,
    model: &DetectionModel<f64>,
    ybar: &[f64],
    bits: Option<u32>,
    k_hat: f64,
    rng: &mut ChaCha8Rng,
    record_path: bool,
) -> Result<DetectionResult<f64>> {
    match bits {
        Some(_) => {
            let cb = QuantizerCodebook::design(k_hat.max(0.0), cfg.beta, cfg.sigma2, cfg.rho, bits)?;
            let y_q = quantize(ybar, &cb);
            let nc = NsgdConfig {
                record_path,
                ..nsgd_config(cfg)
            };
            nsgd_detect(&y_q, &cb, model, &nc, rng)
        }
        None => {
            let bc = NsgdConfig {
                record_path,
                ..baseline_config(cfg)
            };
            infinite_adc_detect(ybar, model, &bc, None)
        }
    }
}

fn estimator_config(cfg: &ExperimentConfig, k0: f64, bits: Option<u32>) -> EstimatorConfig {
    EstimatorConfig::new(cfg.n, k0, cfg.beta, cfg.sigma2, cfg.rho, bits)
}

/// Phase I signals for `steps` symbols over the aggregate channel `g`,
/// drawn from the trial's Phase I stream.
fn phase1_signals(cfg: &ExperimentConfig, g: &[Complex<f64>], steps: usize, trial: usize) -> Vec<RealReceivedSignal<f64>> {
    let mut rng = trial_rng(cfg.master_seed, trial, PHASE1);
    (0..steps)
        .map(|_| phase1_symbol(default_symbol(), g, cfg.beta, cfg.sigma2, &mut rng))
        .collect()
}

/// `K̂` for `mode`; estimator randomness comes from `alg_purpose`.
fn k_hat_for(
    cfg: &ExperimentConfig,
    mode: KHatMode,
    bits: Option<u32>,
    g: &[Complex<f64>],
    trial: usize,
    alg_purpose: u64,
) -> Result<(f64, Vec<f64>)> {
    let k0 = cfg.k0[0];
    match mode {
        KHatMode::Truth => Ok((cfg.k as f64, Vec::new())),
        KHatMode::Fixed(v) => Ok((v, Vec::new())),
        _ if cfg.l_n == 0 => Ok((k0, vec![k0])),
        KHatMode::Oea => {
            let signals = phase1_signals(cfg, g, cfg.l_n, trial);
            let symbols = vec![default_symbol(); cfg.l_n];
            let mut rng = trial_rng(cfg.master_seed, trial, alg_purpose);
            let k = oea_estimate(&signals, &symbols, &estimator_config(cfg, k0, bits), &mut rng)?;
            Ok((k, vec![k0, k]))
        }
        KHatMode::Pea => {
            let signals = phase1_signals(cfg, g, cfg.l_n, trial);
            let mut rng = trial_rng(cfg.master_seed, trial, alg_purpose);
            let trace = pea_estimate(
                cfg.l_n,
                default_symbol(),
                cfg.m,
                &estimator_config(cfg, k0, bits),
                |i, _: &mut ChaCha8Rng| signals[i].clone(),
                &mut rng,
            )?;
            Ok((trace.final_estimate(), trace.k_hats))
        }
    }
}

#[derive(Debug, Clone)]
struct DetectTrial {
    roc: Vec<ErrorRates>,
    point: ErrorRates,
    mdp_at_fap: f64,
    iterations: usize,
    converged: bool,
    k_hat: f64,
}

fn score(cfg: &ExperimentConfig, res: &DetectionResult<f64>, truth: &ActivityPattern, k_hat: f64) -> DetectTrial {
    let thresholds: Vec<f64> = cfg.threshold_grid.iter().map(|t| t * cfg.beta).collect();
    let curve = roc(&res.gamma_hat, truth.as_slice(), &thresholds);
    let point = error_rates(
        &decide_activity(&res.gamma_hat, cfg.threshold * cfg.beta),
        truth.as_slice(),
    );
    DetectTrial {
        mdp_at_fap: mdp_at_fap(&curve, cfg.fap_target),
        roc: curve,
        point,
        iterations: res.iterations,
        converged: res.converged,
        k_hat,
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    label: String,
    bits: Option<u32>,
    l_i: usize,
    l_n: usize,
    trials: &[&DetectTrial],
) -> VariantSummary {
    let curves: Vec<&[ErrorRates]> = trials.iter().map(|t| t.roc.as_slice()).collect();
    let roc = AveragedRoc::from_trials(&curves);
    let per_trial: Vec<f64> = trials.iter().map(|t| t.mdp_at_fap).collect();
    let (_, mdp_se) = mean_se(&per_trial);
    let count = trials.len() as f64;
    let mean = |f: &dyn Fn(&DetectTrial) -> f64| trials.iter().map(|t| f(t)).sum::<f64>() / count;
    VariantSummary {
        label,
        bits,
        l_i,
        l_n,
        thresholds: cfg.threshold_grid.clone(),
        mdp_at_fap: roc.mdp_at_fap(cfg.fap_target),
        roc,
        per_trial_mdp_at_fap: per_trial,
        mdp_at_fap_se: mdp_se,
        point: ErrorRates {
            mdp: mean(&|t| t.point.mdp),
            fap: mean(&|t| t.point.fap),
        },
        iterations_mean: mean(&|t| t.iterations as f64),
        converged_fraction: mean(&|t| f64::from(u8::from(t.converged))),
        k_hat_mean: mean(&|t| t.k_hat),
        e_k: mean(&|t| (t.k_hat - cfg.k as f64).abs()),
    }
}

/// NSGD (or the baseline for `B = inf`) for every resolution and `K̂` mode.
pub fn run_detection_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<MetricsRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let cov = stacked_covariance(cfg)?;
    let variants: Vec<(usize, Option<u32>, KHatMode)> = cfg
        .bits
        .iter()
        .enumerate()
        .flat_map(|(bi, &b)| cfg.k_hat_modes.iter().map(move |&m| (bi, b, m)))
        .collect();
    let per_trial = run_trials(cfg.trials, opts, |trial| {
        let world = World::draw(cfg, cfg.l_i, trial)?;
        let (s, ybar) = world.leading(cfg.l_i)?;
        let model = DetectionModel::new(s.real_expansion(), cov.clone(), cfg.sigma2)?;
        let g = world.aggregate();
        variants
            .iter()
            .enumerate()
            .map(|(vi, &(bi, bits, mode))| {
                let (k_hat, _) = k_hat_for(cfg, mode, bits, &g, trial, ESTIMATOR + vi as u64)?;
                let mut rng = trial_rng(cfg.master_seed, trial, ALGORITHM + bi as u64);
                let res = detect(cfg, &model, ybar.as_slice(), bits, k_hat, &mut rng, false)?;
                Ok(score(cfg, &res, &world.pattern, k_hat))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut record = MetricsRecord::new(cfg);
    for (vi, &(_, bits, mode)) in variants.iter().enumerate() {
        let trials: Vec<&DetectTrial> = per_trial.iter().map(|t| &t[vi]).collect();
        record
            .detection
            .push(summarize(cfg, mode.label(), bits, cfg.l_i, cfg.l_n, &trials));
    }
    record.elapsed = start.elapsed();
    Ok(record)
}

/// Two-phase protocol against the two benchmarks at equal total length
/// `L = L_N + L_I`: `protocol` (PEA from `K0`, then `L_I` symbols),
/// `benchmark1` (`K̂ = K`, all `L`) and `benchmark2` (`K̂ = 1`, all `L`).
pub fn run_protocol_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<MetricsRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let cov = stacked_covariance(cfg)?;
    let total = cfg.total_len();
    let per_trial = run_trials(cfg.trials, opts, |trial| {
        let world = World::draw(cfg, total, trial)?;
        let (s_full, y_full) = world.leading(total)?;
        let (s_short, y_short) = world.leading(cfg.l_i)?;
        let full = DetectionModel::new(s_full.real_expansion(), cov.clone(), cfg.sigma2)?;
        let short = DetectionModel::new(s_short.real_expansion(), cov.clone(), cfg.sigma2)?;
        let g = world.aggregate();
        let mut out = Vec::with_capacity(3 * cfg.bits.len());
        for (bi, &bits) in cfg.bits.iter().enumerate() {
            let (k_pea, _) = k_hat_for(cfg, KHatMode::Pea, bits, &g, trial, ESTIMATOR + bi as u64)?;
            let runs = [
                (&short, y_short.as_slice(), k_pea),
                (&full, y_full.as_slice(), cfg.k as f64),
                (&full, y_full.as_slice(), 1.0),
            ];
            for (model, ybar, k_hat) in runs {
                let mut rng = trial_rng(cfg.master_seed, trial, ALGORITHM + bi as u64);
                let res = detect(cfg, model, ybar, bits, k_hat, &mut rng, false)?;
                out.push(score(cfg, &res, &world.pattern, k_hat));
            }
        }
        Ok(out)
    })?;
    let mut record = MetricsRecord::new(cfg);
    for (bi, &bits) in cfg.bits.iter().enumerate() {
        let roles = [
            ("protocol", cfg.l_i, cfg.l_n),
            ("benchmark1", total, 0),
            ("benchmark2", total, 0),
        ];
        for (ri, (label, l_i, l_n)) in roles.into_iter().enumerate() {
            let trials: Vec<&DetectTrial> = per_trial.iter().map(|t| &t[3 * bi + ri]).collect();
            record
                .detection
                .push(summarize(cfg, label.to_string(), bits, l_i, l_n, &trials));
        }
    }
    record.elapsed = start.elapsed();
    Ok(record)
}

#[derive(Debug, Clone)]
struct EstimateTrial {
    k_hats: Vec<f64>,
    iterations: Vec<usize>,
    oea: f64,
}

/// PEA traces and the OEA result for every `K̂⁽⁰⁾` and channel model, using
/// `B = cfg.bits[0]` and `L_N` Phase I symbols.
pub fn run_kestimation_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<MetricsRecord> {
    cfg.validate()?;
    if cfg.l_n == 0 {
        return Err(Error::Config("L_N: estimate-k needs at least one symbol".into()));
    }
    let start = Instant::now();
    let bits = cfg.bits[0];
    let channels: Vec<ChannelModel> = std::iter::once(cfg.channel).chain(cfg.compare_channel).collect();
    let generators = channels
        .iter()
        .map(|&c| ChannelGenerator::<f64>::new(c, cfg.m))
        .collect::<Result<Vec<_>>>()?;
    let per_trial = run_trials(cfg.trials, opts, |trial| {
        let mut out = Vec::with_capacity(channels.len() * cfg.k0.len());
        for generator in &generators {
            // Same white draws for every channel model.
            let mut rng = trial_rng(cfg.master_seed, trial, DRAWS);
            let mut g = vec![Complex::new(0.0, 0.0); cfg.m];
            for _ in 0..cfg.k {
                for (acc, h) in g.iter_mut().zip(generator.draw_vector(&mut rng)) {
                    *acc += h;
                }
            }
            let signals = phase1_signals(cfg, &g, cfg.l_n, trial);
            for (ji, &k0) in cfg.k0.iter().enumerate() {
                let ecfg = estimator_config(cfg, k0, bits);
                let mut rng = trial_rng(cfg.master_seed, trial, ESTIMATOR + ji as u64);
                let trace = pea_estimate(
                    cfg.l_n,
                    default_symbol(),
                    cfg.m,
                    &ecfg,
                    |i, _: &mut ChaCha8Rng| signals[i].clone(),
                    &mut rng,
                )?;
                let symbols = vec![default_symbol(); cfg.l_n];
                let oea = oea_estimate(&signals, &symbols, &ecfg, &mut rng)?;
                out.push(EstimateTrial {
                    k_hats: trace.k_hats,
                    iterations: trace.per_step_iterations,
                    oea,
                });
            }
        }
        Ok(out)
    })?;
    let mut record = MetricsRecord::new(cfg);
    let k = cfg.k as f64;
    for (ci, &channel) in channels.iter().enumerate() {
        for (ji, &k0) in cfg.k0.iter().enumerate() {
            let idx = ci * cfg.k0.len() + ji;
            let trials: Vec<&EstimateTrial> = per_trial.iter().map(|t| &t[idx]).collect();
            let mut pea = EstimationSummary {
                method: "pea",
                channel,
                k0,
                steps: (0..=cfg.l_n).collect(),
                e_k: Vec::new(),
                e_k_se: Vec::new(),
                k_hat_mean: Vec::new(),
                iterations_mean: Vec::new(),
            };
            for step in 0..=cfg.l_n {
                let errs: Vec<f64> = trials.iter().map(|t| (t.k_hats[step] - k).abs()).collect();
                let (m, se) = mean_se(&errs);
                pea.e_k.push(m);
                pea.e_k_se.push(se);
                pea.k_hat_mean
                    .push(trials.iter().map(|t| t.k_hats[step]).sum::<f64>() / trials.len() as f64);
                pea.iterations_mean.push(if step == 0 {
                    0.0
                } else {
                    trials.iter().map(|t| t.iterations[step - 1] as f64).sum::<f64>() / trials.len() as f64
                });
            }
            let errs: Vec<f64> = trials.iter().map(|t| (t.oea - k).abs()).collect();
            let (m, se) = mean_se(&errs);
            let oea = EstimationSummary {
                method: "oea",
                channel,
                k0,
                steps: vec![0, cfg.l_n],
                e_k: vec![(k0 - k).abs(), m],
                e_k_se: vec![0.0, se],
                k_hat_mean: vec![k0, trials.iter().map(|t| t.oea).sum::<f64>() / trials.len() as f64],
                iterations_mean: vec![0.0, f64::NAN],
            };
            record.estimation.push(pea);
            record.estimation.push(oea);
        }
    }
    record.elapsed = start.elapsed();
    Ok(record)
}

/// `δ_i = ‖γ⁽ⁱ⁾ - γ*‖₁ / N` traces with `K̂ = K` for every resolution.
pub fn run_convergence_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<MetricsRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let cov = stacked_covariance(cfg)?;
    let per_trial = run_trials(cfg.trials, opts, |trial| {
        let world = World::draw(cfg, cfg.l_i, trial)?;
        let (s, ybar) = world.leading(cfg.l_i)?;
        let model = DetectionModel::new(s.real_expansion(), cov.clone(), cfg.sigma2)?;
        cfg.bits
            .iter()
            .enumerate()
            .map(|(bi, &bits)| {
                let mut rng = trial_rng(cfg.master_seed, trial, ALGORITHM + bi as u64);
                let res = detect(cfg, &model, ybar.as_slice(), bits, cfg.k as f64, &mut rng, true)?;
                let delta = res.delta_trace(None).expect("path recorded");
                Ok((res.iterations, res.converged, delta))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut record = MetricsRecord::new(cfg);
    for (bi, &bits) in cfg.bits.iter().enumerate() {
        let runs: Vec<&(usize, bool, Vec<f64>)> = per_trial.iter().map(|t| &t[bi]).collect();
        let iters: Vec<usize> = runs.iter().map(|r| r.0).collect();
        let as_f: Vec<f64> = iters.iter().map(|&i| i as f64).collect();
        let (mean, se) = mean_se(&as_f);
        let longest = iters.iter().copied().max().unwrap_or(0);
        let mut delta_mean = vec![0.0; longest];
        for r in &runs {
            for (acc, d) in delta_mean.iter_mut().zip(&r.2) {
                *acc += d;
            }
        }
        let count = runs.len() as f64;
        delta_mean.iter_mut().for_each(|d| *d /= count);
        record.convergence.push(ConvergenceSummary {
            bits,
            per_trial_iterations: iters,
            iterations_mean: mean,
            iterations_se: se,
            converged_fraction: runs.iter().filter(|r| r.1).count() as f64 / count,
            delta_mean,
        });
    }
    record.elapsed = start.elapsed();
    Ok(record)
}
