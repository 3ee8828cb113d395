//! Experiment configuration: a flat `key = value` text format.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Detect,
    Protocol,
    EstimateK,
    Converge,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Detect => "detect",
            Self::Protocol => "protocol",
            Self::EstimateK => "estimate-k",
            Self::Converge => "converge",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "detect" => Ok(Self::Detect),
            "protocol" => Ok(Self::Protocol),
            "estimate-k" => Ok(Self::EstimateK),
            "converge" => Ok(Self::Converge),
            _ => Err(format!("unknown experiment `{s}`")),
        }
    }
}

/// How the detector obtains `K̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KHatMode {
    Truth,
    Fixed(f64),
    Oea,
    Pea,
}

impl KHatMode {
    pub fn label(&self) -> String {
        match self {
            Self::Truth => "truth".into(),
            Self::Fixed(v) => format!("fixed:{v}"),
            Self::Oea => "oea".into(),
            Self::Pea => "pea".into(),
        }
    }
}

impl FromStr for KHatMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "truth" => Ok(Self::Truth),
            "oea" => Ok(Self::Oea),
            "pea" => Ok(Self::Pea),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => v
                    .parse()
                    .map(Self::Fixed)
                    .map_err(|_| format!("bad fixed value `{v}`")),
                None => Err(format!("unknown mode `{s}`")),
            },
        }
    }
}

fn parse_resolution(s: &str) -> std::result::Result<Option<u32>, String> {
    if s == "inf" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("bad resolution `{s}`"))
}

pub(crate) fn bits_label(b: Option<u32>) -> String {
    b.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

fn parse_channel(s: &str) -> std::result::Result<ChannelModel, String> {
    if s == "iid" {
        return Ok(ChannelModel::Iid);
    }
    match s.strip_prefix("exponential:") {
        Some(c) => c
            .parse::<Complex64>()
            .map(|c| ChannelModel::Exponential { c })
            .map_err(|_| format!("bad correlation `{c}`")),
        None => Err(format!("unknown channel model `{s}`")),
    }
}

pub(crate) fn channel_label(c: &ChannelModel) -> String {
    match c {
        ChannelModel::Iid => "iid".into(),
        ChannelModel::Exponential { c } if c.im == 0.0 => format!("exponential:{}", c.re),
        ChannelModel::Exponential { c } => format!("exponential:{c}"),
    }
}

/// Threshold grid in units of `β`: `start:step:stop` or a comma list.
fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
            .collect::<std::result::Result<_, _>>()?;
        let (start, step, stop) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err("grid needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| snap(start + i as f64 * step)).collect());
    }
    parse_list(s, |p| p.parse::<f64>().map_err(|_| format!("bad number `{p}`")))
}

/// Drops accumulated binary rounding so grids print as typed.
fn snap(v: f64) -> f64 {
    format!("{v:.12}").parse().unwrap_or(v)
}

/// `start:step:stop` when that reproduces the grid exactly.
fn grid_label(g: &[f64]) -> String {
    if g.len() >= 3 {
        let compact = format!("{}:{}:{}", g[0], snap(g[1] - g[0]), g[g.len() - 1]);
        if parse_grid(&compact).as_deref() == Ok(g) {
            return compact;
        }
    }
    join(g, f64::to_string)
}

fn parse_list<V>(s: &str, f: impl Fn(&str) -> std::result::Result<V, String>) -> std::result::Result<Vec<V>, String> {
    s.split(',').map(|p| f(p.trim())).collect()
}

fn join<V>(v: &[V], f: impl Fn(&V) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l_i: usize,
    pub l_n: usize,
    /// Resolutions to compare; `None` is the infinite-resolution baseline.
    pub bits: Vec<Option<u32>>,
    pub rho: f64,
    pub epsilon: f64,
    /// Overrides `10 ⌈1/ε⌉`.
    pub max_iterations: Option<usize>,
    /// Stopping tolerance of the infinite-resolution baseline.
    pub baseline_epsilon: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub channel: ChannelModel,
    /// Extra channel model for `estimate-k` robustness runs.
    pub compare_channel: Option<ChannelModel>,
    pub k_hat_modes: Vec<KHatMode>,
    /// Phase I initial guesses `K̂⁽⁰⁾`.
    pub k0: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Decision thresholds in units of `β`, strictly increasing.
    pub threshold_grid: Vec<f64>,
    pub fap_target: f64,
    /// Activity threshold for point metrics, in units of `β`.
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lp = crate::channel::link_budget_to_params(&crate::channel::LinkBudget::default())
            .expect("default link budget is valid");
        Self {
            experiment: ExperimentKind::Detect,
            n: 100,
            k: 10,
            m: 32,
            l_i: 13,
            l_n: 0,
            bits: vec![Some(4)],
            rho: 2.0,
            epsilon: 1e-3,
            max_iterations: None,
            baseline_epsilon: 1e-6,
            beta: lp.beta,
            sigma2: lp.sigma2,
            channel: ChannelModel::Iid,
            compare_channel: None,
            k_hat_modes: vec![KHatMode::Truth],
            k0: vec![1.0],
            trials: 100,
            master_seed: 1,
            threshold_grid: parse_grid("0:0.01:4").expect("valid grid"),
            fap_target: 0.1,
            threshold: 0.5,
        }
    }
}

const KEYS: &[&str] = &[
    "experiment",
    "N",
    "K",
    "M",
    "L_I",
    "L_N",
    "B",
    "rho",
    "epsilon",
    "maxIterations",
    "baselineEpsilon",
    "beta",
    "sigma2",
    "channelModel",
    "compareChannelModel",
    "kHatMode",
    "K0",
    "trials",
    "masterSeed",
    "thresholdGrid",
    "fapTarget",
    "threshold",
];

impl ExperimentConfig {
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    /// Sets one field from its textual value. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |reason: String| Error::Config(format!("{key}: {reason}"));
        fn num<V: FromStr>(v: &str) -> std::result::Result<V, String> {
            v.parse().map_err(|_| format!("malformed number `{v}`"))
        }
        match key {
            "experiment" => self.experiment = value.parse().map_err(bad)?,
            "N" => self.n = num(value).map_err(bad)?,
            "K" => self.k = num(value).map_err(bad)?,
            "M" => self.m = num(value).map_err(bad)?,
            "L_I" => self.l_i = num(value).map_err(bad)?,
            "L_N" => self.l_n = num(value).map_err(bad)?,
            "B" => self.bits = parse_list(value, parse_resolution).map_err(bad)?,
            "rho" => self.rho = num(value).map_err(bad)?,
            "epsilon" => self.epsilon = num(value).map_err(bad)?,
            "maxIterations" => {
                self.max_iterations = if value == "auto" { None } else { Some(num(value).map_err(bad)?) }
            }
            "baselineEpsilon" => self.baseline_epsilon = num(value).map_err(bad)?,
            "beta" => self.beta = num(value).map_err(bad)?,
            "sigma2" => self.sigma2 = num(value).map_err(bad)?,
            "channelModel" => self.channel = parse_channel(value).map_err(bad)?,
            "compareChannelModel" => {
                self.compare_channel = if value == "none" { None } else { Some(parse_channel(value).map_err(bad)?) }
            }
            "kHatMode" => self.k_hat_modes = parse_list(value, |s| s.parse()).map_err(bad)?,
            "K0" => self.k0 = parse_list(value, num).map_err(bad)?,
            "trials" => self.trials = num(value).map_err(bad)?,
            "masterSeed" => self.master_seed = num(value).map_err(bad)?,
            "thresholdGrid" => self.threshold_grid = parse_grid(value).map_err(bad)?,
            "fapTarget" => self.fap_target = num(value).map_err(bad)?,
            "threshold" => self.threshold = num(value).map_err(bad)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Recovers a configuration from the `# key = value` preamble of a CSV.
    pub fn from_csv_header(text: &str) -> Result<Self> {
        let body: String = text
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::parse(&body)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: &str| Err(Error::Config(format!("{key}: {reason}")));
        if self.n == 0 || self.m == 0 || self.trials == 0 {
            return fail("N/M/trials", "must be positive");
        }
        if self.k > self.n {
            return fail("K", "must not exceed N");
        }
        if self.l_i == 0 {
            return fail("L_I", "must be positive");
        }
        if self.bits.is_empty() {
            return fail("B", "at least one resolution is required");
        }
        if self.bits.iter().flatten().any(|&b| b == 0 || b > crate::quantizer::MAX_BITS) {
            return fail("B", "bits must lie in 1..=24");
        }
        if !(self.rho > 0.0) {
            return fail("rho", "must be positive");
        }
        if !(self.epsilon > 0.0) || !(self.baseline_epsilon > 0.0) {
            return fail("epsilon", "must be positive");
        }
        if self.max_iterations == Some(0) {
            return fail("maxIterations", "must be at least 1");
        }
        if !(self.beta > 0.0) || !(self.sigma2 > 0.0) {
            return fail("beta/sigma2", "must be positive");
        }
        if self.k_hat_modes.is_empty() {
            return fail("kHatMode", "at least one mode is required");
        }
        if self.k0.iter().any(|&v| !(v >= 0.0 && v <= self.n as f64)) {
            return fail("K0", "initial guesses must lie in [0, N]");
        }
        if self.threshold_grid.is_empty() || self.threshold_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return fail("thresholdGrid", "must be strictly increasing");
        }
        if !(self.fap_target > 0.0 && self.fap_target < 1.0) {
            return fail("fapTarget", "must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
            .unwrap_or_else(|| crate::detector::nsgd::default_max_iterations(self.epsilon))
    }

    /// Total preamble length `L = L_N + L_I`.
    pub fn total_len(&self) -> usize {
        self.l_n + self.l_i
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "experiment" => self.experiment.name().into(),
            "N" => self.n.to_string(),
            "K" => self.k.to_string(),
            "M" => self.m.to_string(),
            "L_I" => self.l_i.to_string(),
            "L_N" => self.l_n.to_string(),
            "B" => join(&self.bits, |b| bits_label(*b)),
            "rho" => self.rho.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "maxIterations" => self.max_iterations.map_or("auto".into(), |v| v.to_string()),
            "baselineEpsilon" => self.baseline_epsilon.to_string(),
            "beta" => self.beta.to_string(),
            "sigma2" => self.sigma2.to_string(),
            "channelModel" => channel_label(&self.channel),
            "compareChannelModel" => self.compare_channel.as_ref().map_or("none".into(), channel_label),
            "kHatMode" => join(&self.k_hat_modes, KHatMode::label),
            "K0" => join(&self.k0, f64::to_string),
            "trials" => self.trials.to_string(),
            "masterSeed" => self.master_seed.to_string(),
            "thresholdGrid" => grid_label(&self.threshold_grid),
            "fapTarget" => self.fap_target.to_string(),
            "threshold" => self.threshold.to_string(),
            _ => unreachable!("every key is listed"),
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in KEYS {
            writeln!(f, "{key} = {}", self.value_of(key))?;
        }
        Ok(())
    }
}
