//! CSV emission. The configuration is written first as `# key = value`
//! comment lines so a file can be fed back through
//! [`ExperimentConfig::from_csv_header`].

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::{bits_label, channel_label};
use super::experiments::MetricsRecord;

pub const COLUMNS: [&str; 17] = [
    "experiment",
    "B",
    "N",
    "K",
    "M",
    "L_I",
    "L_N",
    "epsilon",
    "threshold_or_step",
    "mdp",
    "fap",
    "mdp_se",
    "fap_se",
    "e_k",
    "iterations_mean",
    "seed",
    "delta",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

struct Row<'a> {
    experiment: String,
    bits: Option<u32>,
    l_i: usize,
    l_n: usize,
    epsilon: f64,
    x: String,
    mdp: f64,
    fap: f64,
    mdp_se: f64,
    fap_se: f64,
    e_k: f64,
    iterations_mean: f64,
    delta: f64,
    record: &'a MetricsRecord,
}

impl Row<'_> {
    fn write(&self, out: &mut String) {
        let c = &self.record.config;
        let fields = [
            self.experiment.clone(),
            bits_label(self.bits),
            c.n.to_string(),
            c.k.to_string(),
            c.m.to_string(),
            self.l_i.to_string(),
            self.l_n.to_string(),
            num(self.epsilon),
            self.x.clone(),
            num(self.mdp),
            num(self.fap),
            num(self.mdp_se),
            num(self.fap_se),
            num(self.e_k),
            num(self.iterations_mean),
            c.master_seed.to_string(),
            num(self.delta),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
}

/// Renders the record. Wall-clock time is left out so identical
/// configurations give identical bytes.
pub fn csv_string(record: &MetricsRecord) -> String {
    let c = &record.config;
    let mut out = String::new();
    for line in c.to_string().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    let kind = c.experiment.name();
    let eps = |bits: Option<u32>| if bits.is_some() { c.epsilon } else { c.baseline_epsilon };
    let blank = |experiment: String, bits, l_i, l_n, epsilon, x: String| Row {
        experiment,
        bits,
        l_i,
        l_n,
        epsilon,
        x,
        mdp: f64::NAN,
        fap: f64::NAN,
        mdp_se: f64::NAN,
        fap_se: f64::NAN,
        e_k: f64::NAN,
        iterations_mean: f64::NAN,
        delta: f64::NAN,
        record,
    };

    for v in &record.detection {
        let name = format!("{kind}/{}", v.label);
        for (i, t) in v.thresholds.iter().enumerate() {
            Row {
                mdp: v.roc.mdp[i],
                fap: v.roc.fap[i],
                mdp_se: v.roc.mdp_se[i],
                fap_se: v.roc.fap_se[i],
                e_k: v.e_k,
                iterations_mean: v.iterations_mean,
                ..blank(name.clone(), v.bits, v.l_i, v.l_n, eps(v.bits), num(*t))
            }
            .write(&mut out);
        }
        Row {
            mdp: v.mdp_at_fap,
            fap: c.fap_target,
            mdp_se: v.mdp_at_fap_se,
            e_k: v.e_k,
            iterations_mean: v.iterations_mean,
            ..blank(format!("{name}/at-fap"), v.bits, v.l_i, v.l_n, eps(v.bits), String::new())
        }
        .write(&mut out);
    }

    let bits = c.bits[0];
    for e in &record.estimation {
        let name = format!("{kind}/{}/{}/k0={}", e.method, channel_label(&e.channel), e.k0);
        for (i, step) in e.steps.iter().enumerate() {
            Row {
                e_k: e.e_k[i],
                iterations_mean: e.iterations_mean[i],
                ..blank(name.clone(), bits, 0, c.l_n, c.epsilon, step.to_string())
            }
            .write(&mut out);
        }
    }

    for s in &record.convergence {
        for (i, d) in s.delta_mean.iter().enumerate() {
            Row {
                iterations_mean: s.iterations_mean,
                delta: *d,
                ..blank(kind.to_string(), s.bits, c.l_i, c.l_n, eps(s.bits), (i + 1).to_string())
            }
            .write(&mut out);
        }
    }
    out
}

pub fn emit_csv(record: &MetricsRecord, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, csv_string(record)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
