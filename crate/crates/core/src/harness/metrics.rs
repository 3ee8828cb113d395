//! Aggregation of per-trial outcomes.

use crate::detector::ErrorRates;

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// MDP at a target FAP by linear interpolation along an ROC ordered by
/// increasing threshold. The curve is closed with the all-active point
/// `(FAP 1, MDP 0)` and the all-inactive point `(FAP 0, MDP 1)`.
pub fn mdp_at_fap(roc: &[ErrorRates], target: f64) -> f64 {
    let mut prev = ErrorRates { mdp: 0.0, fap: 1.0 };
    for &cur in roc.iter().chain(std::iter::once(&ErrorRates { mdp: 1.0, fap: 0.0 })) {
        if cur.fap <= target {
            let t = (prev.fap - target) / (prev.fap - cur.fap);
            return prev.mdp + t * (cur.mdp - prev.mdp);
        }
        prev = cur;
    }
    1.0
}

/// Pointwise average of per-trial ROCs with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRoc {
    pub mdp: Vec<f64>,
    pub fap: Vec<f64>,
    pub mdp_se: Vec<f64>,
    pub fap_se: Vec<f64>,
}

impl AveragedRoc {
    pub fn from_trials(trials: &[&[ErrorRates]]) -> Self {
        let points = trials.first().map_or(0, |t| t.len());
        let mut out = Self {
            mdp: Vec::with_capacity(points),
            fap: Vec::with_capacity(points),
            mdp_se: Vec::with_capacity(points),
            fap_se: Vec::with_capacity(points),
        };
        let mut col = Vec::with_capacity(trials.len());
        for p in 0..points {
            col.clear();
            col.extend(trials.iter().map(|t| t[p].mdp));
            let (m, s) = mean_se(&col);
            out.mdp.push(m);
            out.mdp_se.push(s);
            col.clear();
            col.extend(trials.iter().map(|t| t[p].fap));
            let (m, s) = mean_se(&col);
            out.fap.push(m);
            out.fap_se.push(s);
        }
        out
    }

    pub fn rates(&self) -> Vec<ErrorRates> {
        self.mdp
            .iter()
            .zip(&self.fap)
            .map(|(&mdp, &fap)| ErrorRates { mdp, fap })
            .collect()
    }

    pub fn mdp_at_fap(&self, target: f64) -> f64 {
        mdp_at_fap(&self.rates(), target)
    }
}

/// One-sided paired z-test that `a` is smaller than `b` on average.
/// Returns `(mean difference b - a, standard error, p-value)`.
pub fn paired_one_sided(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    use statrs::distribution::{ContinuousCDF, Normal};
    let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let (mean, se) = mean_se(&diff);
    let p = if se > 0.0 {
        1.0 - Normal::new(0.0, 1.0).expect("unit normal").cdf(mean / se)
    } else if mean > 0.0 {
        0.0
    } else {
        1.0
    };
    (mean, se, p)
}
