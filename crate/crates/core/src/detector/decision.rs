//! Activity decisions and error rates.

use crate::scalar::Real;

/// `α̂_n = 1` iff `γ̂_n > threshold`.
pub fn decide_activity<T: Real>(gamma_hat: &[T], threshold: T) -> Vec<bool> {
    gamma_hat.iter().map(|&g| g > threshold).collect()
}

/// Missed-detection and false-alarm rates of one decision vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub mdp: f64,
    pub fap: f64,
}

/// `(missed actives)/K` and `(false actives)/(N-K)`; an empty class counts
/// as zero error.
pub fn error_rates(decision: &[bool], truth: &[bool]) -> ErrorRates {
    assert_eq!(decision.len(), truth.len());
    let (mut active, mut missed, mut inactive, mut false_alarms) = (0usize, 0usize, 0usize, 0usize);
    for (&d, &t) in decision.iter().zip(truth) {
        if t {
            active += 1;
            missed += usize::from(!d);
        } else {
            inactive += 1;
            false_alarms += usize::from(d);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ErrorRates {
        mdp: ratio(missed, active),
        fap: ratio(false_alarms, inactive),
    }
}

/// Error rates for every threshold of an increasing grid.
pub fn roc<T: Real>(gamma_hat: &[T], truth: &[bool], thresholds: &[T]) -> Vec<ErrorRates> {
    thresholds
        .iter()
        .map(|&t| error_rates(&decide_activity(gamma_hat, t), truth))
        .collect()
}
