use thiserror::Error;

pub const PROB_EPS: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("label {0} outside the probability vector")]
    LabelOutOfRange(usize),
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Mean negative log-likelihood of the true class, with probabilities
/// clipped to `[1e-15, 1 - 1e-15]`.
pub fn logloss(proba: &[Vec<f64>], truth: &[usize]) -> Result<f64, MetricError> {
    if proba.len() != truth.len() {
        return Err(MetricError::LengthMismatch(proba.len(), truth.len()));
    }
    if proba.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, &y) in proba.iter().zip(truth) {
        let py = *p.get(y).ok_or(MetricError::LabelOutOfRange(y))?;
        total -= py.clamp(PROB_EPS, 1.0 - PROB_EPS).ln();
    }
    Ok(total / proba.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_accuracy() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 1]).unwrap(), 0.5);
        assert_eq!(accuracy(&[0], &[0, 1]), Err(MetricError::LengthMismatch(1, 2)));
    }

    #[test]
    fn binary_half() {
        let p = vec![vec![0.5, 0.5]; 4];
        let l = logloss(&p, &[0, 1, 1, 0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn three_class_uniform() {
        let p = vec![vec![1.0 / 3.0; 3]; 3];
        let l = logloss(&p, &[0, 1, 2]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn clipping_keeps_loss_finite() {
        let l = logloss(&[vec![1.0, 0.0]], &[1]).unwrap();
        assert!((l - (-(1e-15f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[0.0, 2f64.ln(), 0.0]);
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
        assert!((p[2] - 0.25).abs() < 1e-15);
        let u = softmax(&[1.7, 1.7, 1.7]);
        assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn argmax_ties_take_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
