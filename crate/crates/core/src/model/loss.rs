use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Bce,
    Mse,
}

fn check(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "loss inputs",
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("loss over an empty vector"));
    }
    Ok(())
}

fn clamp(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// Mean binary cross-entropy with predictions clamped to `[eps, 1 - eps]`.
pub fn bce_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check(pred, gt)?;
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = clamp(p);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// d bce / d pred, evaluated at the clamped prediction.
pub fn bce_grad(pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    check(pred, gt)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = clamp(p);
            (p - g) / (p * (1.0 - p)) / n
        })
        .collect())
}

pub fn mse_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check(pred, gt)?;
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g) * (p - g)).sum();
    Ok(sum / pred.len() as f64)
}

pub fn mse_grad(pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    check(pred, gt)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(gt).map(|(p, g)| 2.0 * (p - g) / n).collect())
}

impl LossKind {
    pub fn loss(self, pred: &[f64], gt: &[f64]) -> Result<f64> {
        match self {
            LossKind::Bce => bce_loss(pred, gt),
            LossKind::Mse => mse_loss(pred, gt),
        }
    }

    pub fn grad(self, pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
        match self {
            LossKind::Bce => bce_grad(pred, gt),
            LossKind::Mse => mse_grad(pred, gt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_values() {
        assert_abs_diff_eq!(bce_loss(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bce_loss(&[0.9], &[1.0]).unwrap(), 0.105_360_515_657_826_3, epsilon = 1e-12);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-6);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[0.5], &[0.0]).unwrap(), 0.25);
        assert_eq!(mse_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(bce_loss(&[0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn saturated_wrong_prediction_is_finite_and_still_pushes_back() {
        let l = bce_loss(&[1.0], &[0.0]).unwrap();
        assert!(l.is_finite() && l > 15.0);
        assert!(bce_grad(&[1.0], &[0.0]).unwrap()[0] > 0.0);
    }
}
