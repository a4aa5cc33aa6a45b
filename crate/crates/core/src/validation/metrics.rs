use crate::error::{Error, Result};

fn check(obs: &[f64], pred: &[f64]) -> Result<()> {
    if obs.len() != pred.len() {
        return Err(Error::domain(format!("length mismatch: {} observations, {} predictions", obs.len(), pred.len())));
    }
    if obs.is_empty() {
        return Err(Error::insufficient("metrics need at least one pair"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check(obs, pred)?;
    Ok(obs.iter().zip(pred).map(|(o, p)| (o - p).abs()).sum::<f64>() / obs.len() as f64)
}

/// Root mean squared error.
pub fn rmse(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check(obs, pred)?;
    Ok((obs.iter().zip(pred).map(|(o, p)| (o - p).powi(2)).sum::<f64>() / obs.len() as f64).sqrt())
}
