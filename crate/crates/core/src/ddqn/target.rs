use crate::error::{Error, Result};
use crate::nn::{argmax, QNetwork, QValues};
use crate::pipeline::Observation;

use super::replay::Experience;

/// Anything that maps a batch of observations to Q-vectors.
pub trait QFunction {
    fn q_batch(&self, batch: &[&Observation]) -> Result<Vec<QValues>>;
}

impl QFunction for QNetwork {
    fn q_batch(&self, batch: &[&Observation]) -> Result<Vec<QValues>> {
        self.q_values_batch(batch)
    }
}

fn bootstrap_inputs<'a>(batch: &[&'a Experience]) -> (Vec<usize>, Vec<&'a Observation>) {
    batch
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.terminal)
        .map(|(i, e)| (i, &e.next_observation))
        .unzip()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("discount {gamma} outside [0, 1]")))
    }
}

/// Double-Q targets: `r + gamma * Q_target(s', argmax_a' Q_online(s', a'))`,
/// and plain `r` for terminal transitions. The online network only selects
/// the action; the target network only values it.
pub fn td_targets<O: QFunction + ?Sized, T: QFunction + ?Sized>(
    batch: &[&Experience],
    online: &O,
    target: &T,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut y: Vec<f64> = batch.iter().map(|e| e.reward).collect();
    let (idx, next) = bootstrap_inputs(batch);
    if idx.is_empty() || gamma == 0.0 {
        return Ok(y);
    }
    let q_select = online.q_batch(&next)?;
    let q_value = target.q_batch(&next)?;
    for ((&i, sel), val) in idx.iter().zip(&q_select).zip(&q_value) {
        let a = argmax(sel)?;
        y[i] += gamma * val[a.index()];
    }
    Ok(y)
}

/// Single-network DQN targets `r + gamma * max_a' Q_target(s', a')`, kept
/// for comparison.
pub fn vanilla_targets<T: QFunction + ?Sized>(batch: &[&Experience], target: &T, gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut y: Vec<f64> = batch.iter().map(|e| e.reward).collect();
    let (idx, next) = bootstrap_inputs(batch);
    if idx.is_empty() || gamma == 0.0 {
        return Ok(y);
    }
    for (&i, q) in idx.iter().zip(&target.q_batch(&next)?) {
        y[i] += gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(y)
}
