use crate::error::{Error, Result};
use crate::signal::DiscreteSignal;

/// Root relative squared error against the elementwise mean target of the set.
pub fn rse(predictions: &[DiscreteSignal], targets: &[DiscreteSignal]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let size = targets[0].values().len();
    if targets
        .iter()
        .chain(predictions)
        .any(|s| s.values().len() != size || s.channels() != targets[0].channels())
    {
        return Err(Error::shape("predictions and targets differ in shape"));
    }
    let mut mean = vec![0.0; size];
    for y in targets {
        for (m, v) in mean.iter_mut().zip(y.values()) {
            *m += v;
        }
    }
    let n = targets.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, y) in predictions.iter().zip(targets) {
        for ((a, b), m) in p.values().iter().zip(y.values()).zip(&mean) {
            num += (b - a) * (b - a);
            den += (b - m) * (b - m);
        }
    }
    if den == 0.0 {
        return Err(Error::ConstantTargets);
    }
    Ok((num / den).sqrt())
}
