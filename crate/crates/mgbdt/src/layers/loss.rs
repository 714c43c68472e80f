//! Top-layer loss functions and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss applied at the output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `0.5 * ||output - target||^2`; the gradient is exactly `output - target`.
    SquaredError,
    /// Cross-entropy of the softmax over the output logits against a class index.
    SoftmaxCrossEntropy,
}

/// Target for a single sample.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Values(&'a [f64]),
    Class(usize),
}

impl Loss {
    pub fn value(&self, output: &[f64], target: Target) -> Result<f64> {
        match (self, target) {
            (Loss::SquaredError, Target::Values(y)) => {
                check_len(output, y.len())?;
                Ok(0.5
                    * output
                        .iter()
                        .zip(y)
                        .map(|(o, y)| (o - y) * (o - y))
                        .sum::<f64>())
            }
            (Loss::SoftmaxCrossEntropy, Target::Class(class)) => {
                check_class(output, class)?;
                Ok(log_sum_exp(output) - output[class])
            }
            _ => Err(Error::DimensionMismatch(
                "target kind does not match loss kind".into(),
            )),
        }
    }

    /// Gradient of the loss with respect to `output`.
    pub fn gradient(&self, output: &[f64], target: Target) -> Result<Vec<f64>> {
        match (self, target) {
            (Loss::SquaredError, Target::Values(y)) => {
                check_len(output, y.len())?;
                Ok(output.iter().zip(y).map(|(o, y)| o - y).collect())
            }
            (Loss::SoftmaxCrossEntropy, Target::Class(class)) => {
                check_class(output, class)?;
                let mut g = softmax(output);
                g[class] -= 1.0;
                Ok(g)
            }
            _ => Err(Error::DimensionMismatch(
                "target kind does not match loss kind".into(),
            )),
        }
    }
}

fn check_len(output: &[f64], expected: usize) -> Result<()> {
    if output.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "output has length {} but target has length {expected}",
            output.len()
        )));
    }
    Ok(())
}

fn check_class(output: &[f64], class: usize) -> Result<()> {
    if class >= output.len() {
        return Err(Error::DimensionMismatch(format!(
            "class index {class} out of range for {} logits",
            output.len()
        )));
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn squared_loss_values() {
        let l = Loss::SquaredError;
        assert_eq!(l.value(&[1.0, 2.0], Target::Values(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(l.value(&[1.0, 0.0], Target::Values(&[0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(
            l.gradient(&[1.0, 2.0], Target::Values(&[1.0, 2.0])).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let l = Loss::SoftmaxCrossEntropy;
        let v = l.value(&[0.0, 0.0], Target::Class(0)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let g = l.gradient(&[0.0, 0.0], Target::Class(0)).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kind_mismatch_errors() {
        assert!(Loss::SquaredError.value(&[0.0], Target::Class(0)).is_err());
        assert!(Loss::SoftmaxCrossEntropy
            .value(&[0.0, 0.0], Target::Values(&[1.0, 0.0]))
            .is_err());
        assert!(Loss::SquaredError
            .value(&[0.0, 0.0], Target::Values(&[1.0]))
            .is_err());
        assert!(Loss::SoftmaxCrossEntropy.value(&[0.0], Target::Class(3)).is_err());
    }

    /// Central finite differences, the independent check for both gradients.
    fn numeric_gradient(loss: Loss, output: &[f64], target: Target) -> Vec<f64> {
        let h = 1e-6;
        (0..output.len())
            .map(|i| {
                let mut plus = output.to_vec();
                let mut minus = output.to_vec();
                plus[i] += h;
                minus[i] -= h;
                (loss.value(&plus, target).unwrap() - loss.value(&minus, target).unwrap())
                    / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let dim = rng.random_range(2..6);
            let output: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();

            let y: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let got = Loss::SquaredError
                .gradient(&output, Target::Values(&y))
                .unwrap();
            let want = numeric_gradient(Loss::SquaredError, &output, Target::Values(&y));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-4 * w.abs().max(1e-3), "{g} vs {w}");
            }

            let class = rng.random_range(0..dim);
            let got = Loss::SoftmaxCrossEntropy
                .gradient(&output, Target::Class(class))
                .unwrap();
            let want = numeric_gradient(Loss::SoftmaxCrossEntropy, &output, Target::Class(class));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-4 * w.abs().max(1e-3), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn softmax_normalizes_and_gradient_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let dim = rng.random_range(2..8);
            let logits: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let g = Loss::SoftmaxCrossEntropy
                .gradient(&logits, Target::Class(0))
                .unwrap();
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_shift_invariant_and_tie_lowest() {
        let logits = [0.3, 1.7, 1.7, -0.2];
        assert_eq!(argmax(&logits), 1);
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.25).collect();
        assert_eq!(argmax(&shifted), argmax(&logits));
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
