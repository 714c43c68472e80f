//! Linear softmax classifier used as the top layer in classification mode.
//!
//! Deliberately minimal: zero-initialized weights, full-batch gradient
//! descent with a fixed step size on the mean cross-entropy. The layer below
//! receives the gradient of that loss with respect to its own output, so no
//! inverse mapping is ever trained for this layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::loss::{argmax, softmax};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `in_dim x classes`, row-major.
    weights: Matrix,
    bias: Vec<f64>,
    step_size: f64,
}

impl LinearClassifier {
    pub fn new(in_dim: usize, classes: usize, step_size: f64) -> Self {
        LinearClassifier {
            weights: Matrix::zeros(in_dim, classes),
            bias: vec![0.0; classes],
            step_size,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// `logits = h W + b`, one row per sample.
    pub fn logits(&self, h: &Matrix) -> Result<Matrix> {
        h.require_width(self.in_dim(), "hidden representation")?;
        let classes = self.num_classes();
        let mut out = Matrix::zeros(h.rows(), classes);
        for r in 0..h.rows() {
            let hr = h.row(r);
            let or = out.row_mut(r);
            or.copy_from_slice(&self.bias);
            for (j, &hv) in hr.iter().enumerate() {
                let wr = self.weights.row(j);
                for (o, w) in or.iter_mut().zip(wr) {
                    *o += hv * w;
                }
            }
        }
        Ok(out)
    }

    /// Argmax class per row; ties resolve to the lowest class index.
    pub fn predict_classes(&self, h: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits(h)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    /// `steps` full-batch gradient-descent steps on the mean cross-entropy.
    pub fn train_steps(&mut self, h: &Matrix, labels: &[usize], steps: usize) -> Result<()> {
        self.check_training_input(h, labels)?;
        let (n, d, c) = (h.rows(), self.in_dim(), self.num_classes());
        for _ in 0..steps {
            let probs = self.softmax_rows(h)?;
            // G = (softmax - onehot) / n
            let mut grad_w = Matrix::zeros(d, c);
            let mut grad_b = vec![0.0; c];
            for r in 0..n {
                let pr = probs.row(r);
                let hr = h.row(r);
                for k in 0..c {
                    let g = (pr[k] - if k == labels[r] { 1.0 } else { 0.0 }) / n as f64;
                    grad_b[k] += g;
                    for j in 0..d {
                        let w = grad_w.get(j, k) + hr[j] * g;
                        grad_w.set(j, k, w);
                    }
                }
            }
            for j in 0..d {
                for k in 0..c {
                    let w = self.weights.get(j, k) - self.step_size * grad_w.get(j, k);
                    self.weights.set(j, k, w);
                }
            }
            for (b, g) in self.bias.iter_mut().zip(&grad_b) {
                *b -= self.step_size * g;
            }
        }
        Ok(())
    }

    /// Gradient of the mean cross-entropy with respect to the hidden
    /// representation: `(softmax(logits) - onehot) W^T / n`, same shape as `h`.
    pub fn hidden_gradient(&self, h: &Matrix, labels: &[usize]) -> Result<Matrix> {
        let mut out = self.sample_hidden_gradients(h, labels)?;
        let n = h.rows() as f64;
        for v in out.data_mut() {
            *v /= n;
        }
        Ok(out)
    }

    /// Per-sample loss gradients with respect to the hidden representation:
    /// row r is `(softmax(logits_r) - onehot_r) W^T`. This is the scale the
    /// pseudo-label step works at; the batch-mean version above divides by n.
    pub(crate) fn sample_hidden_gradients(&self, h: &Matrix, labels: &[usize]) -> Result<Matrix> {
        self.check_training_input(h, labels)?;
        let (n, d, c) = (h.rows(), self.in_dim(), self.num_classes());
        let probs = self.softmax_rows(h)?;
        let mut out = Matrix::zeros(n, d);
        for r in 0..n {
            let pr = probs.row(r);
            let or = out.row_mut(r);
            for k in 0..c {
                let g = pr[k] - if k == labels[r] { 1.0 } else { 0.0 };
                for (j, slot) in or.iter_mut().enumerate() {
                    *slot += g * self.weights.get(j, k);
                }
            }
        }
        Ok(out)
    }

    /// Mean cross-entropy of the current parameters on (`h`, `labels`).
    pub fn mean_cross_entropy(&self, h: &Matrix, labels: &[usize]) -> Result<f64> {
        self.check_training_input(h, labels)?;
        let logits = self.logits(h)?;
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            total += crate::layers::Loss::SoftmaxCrossEntropy
                .value(logits.row(r), crate::layers::Target::Class(label))?;
        }
        Ok(total / h.rows() as f64)
    }

    fn softmax_rows(&self, h: &Matrix) -> Result<Matrix> {
        let logits = self.logits(h)?;
        let mut out = Matrix::zeros(logits.rows(), logits.cols());
        for r in 0..logits.rows() {
            out.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
        }
        Ok(out)
    }

    fn check_training_input(&self, h: &Matrix, labels: &[usize]) -> Result<()> {
        h.require_width(self.in_dim(), "hidden representation")?;
        if h.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                h.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.num_classes()) {
            return Err(Error::DimensionMismatch(format!(
                "label {bad} out of range for {} classes",
                self.num_classes()
            )));
        }
        Ok(())
    }

    pub(crate) fn from_parts(weights: Matrix, bias: Vec<f64>, step_size: f64) -> Self {
        LinearClassifier {
            weights,
            bias,
            step_size,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}
