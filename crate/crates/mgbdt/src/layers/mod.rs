//! One level of the stack: a forward mapping paired with an optional
//! learned inverse, plus the losses the top layer can carry.

mod linear;
mod loss;

pub use linear::LinearClassifier;
pub use loss::{argmax, softmax, Loss, Target};

use crate::error::{Error, Result};
use crate::gbdt::GBDTRegressor;
use crate::matrix::Matrix;

/// Forward mapping of a layer.
#[derive(Clone, Debug, PartialEq)]
pub enum ForwardMapping {
    Gbdt(GBDTRegressor),
    Linear(LinearClassifier),
}

/// A layer: forward mapping from the space below into this layer's output
/// space, and (for GBDT layers that have been through at least one training
/// epoch) an inverse mapping back down.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub(crate) forward: ForwardMapping,
    pub(crate) inverse: Option<GBDTRegressor>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    pub(crate) fn gbdt(forward: GBDTRegressor) -> Self {
        Layer {
            in_dim: forward.in_dim(),
            out_dim: forward.output_dim(),
            forward: ForwardMapping::Gbdt(forward),
            inverse: None,
        }
    }

    pub(crate) fn linear(forward: LinearClassifier) -> Self {
        Layer {
            in_dim: forward.in_dim(),
            out_dim: forward.num_classes(),
            forward: ForwardMapping::Linear(forward),
            inverse: None,
        }
    }

    pub(crate) fn restore(forward: ForwardMapping, inverse: Option<GBDTRegressor>) -> Self {
        let (in_dim, out_dim) = match &forward {
            ForwardMapping::Gbdt(g) => (g.in_dim(), g.output_dim()),
            ForwardMapping::Linear(l) => (l.in_dim(), l.num_classes()),
        };
        Layer {
            forward,
            inverse,
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.forward, ForwardMapping::Linear(_))
    }

    pub fn forward(&self) -> &ForwardMapping {
        &self.forward
    }

    pub fn inverse(&self) -> Option<&GBDTRegressor> {
        self.inverse.as_ref()
    }

    /// Apply the forward mapping (logits for the linear layer).
    pub fn forward_outputs(&self, input: &Matrix) -> Result<Matrix> {
        match &self.forward {
            ForwardMapping::Gbdt(g) => g.predict(input),
            ForwardMapping::Linear(l) => l.logits(input),
        }
    }

    /// Propagate a pseudo-label down through the inverse mapping.
    pub(crate) fn invert(&self, pseudo_label: &Matrix, layer_index: usize) -> Result<Matrix> {
        match (&self.forward, &self.inverse) {
            (ForwardMapping::Linear(_), _) => Err(Error::NoInverseForLinearTop),
            (_, None) => Err(Error::InverseNotTrained(layer_index)),
            (_, Some(g)) => g.predict(pseudo_label),
        }
    }
}
