//! Multi-layered gradient boosting decision trees.
//!
//! Stacks of GBDT layers are trained jointly without back-propagation:
//! each layer learns an approximate inverse of the layer above, the top
//! layer's target is turned into a pseudo-label, and pseudo-labels are
//! propagated down through the inverses so every layer has a regression
//! target of its own. Classification can put a linear softmax layer on
//! top; an unsupervised variant reconstructs its own input.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod layers;
pub mod matrix;
pub mod persist;
pub mod trainer;

pub use error::{Error, Result};
pub use gbdt::{GBDTRegressor, RegressionTree, TreeGrowthParams};
pub use layers::{LinearClassifier, Loss};
pub use matrix::Matrix;
pub use trainer::{
    EpochTrace, EvalSet, MGBDTModel, Mode, Prediction, Targets, TrainConfig,
};
