//! Regression trees and the multi-output boosting ensemble built on them.
//! Every forward and inverse mapping in the layered model is one of these.

mod boost;
mod tree;

pub use boost::GBDTRegressor;
pub use tree::{Node, RegressionTree, TreeGrowthParams};
