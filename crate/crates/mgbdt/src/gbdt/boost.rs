//! Multi-output gradient boosting over regression trees.
//!
//! One tree per output dimension per round, fit to the squared-loss residual
//! `target - current prediction`. Output dimensions are fully independent, so
//! they are fit in parallel; the per-dimension residual recursion is strictly
//! sequential, which is what makes warm starts bit-exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::tree::{RegressionTree, SortedFeatures, TreeGrowthParams};
use crate::matrix::Matrix;

/// Additive ensemble: `predict(x) = base + shrinkage * sum(tree_k(x))`
/// per output dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GBDTRegressor {
    in_dim: usize,
    output_dim: usize,
    /// Per-dimension training-target mean.
    base: Vec<f64>,
    /// `forests[d]` is the ordered tree list for output dimension `d`.
    forests: Vec<Vec<RegressionTree>>,
    shrinkage: f64,
}

impl GBDTRegressor {
    /// Fit `rounds` trees per output dimension.
    pub fn fit(
        features: &Matrix,
        targets: &Matrix,
        rounds: usize,
        shrinkage: f64,
        params: &TreeGrowthParams,
    ) -> Result<Self> {
        validate_training_input(features, targets, shrinkage, params)?;
        let mut model = GBDTRegressor {
            in_dim: features.cols(),
            output_dim: targets.cols(),
            base: targets.column_means(),
            forests: vec![Vec::new(); targets.cols()],
            shrinkage,
        };
        model.append_rounds(features, targets, rounds, params);
        Ok(model)
    }

    /// Append `rounds` more trees per dimension, fit to the residuals of the
    /// current model on (`features`, `targets`). Existing trees are untouched.
    pub fn boost_more(
        &mut self,
        features: &Matrix,
        targets: &Matrix,
        rounds: usize,
        params: &TreeGrowthParams,
    ) -> Result<()> {
        validate_training_input(features, targets, self.shrinkage, params)?;
        features.require_width(self.in_dim, "feature matrix")?;
        targets.require_width(self.output_dim, "target matrix")?;
        self.append_rounds(features, targets, rounds, params);
        Ok(())
    }

    fn append_rounds(
        &mut self,
        features: &Matrix,
        targets: &Matrix,
        rounds: usize,
        params: &TreeGrowthParams,
    ) {
        if rounds == 0 {
            return;
        }
        let sorted = SortedFeatures::build(features);
        let shrinkage = self.shrinkage;
        let grown: Vec<Vec<RegressionTree>> = self
            .forests
            .par_iter()
            .enumerate()
            .map(|(dim, existing)| {
                let n = features.rows();
                // Current prediction, accumulated in tree order so that the
                // arithmetic matches `predict` exactly.
                let mut preds = vec![self.base[dim]; n];
                for tree in existing {
                    for (r, p) in preds.iter_mut().enumerate() {
                        *p += shrinkage * tree.predict_row(features.row(r));
                    }
                }
                let mut residuals = vec![0.0f64; n];
                let mut new_trees = Vec::with_capacity(rounds);
                for _ in 0..rounds {
                    for r in 0..n {
                        residuals[r] = targets.get(r, dim) - preds[r];
                    }
                    let tree =
                        RegressionTree::fit_presorted(features, &sorted, &residuals, params);
                    for (r, p) in preds.iter_mut().enumerate() {
                        *p += shrinkage * tree.predict_row(features.row(r));
                    }
                    new_trees.push(tree);
                }
                new_trees
            })
            .collect();
        for (forest, new_trees) in self.forests.iter_mut().zip(grown) {
            forest.extend(new_trees);
        }
    }

    /// Predict all output dimensions for every row.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        features.require_width(self.in_dim, "feature matrix")?;
        let mut out = Matrix::zeros(features.rows(), self.output_dim);
        let cols = self.output_dim;
        out.data_mut()
            .par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each(|(r, out_row)| {
                let row = features.row(r);
                for (dim, slot) in out_row.iter_mut().enumerate() {
                    let mut acc = self.base[dim];
                    for tree in &self.forests[dim] {
                        acc += self.shrinkage * tree.predict_row(row);
                    }
                    *slot = acc;
                }
            });
        Ok(out)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// Number of boosting rounds accumulated so far.
    pub fn rounds(&self) -> usize {
        self.forests.first().map_or(0, Vec::len)
    }

    pub fn trees(&self, dim: usize) -> &[RegressionTree] {
        &self.forests[dim]
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub(crate) fn from_parts(
        in_dim: usize,
        output_dim: usize,
        base: Vec<f64>,
        forests: Vec<Vec<RegressionTree>>,
        shrinkage: f64,
    ) -> Self {
        GBDTRegressor {
            in_dim,
            output_dim,
            base,
            forests,
            shrinkage,
        }
    }
}

fn validate_training_input(
    features: &Matrix,
    targets: &Matrix,
    shrinkage: f64,
    params: &TreeGrowthParams,
) -> Result<()> {
    params.validate()?;
    if features.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if features.rows() != targets.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} target rows",
            features.rows(),
            targets.rows()
        )));
    }
    if targets.cols() == 0 {
        return Err(Error::DimensionMismatch("targets have zero width".into()));
    }
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::InvalidParameter(
            "shrinkage must lie in (0, 1]".into(),
        ));
    }
    if !features.is_finite() || !targets.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}
