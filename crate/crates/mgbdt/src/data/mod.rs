//! Datasets: CSV ingestion with one-hot encoding, train/test splits,
//! stratified k-fold plans, and the synthetic generators.

mod csv;
mod synth;

pub use csv::{load_csv, load_csv_with_schema, LabelKind, LoadReport};
pub use synth::{gen_circles, gen_curve3d, gen_curve3d_with_jitter};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trainer::Targets;

/// How one source column is encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// One column per category, in first-appearance order of the training file.
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// The label column, when one was extracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelColumn {
    /// Class strings in first-appearance order; the index is the class id.
    Classes { name: String, classes: Vec<String> },
    Numeric { name: String },
}

/// Column layout a model was trained against; encoding test data through the
/// same schema guarantees identical feature positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub label: Option<LabelColumn>,
}

impl Schema {
    pub fn feature_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Numeric => 1,
                ColumnKind::Categorical { categories } => categories.len(),
            })
            .sum()
    }

    /// One name per encoded feature column.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_width());
        for c in &self.columns {
            match &c.kind {
                ColumnKind::Numeric => names.push(c.name.clone()),
                ColumnKind::Categorical { categories } => {
                    for cat in categories {
                        names.push(format!("{}={}", c.name, cat));
                    }
                }
            }
        }
        names
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.label {
            Some(LabelColumn::Classes { classes, .. }) => Some(classes.len()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Values(Matrix),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Labels,
    pub schema: Schema,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    /// Borrow the labels in the form the trainer takes.
    pub fn targets(&self) -> Targets<'_> {
        match &self.labels {
            Labels::Classes(c) => Targets::Classes(c),
            Labels::Values(v) => Targets::Values(v),
            Labels::None => Targets::None,
        }
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Classes(c) => Some(c),
            _ => None,
        }
    }

    /// Copy of the rows selected by `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let labels = match &self.labels {
            Labels::Classes(c) => Labels::Classes(indices.iter().map(|&i| c[i]).collect()),
            Labels::Values(v) => Labels::Values(v.select_rows(indices)),
            Labels::None => Labels::None,
        };
        Dataset {
            features: self.features.select_rows(indices),
            labels,
            schema: self.schema.clone(),
        }
    }

    fn class_groups(&self) -> Option<Vec<Vec<usize>>> {
        let labels = self.class_labels()?;
        let classes = labels.iter().copied().max()? + 1;
        let mut groups = vec![Vec::new(); classes];
        for (i, &c) in labels.iter().enumerate() {
            groups[c].push(i);
        }
        Some(groups)
    }
}

/// Random train/test split; stratified by class when class labels are present
/// and every class has at least two rows.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = dataset.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "cannot split fewer than 2 rows".into(),
        ));
    }
    let target_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let groups = match dataset.class_groups() {
        Some(groups) if groups.iter().all(|g| g.len() >= 2) => Some(groups),
        Some(_) => {
            log::warn!("a class has fewer than 2 rows; falling back to an unstratified split");
            None
        }
        None => None,
    };

    let mut train_idx: Vec<usize> = Vec::with_capacity(target_train);
    match groups {
        None => train_idx.extend(&order[..target_train]),
        Some(groups) => {
            // Shuffled order within each class.
            let mut position = vec![0usize; n];
            for (pos, &row) in order.iter().enumerate() {
                position[row] = pos;
            }
            let shuffled_groups: Vec<Vec<usize>> = groups
                .into_iter()
                .map(|mut g| {
                    g.sort_by_key(|&r| position[r]);
                    g
                })
                .collect();
            // Largest-remainder allocation of the train quota across classes.
            let mut quotas: Vec<usize> = shuffled_groups
                .iter()
                .map(|g| (fraction * g.len() as f64).floor() as usize)
                .collect();
            let mut leftover = target_train - quotas.iter().sum::<usize>();
            let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
            by_remainder.sort_by(|&a, &b| {
                let ra = fraction * shuffled_groups[a].len() as f64 - quotas[a] as f64;
                let rb = fraction * shuffled_groups[b].len() as f64 - quotas[b] as f64;
                rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
            });
            let mut cursor = 0;
            while leftover > 0 {
                let c = by_remainder[cursor % by_remainder.len()];
                if quotas[c] < shuffled_groups[c].len() {
                    quotas[c] += 1;
                    leftover -= 1;
                }
                cursor += 1;
            }
            for (g, &q) in shuffled_groups.iter().zip(&quotas) {
                train_idx.extend(&g[..q]);
            }
        }
    }

    train_idx.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((dataset.select(&train_idx), dataset.select(&test_idx)))
}

/// Fold assignment for k-fold cross-validation.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    /// Per-row fold index in `0..k`.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// (train, test) row indices for one fold, both in ascending row order.
    pub fn fold_indices(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (row, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(row);
            } else {
                train.push(row);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified fold assignment: folds partition the rows, global fold sizes
/// differ by at most one, and each class spreads as evenly as possible.
pub fn kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = dataset.rows();
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {n} available rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let groups = dataset
        .class_groups()
        .unwrap_or_else(|| vec![(0..n).collect()]);
    let mut position = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        position[row] = pos;
    }

    let mut assignments = vec![0usize; n];
    let mut load = vec![0usize; k];
    for mut group in groups {
        group.sort_by_key(|&r| position[r]);
        let base = group.len() / k;
        let remainder = group.len() % k;
        for l in &mut load {
            *l += base;
        }
        // The +1 rows go to the currently least-loaded folds, which keeps
        // global fold sizes within one of each other.
        let mut fold_order: Vec<usize> = (0..k).collect();
        fold_order.sort_by_key(|&f| (load[f], f));
        let mut quota: Vec<usize> = vec![base; k];
        for &f in fold_order.iter().take(remainder) {
            quota[f] += 1;
            load[f] += 1;
        }
        let mut cursor = 0;
        for (f, &q) in quota.iter().enumerate() {
            for &row in &group[cursor..cursor + q] {
                assignments[row] = f;
            }
            cursor += q;
        }
    }
    Ok(FoldPlan { k, assignments })
}
