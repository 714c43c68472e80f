//! Metrics, k-fold orchestration, and file exports (learning curves and
//! layer representations for external visualization).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::data::{kfold, Dataset, Labels};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trainer::{EpochTrace, MGBDTModel, Mode, Prediction, TrainConfig};

/// Fraction of exact matches.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Mean over all entries of the squared difference.
pub fn mse(outputs: &Matrix, targets: &Matrix) -> Result<f64> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(Error::DimensionMismatch(format!(
            "outputs are {}x{} but targets are {}x{}",
            outputs.rows(),
            outputs.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if outputs.data().is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let total: f64 = outputs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(o, t)| (o - t) * (o - t))
        .sum();
    Ok(total / outputs.data().len() as f64)
}

/// Cross-validation summary; std is the population value over folds.
#[derive(Clone, Debug, PartialEq)]
pub struct CVReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CVReport {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let k = fold_accuracies.len() as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / k;
        let var = fold_accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k;
        CVReport {
            fold_accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

/// k-fold cross-validation of a classification structure: one fresh model per
/// fold, trained on the other k-1 folds with a fold-derived seed.
pub fn run_cv(
    dataset: &Dataset,
    dims: &[usize],
    config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CVReport> {
    let labels = dataset.class_labels().ok_or_else(|| {
        Error::InvalidParameter("cross-validation needs class labels".into())
    })?;
    let plan = kfold(dataset, k, seed)?;
    let folds: Vec<(Dataset, Dataset, Vec<usize>)> = (0..k)
        .map(|fold| {
            let (train_idx, test_idx) = plan.fold_indices(fold);
            let test_labels = test_idx.iter().map(|&r| labels[r]).collect();
            (dataset.select(&train_idx), dataset.select(&test_idx), test_labels)
        })
        .collect();
    let fold_accuracies: Result<Vec<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(fold, (train, test, test_labels))| {
            let mut fold_config = config.clone();
            fold_config.seed = config.seed.wrapping_add(fold as u64);
            let (model, _) = MGBDTModel::fit(
                dims,
                Mode::Classify,
                &train.features,
                train.targets(),
                &fold_config,
                None,
            )?;
            match model.predict(&test.features)? {
                Prediction::Classes(preds) => accuracy(&preds, test_labels),
                Prediction::Values(_) => unreachable!("classify mode yields classes"),
            }
        })
        .collect();
    Ok(CVReport::from_folds(fold_accuracies?))
}

/// Shortest round-trip decimal form (Rust's default float formatting).
fn fmt_float(v: f64) -> String {
    format!("{v}")
}

/// Write layer `layer_index`'s representation of every row, plus a final
/// label column, as headed CSV. Row order is preserved.
pub fn export_representation(
    model: &MGBDTModel,
    dataset: &Dataset,
    layer_index: usize,
    path: &Path,
) -> Result<()> {
    let representation = model.encode(&dataset.features, layer_index)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..representation.cols())
        .map(|c| format!("r{c}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for r in 0..representation.rows() {
        let mut cells: Vec<String> = representation.row(r).iter().copied().map(fmt_float).collect();
        cells.push(match &dataset.labels {
            Labels::Classes(c) => c[r].to_string(),
            Labels::Values(v) => fmt_float(v.get(r, 0)),
            Labels::None => String::new(),
        });
        writeln!(w, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the learning curve as headed CSV with one row per epoch. Accuracy
/// cells are blank for modes without a class output.
pub fn write_curves(traces: &[EpochTrace], path: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::InvalidParameter("no epochs were traced".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "epoch,train_loss,train_acc,test_loss,test_acc").map_err(|e| Error::io(path, e))?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for t in traces {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.epoch,
            fmt_float(t.train_loss),
            opt(t.train_accuracy),
            opt(t.test_loss),
            opt(t.test_accuracy),
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
