//! Versioned model files.
//!
//! A model file is a single JSON document carrying the structure, the loss
//! and mode, every layer's forward mapping (trees as nested node records),
//! the training configuration, and the column schema of the training data so
//! later files can be encoded identically. Inverse mappings are training
//! state and are not persisted; a loaded model predicts and encodes exactly
//! like the one that was saved.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Schema;
use crate::error::{Error, Result};
use crate::gbdt::{GBDTRegressor, RegressionTree};
use crate::layers::{ForwardMapping, Layer, LinearClassifier, Loss};
use crate::matrix::Matrix;
use crate::trainer::{MGBDTModel, Mode, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// A trained model together with everything needed to reuse it.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub model: MGBDTModel,
    /// Column layout of the training data, when it came from a CSV.
    pub schema: Option<Schema>,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    mode: Mode,
    loss: Loss,
    dims: Vec<usize>,
    layers: Vec<LayerFile>,
    column_spec: Option<Schema>,
    train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerFile {
    Gbdt {
        in_dim: usize,
        output_dim: usize,
        base: Vec<f64>,
        shrinkage: f64,
        /// `forests[d]` is output dimension d's ordered tree list.
        forests: Vec<Vec<RegressionTree>>,
    },
    Linear {
        weights: Matrix,
        bias: Vec<f64>,
        step_size: f64,
    },
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl From<&Layer> for LayerFile {
    fn from(layer: &Layer) -> Self {
        match layer.forward() {
            ForwardMapping::Gbdt(g) => LayerFile::Gbdt {
                in_dim: g.in_dim(),
                output_dim: g.output_dim(),
                base: g.base().to_vec(),
                shrinkage: g.shrinkage(),
                forests: (0..g.output_dim()).map(|d| g.trees(d).to_vec()).collect(),
            },
            ForwardMapping::Linear(l) => LayerFile::Linear {
                weights: l.weights().clone(),
                bias: l.bias().to_vec(),
                step_size: l.step_size(),
            },
        }
    }
}

impl From<LayerFile> for Layer {
    fn from(file: LayerFile) -> Self {
        match file {
            LayerFile::Gbdt {
                in_dim,
                output_dim,
                base,
                shrinkage,
                forests,
            } => Layer::restore(
                ForwardMapping::Gbdt(GBDTRegressor::from_parts(
                    in_dim, output_dim, base, forests, shrinkage,
                )),
                None,
            ),
            LayerFile::Linear {
                weights,
                bias,
                step_size,
            } => Layer::restore(
                ForwardMapping::Linear(LinearClassifier::from_parts(weights, bias, step_size)),
                None,
            ),
        }
    }
}

pub fn save_model(path: &Path, saved: &SavedModel) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        mode: saved.model.mode(),
        loss: saved.model.loss(),
        dims: saved.model.dims().to_vec(),
        layers: saved.model.layers.iter().map(LayerFile::from).collect(),
        column_spec: saved.schema.clone(),
        train_config: saved.config.clone(),
    };
    let out = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut writer, &file).map_err(|e| Error::ModelFormat {
        path: path.display().to_string(),
        source: e,
    })?;
    use std::io::Write;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat {
            path: path.display().to_string(),
            source: e,
        })?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(probe.format_version));
    }
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::ModelFormat {
        path: path.display().to_string(),
        source: e,
    })?;
    let model = MGBDTModel {
        layers: file.layers.into_iter().map(Layer::from).collect(),
        dims: file.dims,
        loss: file.loss,
        mode: file.mode,
    };
    Ok(SavedModel {
        model,
        schema: file.column_spec,
        config: file.train_config,
    })
}

/// Like [`load_model`] but for readers; used by callers that already have
/// the bytes (for example over an FFI boundary).
pub fn load_model_from_reader<R: std::io::Read>(reader: R, origin: &str) -> Result<SavedModel> {
    let mut text = String::new();
    let mut reader = BufReader::new(reader);
    std::io::Read::read_to_string(&mut reader, &mut text).map_err(|e| Error::Io {
        path: origin.to_string(),
        source: e,
    })?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| Error::ModelFormat {
        path: origin.to_string(),
        source: e,
    })?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(probe.format_version));
    }
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::ModelFormat {
        path: origin.to_string(),
        source: e,
    })?;
    let model = MGBDTModel {
        layers: file.layers.into_iter().map(Layer::from).collect(),
        dims: file.dims,
        loss: file.loss,
        mode: file.mode,
    };
    Ok(SavedModel {
        model,
        schema: file.column_spec,
        config: file.train_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_circles;
    use crate::trainer::Targets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_classifier() -> (SavedModel, Matrix) {
        let ds = gen_circles(200, 0.1, 11).unwrap();
        let mut config = TrainConfig::for_mode(Mode::Classify);
        config.epochs = 3;
        let (model, _) = MGBDTModel::fit(
            &[2, 4, 2],
            Mode::Classify,
            &ds.features,
            ds.targets(),
            &config,
            None,
        )
        .unwrap();
        (
            SavedModel {
                model,
                schema: Some(ds.schema.clone()),
                config,
            },
            ds.features,
        )
    }

    #[test]
    fn roundtrip_is_bit_exact_on_random_inputs() {
        let (saved, _) = trained_classifier();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &saved).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.schema, saved.schema);
        assert_eq!(back.config, saved.config);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probe = Matrix::from_vec(
            1000,
            2,
            (0..2000).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect(),
        );
        assert_eq!(
            back.model.predict_outputs(&probe).unwrap(),
            saved.model.predict_outputs(&probe).unwrap()
        );
    }

    #[test]
    fn unknown_version_is_a_clean_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("future.json");
        std::fs::write(&path, r#"{"format_version": 99, "extra": true}"#).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_model(Path::new("/nonexistent/model.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/model.json"));
    }

    #[test]
    fn autoencoder_roundtrip() {
        use crate::data::gen_curve3d;
        let ds = gen_curve3d(150, 13).unwrap();
        let mut config = TrainConfig::for_mode(Mode::Autoencode);
        config.epochs = 2;
        let (model, _) = MGBDTModel::fit(
            &[3, 4, 3],
            Mode::Autoencode,
            &ds.features,
            Targets::None,
            &config,
            None,
        )
        .unwrap();
        let saved = SavedModel {
            model,
            schema: None,
            config,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.json");
        save_model(&path, &saved).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(
            back.model.predict_outputs(&ds.features).unwrap(),
            saved.model.predict_outputs(&ds.features).unwrap()
        );
        assert_eq!(back.schema, None);
    }
}
