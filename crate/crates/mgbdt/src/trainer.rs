//! Joint training of the layered model.
//!
//! Each epoch follows the same sequence: the top layer's target becomes a
//! pseudo-label (computed from the *previous* epoch's outputs), inverse
//! mappings are refreshed top-down on noise-injected reconstruction data and
//! used to propagate pseudo-labels downward, then every forward mapping takes
//! a few warm-started boosting rounds toward its pseudo-label, bottom-up, with
//! layer outputs recomputed as the wave passes. No gradients ever cross a
//! layer boundary; only targets do.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{GBDTRegressor, TreeGrowthParams};
use crate::layers::{argmax, ForwardMapping, Layer, LinearClassifier, Loss, Target};
use crate::matrix::Matrix;

/// What the stack is trained to do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// GBDT hidden layers under a linear softmax output layer.
    Classify,
    /// GBDT layers throughout, squared loss against a numeric target.
    Regress,
    /// GBDT layers throughout, squared loss against the input itself.
    Autoencode,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(Mode::Classify),
            "regress" => Ok(Mode::Regress),
            "autoencode" => Ok(Mode::Autoencode),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected classify, regress or autoencode)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Classify => "classify",
            Mode::Regress => "regress",
            Mode::Autoencode => "autoencode",
        })
    }
}

/// Hyper-parameters for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step length of the top pseudo-label move against the loss gradient.
    pub alpha: f64,
    /// Boosting shrinkage, shared by every ensemble in the stack.
    pub shrinkage: f64,
    /// Boosting rounds per epoch for each inverse mapping.
    pub k1: usize,
    /// Boosting rounds per epoch for each forward mapping.
    pub k2: usize,
    pub epochs: usize,
    /// Standard deviation of the noise injected into inverse training data.
    pub noise_std: f64,
    pub forward_tree: TreeGrowthParams,
    pub inverse_tree: TreeGrowthParams,
    /// Tiny trees fit to Gaussian targets to give every layer a starting shape.
    pub init_tree: TreeGrowthParams,
    pub init_rounds: usize,
    pub init_noise_std: f64,
    pub linear_step_size: f64,
    /// Gradient-descent steps the linear top layer takes per epoch.
    pub linear_steps: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults; `alpha` is 0.1 for classification and 1.0 otherwise.
    pub fn for_mode(mode: Mode) -> Self {
        TrainConfig {
            alpha: if mode == Mode::Classify { 0.1 } else { 1.0 },
            shrinkage: 0.1,
            k1: 5,
            k2: 5,
            epochs: 50,
            noise_std: 0.3,
            forward_tree: TreeGrowthParams::default(),
            inverse_tree: TreeGrowthParams::default(),
            init_tree: TreeGrowthParams::with_depth(2),
            init_rounds: 1,
            init_noise_std: 1.0,
            linear_step_size: 0.1,
            linear_steps: 50,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        if !(self.init_noise_std >= 0.0) {
            return Err(Error::InvalidParameter("init_noise_std must be >= 0".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidParameter("shrinkage must lie in (0, 1]".into()));
        }
        self.forward_tree.validate()?;
        self.inverse_tree.validate()?;
        self.init_tree.validate()?;
        Ok(())
    }
}

/// Training targets, matched against the model's mode.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Values(&'a Matrix),
    None,
}

/// Held-out data evaluated once per epoch for the learning curve.
#[derive(Clone, Copy, Debug)]
pub struct EvalSet<'a> {
    pub features: &'a Matrix,
    pub targets: Targets<'a>,
}

/// Per-epoch record of the learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Output of [`MGBDTModel::predict`].
#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Classes(Vec<usize>),
    Values(Matrix),
}

/// The layered model: `dims[0]` is the input width, `dims[i]` the output
/// width of layer `i`, and layer `M` produces the final output.
#[derive(Clone, Debug, PartialEq)]
pub struct MGBDTModel {
    pub(crate) layers: Vec<Layer>,
    pub(crate) dims: Vec<usize>,
    pub(crate) loss: Loss,
    pub(crate) mode: Mode,
}

impl MGBDTModel {
    /// Initialization stage: each GBDT layer gets a tiny ensemble fit to
    /// Gaussian targets, bottom-up, so layer outputs have some spread before
    /// the first real epoch; inverse mappings start out absent. A linear top
    /// layer starts at zero.
    pub fn initialize(dims: &[usize], mode: Mode, x: &Matrix, config: &TrainConfig) -> Result<Self> {
        let (model, _outputs, _rng) = Self::initialize_with_state(dims, mode, x, config)?;
        Ok(model)
    }

    fn initialize_with_state(
        dims: &[usize],
        mode: Mode,
        x: &Matrix,
        config: &TrainConfig,
    ) -> Result<(Self, Vec<Matrix>, ChaCha8Rng)> {
        config.validate()?;
        validate_dims(dims, mode)?;
        if x.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        x.require_width(dims[0], "training data")?;
        if !x.is_finite() {
            return Err(Error::NonFiniteInput);
        }

        let m = dims.len() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(m);
        let mut outputs = vec![x.clone()];
        for i in 1..=m {
            if mode == Mode::Classify && i == m {
                let lc = LinearClassifier::new(dims[m - 1], dims[m], config.linear_step_size);
                outputs.push(lc.logits(&outputs[i - 1])?);
                layers.push(Layer::linear(lc));
            } else {
                let targets = gaussian_matrix(x.rows(), dims[i], config.init_noise_std, &mut rng);
                let forward = GBDTRegressor::fit(
                    &outputs[i - 1],
                    &targets,
                    config.init_rounds,
                    config.shrinkage,
                    &config.init_tree,
                )?;
                outputs.push(forward.predict(&outputs[i - 1])?);
                layers.push(Layer::gbdt(forward));
            }
        }
        let loss = match mode {
            Mode::Classify => Loss::SoftmaxCrossEntropy,
            Mode::Regress | Mode::Autoencode => Loss::SquaredError,
        };
        Ok((
            MGBDTModel {
                layers,
                dims: dims.to_vec(),
                loss,
                mode,
            },
            outputs,
            rng,
        ))
    }

    /// Initialize and train for `config.epochs` epochs.
    pub fn fit(
        dims: &[usize],
        mode: Mode,
        x: &Matrix,
        targets: Targets<'_>,
        config: &TrainConfig,
        eval: Option<EvalSet<'_>>,
    ) -> Result<(Self, Vec<EpochTrace>)> {
        validate_targets(dims, mode, x, &targets)?;
        if let Some(es) = &eval {
            validate_targets(dims, mode, es.features, &es.targets)?;
            if !es.features.is_finite() {
                return Err(Error::NonFiniteInput);
            }
        }
        let (mut model, mut outputs, mut rng) = Self::initialize_with_state(dims, mode, x, config)?;
        let mut traces = Vec::with_capacity(config.epochs);
        for epoch in 1..=config.epochs {
            model.run_epoch(x, &targets, &mut outputs, config, &mut rng)?;
            traces.push(model.epoch_trace(epoch, x, &targets, &outputs, eval.as_ref())?);
        }
        Ok((model, traces))
    }

    /// One full epoch: top pseudo-label from the stale outputs, inverse
    /// refresh top-down, pseudo-label propagation, forward updates bottom-up.
    fn run_epoch(
        &mut self,
        x: &Matrix,
        targets: &Targets<'_>,
        outputs: &mut Vec<Matrix>,
        config: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let m = self.layers.len();

        // Pseudo-label for the topmost layer that has one. With a linear top
        // layer the gradient of the global loss with respect to the last
        // hidden output plays the role of the loss gradient.
        let (top_index, top_label) = match self.mode {
            Mode::Classify => {
                let labels = match targets {
                    Targets::Classes(l) => *l,
                    _ => unreachable!("validated by fit"),
                };
                if m == 1 {
                    (0, None)
                } else {
                    let lc = match self.layers[m - 1].forward() {
                        ForwardMapping::Linear(lc) => lc,
                        ForwardMapping::Gbdt(_) => unreachable!("classify top is linear"),
                    };
                    let grad = lc.sample_hidden_gradients(&outputs[m - 1], labels)?;
                    (m - 1, Some(gradient_step(&outputs[m - 1], &grad, config.alpha)))
                }
            }
            Mode::Regress | Mode::Autoencode => {
                let y = match (self.mode, targets) {
                    (Mode::Autoencode, _) => x,
                    (_, Targets::Values(v)) => *v,
                    _ => unreachable!("validated by fit"),
                };
                (m, Some(top_pseudo_label(&outputs[m], y, config.alpha, self.loss)?))
            }
        };

        // Inverse refresh, top-down. Noise is redrawn per layer per epoch and
        // the forward mappings here are still the previous epoch's.
        for j in (2..=m).rev() {
            if self.layers[j - 1].is_linear() {
                continue;
            }
            update_inverse(&mut self.layers[j - 1], &outputs[j - 1], config, rng)?;
        }

        // Pseudo-labels for every layer below the top one.
        let mut pseudo: Vec<Option<Matrix>> = vec![None; m + 1];
        if let Some(z_top) = top_label {
            let chain = self.propagate_pseudo_labels(&z_top)?;
            pseudo[top_index] = Some(z_top);
            for (offset, z) in chain.into_iter().enumerate() {
                pseudo[top_index - 1 - offset] = Some(z);
            }
        }

        // Forward updates, bottom-up, each layer seeing the refreshed output
        // of the layer below it.
        for j in 1..=m {
            let layer = &mut self.layers[j - 1];
            match &mut layer.forward {
                ForwardMapping::Gbdt(forward) => {
                    let z = pseudo[j]
                        .as_ref()
                        .ok_or_else(|| Error::InverseNotTrained(j + 1))?;
                    forward.boost_more(&outputs[j - 1], z, config.k2, &config.forward_tree)?;
                    outputs[j] = forward.predict(&outputs[j - 1])?;
                }
                ForwardMapping::Linear(lc) => {
                    let labels = match targets {
                        Targets::Classes(l) => *l,
                        _ => unreachable!("validated by fit"),
                    };
                    lc.train_steps(&outputs[j - 1], labels, config.linear_steps)?;
                    outputs[j] = lc.logits(&outputs[j - 1])?;
                }
            }
        }
        Ok(())
    }

    /// Chain pseudo-labels down through the trained inverses.
    ///
    /// `z_top` is the pseudo-label of the topmost invertible layer: layer `M`
    /// for a GBDT top, layer `M-1` when the top layer is linear. Returns the
    /// propagated labels top-to-bottom, ending with layer 1's.
    pub fn propagate_pseudo_labels(&self, z_top: &Matrix) -> Result<Vec<Matrix>> {
        let top = if self.mode == Mode::Classify {
            self.layers.len() - 1
        } else {
            self.layers.len()
        };
        let mut chain = Vec::new();
        if top == 0 {
            return Ok(chain);
        }
        z_top.require_width(self.dims[top], "pseudo-label")?;
        let mut current = z_top;
        for j in (2..=top).rev() {
            let z = self.layers[j - 1].invert(current, j)?;
            chain.push(z);
            current = chain.last().unwrap();
        }
        Ok(chain)
    }

    /// Full forward pass; logits for classification.
    pub fn predict_outputs(&self, x: &Matrix) -> Result<Matrix> {
        x.require_width(self.dims[0], "input")?;
        let mut current = x.clone();
        for layer in &self.layers {
            current = layer.forward_outputs(&current)?;
        }
        Ok(current)
    }

    /// Class indices in classify mode, raw output vectors otherwise.
    pub fn predict(&self, x: &Matrix) -> Result<Prediction> {
        let outputs = self.predict_outputs(x)?;
        match self.mode {
            Mode::Classify => Ok(Prediction::Classes(
                (0..outputs.rows()).map(|r| argmax(outputs.row(r))).collect(),
            )),
            Mode::Regress | Mode::Autoencode => Ok(Prediction::Values(outputs)),
        }
    }

    /// Representation at layer `j`; `j = 0` returns the input unchanged.
    pub fn encode(&self, x: &Matrix, layer_index: usize) -> Result<Matrix> {
        if layer_index > self.layers.len() {
            return Err(Error::LayerOutOfRange {
                index: layer_index,
                max: self.layers.len(),
            });
        }
        x.require_width(self.dims[0], "input")?;
        let mut current = x.clone();
        for layer in &self.layers[..layer_index] {
            current = layer.forward_outputs(&current)?;
        }
        Ok(current)
    }

    fn epoch_trace(
        &self,
        epoch: usize,
        x: &Matrix,
        targets: &Targets<'_>,
        outputs: &[Matrix],
        eval: Option<&EvalSet<'_>>,
    ) -> Result<EpochTrace> {
        let (train_loss, train_accuracy) =
            self.metrics_on(&outputs[self.layers.len()], x, targets)?;
        let (test_loss, test_accuracy) = match eval {
            None => (None, None),
            Some(es) => {
                let out = self.predict_outputs(es.features)?;
                let (l, a) = self.metrics_on(&out, es.features, &es.targets)?;
                (Some(l), a)
            }
        };
        Ok(EpochTrace {
            epoch,
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
        })
    }

    /// Mean top-layer loss and (in classify mode) accuracy of `out` against
    /// the targets.
    fn metrics_on(
        &self,
        out: &Matrix,
        x: &Matrix,
        targets: &Targets<'_>,
    ) -> Result<(f64, Option<f64>)> {
        let n = out.rows();
        match (self.mode, targets) {
            (Mode::Classify, Targets::Classes(labels)) => {
                let mut total = 0.0;
                let mut correct = 0usize;
                for (r, &label) in labels.iter().enumerate() {
                    total += self.loss.value(out.row(r), Target::Class(label))?;
                    if argmax(out.row(r)) == label {
                        correct += 1;
                    }
                }
                Ok((total / n as f64, Some(correct as f64 / n as f64)))
            }
            (Mode::Regress, Targets::Values(y)) => {
                let mut total = 0.0;
                for r in 0..n {
                    total += self.loss.value(out.row(r), Target::Values(y.row(r)))?;
                }
                Ok((total / n as f64, None))
            }
            (Mode::Autoencode, _) => {
                let mut total = 0.0;
                for r in 0..n {
                    total += self.loss.value(out.row(r), Target::Values(x.row(r)))?;
                }
                Ok((total / n as f64, None))
            }
            _ => Err(Error::DimensionMismatch(
                "targets do not match the model's mode".into(),
            )),
        }
    }

    /// Mean top-layer loss on (`x`, `targets`), plus accuracy in classify
    /// mode. Targets must match the model's mode; autoencoders ignore them.
    pub fn evaluate(&self, x: &Matrix, targets: Targets<'_>) -> Result<(f64, Option<f64>)> {
        let outputs = self.predict_outputs(x)?;
        self.metrics_on(&outputs, x, &targets)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Number of trained layers, `M`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> &Layer {
        &self.layers[i]
    }
}

/// `z = output - alpha * dL/d(output)`, rowwise: the top layer's target,
/// moved one step against the loss gradient.
pub fn top_pseudo_label(output: &Matrix, target: &Matrix, alpha: f64, loss: Loss) -> Result<Matrix> {
    if output.rows() != target.rows() || output.cols() != target.cols() {
        return Err(Error::DimensionMismatch(format!(
            "output is {}x{} but target is {}x{}",
            output.rows(),
            output.cols(),
            target.rows(),
            target.cols()
        )));
    }
    // For squared loss, alpha = 1 lands exactly on the target; evaluating
    // o - (o - y) instead would miss y by rounding, and the degeneration to
    // plain boosting relies on the identity being exact.
    if loss == Loss::SquaredError && alpha == 1.0 {
        return Ok(target.clone());
    }
    let mut z = Matrix::zeros(output.rows(), output.cols());
    for r in 0..output.rows() {
        let grad = loss.gradient(output.row(r), Target::Values(target.row(r)))?;
        for (c, g) in grad.iter().enumerate() {
            z.set(r, c, output.get(r, c) - alpha * g);
        }
    }
    Ok(z)
}

/// `out = base - alpha * step`, elementwise.
fn gradient_step(base: &Matrix, step: &Matrix, alpha: f64) -> Matrix {
    let mut out = base.clone();
    for (o, s) in out.data_mut().iter_mut().zip(step.data()) {
        *o -= alpha * s;
    }
    out
}

/// Refresh a layer's inverse mapping: draw fresh noise around the layer's
/// input, push it through the current forward mapping, and warm-start the
/// inverse toward reconstructing the noised input.
fn update_inverse(
    layer: &mut Layer,
    prev_output: &Matrix,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if layer.is_linear() {
        return Err(Error::NoInverseForLinearTop);
    }
    if config.k1 == 0 {
        return Ok(());
    }
    let mut noised = prev_output.clone();
    if config.noise_std > 0.0 {
        let normal = Normal::new(0.0, config.noise_std).expect("validated");
        for v in noised.data_mut() {
            *v += normal.sample(rng);
        }
    }
    let inputs = layer.forward_outputs(&noised)?;
    match &mut layer.inverse {
        Some(inverse) => inverse.boost_more(&inputs, &noised, config.k1, &config.inverse_tree)?,
        None => {
            layer.inverse = Some(GBDTRegressor::fit(
                &inputs,
                &noised,
                config.k1,
                config.shrinkage,
                &config.inverse_tree,
            )?)
        }
    }
    Ok(())
}

fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    if std > 0.0 {
        let normal = Normal::new(0.0, std).expect("validated");
        for v in m.data_mut() {
            *v = normal.sample(rng);
        }
    }
    m
}

fn validate_dims(dims: &[usize], mode: Mode) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidParameter(
            "structure needs at least an input and an output width".into(),
        ));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter("all dims must be >= 1".into()));
    }
    if mode == Mode::Autoencode && dims[dims.len() - 1] != dims[0] {
        return Err(Error::InvalidParameter(format!(
            "autoencoder output width {} must equal input width {}",
            dims[dims.len() - 1],
            dims[0]
        )));
    }
    Ok(())
}

fn validate_targets(dims: &[usize], mode: Mode, x: &Matrix, targets: &Targets<'_>) -> Result<()> {
    validate_dims(dims, mode)?;
    let out_dim = dims[dims.len() - 1];
    match (mode, targets) {
        (Mode::Classify, Targets::Classes(labels)) => {
            if labels.len() != x.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} rows but {} labels",
                    x.rows(),
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= out_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "label {bad} out of range for {out_dim} classes"
                )));
            }
            Ok(())
        }
        (Mode::Regress, Targets::Values(y)) => {
            if y.rows() != x.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} rows but {} target rows",
                    x.rows(),
                    y.rows()
                )));
            }
            y.require_width(out_dim, "targets")?;
            if !y.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            Ok(())
        }
        (Mode::Autoencode, _) => Ok(()),
        _ => Err(Error::DimensionMismatch(
            "targets do not match the training mode".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_inputs(seed: u64, n: usize, d: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
    }

    fn small_config(mode: Mode) -> TrainConfig {
        let mut c = TrainConfig::for_mode(mode);
        c.epochs = 3;
        c
    }

    #[test]
    fn initialize_single_linear_layer() {
        let x = random_inputs(1, 20, 3);
        let config = small_config(Mode::Classify);
        let model = MGBDTModel::initialize(&[3, 2], Mode::Classify, &x, &config).unwrap();
        assert_eq!(model.num_layers(), 1);
        assert!(model.layer(0).is_linear());
        assert!(model.layer(0).inverse().is_none());
    }

    #[test]
    fn initialize_is_deterministic() {
        let x = random_inputs(2, 30, 4);
        let config = small_config(Mode::Regress);
        let a = MGBDTModel::initialize(&[4, 6, 2], Mode::Regress, &x, &config).unwrap();
        let b = MGBDTModel::initialize(&[4, 6, 2], Mode::Regress, &x, &config).unwrap();
        assert_eq!(a.encode(&x, 1).unwrap(), b.encode(&x, 1).unwrap());
        assert_eq!(a.predict_outputs(&x).unwrap(), b.predict_outputs(&x).unwrap());
    }

    #[test]
    fn initialize_outputs_have_spread() {
        let x = random_inputs(3, 50, 3);
        for seed in 0..10u64 {
            let mut config = small_config(Mode::Regress);
            config.seed = seed;
            let model = MGBDTModel::initialize(&[3, 4, 2], Mode::Regress, &x, &config).unwrap();
            for j in 1..=2 {
                let o = model.encode(&x, j).unwrap();
                for (c, v) in o.column_variances().into_iter().enumerate() {
                    assert!(v > 0.0, "seed {seed}: layer {j} dim {c} collapsed");
                }
            }
        }
    }

    #[test]
    fn top_pseudo_label_examples() {
        let o = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]]);
        let y = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        // alpha = 1 with squared loss lands exactly on the target
        assert_eq!(top_pseudo_label(&o, &y, 1.0, Loss::SquaredError).unwrap(), y);
        // alpha = 0 leaves the output untouched
        assert_eq!(top_pseudo_label(&o, &y, 0.0, Loss::SquaredError).unwrap(), o);
        let o1 = Matrix::from_rows(&[vec![0.2]]);
        let y1 = Matrix::from_rows(&[vec![1.0]]);
        let z = top_pseudo_label(&o1, &y1, 0.1, Loss::SquaredError).unwrap();
        assert!((z.get(0, 0) - 0.28).abs() < 1e-12);
        let bad = Matrix::zeros(1, 3);
        assert!(top_pseudo_label(&o, &bad, 1.0, Loss::SquaredError).is_err());
    }

    /// Interpolating single-tree GBDT over a value grid acts as an exact map
    /// on grid points, which is enough to play a stub inverse.
    fn stub_map(pairs: &[(f64, f64)]) -> GBDTRegressor {
        let x = Matrix::from_vec(pairs.len(), 1, pairs.iter().map(|p| p.0).collect());
        let y = Matrix::from_vec(pairs.len(), 1, pairs.iter().map(|p| p.1).collect());
        GBDTRegressor::fit(&x, &y, 1, 1.0, &TreeGrowthParams::with_depth(usize::MAX / 2)).unwrap()
    }

    #[test]
    fn propagate_through_stub_inverses() {
        // Identity inverses over the grid make every pseudo-label equal z_top.
        let grid: Vec<(f64, f64)> = (-4..=4).map(|v| (v as f64, v as f64)).collect();
        let forward1 = stub_map(&grid);
        let forward2 = stub_map(&grid);
        let mut layer1 = Layer::gbdt(forward1);
        layer1.inverse = None; // layer 1 never owns an inverse
        let mut layer2 = Layer::gbdt(forward2);
        layer2.inverse = Some(stub_map(&grid));
        let model = MGBDTModel {
            layers: vec![layer1, layer2],
            dims: vec![1, 1, 1],
            loss: Loss::SquaredError,
            mode: Mode::Regress,
        };
        let z_top = Matrix::from_vec(3, 1, vec![-2.0, 0.0, 3.0]);
        let chain = model.propagate_pseudo_labels(&z_top).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0], z_top);
    }

    #[test]
    fn propagate_doubling_stub() {
        // M = 2 with G_2(v) = 2v on the grid: z_2 = [3] propagates to z_1 = [6].
        let grid: Vec<(f64, f64)> = (-4..=4).map(|v| (v as f64, 2.0 * v as f64)).collect();
        let mut layer2 = Layer::gbdt(stub_map(&grid));
        layer2.inverse = Some(stub_map(&grid));
        let model = MGBDTModel {
            layers: vec![Layer::gbdt(stub_map(&grid)), layer2],
            dims: vec![1, 1, 1],
            loss: Loss::SquaredError,
            mode: Mode::Regress,
        };
        let z2 = Matrix::from_vec(1, 1, vec![3.0]);
        let chain = model.propagate_pseudo_labels(&z2).unwrap();
        assert_eq!(chain[0].get(0, 0), 6.0);
    }

    #[test]
    fn propagate_missing_inverse_errors() {
        let grid: Vec<(f64, f64)> = (-2..=2).map(|v| (v as f64, v as f64)).collect();
        let model = MGBDTModel {
            layers: vec![Layer::gbdt(stub_map(&grid)), Layer::gbdt(stub_map(&grid))],
            dims: vec![1, 1, 1],
            loss: Loss::SquaredError,
            mode: Mode::Regress,
        };
        let z = Matrix::from_vec(1, 1, vec![0.0]);
        assert!(matches!(
            model.propagate_pseudo_labels(&z),
            Err(Error::InverseNotTrained(2))
        ));
    }

    #[test]
    fn pseudo_label_shapes_follow_dims() {
        let x = random_inputs(9, 40, 3);
        let y = {
            let mut m = Matrix::zeros(40, 2);
            for r in 0..40 {
                m.set(r, 0, x.row(r).iter().sum());
                m.set(r, 1, x.get(r, 0) - x.get(r, 2));
            }
            m
        };
        let mut config = small_config(Mode::Regress);
        config.epochs = 2;
        let dims = [3usize, 5, 4, 2];
        let (model, _) =
            MGBDTModel::fit(&dims, Mode::Regress, &x, Targets::Values(&y), &config, None).unwrap();
        // After training, propagate a fresh top label and check the chain widths.
        let z_top = Matrix::zeros(40, 2);
        let chain = model.propagate_pseudo_labels(&z_top).unwrap();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].cols(), 4);
        assert_eq!(chain[1].cols(), 5);
        assert_eq!(chain[0].rows(), 40);
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let x = random_inputs(5, 25, 2);
        let labels: Vec<usize> = (0..25).map(|i| i % 2).collect();
        let mut config = small_config(Mode::Classify);
        config.epochs = 0;
        let (model, traces) = MGBDTModel::fit(
            &[2, 3, 2],
            Mode::Classify,
            &x,
            Targets::Classes(&labels),
            &config,
            None,
        )
        .unwrap();
        assert!(traces.is_empty());
        let init = MGBDTModel::initialize(&[2, 3, 2], Mode::Classify, &x, &config).unwrap();
        assert_eq!(
            model.predict_outputs(&x).unwrap(),
            init.predict_outputs(&x).unwrap()
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_inputs(6, 60, 2);
        let labels: Vec<usize> = (0..60).map(|i| (i / 30) % 2).collect();
        let config = small_config(Mode::Classify);
        let run = || {
            MGBDTModel::fit(
                &[2, 4, 2],
                Mode::Classify,
                &x,
                Targets::Classes(&labels),
                &config,
                None,
            )
            .unwrap()
        };
        let (ma, ta) = run();
        let (mb, tb) = run();
        assert_eq!(ta, tb);
        assert_eq!(ma.predict_outputs(&x).unwrap(), mb.predict_outputs(&x).unwrap());
    }

    #[test]
    fn zero_update_budget_keeps_outputs() {
        let x = random_inputs(7, 30, 2);
        let y = Matrix::from_vec(30, 1, (0..30).map(|i| i as f64).collect());
        let mut config = small_config(Mode::Regress);
        config.k2 = 0;
        config.linear_steps = 0;
        config.epochs = 2;
        let (model, _) =
            MGBDTModel::fit(&[2, 3, 1], Mode::Regress, &x, Targets::Values(&y), &config, None)
                .unwrap();
        let init = MGBDTModel::initialize(&[2, 3, 1], Mode::Regress, &x, &config).unwrap();
        assert_eq!(
            model.predict_outputs(&x).unwrap(),
            init.predict_outputs(&x).unwrap()
        );
    }

    #[test]
    fn single_layer_regression_mse_non_increasing() {
        let x = random_inputs(8, 80, 3);
        let mut y = Matrix::zeros(80, 1);
        for r in 0..80 {
            y.set(r, 0, (x.get(r, 0) * 2.0).sin() + x.get(r, 1));
        }
        let mut config = TrainConfig::for_mode(Mode::Regress);
        config.epochs = 20;
        let (_, traces) =
            MGBDTModel::fit(&[3, 1], Mode::Regress, &x, Targets::Values(&y), &config, None)
                .unwrap();
        assert_eq!(traces.len(), 20);
        for w in traces.windows(2) {
            assert!(
                w[1].train_loss <= w[0].train_loss + 1e-12,
                "loss rose at epoch {}",
                w[1].epoch
            );
        }
    }

    #[test]
    fn single_layer_alpha_one_equals_plain_boosting() {
        // With alpha = 1 and squared loss, the epoch loop over one GBDT layer
        // is plain warm-started boosting toward y: continuing the initialized
        // model with E * K2 rounds must reproduce fit() bit for bit.
        let x = random_inputs(10, 50, 2);
        let mut y = Matrix::zeros(50, 1);
        for r in 0..50 {
            y.set(r, 0, x.get(r, 0) * 3.0 + (x.get(r, 1) * 2.0).cos());
        }
        let mut config = TrainConfig::for_mode(Mode::Regress);
        config.epochs = 4;
        config.k2 = 5;
        let (trained, _) =
            MGBDTModel::fit(&[2, 1], Mode::Regress, &x, Targets::Values(&y), &config, None)
                .unwrap();

        let direct = MGBDTModel::initialize(&[2, 1], Mode::Regress, &x, &config).unwrap();
        let mut forward = match direct.layer(0).forward() {
            ForwardMapping::Gbdt(g) => g.clone(),
            ForwardMapping::Linear(_) => unreachable!(),
        };
        forward
            .boost_more(&x, &y, config.epochs * config.k2, &config.forward_tree)
            .unwrap();

        let trained_forward = match trained.layer(0).forward() {
            ForwardMapping::Gbdt(g) => g,
            ForwardMapping::Linear(_) => unreachable!(),
        };
        assert_eq!(trained_forward, &forward);
        let probe = random_inputs(11, 40, 2);
        assert_eq!(
            trained.predict_outputs(&probe).unwrap(),
            forward.predict(&probe).unwrap()
        );
    }

    #[test]
    fn epochs_are_append_only() {
        let x = random_inputs(12, 40, 2);
        let labels: Vec<usize> = (0..40).map(|i| (x.get(i, 0) > 0.0) as usize).collect();
        let mut short = small_config(Mode::Classify);
        short.epochs = 2;
        let mut long = short.clone();
        long.epochs = 5;
        let dims = [2usize, 3, 2];
        let (a, _) =
            MGBDTModel::fit(&dims, Mode::Classify, &x, Targets::Classes(&labels), &short, None)
                .unwrap();
        let (b, _) =
            MGBDTModel::fit(&dims, Mode::Classify, &x, Targets::Classes(&labels), &long, None)
                .unwrap();
        let (fa, fb) = match (a.layer(0).forward(), b.layer(0).forward()) {
            (ForwardMapping::Gbdt(fa), ForwardMapping::Gbdt(fb)) => (fa, fb),
            _ => unreachable!(),
        };
        for dim in 0..fa.output_dim() {
            let (ta, tb) = (fa.trees(dim), fb.trees(dim));
            assert!(ta.len() < tb.len());
            assert_eq!(ta, &tb[..ta.len()], "dim {dim}: early trees were rewritten");
        }
    }

    #[test]
    fn stored_outputs_match_recomputed_forward() {
        let x = random_inputs(14, 30, 2);
        let y = Matrix::from_vec(30, 1, (0..30).map(|i| (i % 7) as f64).collect());
        let mut config = small_config(Mode::Regress);
        config.epochs = 2;
        let dims = [2usize, 3, 1];
        let (model, outputs, mut rng) =
            MGBDTModel::initialize_with_state(&dims, Mode::Regress, &x, &config).unwrap();
        let mut model = model;
        let mut outputs = outputs;
        model
            .run_epoch(&x, &Targets::Values(&y), &mut outputs, &config, &mut rng)
            .unwrap();
        for j in 1..=2 {
            let recomputed = model.layers[j - 1].forward_outputs(&outputs[j - 1]).unwrap();
            assert_eq!(outputs[j], recomputed);
        }
    }

    #[test]
    fn classify_circles_reaches_train_accuracy() {
        // Desk-scale version of the synthetic supervised run.
        let n = 1500;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            let radius = if class == 0 { 1.0 } else { 2.0 };
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let r = radius + rng.random::<f64>() * 0.2 - 0.1;
            rows.push(vec![r * theta.cos(), r * theta.sin()]);
            labels.push(class);
        }
        let x = Matrix::from_rows(&rows);
        let mut config = TrainConfig::for_mode(Mode::Classify);
        config.epochs = 30;
        let (_, traces) = MGBDTModel::fit(
            &[2, 5, 3, 2],
            Mode::Classify,
            &x,
            Targets::Classes(&labels),
            &config,
            None,
        )
        .unwrap();
        let final_acc = traces.last().unwrap().train_accuracy.unwrap();
        assert!(final_acc >= 0.95, "train accuracy {final_acc}");
    }

    #[test]
    fn autoencoder_memorizes_small_curve() {
        let n = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let t = rng.random::<f64>() * 3.0 * std::f64::consts::PI;
            rows.push(vec![t, t.sin(), t.cos()]);
        }
        let x = Matrix::from_rows(&rows);
        let mut config = TrainConfig::for_mode(Mode::Autoencode);
        config.epochs = 40;
        let (model, _) =
            MGBDTModel::fit(&[3, 5, 3], Mode::Autoencode, &x, Targets::None, &config, None)
                .unwrap();
        let recon = model.predict_outputs(&x).unwrap();
        let mse = recon
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / (n * 3) as f64;
        let mean_var =
            x.column_variances().iter().sum::<f64>() / 3.0;
        assert!(
            mse <= 0.05 * mean_var,
            "reconstruction mse {mse} vs variance budget {}",
            0.05 * mean_var
        );
    }

    #[test]
    fn predict_classes_and_row_order_invariance() {
        let x = random_inputs(15, 20, 3);
        let config = small_config(Mode::Classify);
        let model = MGBDTModel::initialize(&[3, 2], Mode::Classify, &x, &config).unwrap();
        // Zero weights: every logit ties at zero, argmax resolves to class 0.
        match model.predict(&x).unwrap() {
            Prediction::Classes(classes) => assert!(classes.iter().all(|&c| c == 0)),
            Prediction::Values(_) => panic!("classify mode returns classes"),
        }
        // Pointwise function: reversing rows reverses predictions.
        let reversed = x.select_rows(&(0..20).rev().collect::<Vec<_>>());
        let a = model.predict_outputs(&x).unwrap();
        let b = model.predict_outputs(&reversed).unwrap();
        for r in 0..20 {
            assert_eq!(a.row(r), b.row(19 - r));
        }
    }

    #[test]
    fn encode_contracts() {
        let x = random_inputs(16, 25, 3);
        let y = Matrix::from_vec(25, 2, (0..50).map(|i| i as f64).collect());
        let mut config = small_config(Mode::Regress);
        config.epochs = 1;
        let (model, _) =
            MGBDTModel::fit(&[3, 4, 2], Mode::Regress, &x, Targets::Values(&y), &config, None)
                .unwrap();
        assert_eq!(model.encode(&x, 0).unwrap(), x);
        assert_eq!(model.encode(&x, 1).unwrap().cols(), 4);
        assert_eq!(model.encode(&x, 2).unwrap(), model.predict_outputs(&x).unwrap());
        assert!(matches!(
            model.encode(&x, 3),
            Err(Error::LayerOutOfRange { index: 3, max: 2 })
        ));
    }

    #[test]
    fn isometric_inverse_stack_preserves_progress() {
        // Orthogonal forward map with its transpose as the exact inverse: any
        // local improvement below cannot hurt the layer above.
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let q = random_orthogonal(dim, &mut rng);
        for trial in 0..1000 {
            let z_below: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let o: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            // Random update that does not increase the local distance to the
            // pseudo-label below.
            let shrink = rng.random::<f64>();
            let dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let dist = l2(&sub(&o, &z_below));
            let dir_norm = l2(&dir).max(1e-12);
            let o_new: Vec<f64> = (0..dim)
                .map(|i| z_below[i] + dir[i] / dir_norm * shrink * dist)
                .collect();
            assert!(l2(&sub(&o_new, &z_below)) <= dist + 1e-12);

            let z_above = matvec(&q, &z_below);
            let before = l2(&sub(&matvec(&q, &o), &z_above));
            let after = l2(&sub(&matvec(&q, &o_new), &z_above));
            assert!(
                after <= before + 1e-9,
                "trial {trial}: {after} > {before}"
            );
        }
    }

    fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        // Gram-Schmidt over random Gaussian columns.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
            for u in &cols {
                let d = dot(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
            let n = l2(&v);
            if n > 1e-6 {
                v.iter_mut().for_each(|vi| *vi /= n);
                cols.push(v);
            }
        }
        // Rows of the matrix Q, with Q[i][j] = cols[j][i].
        (0..dim)
            .map(|i| (0..dim).map(|j| cols[j][i]).collect())
            .collect()
    }

    fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        m.iter().map(|row| dot(row, v)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    fn l2(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn inverse_training_improves_reconstruction() {
        // A monotone 1-D forward map; more inverse rounds must reconstruct
        // held-in points strictly better than few rounds.
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let x = Matrix::from_vec(n, 1, (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect());
        let mut y = Matrix::zeros(n, 1);
        for r in 0..n {
            y.set(r, 0, x.get(r, 0) * 2.0 + 1.0);
        }
        let forward = GBDTRegressor::fit(&x, &y, 40, 0.3, &TreeGrowthParams::default()).unwrap();
        let mut layer = Layer::gbdt(forward);
        let mut config = TrainConfig::for_mode(Mode::Regress);
        config.noise_std = 0.0;
        config.k1 = 5;

        let recon_error = |layer: &Layer| -> f64 {
            let fx = layer.forward_outputs(&x).unwrap();
            let back = layer.inverse().unwrap().predict(&fx).unwrap();
            back.data()
                .iter()
                .zip(x.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n as f64
        };

        let mut rng_a = ChaCha8Rng::seed_from_u64(0);
        update_inverse(&mut layer, &x, &config, &mut rng_a).unwrap();
        let after_5 = recon_error(&layer);
        for _ in 0..9 {
            update_inverse(&mut layer, &x, &config, &mut rng_a).unwrap();
        }
        let after_50 = recon_error(&layer);
        assert!(
            after_50 < after_5,
            "reconstruction did not improve: {after_5} -> {after_50}"
        );

        // K1 = 0 leaves the inverse untouched.
        let before = layer.clone();
        config.k1 = 0;
        update_inverse(&mut layer, &x, &config, &mut rng_a).unwrap();
        assert_eq!(layer, before);
    }

    #[test]
    fn update_inverse_rejects_linear_layer() {
        let mut layer = Layer::linear(LinearClassifier::new(3, 2, 0.1));
        let o = Matrix::zeros(4, 3);
        let config = TrainConfig::for_mode(Mode::Classify);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            update_inverse(&mut layer, &o, &config, &mut rng),
            Err(Error::NoInverseForLinearTop)
        ));
    }

    #[test]
    fn validation_errors() {
        let x = random_inputs(17, 10, 2);
        let config = small_config(Mode::Classify);
        assert!(MGBDTModel::initialize(&[2], Mode::Classify, &x, &config).is_err());
        assert!(MGBDTModel::initialize(&[2, 0, 2], Mode::Classify, &x, &config).is_err());
        assert!(MGBDTModel::initialize(&[3, 2], Mode::Classify, &x, &config).is_err());
        assert!(MGBDTModel::initialize(&[2, 5, 3], Mode::Autoencode, &x, &config).is_err());
        let labels = vec![0usize; 9];
        assert!(MGBDTModel::fit(
            &[2, 3, 2],
            Mode::Classify,
            &x,
            Targets::Classes(&labels),
            &config,
            None
        )
        .is_err());
        assert!(MGBDTModel::fit(&[2, 3, 2], Mode::Classify, &x, Targets::None, &config, None)
            .is_err());
    }
}
