//! C ABI for the mgbdt library.
//!
//! Models are opaque handles created by `mgbdt_train_*` or
//! `mgbdt_model_load` and released with `mgbdt_model_free`. Every fallible
//! call returns an [`MgbdtStatus`]; on failure a human-readable message is
//! available from `mgbdt_last_error_message` until the next failing call on
//! the same thread. Matrices cross the boundary as dense row-major `double`
//! buffers with explicit row/column counts, and callers always pass the
//! capacity of output buffers so the library can refuse short ones.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mgbdt::persist::{load_model, save_model, SavedModel};
use mgbdt::{Error, MGBDTModel, Matrix, Mode, Prediction, Targets, TrainConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgbdtStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A parameter value was rejected (bad shape argument, wrong mode for
    /// the call, undersized output buffer, layer index out of range).
    InvalidArgument = 2,
    /// Input data and model shapes disagree, or data was empty/non-finite.
    Dimension = 3,
    /// File system failure.
    Io = 4,
    /// The model file could not be parsed or has an unsupported version.
    Parse = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Training objective of a model.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgbdtMode {
    Classify = 0,
    Regress = 1,
    Autoencode = 2,
}

impl From<Mode> for MgbdtMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Classify => MgbdtMode::Classify,
            Mode::Regress => MgbdtMode::Regress,
            Mode::Autoencode => MgbdtMode::Autoencode,
        }
    }
}

impl From<MgbdtMode> for Mode {
    fn from(m: MgbdtMode) -> Self {
        match m {
            MgbdtMode::Classify => Mode::Classify,
            MgbdtMode::Regress => Mode::Regress,
            MgbdtMode::Autoencode => Mode::Autoencode,
        }
    }
}

/// Opaque trained model.
pub struct MgbdtModel {
    saved: SavedModel,
}

/// Training hyper-parameters. Get defaults from
/// `mgbdt_train_options_default` and override fields as needed. `alpha` may
/// be NaN to request the per-mode default (0.1 for classification, 1.0
/// otherwise).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MgbdtTrainOptions {
    pub epochs: usize,
    /// Top pseudo-label step size; NaN selects the per-mode default.
    pub alpha: f64,
    /// Boosting shrinkage in (0, 1].
    pub shrinkage: f64,
    /// Boosting rounds per epoch for inverse mappings.
    pub k1: usize,
    /// Boosting rounds per epoch for forward mappings.
    pub k2: usize,
    /// Noise std injected into inverse-mapping training data.
    pub noise_std: f64,
    /// Maximum depth of forward/inverse trees.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Std of the Gaussian targets used to initialize the stack.
    pub init_noise_std: f64,
    /// Gradient-descent steps per epoch for the linear top layer.
    pub linear_steps: usize,
    pub linear_step_size: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> MgbdtStatus {
    match err {
        Error::Io { .. } | Error::Csv { .. } => MgbdtStatus::Io,
        Error::ModelFormat { .. } | Error::UnsupportedVersion(_) => MgbdtStatus::Parse,
        Error::InvalidParameter(_) | Error::LayerOutOfRange { .. } => MgbdtStatus::InvalidArgument,
        _ => MgbdtStatus::Dimension,
    }
}

fn fail(err: &Error) -> MgbdtStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(message: &str) -> MgbdtStatus {
    set_error(message);
    MgbdtStatus::InvalidArgument
}

fn null_arg(name: &str) -> MgbdtStatus {
    set_error(&format!("{name} must not be null"));
    MgbdtStatus::NullArgument
}

fn guarded(body: impl FnOnce() -> MgbdtStatus) -> MgbdtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            MgbdtStatus::Panic
        }
    }
}

/// Library version as a static UTF-8 string.
#[no_mangle]
pub extern "C" fn mgbdt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mgbdt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, MgbdtStatus> {
    if ptr.is_null() {
        return Err(null_arg("path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(invalid("path is not valid UTF-8")),
    }
}

unsafe fn matrix_from(
    features: *const f64,
    rows: usize,
    cols: usize,
) -> Result<Matrix, MgbdtStatus> {
    if features.is_null() {
        return Err(null_arg("features"));
    }
    let Some(len) = rows.checked_mul(cols) else {
        return Err(invalid("rows * cols overflows"));
    };
    let data = std::slice::from_raw_parts(features, len);
    Ok(Matrix::from_vec(rows, cols, data.to_vec()))
}

fn config_from(options: &MgbdtTrainOptions, mode: Mode) -> TrainConfig {
    let mut config = TrainConfig::for_mode(mode);
    config.epochs = options.epochs;
    if !options.alpha.is_nan() {
        config.alpha = options.alpha;
    }
    config.shrinkage = options.shrinkage;
    config.k1 = options.k1;
    config.k2 = options.k2;
    config.noise_std = options.noise_std;
    config.forward_tree.max_depth = options.max_depth;
    config.forward_tree.min_samples_leaf = options.min_samples_leaf;
    config.inverse_tree.max_depth = options.max_depth;
    config.inverse_tree.min_samples_leaf = options.min_samples_leaf;
    config.init_noise_std = options.init_noise_std;
    config.linear_steps = options.linear_steps;
    config.linear_step_size = options.linear_step_size;
    config.seed = options.seed;
    config
}

/// Defaults for the given mode (alpha resolved, not NaN).
#[no_mangle]
pub extern "C" fn mgbdt_train_options_default(mode: MgbdtMode) -> MgbdtTrainOptions {
    let config = TrainConfig::for_mode(mode.into());
    MgbdtTrainOptions {
        epochs: config.epochs,
        alpha: config.alpha,
        shrinkage: config.shrinkage,
        k1: config.k1,
        k2: config.k2,
        noise_std: config.noise_std,
        max_depth: config.forward_tree.max_depth,
        min_samples_leaf: config.forward_tree.min_samples_leaf,
        init_noise_std: config.init_noise_std,
        linear_steps: config.linear_steps,
        linear_step_size: config.linear_step_size,
        seed: config.seed,
    }
}

unsafe fn finish_train(
    dims: *const usize,
    dims_len: usize,
    mode: Mode,
    x: Matrix,
    targets: Targets<'_>,
    options: *const MgbdtTrainOptions,
    out: *mut *mut MgbdtModel,
) -> MgbdtStatus {
    if dims.is_null() {
        return null_arg("dims");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let dims = std::slice::from_raw_parts(dims, dims_len);
    let options = if options.is_null() {
        mgbdt_train_options_default(mode.into())
    } else {
        *options
    };
    let config = config_from(&options, mode);
    match MGBDTModel::fit(dims, mode, &x, targets, &config, None) {
        Ok((model, _traces)) => {
            let handle = Box::new(MgbdtModel {
                saved: SavedModel {
                    model,
                    schema: None,
                    config,
                },
            });
            *out = Box::into_raw(handle);
            MgbdtStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Train a classifier (GBDT hidden layers, linear softmax top layer).
/// `dims` runs input width -> hidden widths -> class count; `labels` holds
/// one class index per row. `options` may be null for defaults.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_train_classify(
    options: *const MgbdtTrainOptions,
    dims: *const usize,
    dims_len: usize,
    features: *const f64,
    rows: usize,
    cols: usize,
    labels: *const usize,
    out: *mut *mut MgbdtModel,
) -> MgbdtStatus {
    guarded(|| {
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if labels.is_null() {
            return null_arg("labels");
        }
        let labels = std::slice::from_raw_parts(labels, rows);
        finish_train(
            dims,
            dims_len,
            Mode::Classify,
            x,
            Targets::Classes(labels),
            options,
            out,
        )
    })
}

/// Train a regressor (GBDT layers throughout, squared loss). `targets` is a
/// row-major `rows x target_cols` buffer and `target_cols` must equal the
/// last entry of `dims`.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_train_regress(
    options: *const MgbdtTrainOptions,
    dims: *const usize,
    dims_len: usize,
    features: *const f64,
    rows: usize,
    cols: usize,
    targets: *const f64,
    target_cols: usize,
    out: *mut *mut MgbdtModel,
) -> MgbdtStatus {
    guarded(|| {
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let y = match matrix_from(targets, rows, target_cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        finish_train(
            dims,
            dims_len,
            Mode::Regress,
            x,
            Targets::Values(&y),
            options,
            out,
        )
    })
}

/// Train an autoencoder: the input is its own target and the first and last
/// entries of `dims` must match `cols`.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_train_autoencode(
    options: *const MgbdtTrainOptions,
    dims: *const usize,
    dims_len: usize,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut MgbdtModel,
) -> MgbdtStatus {
    guarded(|| {
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        finish_train(dims, dims_len, Mode::Autoencode, x, Targets::None, options, out)
    })
}

/// Load a model file written by `mgbdt_model_save` or the `mgbdt` CLI.
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_load(
    path: *const c_char,
    out: *mut *mut MgbdtModel,
) -> MgbdtStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_model(&path) {
            Ok(saved) => {
                *out = Box::into_raw(Box::new(MgbdtModel { saved }));
                MgbdtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Write the model (with its training config and, if present, its column
/// schema) to a model file.
///
/// # Safety
/// `model` must be a live handle; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_save(
    model: *const MgbdtModel,
    path: *const c_char,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match save_model(&path, &handle.saved) {
            Ok(()) => MgbdtStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_free(model: *mut MgbdtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trained layers (M). Zero if `model` is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_num_layers(model: *const MgbdtModel) -> usize {
    model.as_ref().map_or(0, |h| h.saved.model.num_layers())
}

/// Length of the dimension signature (M + 1). Zero if `model` is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_num_dims(model: *const MgbdtModel) -> usize {
    model.as_ref().map_or(0, |h| h.saved.model.dims().len())
}

/// Copy the dimension signature d_0..d_M into `out`, which holds `len`
/// entries; `len` must equal `mgbdt_model_num_dims`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_dims(
    model: *const MgbdtModel,
    out: *mut usize,
    len: usize,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let dims = handle.saved.model.dims();
        if len != dims.len() {
            return invalid(&format!("out holds {len} entries but {} are needed", dims.len()));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(dims);
        MgbdtStatus::Ok
    })
}

/// Training mode of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_mode(
    model: *const MgbdtModel,
    out: *mut MgbdtMode,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        if out.is_null() {
            return null_arg("out");
        }
        *out = handle.saved.model.mode().into();
        MgbdtStatus::Ok
    })
}

/// Full forward pass. `features` is row-major `rows x cols` with `cols`
/// equal to d_0; `out` must hold `out_len == rows * d_M` doubles and is
/// filled row-major (logits in classify mode).
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_predict(
    model: *const MgbdtModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out.is_null() {
            return null_arg("out");
        }
        let dims = handle.saved.model.dims();
        let needed = rows * dims[dims.len() - 1];
        if out_len != needed {
            return invalid(&format!("out holds {out_len} doubles but {needed} are needed"));
        }
        match handle.saved.model.predict_outputs(&x) {
            Ok(outputs) => {
                std::slice::from_raw_parts_mut(out, needed).copy_from_slice(outputs.data());
                MgbdtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Predicted class index per row (classification models only). `out` must
/// hold `out_len == rows` entries.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_predict_classes(
    model: *const MgbdtModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut usize,
    out_len: usize,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        if handle.saved.model.mode() != Mode::Classify {
            return invalid("class prediction needs a classification model");
        }
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out.is_null() {
            return null_arg("out");
        }
        if out_len != rows {
            return invalid(&format!("out holds {out_len} entries but {rows} are needed"));
        }
        match handle.saved.model.predict(&x) {
            Ok(Prediction::Classes(classes)) => {
                std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&classes);
                MgbdtStatus::Ok
            }
            Ok(Prediction::Values(_)) => unreachable!("classify mode yields classes"),
            Err(e) => fail(&e),
        }
    })
}

/// Representation at layer `layer` (0 = input, M = final output). `out`
/// must hold `out_len == rows * d_layer` doubles, filled row-major.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mgbdt_model_encode(
    model: *const MgbdtModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    layer: usize,
    out: *mut f64,
    out_len: usize,
) -> MgbdtStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            return null_arg("model");
        };
        let x = match matrix_from(features, rows, cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out.is_null() {
            return null_arg("out");
        }
        let dims = handle.saved.model.dims();
        if layer >= dims.len() {
            return fail(&Error::LayerOutOfRange {
                index: layer,
                max: dims.len() - 1,
            });
        }
        let needed = rows * dims[layer];
        if out_len != needed {
            return invalid(&format!("out holds {out_len} doubles but {needed} are needed"));
        }
        match handle.saved.model.encode(&x, layer) {
            Ok(representation) => {
                std::slice::from_raw_parts_mut(out, needed).copy_from_slice(representation.data());
                MgbdtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
