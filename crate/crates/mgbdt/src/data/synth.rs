//! Synthetic datasets: two concentric circles for supervised runs and a 3-D
//! helix-like curve for the autoencoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ColumnKind, ColumnSpec, Dataset, LabelColumn, Labels, Schema};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn numeric_schema(names: &[&str], label: Option<LabelColumn>) -> Schema {
    Schema {
        columns: names
            .iter()
            .map(|n| ColumnSpec {
                name: n.to_string(),
                kind: ColumnKind::Numeric,
            })
            .collect(),
        label,
    }
}

/// Two concentric circles (radii 1 and 2) with Gaussian radial noise; the
/// label is the circle index. Class counts differ by at most one.
pub fn gen_circles(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("validated"));
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let mut radius = if class == 0 { 1.0 } else { 2.0 };
        if let Some(noise) = &noise {
            radius += noise.sample(&mut rng);
        }
        data.push(radius * theta.cos());
        data.push(radius * theta.sin());
        labels.push(class);
    }
    Ok(Dataset {
        features: Matrix::from_vec(n, 2, data),
        labels: Labels::Classes(labels),
        schema: numeric_schema(
            &["x0", "x1"],
            Some(LabelColumn::Classes {
                name: "label".into(),
                classes: vec!["0".into(), "1".into()],
            }),
        ),
    })
}

/// Points on the curve `(t, sin t, cos t)` for `t` uniform on `[0, 3*pi]`,
/// with small Gaussian jitter (std 0.01). Unlabeled.
pub fn gen_curve3d(n: usize, seed: u64) -> Result<Dataset> {
    gen_curve3d_with_jitter(n, 0.01, seed)
}

/// The same curve with an explicit jitter standard deviation.
pub fn gen_curve3d_with_jitter(n: usize, jitter_std: f64, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidParameter("need at least 1 point".into()));
    }
    if !(jitter_std >= 0.0) {
        return Err(Error::InvalidParameter("jitter_std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = (jitter_std > 0.0).then(|| Normal::new(0.0, jitter_std).expect("validated"));
    let mut data = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let t = rng.random::<f64>() * 3.0 * std::f64::consts::PI;
        let mut point = [t, t.sin(), t.cos()];
        if let Some(jitter) = &jitter {
            for v in &mut point {
                *v += jitter.sample(&mut rng);
            }
        }
        data.extend_from_slice(&point);
    }
    Ok(Dataset {
        features: Matrix::from_vec(n, 3, data),
        labels: Labels::None,
        schema: numeric_schema(&["x0", "x1", "x2"], None),
    })
}
