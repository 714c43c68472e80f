//! Run configuration shared by the command-line front end: the
//! `a->b->...->z` structure syntax and flat `key = value` config files,
//! with command-line flags overriding file values.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trainer::Mode;

/// Everything `mgbdt train` can be told, all optional until merge time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub label: Option<String>,
    pub categorical: Vec<String>,
    pub structure: Option<Vec<usize>>,
    pub mode: Option<Mode>,
    pub epochs: Option<usize>,
    pub alpha: Option<f64>,
    pub noise_std: Option<f64>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub curves: Option<PathBuf>,
}

impl RunConfig {
    /// Fields set on `self` win over `base` (flags override file values).
    pub fn merged_over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            data: self.data.or(base.data),
            label: self.label.or(base.label),
            categorical: if self.categorical.is_empty() {
                base.categorical
            } else {
                self.categorical
            },
            structure: self.structure.or(base.structure),
            mode: self.mode.or(base.mode),
            epochs: self.epochs.or(base.epochs),
            alpha: self.alpha.or(base.alpha),
            noise_std: self.noise_std.or(base.noise_std),
            k1: self.k1.or(base.k1),
            k2: self.k2.or(base.k2),
            gamma: self.gamma.or(base.gamma),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            test: self.test.or(base.test),
            curves: self.curves.or(base.curves),
        }
    }

    /// Parse a flat `key = value` file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    number + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                Error::InvalidParameter(format!(
                    "{}:{}: cannot parse `{value}` as {what} for `{key}`",
                    path.display(),
                    number + 1
                ))
            };
            match key {
                "data" => config.data = Some(PathBuf::from(value)),
                "label" => config.label = Some(value.to_string()),
                "categorical" => {
                    config.categorical = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                "structure" => config.structure = Some(parse_structure(value)?),
                "mode" => config.mode = Some(value.parse()?),
                "epochs" => config.epochs = Some(value.parse().map_err(|_| bad("an integer"))?),
                "alpha" => config.alpha = Some(value.parse().map_err(|_| bad("a number"))?),
                "noise_std" => {
                    config.noise_std = Some(value.parse().map_err(|_| bad("a number"))?)
                }
                "k1" => config.k1 = Some(value.parse().map_err(|_| bad("an integer"))?),
                "k2" => config.k2 = Some(value.parse().map_err(|_| bad("an integer"))?),
                "gamma" => config.gamma = Some(value.parse().map_err(|_| bad("a number"))?),
                "seed" => config.seed = Some(value.parse().map_err(|_| bad("an integer"))?),
                "out" => config.out = Some(PathBuf::from(value)),
                "test" => config.test = Some(PathBuf::from(value)),
                "curves" => config.curves = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "{}:{}: unknown config key `{other}`",
                        path.display(),
                        number + 1
                    )))
                }
            }
        }
        Ok(config)
    }
}

/// Parse the `a->b->...->z` layer-width syntax.
pub fn parse_structure(text: &str) -> Result<Vec<usize>> {
    let dims: Result<Vec<usize>> = text
        .split("->")
        .map(|part| {
            let part = part.trim();
            part.parse::<usize>()
                .ok()
                .filter(|&d| d >= 1)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "structure `{text}`: `{part}` is not a positive width"
                    ))
                })
        })
        .collect();
    let dims = dims?;
    if dims.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "structure `{text}` needs at least input and output widths"
        )));
    }
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn structure_syntax() {
        assert_eq!(parse_structure("8->16->16->10").unwrap(), vec![8, 16, 16, 10]);
        assert_eq!(parse_structure("2 -> 5 -> 3 -> 2").unwrap(), vec![2, 5, 3, 2]);
        assert!(parse_structure("8").is_err());
        assert!(parse_structure("8->0->2").is_err());
        assert!(parse_structure("8->x->2").is_err());
    }

    #[test]
    fn config_file_and_flag_override() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "# income run\ndata = train.csv\nlabel = income\nstructure = 113->128->128->2\nmode = classify\nepochs = 40\nnoise_std = 0.3\nseed = 7\ncategorical = workclass, education"
        )
        .unwrap();
        let file = RunConfig::from_file(f.path()).unwrap();
        assert_eq!(file.structure.as_deref(), Some(&[113, 128, 128, 2][..]));
        assert_eq!(file.mode, Some(Mode::Classify));
        assert_eq!(file.categorical, vec!["workclass", "education"]);

        let flags = RunConfig {
            epochs: Some(5),
            ..Default::default()
        };
        let merged = flags.merged_over(file.clone());
        assert_eq!(merged.epochs, Some(5));
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.data.as_deref(), Some(Path::new("train.csv")));
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "depth = 3").unwrap();
        let err = RunConfig::from_file(f.path()).unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }
}
