//! TOML model configuration.
//!
//! ```toml
//! family = "poisson"            # gaussian | poisson | binomial
//! gaussian_precision = 1.0      # gaussian only
//! data = "data.csv"             # CSV with a header row, relative to this file
//! response = "y"
//! trials = "n"                  # binomial only; defaults to one trial
//! covariates = ["x1", "x2"]
//! group = "g"                   # labels 1..=n_groups
//! n_groups = 10                 # defaults to the largest label
//! intercept = true
//!
//! [columns]                     # inline alternative to `data`
//! y = [1, 0, 4]
//!
//! [priors]
//! intercept_precision = 0.001
//! fixed_precision = 0.001       # scalar or one value per covariate
//! gamma_shape = 0.1
//! gamma_rate = 0.1
//! predictor_precision = 3269017.37
//!
//! [[constraints]]
//! sum_to_zero = "u"             # all random effects sum to `value`
//!
//! [[constraints]]
//! coefficients = { "u[1]" = 1.0, "(Intercept)" = -1.0 }
//! value = 0.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::family::Family;
use super::spec::{ConstraintRow, ModelSpec, Priors};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorsConfig {
    intercept_precision: Option<f64>,
    fixed_precision: Option<ScalarOrList>,
    gamma_shape: Option<f64>,
    gamma_rate: Option<f64>,
    predictor_precision: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintConfig {
    sum_to_zero: Option<String>,
    #[serde(default)]
    coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    value: f64,
}

/// Parsed configuration file, before data columns are resolved.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    family: String,
    gaussian_precision: Option<f64>,
    data: Option<PathBuf>,
    #[serde(default = "default_response")]
    response: String,
    trials: Option<String>,
    #[serde(default)]
    covariates: Vec<String>,
    group: Option<String>,
    n_groups: Option<usize>,
    #[serde(default = "default_true")]
    intercept: bool,
    #[serde(default)]
    columns: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    priors: PriorsConfig,
    #[serde(default)]
    constraints: Vec<ConstraintConfig>,
}

fn default_response() -> String {
    "y".into()
}

fn default_true() -> bool {
    true
}

fn read_csv_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate().take(headers.len()) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Config(format!("{}: row {} column {}: not a number: {field:?}", path.display(), r + 2, headers[c]))
            })?;
            cols[c].push(v);
        }
    }
    Ok(headers.into_iter().zip(cols).collect())
}

impl ModelConfig {
    /// Resolves data columns (relative paths against `base_dir`) into a
    /// validated [`ModelSpec`].
    pub fn into_spec(self, base_dir: &Path) -> Result<ModelSpec> {
        let family = match self.family.to_ascii_lowercase().as_str() {
            "gaussian" => Family::Gaussian {
                precision: self.gaussian_precision.ok_or_else(|| Error::Config("gaussian family needs gaussian_precision".into()))?,
            },
            "poisson" => Family::Poisson,
            "binomial" | "bernoulli" => Family::Binomial,
            other => return Err(Error::Config(format!("unknown family {other:?}"))),
        };
        let mut columns = self.columns;
        if let Some(data) = &self.data {
            let path = if data.is_absolute() { data.clone() } else { base_dir.join(data) };
            for (k, v) in read_csv_columns(&path)? {
                columns.entry(k).or_insert(v);
            }
        }
        let take = |name: &str| -> Result<Vec<f64>> {
            columns.get(name).cloned().ok_or_else(|| Error::Config(format!("missing column {name:?}")))
        };
        let mut spec = ModelSpec::new(family, take(&self.response)?);
        spec.intercept = self.intercept;
        if let Some(t) = &self.trials {
            spec.trials = take(t)?;
        }
        for c in &self.covariates {
            spec = spec.with_covariate(c, take(c)?);
        }
        if let Some(g) = &self.group {
            let raw = take(g)?;
            let mut labels = Vec::with_capacity(raw.len());
            for v in raw {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Config(format!("group label {v} is not a positive integer")));
                }
                labels.push(v as usize);
            }
            let m = self.n_groups.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
            spec = spec.with_groups(labels, m);
        }
        let mut priors = Priors::with_covariates(spec.covariates.len());
        let p = self.priors;
        if let Some(v) = p.intercept_precision {
            priors.intercept_precision = v;
        }
        match p.fixed_precision {
            Some(ScalarOrList::Scalar(v)) => priors.fixed_precision.iter_mut().for_each(|t| *t = v),
            Some(ScalarOrList::List(v)) => priors.fixed_precision = v,
            None => {}
        }
        if let Some(v) = p.gamma_shape {
            priors.gamma_shape = v;
        }
        if let Some(v) = p.gamma_rate {
            priors.gamma_rate = v;
        }
        if let Some(v) = p.predictor_precision {
            priors.predictor_precision = v;
        }
        spec.priors = priors;

        let names = spec.latent_names();
        let dim = spec.dim();
        for c in self.constraints {
            let mut coefficients = vec![0.0; dim];
            if let Some(block) = &c.sum_to_zero {
                if block != "u" || spec.n_random() == 0 {
                    return Err(Error::Config(format!("sum_to_zero = {block:?} needs a random effect \"u\"")));
                }
                let off = spec.random_offset();
                coefficients[off..off + spec.n_random()].iter_mut().for_each(|v| *v = 1.0);
            }
            for (name, v) in &c.coefficients {
                let j = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Config(format!("constraint refers to unknown latent {name:?}")))?;
                coefficients[j] += v;
            }
            spec.constraints.push(ConstraintRow { coefficients, value: c.value });
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ModelSpec> {
    let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.into_spec(base_dir)
}

pub fn load_config(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_config_roundtrip() {
        let text = r#"
family = "poisson"
covariates = ["x"]
group = "g"

[columns]
y = [1, 0, 4, 2]
x = [0.1, 0.2, 0.3, 0.4]
g = [1, 2, 1, 2]

[priors]
fixed_precision = 0.01
gamma_shape = 1.0

[[constraints]]
sum_to_zero = "u"
"#;
        let spec = parse_config(text, Path::new(".")).unwrap();
        assert_eq!(spec.dim(), 4 + 2 + 2);
        assert_eq!(spec.priors.fixed_precision, vec![0.01]);
        assert_eq!(spec.priors.gamma_shape, 1.0);
        assert_eq!(spec.priors.gamma_rate, 0.1);
        assert_eq!(spec.constraints[0].coefficients, vec![0., 0., 0., 0., 0., 0., 1., 1.]);
    }

    #[test]
    fn csv_data_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "y,n\n1,3\n2,2\n0,5\n").unwrap();
        let text = "family = \"binomial\"\ndata = \"d.csv\"\ntrials = \"n\"\n";
        let spec = parse_config(text, dir.path()).unwrap();
        assert_eq!(spec.trials, vec![3.0, 2.0, 5.0]);
        assert!(parse_config("family = \"weibull\"\n[columns]\ny=[1]\n", dir.path()).is_err());
        assert!(parse_config("family = \"poisson\"\n[columns]\ny=[-1]\n", dir.path()).is_err());
        assert!(parse_config("family = \"poisson\"\nbogus = 1\n[columns]\ny=[1]\n", dir.path()).is_err());
    }
}
