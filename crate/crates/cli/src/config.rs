//! JSON run configuration.

use std::path::{Path, PathBuf};

use mdaux::hierarchy::ParentSpec;
use mdaux::{Scheme, SimplexVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A scalar shared by every parent, or one value per parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerParent {
    Shared(f64),
    Each(Vec<f64>),
}

/// `γ`: a scalar, a shared K-vector, or a J×K matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanHyper {
    Shared(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub gamma: MeanHyper,
    pub a: PerParent,
    pub r: PerParent,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            gamma: MeanHyper::Shared(1.0),
            a: PerParent::Shared(1.0),
            r: PerParent::Shared(1.0),
        }
    }
}

/// Fixed generating parameters for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub means: Vec<Vec<f64>>,
    pub precisions: Vec<f64>,
}

fn default_sweeps() -> usize {
    200
}

fn default_n_per_group() -> usize {
    100
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub parents: usize,
    pub categories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default = "default_n_per_group")]
    pub n_per_group: usize,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub recompute_interval: usize,
    #[serde(default)]
    pub collapse_means: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_links: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_scheme() -> Scheme {
    Scheme::Expectation
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            let msg = format!("{}: {e}", path.display());
            match e.classify() {
                serde_json::error::Category::Data => CliError::Config(msg),
                _ => CliError::Parse(msg),
            }
        })
    }

    /// Checks everything that does not depend on the data file.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.parents == 0 || self.categories == 0 {
            return bad("parents and categories must be positive".into());
        }
        if self.groups == Some(0) {
            return bad("groups must be positive".into());
        }
        if self.recompute_interval == 0 {
            return bad("recompute_interval must be positive".into());
        }
        if self.burn_in > self.sweeps {
            return bad(format!("burn_in {} exceeds sweeps {}", self.burn_in, self.sweeps));
        }
        if self.scheme == Scheme::Gibbs && self.seed.is_none() {
            return bad("seed is required for the gibbs scheme".into());
        }
        if let Some(links) = &self.group_links {
            for (d, l) in links.iter().enumerate() {
                if l.is_empty() || l.iter().any(|&j| j >= self.parents) {
                    return bad(format!("group_links[{d}] = {l:?} must name parents in 0..{}", self.parents));
                }
            }
        }
        self.parent_priors().map(|_| ())
    }

    fn per_parent(&self, name: &str, v: &PerParent) -> Result<Vec<f64>> {
        match v {
            PerParent::Shared(x) => Ok(vec![*x; self.parents]),
            PerParent::Each(xs) if xs.len() == self.parents => Ok(xs.clone()),
            PerParent::Each(xs) => Err(CliError::Config(format!(
                "hyper.{name} has {} entries for {} parents",
                xs.len(),
                self.parents
            ))),
        }
    }

    fn gamma_rows(&self) -> Result<Vec<Vec<f64>>> {
        let k = self.categories;
        let rows = match &self.hyper.gamma {
            MeanHyper::Shared(x) => vec![vec![*x; k]; self.parents],
            MeanHyper::Vector(v) => vec![v.clone(); self.parents],
            MeanHyper::Matrix(m) => m.clone(),
        };
        if rows.len() != self.parents || rows.iter().any(|r| r.len() != k) {
            return Err(CliError::Config(format!("hyper.gamma must be a scalar, a {k}-vector or a {}x{k} matrix", self.parents)));
        }
        Ok(rows)
    }

    /// One parent per row at its prior means.
    pub fn parent_priors(&self) -> Result<Vec<ParentSpec>> {
        let gamma = self.gamma_rows()?;
        let a = self.per_parent("a", &self.hyper.a)?;
        let r = self.per_parent("r", &self.hyper.r)?;
        gamma
            .into_iter()
            .zip(a.into_iter().zip(r))
            .map(|(g, (a, r))| ParentSpec::from_hyper(g, a, r).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    /// Parents carrying the configured truth in place of the prior means.
    pub fn truth_parents(&self, truth: &TruthConfig) -> Result<Vec<ParentSpec>> {
        let priors = self.parent_priors()?;
        if truth.means.len() != self.parents || truth.precisions.len() != self.parents {
            return Err(CliError::Config(format!("truth must describe {} parents", self.parents)));
        }
        priors
            .into_iter()
            .zip(truth.means.iter().zip(&truth.precisions))
            .map(|(p, (m, &b))| {
                if m.len() != self.categories {
                    return Err(CliError::Config(format!("truth mean {m:?} needs {} entries", self.categories)));
                }
                let mean = SimplexVector::new(m.clone()).map_err(|e| CliError::Config(e.to_string()))?;
                let (a, r) = p.precision_hyper;
                ParentSpec::new(mean, b, p.mean_hyper, a, r).map_err(|e| CliError::Config(e.to_string()))
            })
            .collect()
    }

    pub fn links_for(&self, d: usize) -> Option<Vec<usize>> {
        self.group_links.as_ref().map(|l| l[d].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfig {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn defaults_fill_everything_but_dimensions() {
        let c = parse(r#"{"parents": 2, "categories": 3}"#);
        assert_eq!(c.scheme, Scheme::Expectation);
        assert_eq!(c.sweeps, 200);
        assert_eq!(c.recompute_interval, 1);
        c.validate().unwrap();
        let p = c.parent_priors().unwrap();
        assert_eq!(p[1].mean.theta(), &[1.0 / 3.0; 3]);
        assert_eq!(p[1].precision, 1.0);
    }

    #[test]
    fn gibbs_needs_a_seed() {
        let c = parse(r#"{"parents": 1, "categories": 2, "scheme": "gibbs"}"#);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn hyper_shapes() {
        let c = parse(r#"{"parents": 2, "categories": 2, "hyper": {"gamma": [[1, 3], [2, 2]], "a": [2, 4], "r": 2}}"#);
        let p = c.parent_priors().unwrap();
        assert_eq!(p[0].mean.theta(), &[0.25, 0.75]);
        assert_eq!(p[1].precision, 2.0);
        let bad = parse(r#"{"parents": 2, "categories": 2, "hyper": {"a": [1, 2, 3]}}"#);
        assert!(bad.validate().is_err());
        let neg = parse(r#"{"parents": 1, "categories": 2, "hyper": {"gamma": -1}}"#);
        assert!(neg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_links() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"parents": 1, "categories": 2, "sweep": 3}"#).is_err());
        let c = parse(r#"{"parents": 2, "categories": 2, "group_links": [[0], [2]]}"#);
        assert!(c.validate().is_err());
    }
}
