//! Experiment configuration: a TOML file with nested sections.
//!
//! ```toml
//! schema_version = 1
//!
//! [manifold]
//! dimension = 1
//! lengths = [6.283185307179586]
//! grid_sizes = [2048]
//!
//! [params]
//! fiber_dim = 3
//! eps = [0.2, 0.1, 0.05]
//! curvature = 0.0          # constant hook; 0 on flat tori
//!
//! [flow]
//! step = 0.5
//! stop_delta = 1e-12
//! max_steps = 20000
//!
//! [seeds]
//! strategy = "net"         # "net" | "random" | "explicit"
//! count = 4
//! random_seed = 42
//! # r_cut = 1.5            # optional cutoff override
//! # pairs = [[[1.0], [4.1]]]  # explicit strategy: [x, y] coordinate pairs
//!
//! [tolerances]
//! solver = 1e-10
//! cluster_energy = 1e-3
//! cluster_shape = 0.05
//! eta = 0.9
//! conc_factor = 10.0
//!
//! [limits]
//! allow_coarse_grid = false
//!
//! [output]
//! # dir = "runs/circle"
//! keep_traces = false
//! ```
//!
//! The resolution rule `h_i <= eps/4` keeps concentration widths resolved
//! and is enforced for every eps in the list; `allow_coarse_grid` opts out
//! for deliberately coarse counting experiments.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::EpsParams;
use crate::manifold::TorusManifold;

/// Version stamp embedded in configs, archives and snapshot sidecars.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSection {
    pub dimension: usize,
    pub lengths: Vec<f64>,
    pub grid_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSection {
    pub fiber_dim: usize,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSection {
    pub step: f64,
    pub stop_delta: f64,
    pub max_steps: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            step: 0.5,
            stop_delta: 1e-12,
            max_steps: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedStrategy {
    /// Bubble centers on a separated net, pairs by decreasing separation.
    Net,
    /// Uniformly random admissible pairs.
    Random,
    /// Pairs listed verbatim in the config.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedsSection {
    pub strategy: SeedStrategy,
    /// Number of seed pairs per eps.
    pub count: usize,
    pub random_seed: u64,
    /// Optional cutoff-radius override; per pair it is further capped at
    /// half the center separation so supports stay disjoint.
    pub r_cut: Option<f64>,
    /// Explicit `[x, y]` coordinate pairs.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Default for SeedsSection {
    fn default() -> Self {
        SeedsSection {
            strategy: SeedStrategy::Net,
            count: 4,
            random_seed: 42,
            r_cut: None,
            pairs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancesSection {
    pub solver: f64,
    pub cluster_energy: f64,
    pub cluster_shape: f64,
    pub eta: f64,
    /// Concentration radius factor: centers are localized at `eps * conc_factor`.
    pub conc_factor: f64,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        TolerancesSection {
            solver: 1e-10,
            cluster_energy: 1e-3,
            cluster_shape: 0.05,
            eta: 0.9,
            conc_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitsSection {
    pub allow_coarse_grid: bool,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub keep_traces: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub manifold: ManifoldSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub tolerances: TolerancesSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_manifold(&self) -> Result<Arc<TorusManifold>> {
        TorusManifold::new(self.manifold.lengths.clone(), self.manifold.grid_sizes.clone())
    }

    pub fn eps_params(&self, eps: f64) -> Result<EpsParams> {
        EpsParams::curved(
            self.manifold.dimension,
            self.params.fiber_dim,
            eps,
            self.params.curvature,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.manifold.dimension != self.manifold.lengths.len() {
            return Err(Error::InvalidConfig(format!(
                "dimension {} does not match {} period lengths",
                self.manifold.dimension,
                self.manifold.lengths.len()
            )));
        }
        let manifold = self.build_manifold()?;
        if self.params.eps.is_empty() {
            return Err(Error::InvalidConfig("eps list must not be empty".into()));
        }
        for &eps in &self.params.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(format!("bad eps {eps}")));
            }
            self.eps_params(eps)?;
            let h_max = manifold.max_spacing();
            if !self.limits.allow_coarse_grid && h_max > eps / 4.0 {
                return Err(Error::InvalidConfig(format!(
                    "resolution rule violated: spacing {h_max} > eps/4 = {} \
                     (set limits.allow_coarse_grid to override)",
                    eps / 4.0
                )));
            }
        }
        if !(self.flow.step > 0.0 && self.flow.step <= 1.0) || !(self.flow.stop_delta > 0.0) {
            return Err(Error::InvalidConfig("bad flow section".into()));
        }
        let t = &self.tolerances;
        if !(t.solver > 0.0 && t.eta > 0.5 && t.eta < 1.0 && t.conc_factor > 0.0) {
            return Err(Error::InvalidConfig("bad tolerances section".into()));
        }
        match self.seeds.strategy {
            SeedStrategy::Explicit => {
                if self.seeds.pairs.is_empty() {
                    return Err(Error::InvalidConfig(
                        "explicit seed strategy needs a pairs list".into(),
                    ));
                }
                for (x, y) in &self.seeds.pairs {
                    if x.len() != self.manifold.dimension || y.len() != self.manifold.dimension {
                        return Err(Error::InvalidConfig(
                            "explicit pair dimension mismatch".into(),
                        ));
                    }
                }
            }
            SeedStrategy::Net | SeedStrategy::Random => {
                if self.seeds.count == 0 {
                    return Err(Error::InvalidConfig("seed count must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        r#"
            schema_version = 1
            [manifold]
            dimension = 1
            lengths = [6.283185307179586]
            grid_sizes = [2048]
            [params]
            fiber_dim = 3
            eps = [0.2, 0.1, 0.05]
        "#
        .to_string()
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let config = ExperimentConfig::from_toml_str(&base_toml()).unwrap();
        assert_eq!(config.flow.max_steps, 20_000);
        assert_eq!(config.seeds.strategy, SeedStrategy::Net);
        assert_eq!(config.tolerances.eta, 0.9);
        assert!(!config.limits.allow_coarse_grid);
        let params = config.eps_params(0.05).unwrap();
        assert_eq!(params.p(), 4.0);
    }

    #[test]
    fn roundtrips_through_toml() {
        let config = ExperimentConfig::from_toml_str(&base_toml()).unwrap();
        let text = config.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let text = base_toml().replace("schema_version = 1", "schema_version = 99");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn enforces_resolution_rule_with_override() {
        let text = base_toml().replace("grid_sizes = [2048]", "grid_sizes = [64]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let with_override = format!("{text}\n[limits]\nallow_coarse_grid = true\n");
        assert!(ExperimentConfig::from_toml_str(&with_override).is_ok());
    }

    #[test]
    fn rejects_empty_eps_and_bad_eta() {
        let text = base_toml().replace("eps = [0.2, 0.1, 0.05]", "eps = []");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{}\n[tolerances]\neta = 0.4\n", base_toml());
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }
}
