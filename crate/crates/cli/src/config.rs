//! Experiment configuration: flag parsing, JSON override, lossless
//! round-trips.

use bergman_lab::measures::Resolution;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Quadrature resolution as exposed on the command line.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ResolutionConfig {
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub refine_depth: usize,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            radial_nodes: 32,
            angular_nodes: 256,
            refine_depth: 24,
        }
    }
}

impl ResolutionConfig {
    pub fn to_resolution(self) -> Resolution {
        Resolution {
            radial_base: self.radial_nodes,
            radial_depth: self.refine_depth,
            panel_nodes: 4,
            angular_base: self.angular_nodes,
            angular_panel_nodes: 4,
        }
    }
}

/// Fully resolved run configuration; serialized verbatim into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub symbol: String,
    pub weight: String,
    pub alpha: f64,
    /// Box-ratio exponent; `None` means `α + 2`.
    pub gamma: Option<f64>,
    pub resolution: ResolutionConfig,
    pub grid_m: usize,
    pub scales_k: usize,
    pub trunc_n: usize,
    pub stages: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            symbol: "lens".into(),
            weight: "one".into(),
            alpha: 0.0,
            gamma: None,
            resolution: ResolutionConfig::default(),
            grid_m: 512,
            scales_k: 14,
            trunc_n: 256,
            stages: 4,
            out: PathBuf::from("runs"),
            seed: 0,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn gamma_or_default(&self) -> f64 {
        self.gamma.unwrap_or(self.alpha + 2.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.alpha <= -1.0 {
            return Err(format!("alpha = {} must exceed -1", self.alpha));
        }
        if self.gamma_or_default() <= 1.0 {
            return Err(format!("gamma = {} must exceed 1", self.gamma_or_default()));
        }
        for (name, v) in [
            ("radial-nodes", self.resolution.radial_nodes),
            ("angular-nodes", self.resolution.angular_nodes),
            ("grid-m", self.grid_m),
            ("scales-k", self.scales_k),
            ("trunc-n", self.trunc_n),
            ("stages", self.stages),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Partial configuration from a JSON file; present fields override flags.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ConfigPatch {
    pub symbol: Option<String>,
    pub weight: Option<String>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub resolution: Option<ResolutionConfig>,
    pub grid_m: Option<usize>,
    pub scales_k: Option<usize>,
    pub trunc_n: Option<usize>,
    pub stages: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl ConfigPatch {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config JSON: {e}"))
    }

    pub fn apply(self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        take!(symbol);
        take!(weight);
        take!(alpha);
        take!(resolution);
        take!(grid_m);
        take!(scales_k);
        take!(trunc_n);
        take!(stages);
        take!(out);
        take!(seed);
        take!(threads);
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        cfg
    }
}
