//! Run configuration, read from a TOML file.
//!
//! Every section is optional and falls back to the engine defaults; only the
//! `[data]` paths and observation window are needed to run a computation.
//! Relative data paths are resolved against the directory of the config file.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! catalogue = "catalogue.csv"
//! registry = "registry.csv"
//! generation = "generation.csv"
//! incidents = "incidents.csv"
//! states = "states.csv"
//! pairs = "pairs.csv"
//! priors = "priors.csv"
//! window_start = "2019-01-01T00:00:00Z"
//! window_end = "2024-01-01T00:00:00Z"
//!
//! [hazard]
//! thresholds = [0.5, 0.8, 1.2]
//!
//! [controls]
//! active = "both"
//!
//! [cascade]
//! enabled = false
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalogue::{DEFAULT_BIN_WIDTH_MW, MIN_PMF_PERIODS};
use crate::controls::ControlsConfig;
use crate::disagg::DisaggOptions;
use crate::error::{Error, Result};
use crate::frpe::physics::{GridAxes, SimConfig};
use crate::frpe::sfr::SfrParams;
use crate::io::{parse_timestamp, Timestamp};
use crate::layers::CascadeSpec;
use crate::logictree::TreeSpec;
use crate::rates::ObservationWindow;
use crate::state::{MetricWeights, DEFAULT_STATE_BINS};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub data: DataConfig,
    pub catalogue: CatalogueConfig,
    pub states: StatesConfig,
    pub sfr: SfrParams,
    pub physics: PhysicsConfig,
    pub controls: ControlsConfig,
    pub cascade: CascadeConfig,
    pub tree: TreeSpec,
    pub hazard: HazardConfig,
    pub disagg: DisaggOptions,
    pub tornado: TornadoConfig,
    pub validate: ValidateConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub catalogue: PathBuf,
    pub registry: Option<PathBuf>,
    pub generation: PathBuf,
    pub incidents: PathBuf,
    pub states: PathBuf,
    pub pairs: Option<PathBuf>,
    /// Class priors; the built-in defaults are used when absent.
    pub priors: Option<PathBuf>,
    pub window_start: String,
    pub window_end: String,
    /// Source credited with incidents that name no known source.
    pub unmatched_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogueConfig {
    pub bin_width_mw: f64,
    pub min_periods: usize,
}

impl Default for CatalogueConfig {
    fn default() -> Self {
        Self { bin_width_mw: DEFAULT_BIN_WIDTH_MW, min_periods: MIN_PMF_PERIODS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatesConfig {
    pub bins: usize,
    pub metric_weights: MetricWeights,
}

impl Default for StatesConfig {
    fn default() -> Self {
        Self { bins: DEFAULT_STATE_BINS, metric_weights: MetricWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Grid cache file.
    pub grid: PathBuf,
    pub sim: SimConfig,
    /// Overrides the default axes as five ascending lists.
    pub axes: Option<[Vec<f64>; 5]>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { grid: PathBuf::from("nadir_grid.txt"), sim: SimConfig::default(), axes: None }
    }
}

impl PhysicsConfig {
    pub fn grid_axes(&self) -> GridAxes {
        self.axes.clone().map_or_else(GridAxes::default, |axes| GridAxes { axes })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub spec: CascadeSpec,
}

impl CascadeConfig {
    pub fn active(&self) -> Option<CascadeSpec> {
        self.enabled.then_some(self.spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardConfig {
    /// Thresholds reported in the summary and fractile tables (Hz).
    pub thresholds: Vec<f64>,
    pub curve_start_hz: f64,
    pub curve_stop_hz: f64,
    pub curve_step_hz: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        Self { thresholds: vec![0.5, 0.8, 1.2], curve_start_hz: 0.05, curve_stop_hz: 2.2, curve_step_hz: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TornadoConfig {
    pub threshold_hz: f64,
}

impl Default for TornadoConfig {
    fn default() -> Self {
        Self { threshold_hz: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Split timestamp; when absent the split falls at `split_fraction` of the window.
    pub split: Option<String>,
    pub split_fraction: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { split: None, split_fraction: 0.75 }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: PathBuf,
    /// SHA-256 of the config file bytes, for provenance lines.
    pub hash: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, parses and validates a config file, resolving data paths.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(LoadedConfig { config, path: path.to_path_buf(), hash })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [&mut d.catalogue, &mut d.generation, &mut d.incidents, &mut d.states] {
            join(p);
        }
        for p in [&mut d.registry, &mut d.pairs, &mut d.priors].into_iter().flatten() {
            join(p);
        }
        join(&mut self.physics.grid);
    }

    pub fn validate(&self) -> Result<()> {
        if self.hazard.thresholds.is_empty() || self.hazard.thresholds.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("hazard.thresholds must be non-empty and positive".into()));
        }
        let h = &self.hazard;
        if !(h.curve_start_hz > 0.0 && h.curve_step_hz > 0.0 && h.curve_stop_hz >= h.curve_start_hz) {
            return Err(Error::Config("hazard curve range must be positive and ascending".into()));
        }
        if !(self.catalogue.bin_width_mw > 0.0) || self.states.bins == 0 {
            return Err(Error::Config("bin width and state-bin count must be positive".into()));
        }
        if !(self.validate.split_fraction > 0.0 && self.validate.split_fraction <= 1.0) {
            return Err(Error::Config("validate.split_fraction must lie in (0, 1]".into()));
        }
        self.sfr.validate()?;
        self.physics.sim.validate()?;
        self.physics.grid_axes().validate()?;
        self.controls.validate()?;
        self.cascade.spec.validate()?;
        self.tree.validate()?;
        self.disagg.validate()
    }

    pub fn window(&self) -> Result<ObservationWindow> {
        let ts = |s: &str, name: &str| -> Result<Timestamp> {
            parse_timestamp(s).map_err(|e| Error::Config(format!("data.{name}: {e}")))
        };
        let window = ObservationWindow {
            start: ts(&self.data.window_start, "window_start")?,
            end: ts(&self.data.window_end, "window_end")?,
        };
        if window.end <= window.start {
            return Err(Error::Config("observation window must end after it starts".into()));
        }
        Ok(window)
    }

    /// Sorted, de-duplicated union of the summary thresholds and the curve grid.
    pub fn evaluation_thresholds(&self) -> Vec<f64> {
        let h = &self.hazard;
        let mut all = crate::hazard::threshold_grid(h.curve_start_hz, h.curve_stop_hz, h.curve_step_hz);
        all.extend(h.thresholds.iter().copied());
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
