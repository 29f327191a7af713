//! End-to-end orchestration: load the scenario, run the logic tree, write the tables.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use tracing::info;

use crate::catalogue::{attach_pmfs, load_catalogue, load_generation, PriorClass, SourceRecord};
use crate::config::{Config, LoadedConfig};
use crate::controls::{defence_value, ControlSet, DcAuditSnapshot, DefenceRow};
use crate::disagg::{disaggregate, Dimension, DisaggCell};
use crate::error::{Error, Result};
use crate::frpe::physics::{load_or_build, PhysicsModel};
use crate::frpe::sfr::ReplayDefaults;
use crate::frpe::{FrequencyResponseModel, FrpeKind};
use crate::io::{fmt_sig, format_timestamp, parse_timestamp};
use crate::layers::{build_pair_sources, load_pairs, PairSpec};
use crate::logictree::{
    central_path, enumerate_paths, evaluate_path, evaluate_tree, tornado, with_path_inputs, LogicTreePath, TornadoRow,
    TreeInputs, TreeResult,
};
use crate::rates::{
    apply_posterior_rates, count_incidents, default_priors, load_incidents, load_priors, GammaPrior, IncidentCount,
    IncidentRecord, ObservationWindow,
};
use crate::report::{write_json, write_table, Provenance};
use crate::state::{load_states, quantile_bin, StateBin, StateRecord};
use crate::validate::{
    frpe_compare, reference_anchors, split_at_fraction, temporal_split, Anchor, FrpeComparison, SplitInputs,
    SplitReport,
};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub thresholds: Option<Vec<f64>>,
    pub controls: Option<ControlSet>,
    pub cascade: Option<bool>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut Config) -> Result<()> {
        if let Some(t) = &self.thresholds {
            config.hazard.thresholds = t.clone();
        }
        if let Some(c) = self.controls {
            config.controls.active = c;
        }
        if let Some(c) = self.cascade {
            config.cascade.enabled = c;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate()
    }
}

/// Everything loaded from the data files, ready for hazard runs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub provenance: Provenance,
    pub window: ObservationWindow,
    /// Single sources with PMFs and posterior rates.
    pub catalogue: Vec<SourceRecord<f64>>,
    pub pair_specs: Vec<PairSpec<f64>>,
    /// Pair sources built from `pair_specs`.
    pub pairs: Vec<SourceRecord<f64>>,
    pub incidents: Vec<IncidentRecord<f64>>,
    pub counts: Vec<IncidentCount<f64>>,
    pub priors: BTreeMap<PriorClass, GammaPrior<f64>>,
    pub state_records: Vec<StateRecord<f64>>,
    pub states: Vec<StateBin<f64>>,
}

impl Scenario {
    /// Loads every data file named by the config.
    pub fn load(loaded: &LoadedConfig) -> Result<Self> {
        let config = loaded.config.clone();
        let d = &config.data;
        let window = config.window()?;
        let mut catalogue = load_catalogue::<f64>(&d.catalogue, d.registry.as_deref())?;
        let generation = load_generation::<f64>(&d.generation)?;
        attach_pmfs(&mut catalogue, &generation, config.catalogue.bin_width_mw, config.catalogue.min_periods)
            .map_err(|e| data_error(&d.generation, e))?;
        let priors = match &d.priors {
            Some(p) => load_priors(p)?,
            None => default_priors(),
        };
        let incidents = load_incidents::<f64>(&d.incidents)?;
        let counts = count_incidents(&catalogue, &incidents, &window, d.unmatched_to.as_deref())
            .map_err(|e| data_error(&d.incidents, e))?;
        apply_posterior_rates(&mut catalogue, &counts, &priors)?;
        let pair_specs = match &d.pairs {
            Some(p) => load_pairs::<f64>(p)?,
            None => Vec::new(),
        };
        let pairs = build_pair_sources(&pair_specs, &catalogue).map_err(|e| match &d.pairs {
            Some(p) => data_error(p, e),
            None => e,
        })?;
        let state_records = load_states::<f64>(&d.states)?;
        let states = quantile_bin(&state_records, config.states.bins, &config.states.metric_weights)
            .map_err(|e| data_error(&d.states, e))?;
        info!(
            sources = catalogue.len(),
            pairs = pairs.len(),
            incidents = incidents.len(),
            state_bins = states.len(),
            "scenario loaded"
        );
        Ok(Self {
            provenance: Provenance::new(loaded.hash.clone()),
            config,
            window,
            catalogue,
            pair_specs,
            pairs,
            incidents,
            counts,
            priors,
            state_records,
            states,
        })
    }

    /// Single sources followed by pair sources.
    pub fn sources(&self) -> Vec<SourceRecord<f64>> {
        self.catalogue.iter().chain(&self.pairs).cloned().collect()
    }

    /// Whether any tree branch with positive weight uses the physics model.
    pub fn needs_physics(&self) -> bool {
        self.config.tree.frpe.iter().any(|(k, w)| *k == FrpeKind::Physics && *w > 0.0)
    }

    /// Loads or builds the physics grid when the tree needs it.
    pub fn physics(&self) -> Result<Option<(PhysicsModel<f64>, bool)>> {
        if !self.needs_physics() {
            return Ok(None);
        }
        load_physics(&self.config).map(Some)
    }

    pub fn tree_inputs<'a>(
        &'a self,
        sources: &'a [SourceRecord<f64>],
        physics: Option<&'a dyn FrequencyResponseModel<f64>>,
        thresholds: Vec<f64>,
    ) -> TreeInputs<'a, f64> {
        let c = &self.config;
        TreeInputs {
            sources,
            states: &self.states,
            sfr: c.sfr,
            physics,
            controls: c.controls.clone(),
            thresholds,
            cascade: c.cascade.active(),
            compound_kappa: c.tree.compound_kappa,
        }
    }
}

/// Tags a loader failure with the file it came from unless it already names one.
fn data_error(path: &Path, e: Error) -> Error {
    match e {
        Error::File { .. } => e,
        other if other.class() == crate::ErrorClass::Data => Error::file(path, other),
        other => other,
    }
}

/// Grid-backed physics model from the configured cache; the flag reports a cache hit.
pub fn load_physics(config: &Config) -> Result<(PhysicsModel<f64>, bool)> {
    let (grid, hit) = load_or_build(&config.physics.grid, &config.physics.sim, &config.physics.grid_axes())?;
    Ok((PhysicsModel::new(Arc::new(grid), Arc::new(config.physics.sim.clone())), hit))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold_hz: f64,
    /// Absolute frequency at the threshold.
    pub frequency_hz: f64,
    pub mean_rate_per_yr: f64,
    pub median_rate_per_yr: f64,
    pub p05_rate_per_yr: f64,
    pub p95_rate_per_yr: f64,
    /// Return period of the mean rate.
    pub return_period_yr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub controls: ControlSet,
    pub cascade: bool,
    pub paths: usize,
    pub distinct_evaluations: usize,
    pub dc_audit: DcAuditSnapshot,
    pub sources: usize,
    pub pair_sources: usize,
    pub state_bins: usize,
    pub thresholds: Vec<ThresholdSummary>,
}

/// Results of a full compute run.
#[derive(Debug, Clone)]
pub struct ComputeOutput {
    pub tree: TreeResult<f64>,
    /// Indices into `tree.thresholds` of the summary thresholds.
    pub summary_columns: Vec<usize>,
    pub central: LogicTreePath<f64>,
    pub defence: Vec<DefenceRow<f64>>,
    pub summary: RunSummary,
}

fn nominal_frequency(config: &Config) -> f64 {
    config.sfr.f0
}

/// Runs every logic-tree path and the central-path defence table.
pub fn compute(scenario: &Scenario) -> Result<ComputeOutput> {
    let config = &scenario.config;
    let physics = scenario.physics()?;
    if let Some((_, hit)) = &physics {
        info!(cache_hit = *hit, "physics grid ready");
    }
    let model = physics.as_ref().map(|(m, _)| m as &dyn FrequencyResponseModel<f64>);
    let sources = scenario.sources();
    let thresholds = config.evaluation_thresholds();
    let inputs = scenario.tree_inputs(&sources, model, thresholds.clone());
    let paths = enumerate_paths(&config.tree)?;
    let tree = evaluate_tree(&paths, &inputs)?;
    info!(paths = tree.paths.len(), distinct = tree.distinct_evaluations, "logic tree evaluated");

    let summary_columns: Vec<usize> = config
        .hazard
        .thresholds
        .iter()
        .map(|d| thresholds.iter().position(|t| t == d).ok_or(Error::UnknownThreshold(*d)))
        .collect::<Result<_>>()?;
    let central = central_path(&config.tree);
    let defence_inputs = TreeInputs { thresholds: config.hazard.thresholds.clone(), ..inputs.clone() };
    let defence = with_path_inputs(&central, &defence_inputs, &[], None, defence_value)?;

    let f0 = nominal_frequency(config);
    let s = &tree.summary;
    let rows = summary_columns
        .iter()
        .map(|&c| ThresholdSummary {
            threshold_hz: thresholds[c],
            frequency_hz: f0 - thresholds[c],
            mean_rate_per_yr: s.mean[c],
            median_rate_per_yr: s.median[c],
            p05_rate_per_yr: s.p05[c],
            p95_rate_per_yr: s.p95[c],
            return_period_yr: 1.0 / s.mean[c],
        })
        .collect();
    let summary = RunSummary {
        tool_version: scenario.provenance.tool_version.clone(),
        config_sha256: scenario.provenance.config_sha256.clone(),
        seed: config.seed,
        controls: config.controls.active,
        cascade: config.cascade.enabled,
        paths: tree.paths.len(),
        distinct_evaluations: tree.distinct_evaluations,
        dc_audit: tree.dc_audit,
        sources: scenario.catalogue.len(),
        pair_sources: scenario.pairs.len(),
        state_bins: scenario.states.len(),
        thresholds: rows,
    };
    Ok(ComputeOutput { tree, summary_columns, central, defence, summary })
}

pub mod files {
    pub const HAZARD_CURVE: &str = "hazard_curve.csv";
    pub const FRACTILES: &str = "fractiles.csv";
    pub const PER_PATH: &str = "per_path_rates.csv";
    pub const DEFENCE: &str = "defence_value.csv";
    pub const SUMMARY: &str = "summary.json";
    pub const ALL: [&str; 5] = [HAZARD_CURVE, FRACTILES, PER_PATH, DEFENCE, SUMMARY];
}

fn return_period(rate: f64) -> String {
    fmt_sig(1.0 / rate)
}

/// Writes the five compute outputs into `out_dir`.
pub fn write_compute(out_dir: &Path, scenario: &Scenario, out: &ComputeOutput) -> Result<()> {
    let comment = scenario.provenance.comment();
    let tree = &out.tree;
    let s = &tree.summary;
    let f0 = nominal_frequency(&scenario.config);
    let fractile_row = |c: usize| {
        vec![
            fmt_sig(tree.thresholds[c]),
            fmt_sig(f0 - tree.thresholds[c]),
            fmt_sig(s.mean[c]),
            fmt_sig(s.median[c]),
            fmt_sig(s.p05[c]),
            fmt_sig(s.p95[c]),
            return_period(s.mean[c]),
        ]
    };
    let header = [
        "threshold_hz",
        "frequency_hz",
        "mean_rate_per_yr",
        "median_rate_per_yr",
        "p05_rate_per_yr",
        "p95_rate_per_yr",
        "return_period_yr",
    ];
    write_table(&out_dir.join(files::HAZARD_CURVE), &comment, &header, (0..tree.thresholds.len()).map(fractile_row))?;
    write_table(
        &out_dir.join(files::FRACTILES),
        &comment,
        &header,
        out.summary_columns.iter().map(|&c| fractile_row(c)),
    )?;

    let mut path_header = vec!["path_index".to_string(), "descriptor".to_string(), "weight".to_string()];
    path_header.extend(out.summary_columns.iter().map(|&c| format!("rate_{}hz", fmt_sig(tree.thresholds[c]))));
    let path_header: Vec<&str> = path_header.iter().map(String::as_str).collect();
    write_table(
        &out_dir.join(files::PER_PATH),
        &comment,
        &path_header,
        tree.paths.iter().zip(&tree.rates).map(|(p, rates)| {
            let mut row = vec![p.index.to_string(), p.descriptor(), fmt_sig(p.weight)];
            row.extend(out.summary_columns.iter().map(|&c| fmt_sig(rates[c])));
            row
        }),
    )?;

    let thresholds = &scenario.config.hazard.thresholds;
    write_table(
        &out_dir.join(files::DEFENCE),
        &comment,
        &["controls", "threshold_hz", "rate_per_yr", "return_period_yr", "reduction"],
        out.defence.iter().flat_map(|row| {
            thresholds.iter().enumerate().map(move |(t, d)| {
                vec![
                    row.controls.as_str().to_string(),
                    fmt_sig(*d),
                    fmt_sig(row.rates[t]),
                    return_period(row.rates[t]),
                    fmt_sig(row.reductions[t]),
                ]
            })
        }),
    )?;
    write_json(&out_dir.join(files::SUMMARY), &out.summary)
}

/// Disaggregation of the central path at one threshold.
pub fn disaggregate_central(scenario: &Scenario, threshold_hz: f64, dim: Dimension) -> Result<Vec<DisaggCell>> {
    let physics = scenario.physics()?;
    let model = physics.as_ref().map(|(m, _)| m as &dyn FrequencyResponseModel<f64>);
    let sources = scenario.sources();
    let inputs = scenario.tree_inputs(&sources, model, vec![threshold_hz]);
    let result = evaluate_path(&central_path(&scenario.config.tree), &inputs, &[threshold_hz], None)?;
    disaggregate(&result, threshold_hz, dim, &scenario.config.disagg)
}

pub fn write_disagg(path: &Path, scenario: &Scenario, dim: Dimension, cells: &[DisaggCell]) -> Result<()> {
    let opts = &scenario.config.disagg;
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    write_table(
        path,
        &format!("{} dimension={dim}", scenario.provenance.comment()),
        &[
            "source_id",
            "loss_mw",
            "state_bin",
            "inertia_band_gva_s",
            "demand_band_gw",
            "epsilon_band",
            "contribution_per_yr",
            "fraction",
            "mean_epsilon",
        ],
        cells.iter().map(|c| {
            let k = &c.key;
            vec![
                k.source_id.clone().unwrap_or_default(),
                opt(k.loss_bin_mw),
                k.state_bin.map(|b| b.to_string()).unwrap_or_default(),
                opt(k.inertia_band),
                opt(k.demand_band),
                k.epsilon_band.map(|b| opts.epsilon_label(b)).unwrap_or_default(),
                fmt_sig(c.contribution_per_yr),
                fmt_sig(c.fraction),
                fmt_sig(c.mean_epsilon),
            ]
        }),
    )
}

/// One-at-a-time branch sensitivity at one threshold.
pub fn tornado_table(scenario: &Scenario, threshold_hz: f64) -> Result<Vec<TornadoRow<f64>>> {
    let physics = scenario.physics()?;
    let model = physics.as_ref().map(|(m, _)| m as &dyn FrequencyResponseModel<f64>);
    let sources = scenario.sources();
    let inputs = scenario.tree_inputs(&sources, model, vec![threshold_hz]);
    tornado(&scenario.config.tree, &inputs, threshold_hz)
}

pub fn write_tornado(path: &Path, scenario: &Scenario, threshold_hz: f64, rows: &[TornadoRow<f64>]) -> Result<()> {
    write_table(
        path,
        &format!("{} threshold_hz={}", scenario.provenance.comment(), fmt_sig(threshold_hz)),
        &["branch", "low_rate_per_yr", "high_rate_per_yr", "swing"],
        rows.iter()
            .map(|r| vec![r.branch.as_str().to_string(), fmt_sig(r.low_rate), fmt_sig(r.high_rate), fmt_sig(r.swing)]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOutput {
    pub split_at: String,
    pub split: SplitReport,
    /// Absent when no incident carries enough fields to replay.
    pub comparison: Option<FrpeComparison>,
    pub anchors: Vec<Anchor>,
}

/// Temporal split on the central path, model comparison on the incident record, and the anchors.
pub fn validate(scenario: &Scenario) -> Result<ValidateOutput> {
    let config = &scenario.config;
    let split_at = match &config.validate.split {
        Some(s) => parse_timestamp(s).map_err(|e| Error::Config(format!("validate.split: {e}")))?,
        None => split_at_fraction(&scenario.window, config.validate.split_fraction),
    };
    let physics = scenario.physics()?;
    let model = physics.as_ref().map(|(m, _)| m as &dyn FrequencyResponseModel<f64>);
    let thresholds = config.hazard.thresholds.clone();
    let central = central_path(&config.tree);
    let inputs = SplitInputs {
        catalogue: &scenario.catalogue,
        extra_sources: &scenario.pairs,
        incidents: &scenario.incidents,
        window: scenario.window,
        priors: &scenario.priors,
        unmatched_to: config.data.unmatched_to.as_deref(),
    };
    let split = temporal_split(&inputs, split_at, &thresholds, |sources| {
        let tree_inputs = scenario.tree_inputs(sources, model, thresholds.clone());
        evaluate_path(&central, &tree_inputs, &[], None).map(|r| r.total_rates)
    })?;

    let replayable = scenario.incidents.iter().any(|i| i.nadir_deviation_hz.is_some() && i.inertia_gva_s.is_some());
    let comparison = if replayable {
        let physics = match physics {
            Some((m, _)) => m,
            None => load_physics(config)?.0,
        };
        let defaults = ReplayDefaults { f0: config.sfr.f0, ..ReplayDefaults::default() };
        Some(frpe_compare(&scenario.incidents, &config.sfr, &physics, &defaults)?)
    } else {
        None
    };
    Ok(ValidateOutput { split_at: format_timestamp(&split_at), split, comparison, anchors: reference_anchors() })
}

pub fn write_validate(out_dir: &Path, scenario: &Scenario, v: &ValidateOutput) -> Result<()> {
    let comment = format!("{} split={}", scenario.provenance.comment(), v.split_at);
    write_table(
        &out_dir.join("validate_split.csv"),
        &comment,
        &["threshold_hz", "full_rate_per_yr", "training_rate_per_yr", "ratio", "stable"],
        v.split.rows.iter().map(|r| {
            vec![
                fmt_sig(r.threshold_hz),
                fmt_sig(r.full_rate_per_yr),
                fmt_sig(r.training_rate_per_yr),
                fmt_sig(r.ratio),
                r.stable.to_string(),
            ]
        }),
    )?;
    write_table(
        &out_dir.join("validate_source_rates.csv"),
        &comment,
        &["source_id", "full_rate_per_yr", "training_rate_per_yr"],
        v.split
            .sources
            .iter()
            .map(|s| vec![s.source_id.clone(), fmt_sig(s.full_rate_per_yr), fmt_sig(s.training_rate_per_yr)]),
    )?;
    if let Some(c) = &v.comparison {
        write_table(
            &out_dir.join("frpe_compare.csv"),
            &scenario.provenance.comment(),
            &["model", "n_events", "mean_log_residual", "bias_factor", "stdev_log_residual", "mean_absolute_error_hz"],
            [("sfr_raw", &c.sfr_raw), ("physics", &c.physics)].into_iter().map(|(name, s)| {
                vec![
                    name.to_string(),
                    s.n_events.to_string(),
                    fmt_sig(s.mean_log_residual),
                    fmt_sig(s.bias_factor),
                    fmt_sig(s.stdev_log_residual),
                    fmt_sig(s.mean_absolute_error_hz),
                ]
            }),
        )?;
    }
    write_table(
        &out_dir.join("anchors.csv"),
        &format!("pfha {}", crate::report::TOOL_VERSION),
        &["anchor", "value", "lo", "hi", "pass"],
        v.anchors
            .iter()
            .map(|a| vec![a.name.to_string(), fmt_sig(a.value), fmt_sig(a.lo), fmt_sig(a.hi), a.pass.to_string()]),
    )
}
