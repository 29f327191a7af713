//! Out-of-sample checks: temporal split of the incident record, model
//! comparison on replayed events, and the pinned desk-checkable anchors.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::catalogue::{PriorClass, SourceRecord};
use crate::error::{Error, Result};
use crate::frpe::sfr::{
    loss_from_rocof, replay_residuals, sfr_median_nadir, ReplayDefaults, ReplaySummary, SfrModel, SfrParams,
};
use crate::frpe::{aleatory_sigma, exceedance_probability, FrequencyResponseModel, NadirPrediction, SigmaParams};
use crate::io::Timestamp;
use crate::layers::CascadeSpec;
use crate::rates::{apply_posterior_rates, count_incidents, GammaPrior, IncidentRecord, ObservationWindow};

/// Training-to-full ratios inside this band count as stable.
pub const STABILITY_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRow {
    pub threshold_hz: f64,
    pub full_rate_per_yr: f64,
    pub training_rate_per_yr: f64,
    pub ratio: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceRateRow {
    pub source_id: String,
    pub full_rate_per_yr: f64,
    pub training_rate_per_yr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub training_events: usize,
    pub test_events: usize,
    pub training_years: f64,
    pub sources: Vec<SourceRateRow>,
    pub rows: Vec<SplitRow>,
}

impl SplitReport {
    pub fn all_stable(&self) -> bool {
        self.rows.iter().all(|r| r.stable)
    }
}

/// Inputs shared by the full and training runs.
pub struct SplitInputs<'a> {
    /// Single sources with PMFs attached; rates are recomputed here.
    pub catalogue: &'a [SourceRecord<f64>],
    /// Composite sources, carried through unchanged.
    pub extra_sources: &'a [SourceRecord<f64>],
    pub incidents: &'a [IncidentRecord<f64>],
    pub window: ObservationWindow,
    pub priors: &'a BTreeMap<PriorClass, GammaPrior<f64>>,
    pub unmatched_to: Option<&'a str>,
}

fn with_rates(inputs: &SplitInputs<'_>, window: &ObservationWindow) -> Result<(Vec<SourceRecord<f64>>, usize)> {
    let mut catalogue = inputs.catalogue.to_vec();
    let counts = count_incidents(&catalogue, inputs.incidents, window, inputs.unmatched_to)?;
    apply_posterior_rates(&mut catalogue, &counts, inputs.priors)?;
    let events = counts.iter().map(|c| c.n_events as usize).sum();
    catalogue.extend(inputs.extra_sources.iter().cloned());
    Ok((catalogue, events))
}

/// Recalibrates rates on incidents up to `split` and compares the hazard with the full-record hazard.
///
/// `hazard` maps a source list onto rates at `thresholds`; callers pass the central-path evaluation.
pub fn temporal_split(
    inputs: &SplitInputs<'_>,
    split: Timestamp,
    thresholds: &[f64],
    hazard: impl Fn(&[SourceRecord<f64>]) -> Result<Vec<f64>>,
) -> Result<SplitReport> {
    let full_window = inputs.window;
    if split <= full_window.start || split > full_window.end {
        return Err(Error::Config("split must fall inside the observation window".into()));
    }
    let training_window = ObservationWindow { start: full_window.start, end: split };
    let (full, full_events) = with_rates(inputs, &full_window)?;
    let (training, training_events) = with_rates(inputs, &training_window)?;
    if training_events == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let full_rates = hazard(&full)?;
    let training_rates = hazard(&training)?;
    let rows = thresholds
        .iter()
        .zip(full_rates.iter().zip(&training_rates))
        .map(|(&threshold_hz, (&f, &t))| {
            let ratio = if f > 0.0 { t / f } else { 1.0 };
            SplitRow {
                threshold_hz,
                full_rate_per_yr: f,
                training_rate_per_yr: t,
                ratio,
                stable: (STABILITY_BAND.0..=STABILITY_BAND.1).contains(&ratio),
            }
        })
        .collect();
    let sources = full
        .iter()
        .zip(&training)
        .filter(|(s, _)| s.source_type.is_single())
        .map(|(f, t)| SourceRateRow {
            source_id: f.source_id.clone(),
            full_rate_per_yr: f.trip_rate_per_yr,
            training_rate_per_yr: t.trip_rate_per_yr,
        })
        .collect();
    Ok(SplitReport {
        training_events,
        test_events: full_events - training_events,
        training_years: training_window.years(),
        sources,
        rows,
    })
}

/// Split point at `fraction` of the window.
pub fn split_at_fraction(window: &ObservationWindow, fraction: f64) -> Timestamp {
    let span = (window.end - window.start).num_seconds() as f64;
    window.start + chrono::Duration::seconds((span * fraction).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrpeComparison {
    /// Analytical model with no bias correction.
    pub sfr_raw: ReplaySummary<f64>,
    pub physics: ReplaySummary<f64>,
}

/// Replays the same events through raw SFR (`b = 1`) and the physics model.
pub fn frpe_compare(
    events: &[IncidentRecord<f64>],
    sfr: &SfrParams<f64>,
    physics: &dyn FrequencyResponseModel<f64>,
    defaults: &ReplayDefaults<f64>,
) -> Result<FrpeComparison> {
    let raw = SfrModel::new(sfr.with_bias(1.0));
    let (_, sfr_raw) = replay_residuals(events, &raw, defaults)?;
    let (_, physics) = replay_residuals(events, physics, defaults)?;
    Ok(FrpeComparison { sfr_raw, physics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

fn anchor(name: &'static str, value: f64, lo: f64, hi: f64) -> Anchor {
    Anchor { name, value, lo, hi, pass: value >= lo && value <= hi }
}

/// Conditions assumed for the 9 August 2019 replay: demand and response are not recorded.
pub const AUG9_ASSUMED_DEMAND_GW: f64 = 28.0;
pub const AUG9_ASSUMED_RESPONSE_MW: f64 = 1000.0;

/// Evaluates every pinned anchor at its tolerance.
pub fn reference_anchors() -> Vec<Anchor> {
    let worked = NadirPrediction::new(0.164, 0.317).expect("valid prediction");
    let sfr = SfrParams::<f64>::default();
    let gate = CascadeSpec::<f64>::default();
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    vec![
        anchor("z at 0.8 Hz", worked.z(0.8), -5.00, -4.98),
        anchor("P at 0.8 Hz", exceedance_probability(&worked, 0.8), 2e-7, 4e-7),
        anchor("z at 0.5 Hz", worked.z(0.5), -3.53, -3.51),
        anchor("P at 0.5 Hz", exceedance_probability(&worked, 0.5), 2.0e-4, 2.4e-4),
        anchor("SFR mu 1000 MW", sfr_median_nadir(1000.0, 180.0, 28.0, 1500.0, &sfr), 0.355, 0.370),
        anchor("SFR mu 2000 MW", sfr_median_nadir(2000.0, 180.0, 28.0, 1500.0, &sfr), 0.715, 0.735),
        anchor("sigma 1198 MW at H 180", aleatory_sigma(1198.0, 180.0, &SigmaParams::sfr(0.296)), 0.3162, 0.3172),
        anchor(
            "RoCoF gate loss at H 150",
            loss_from_rocof(gate.rocof_threshold_hz_per_s, 150.0, gate.f0),
            749.9,
            750.1,
        ),
        anchor("gate inactive at 749.9 MW", b(gate.gated(749.9, 150.0)), 0.0, 0.0),
        anchor("gate active at 750.0 MW", b(gate.gated(750.0, 150.0)), 1.0, 1.0),
        anchor(
            "9 Aug 2019 replay mu",
            sfr_median_nadir(1341.0, 210.0, AUG9_ASSUMED_DEMAND_GW, AUG9_ASSUMED_RESPONSE_MW, &sfr),
            0.63,
            0.65,
        ),
    ]
}
