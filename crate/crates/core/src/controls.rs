//! Dynamic Containment routing and demand-disconnection (LFDD) modelling.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frpe::FrpeKind;
use crate::hazard::{compute_hazard, HazardInputs};
use crate::scalar::Real;

/// Contracted DC volume and the fraction of it that is delivered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct DcConfig<T = f64> {
    pub contracted_mw: T,
    pub effectiveness: T,
}

impl<T: Real> Default for DcConfig<T> {
    fn default() -> Self {
        Self { contracted_mw: T::lit(1000.0), effectiveness: T::lit(0.85) }
    }
}

impl<T: Real> DcConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.contracted_mw >= T::zero() && self.effectiveness >= T::zero() && self.effectiveness <= T::one() {
            Ok(())
        } else {
            Err(Error::Config("DC needs contracted_mw >= 0 and effectiveness in [0, 1]".into()))
        }
    }

    #[inline]
    pub fn effective_mw(&self) -> T {
        self.contracted_mw * self.effectiveness
    }
}

/// Where the effective DC volume ends up for one model evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcRouting<T = f64> {
    /// DC coordinate of the physics grid.
    pub grid_dc_mw: T,
    /// Response holding seen by the model, DC included for the analytical model.
    pub response_mw: T,
}

/// Sends the effective DC volume down exactly one pathway.
///
/// The physics grid has its own DC axis; the analytical model has none, so DC
/// joins the response holding instead.
pub fn route_dc<T: Real>(kind: FrpeKind, dc: &DcConfig<T>, base_response_mw: T) -> DcRouting<T> {
    let effective = dc.effective_mw();
    match kind {
        FrpeKind::Physics => DcRouting { grid_dc_mw: effective, response_mw: base_response_mw },
        FrpeKind::Sfr => DcRouting { grid_dc_mw: T::zero(), response_mw: base_response_mw + effective },
    }
}

/// Counts routing decisions so a run can prove no volume was counted twice.
#[derive(Debug, Default)]
pub struct DcAudit {
    routings: AtomicU64,
    via_grid: AtomicU64,
    via_response: AtomicU64,
    double_counted: AtomicU64,
}

/// Plain copy of the audit counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DcAuditSnapshot {
    pub routings: u64,
    pub via_grid: u64,
    pub via_response: u64,
    pub double_counted: u64,
}

impl DcAudit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one routing against the response holding it started from.
    pub fn record<T: Real>(&self, routing: &DcRouting<T>, base_response_mw: T) {
        let grid = routing.grid_dc_mw > T::zero();
        let response = routing.response_mw > base_response_mw;
        self.routings.fetch_add(1, Ordering::Relaxed);
        if grid {
            self.via_grid.fetch_add(1, Ordering::Relaxed);
        }
        if response {
            self.via_response.fetch_add(1, Ordering::Relaxed);
        }
        if grid && response {
            self.double_counted.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> DcAuditSnapshot {
        DcAuditSnapshot {
            routings: self.routings.load(Ordering::Relaxed),
            via_grid: self.via_grid.load(Ordering::Relaxed),
            via_response: self.via_response.load(Ordering::Relaxed),
            double_counted: self.double_counted.load(Ordering::Relaxed),
        }
    }
}

/// One aggregated LFDD stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfddStage<T = f64> {
    /// Deviation below nominal at which the stage trips (Hz).
    pub activation_hz: T,
    pub shed_fraction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct LfddConfig<T = f64> {
    pub stages: Vec<LfddStage<T>>,
    pub relay_effectiveness: T,
    /// Fraction of breaches a qualifying stage averts at full effectiveness.
    pub stage_credit: T,
    pub enabled: bool,
}

pub const MAX_CUMULATIVE_SHED: f64 = 0.6;

impl<T: Real> Default for LfddConfig<T> {
    fn default() -> Self {
        let stages = [(1.2, 0.10), (1.4, 0.10), (1.6, 0.10), (1.8, 0.15), (2.0, 0.15)]
            .into_iter()
            .map(|(a, s)| LfddStage { activation_hz: T::lit(a), shed_fraction: T::lit(s) })
            .collect();
        Self { stages, relay_effectiveness: T::lit(0.85), stage_credit: T::lit(0.5), enabled: true }
    }
}

impl<T: Real> LfddConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("LFDD: {m}")));
        if !self.stages.windows(2).all(|w| w[0].activation_hz < w[1].activation_hz) {
            return bad("stages must deepen strictly");
        }
        if self
            .stages
            .iter()
            .any(|s| !(s.activation_hz > T::zero()) || !(s.shed_fraction > T::zero() && s.shed_fraction < T::one()))
        {
            return bad("activation must be positive and shed fractions in (0, 1)");
        }
        let total: T = self.stages.iter().map(|s| s.shed_fraction).sum();
        if total > T::lit(MAX_CUMULATIVE_SHED + 1e-12) {
            return bad("cumulative shed exceeds 60% of demand");
        }
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.relay_effectiveness) || !unit(self.stage_credit) {
            return bad("relay effectiveness and stage credit must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Multiplier on the exceedance probability at threshold `delta_hz`.
///
/// Only stages that trip strictly before the threshold can avert its breach.
pub fn lfdd_exceedance_factor<T: Real>(delta_hz: T, cfg: &LfddConfig<T>) -> T {
    if !cfg.enabled {
        return T::one();
    }
    let per_stage = T::one() - cfg.relay_effectiveness * cfg.stage_credit;
    cfg.stages.iter().filter(|s| s.activation_hz < delta_hz).fold(T::one(), |f, _| f * per_stage)
}

/// Limits a median nadir once shed demand covers the imbalance.
///
/// Stages are walked in order; at the first stage whose cumulative shed reaches
/// the loss, the cap is its activation plus the imbalance left by the earlier
/// stages divided by the effective damping.
pub fn lfdd_nadir_cap<T: Real>(
    median_nadir_hz: T,
    loss_mw: T,
    demand_gw: T,
    d_eff_mw_per_hz: T,
    cfg: &LfddConfig<T>,
) -> T {
    if !cfg.enabled || !(cfg.relay_effectiveness > T::zero()) || !(d_eff_mw_per_hz > T::zero()) {
        return median_nadir_hz;
    }
    let demand_mw = demand_gw * T::lit(1000.0);
    let mut shed = T::zero();
    for stage in &cfg.stages {
        if stage.activation_hz >= median_nadir_hz {
            break;
        }
        let before = shed;
        shed = shed + cfg.relay_effectiveness * stage.shed_fraction * demand_mw;
        if shed >= loss_mw {
            let cap = stage.activation_hz + (loss_mw - before) / d_eff_mw_per_hz;
            return median_nadir_hz.min(cap);
        }
    }
    median_nadir_hz
}

/// The four control configurations of the defence-value decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSet {
    None,
    #[serde(alias = "dc")]
    DcOnly,
    #[serde(alias = "lfdd")]
    LfddOnly,
    Both,
}

impl ControlSet {
    pub const ALL: [ControlSet; 4] = [ControlSet::None, ControlSet::DcOnly, ControlSet::LfddOnly, ControlSet::Both];

    pub fn dc(self) -> bool {
        matches!(self, ControlSet::DcOnly | ControlSet::Both)
    }

    pub fn lfdd(self) -> bool {
        matches!(self, ControlSet::LfddOnly | ControlSet::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlSet::None => "none",
            ControlSet::DcOnly => "dc",
            ControlSet::LfddOnly => "lfdd",
            ControlSet::Both => "both",
        }
    }
}

impl fmt::Display for ControlSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(ControlSet::None),
            "dc" | "dc_only" => Ok(ControlSet::DcOnly),
            "lfdd" | "lfdd_only" => Ok(ControlSet::LfddOnly),
            "both" => Ok(ControlSet::Both),
            other => Err(Error::Config(format!("unknown controls setting `{other}`"))),
        }
    }
}

/// Full controls configuration carried into the hazard integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ControlsConfig<T = f64> {
    pub active: ControlSet,
    pub dc: DcConfig<T>,
    pub lfdd: LfddConfig<T>,
    /// Take the contracted DC volume from each state bin instead of `dc.contracted_mw`.
    pub dc_from_state: bool,
}

impl<T: Real> Default for ControlsConfig<T> {
    fn default() -> Self {
        Self { active: ControlSet::Both, dc: DcConfig::default(), lfdd: LfddConfig::default(), dc_from_state: false }
    }
}

impl<T: Real> ControlsConfig<T> {
    pub fn none() -> Self {
        Self { active: ControlSet::None, ..Self::default() }
    }

    pub fn with_active(&self, active: ControlSet) -> Self {
        Self { active, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.dc.validate()?;
        self.lfdd.validate()
    }

    /// DC routed for one state bin; inactive DC routes nothing.
    pub fn route(&self, kind: FrpeKind, base_response_mw: T, state_dc_mw: T) -> DcRouting<T> {
        if !self.active.dc() {
            return DcRouting { grid_dc_mw: T::zero(), response_mw: base_response_mw };
        }
        let dc = if self.dc_from_state { DcConfig { contracted_mw: state_dc_mw, ..self.dc } } else { self.dc };
        route_dc(kind, &dc, base_response_mw)
    }

    #[inline]
    pub fn exceedance_factor(&self, delta_hz: T) -> T {
        if self.active.lfdd() {
            lfdd_exceedance_factor(delta_hz, &self.lfdd)
        } else {
            T::one()
        }
    }

    #[inline]
    pub fn cap(&self, median_nadir_hz: T, loss_mw: T, demand_gw: T, d_eff_mw_per_hz: T) -> T {
        if self.active.lfdd() {
            lfdd_nadir_cap(median_nadir_hz, loss_mw, demand_gw, d_eff_mw_per_hz, &self.lfdd)
        } else {
            median_nadir_hz
        }
    }
}

/// Hazard rates per threshold under one control configuration.
pub fn run_configuration<T: Real>(active: ControlSet, inputs: &HazardInputs<'_, T>) -> Result<Vec<T>> {
    let controls = inputs.controls.with_active(active);
    let run = HazardInputs { controls, cell_thresholds: Vec::new(), ..inputs.clone() };
    Ok(compute_hazard(&run)?.total_rates)
}

/// One row of the defence-value table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenceRow<T = f64> {
    pub controls: ControlSet,
    pub rates: Vec<T>,
    /// `1 - controlled / uncontrolled` per threshold; zero where the uncontrolled rate is zero.
    pub reductions: Vec<T>,
}

/// Runs all four configurations in the order none, DC only, LFDD only, both.
pub fn defence_value<T: Real>(inputs: &HazardInputs<'_, T>) -> Result<Vec<DefenceRow<T>>> {
    let runs =
        ControlSet::ALL.iter().map(|&c| run_configuration(c, inputs).map(|r| (c, r))).collect::<Result<Vec<_>>>()?;
    let base = runs[0].1.clone();
    Ok(runs
        .into_iter()
        .map(|(controls, rates)| {
            let reductions = rates
                .iter()
                .zip(&base)
                .map(|(&r, &b)| if b > T::zero() { T::one() - r / b } else { T::zero() })
                .collect();
            DefenceRow { controls, rates, reductions }
        })
        .collect())
}
