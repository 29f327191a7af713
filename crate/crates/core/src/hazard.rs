//! The discretised hazard sum over sources, loss bins and state bins.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalogue::{SourceRecord, SourceType};
use crate::controls::{ControlsConfig, DcAudit, DcRouting};
use crate::error::{Error, Result};
use crate::frpe::{aleatory_sigma, FrequencyResponseModel, OperatingPoint, SigmaParams};
use crate::io::round_sig;
use crate::layers::{cascade_adjusted_terms, CascadeSpec};
use crate::scalar::{normal_cdf, KahanSum, Real};
use crate::state::StateBin;

/// Tolerance on the state-bin weight total.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Everything one evaluation of the hazard sum needs.
#[derive(Clone)]
pub struct HazardInputs<'a, T: Real = f64> {
    /// Single sources plus any pair sources, each with a PMF and a rate.
    pub sources: &'a [SourceRecord<T>],
    pub states: &'a [StateBin<T>],
    pub model: &'a dyn FrequencyResponseModel<T>,
    pub sigma: SigmaParams<T>,
    pub controls: ControlsConfig<T>,
    /// Strictly ascending deviations (Hz).
    pub thresholds: Vec<T>,
    pub cascade: Option<CascadeSpec<T>>,
    /// Multiplier on pair-source rates (the compound occurrence branch).
    pub pair_rate_multiplier: T,
    /// Thresholds for which per-cell contributions are kept; each must appear in `thresholds`.
    pub cell_thresholds: Vec<T>,
    /// Skip cell terms below this contribution. Off by default; for timing experiments only.
    pub prune_below: Option<T>,
    pub audit: Option<&'a DcAudit>,
}

impl<T: Real> fmt::Debug for HazardInputs<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HazardInputs")
            .field("sources", &self.sources.len())
            .field("states", &self.states.len())
            .field("model", &self.model.kind())
            .field("sigma", &self.sigma)
            .field("controls", &self.controls)
            .field("thresholds", &self.thresholds)
            .field("cascade", &self.cascade)
            .field("pair_rate_multiplier", &self.pair_rate_multiplier)
            .finish_non_exhaustive()
    }
}

impl<'a, T: Real> HazardInputs<'a, T> {
    /// Inputs with controls off, no cascade and no retained cells.
    pub fn new(
        sources: &'a [SourceRecord<T>],
        states: &'a [StateBin<T>],
        model: &'a dyn FrequencyResponseModel<T>,
        sigma: SigmaParams<T>,
        thresholds: Vec<T>,
    ) -> Self {
        Self {
            sources,
            states,
            model,
            sigma,
            controls: ControlsConfig::none(),
            thresholds,
            cascade: None,
            pair_rate_multiplier: T::one(),
            cell_thresholds: Vec::new(),
            prune_below: None,
            audit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
            return Err(Error::InvalidInput("thresholds must be positive".into()));
        }
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("thresholds must be strictly ascending".into()));
        }
        if let Some(d) = self.cell_thresholds.iter().find(|d| !self.thresholds.contains(d)) {
            return Err(Error::UnknownThreshold(d.as_f64()));
        }
        if !self.states.is_empty() {
            let total: T = self.states.iter().map(|s| s.weight).sum();
            if (total - T::one()).abs() > T::lit(WEIGHT_TOLERANCE) || self.states.iter().any(|s| s.weight < T::zero()) {
                return Err(Error::InvalidInput(format!("state-bin weights sum to {total}, not 1")));
            }
        }
        if !(self.pair_rate_multiplier >= T::zero()) {
            return Err(Error::InvalidInput("pair rate multiplier must be non-negative".into()));
        }
        for s in self.sources {
            s.validate()?;
            s.pmf()?;
        }
        self.sigma.validate()?;
        self.controls.validate()?;
        if let Some(c) = &self.cascade {
            c.validate()?;
        }
        Ok(())
    }

    fn source_rate(&self, s: &SourceRecord<T>) -> T {
        if s.source_type == SourceType::Pair {
            s.trip_rate_per_yr * self.pair_rate_multiplier
        } else {
            s.trip_rate_per_yr
        }
    }
}

/// Per-threshold sums and retained cells of one source.
type SourcePartial<T> = (Vec<KahanSum<T>>, Vec<HazardCell<T>>);

/// One (source, loss bin, state bin, cascade branch) term of the sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardCell<T = f64> {
    pub source_index: usize,
    pub loss_bin: usize,
    /// Representative loss of the PMF bin before any cascade increment.
    pub loss_bin_mw: T,
    /// Loss fed to the model (bin value plus DER loss on the cascade branch).
    pub effective_loss_mw: T,
    pub state_bin: usize,
    pub cascade_branch: bool,
    /// Rate times bin, state and branch probabilities, per year.
    pub weight: T,
    pub median_nadir_hz: T,
    pub sigma: T,
    /// Contribution per year at each retained threshold.
    pub contributions: Vec<T>,
}

impl<T: Real> HazardCell<T> {
    /// Standard deviations from the median up to the threshold, `(ln delta - ln mu) / sigma`.
    pub fn epsilon_star(&self, threshold_hz: T) -> T {
        (threshold_hz.ln() - self.median_nadir_hz.ln()) / self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardResult<T = f64> {
    pub thresholds: Vec<T>,
    pub total_rates: Vec<T>,
    pub source_ids: Vec<String>,
    pub state_bins: Vec<StateBin<T>>,
    pub cell_thresholds: Vec<T>,
    pub cells: Vec<HazardCell<T>>,
}

impl<T: Real> HazardResult<T> {
    pub fn return_periods(&self) -> Vec<T> {
        self.total_rates.iter().map(|&r| T::one() / r).collect()
    }

    pub fn rate_at(&self, threshold_hz: T) -> Result<T> {
        self.thresholds
            .iter()
            .position(|&d| d == threshold_hz)
            .map(|i| self.total_rates[i])
            .ok_or(Error::UnknownThreshold(threshold_hz.as_f64()))
    }

    /// Column of `cells[..].contributions` holding `threshold_hz`.
    pub fn cell_column(&self, threshold_hz: T) -> Result<usize> {
        self.cell_thresholds
            .iter()
            .position(|&d| d == threshold_hz)
            .ok_or(Error::UnknownThreshold(threshold_hz.as_f64()))
    }
}

struct Prepared<T> {
    ln_thresholds: Vec<T>,
    factors: Vec<T>,
    cell_columns: Vec<usize>,
    routes: Vec<DcRouting<T>>,
}

/// Evaluates the hazard sum at every threshold.
///
/// Sources are processed in parallel; each source accumulates its cells in a
/// fixed order with compensated summation and source totals are combined in
/// catalogue order, so the result does not depend on the thread count.
pub fn compute_hazard<T: Real>(inputs: &HazardInputs<'_, T>) -> Result<HazardResult<T>> {
    inputs.validate()?;
    let kind = inputs.model.kind();
    let routes: Vec<DcRouting<T>> = inputs
        .states
        .iter()
        .map(|s| {
            let r = inputs.controls.route(kind, s.mean_response_mw, s.mean_dc_mw);
            if let Some(audit) = inputs.audit {
                audit.record(&r, s.mean_response_mw);
            }
            r
        })
        .collect();
    let prep = Prepared {
        ln_thresholds: inputs.thresholds.iter().map(|d| d.ln()).collect(),
        factors: inputs.thresholds.iter().map(|&d| inputs.controls.exceedance_factor(d)).collect(),
        cell_columns: inputs
            .cell_thresholds
            .iter()
            .map(|d| inputs.thresholds.iter().position(|t| t == d).expect("validated"))
            .collect(),
        routes,
    };

    let per_source: Vec<SourcePartial<T>> =
        inputs.sources.par_iter().enumerate().map(|(i, s)| source_terms(inputs, &prep, i, s)).collect::<Result<_>>()?;

    let n = inputs.thresholds.len();
    let mut totals = vec![KahanSum::new(); n];
    let mut cells = Vec::new();
    for (sums, mut source_cells) in per_source {
        for (t, s) in totals.iter_mut().zip(&sums) {
            t.add(s.total());
        }
        cells.append(&mut source_cells);
    }
    Ok(HazardResult {
        thresholds: inputs.thresholds.clone(),
        total_rates: totals.iter().map(KahanSum::total).collect(),
        source_ids: inputs.sources.iter().map(|s| s.source_id.clone()).collect(),
        state_bins: inputs.states.to_vec(),
        cell_thresholds: inputs.cell_thresholds.clone(),
        cells,
    })
}

fn source_terms<T: Real>(
    inputs: &HazardInputs<'_, T>,
    prep: &Prepared<T>,
    source_index: usize,
    source: &SourceRecord<T>,
) -> Result<SourcePartial<T>> {
    let n = inputs.thresholds.len();
    let mut sums = vec![KahanSum::new(); n];
    let mut cells = Vec::new();
    let rate = inputs.source_rate(source);
    let pmf = source.pmf()?;
    let keep = !prep.cell_columns.is_empty();
    let mut probs = vec![T::zero(); n];
    for (j, (loss, w_loss)) in pmf.iter().enumerate() {
        for (k, state) in inputs.states.iter().enumerate() {
            let terms = match &inputs.cascade {
                Some(spec) => cascade_adjusted_terms(loss, state.mean_inertia_gva_s, spec),
                None => vec![(loss, T::one())],
            };
            for (branch, &(eff_loss, p_branch)) in terms.iter().enumerate() {
                let weight = rate * w_loss * state.weight * p_branch;
                let route = &prep.routes[k];
                let point = OperatingPoint::new(
                    eff_loss,
                    state.mean_inertia_gva_s,
                    state.mean_demand_gw,
                    route.response_mw,
                    route.grid_dc_mw,
                );
                let cell_err = |e: Error| Error::HazardCell {
                    source_id: source.source_id.clone(),
                    loss_mw: loss.as_f64(),
                    state_bin: state.bin_index,
                    source: Box::new(e),
                };
                let raw = inputs.model.median_nadir(&point).map_err(cell_err)?;
                let mu =
                    inputs.controls.cap(raw, eff_loss, state.mean_demand_gw, inputs.model.effective_damping(&point));
                let sigma = aleatory_sigma(eff_loss, state.mean_inertia_gva_s, &inputs.sigma);
                let ln_mu = mu.ln();
                for t in 0..n {
                    let p = normal_cdf((ln_mu - prep.ln_thresholds[t]) / sigma);
                    let c = weight * prep.factors[t] * p;
                    probs[t] = c;
                    if inputs.prune_below.is_some_and(|floor| c < floor) {
                        continue;
                    }
                    sums[t].add(c);
                }
                if keep {
                    cells.push(HazardCell {
                        source_index,
                        loss_bin: j,
                        loss_bin_mw: loss,
                        effective_loss_mw: eff_loss,
                        state_bin: k,
                        cascade_branch: branch > 0,
                        weight,
                        median_nadir_hz: mu,
                        sigma,
                        contributions: prep.cell_columns.iter().map(|&c| probs[c]).collect(),
                    });
                }
            }
        }
    }
    Ok((sums, cells))
}

/// `(threshold, rate, return period)` rows.
pub fn hazard_curve<T: Real>(inputs: &HazardInputs<'_, T>, threshold_grid: &[T]) -> Result<Vec<(T, T, T)>> {
    let run = HazardInputs { thresholds: threshold_grid.to_vec(), cell_thresholds: Vec::new(), ..inputs.clone() };
    let result = compute_hazard(&run)?;
    Ok(result.thresholds.iter().zip(&result.total_rates).map(|(&d, &r)| (d, r, T::one() / r)).collect())
}

/// Evenly spaced thresholds `start, start + step, ...` up to and including `stop`,
/// rounded to nine significant digits so that `0.05 * 16` is exactly `0.8`.
pub fn threshold_grid<T: Real>(start: T, stop: T, step: T) -> Vec<T> {
    let n = ((stop - start) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    (0..=n).map(|i| T::lit(round_sig((start + T::from_usize(i).expect("index") * step).as_f64()))).collect()
}
