//! Empirical system-state distribution as equal-count severity bins.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Timestamp};
use crate::scalar::{kahan_sum, Real};

pub const DEFAULT_STATE_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord<T = f64> {
    pub timestamp: Timestamp,
    pub inertia_gva_s: T,
    pub demand_gw: T,
    pub response_mw: T,
    pub dc_contracted_mw: T,
}

impl<T: Real> StateRecord<T> {
    pub fn validate(&self) -> Result<()> {
        let h = self.inertia_gva_s;
        let d = self.demand_gw;
        let ok = h > T::zero()
            && h < T::lit(1000.0)
            && d > T::zero()
            && d < T::lit(100.0)
            && self.response_mw >= T::zero()
            && self.dc_contracted_mw >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "state record at {} out of range (H={h}, D={d}, R={}, DC={})",
                io::format_timestamp(&self.timestamp),
                self.response_mw,
                self.dc_contracted_mw
            )))
        }
    }
}

/// One weighted system-state regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBin<T = f64> {
    pub bin_index: usize,
    pub weight: T,
    pub mean_inertia_gva_s: T,
    pub mean_demand_gw: T,
    pub mean_response_mw: T,
    pub mean_dc_mw: T,
    pub record_count: usize,
}

impl<T: Real> StateBin<T> {
    /// A single-state "distribution", handy for point evaluations.
    pub fn point(inertia_gva_s: T, demand_gw: T, response_mw: T, dc_mw: T) -> Self {
        Self {
            bin_index: 0,
            weight: T::one(),
            mean_inertia_gva_s: inertia_gva_s,
            mean_demand_gw: demand_gw,
            mean_response_mw: response_mw,
            mean_dc_mw: dc_mw,
            record_count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct MetricWeights<T = f64> {
    pub inertia: T,
    pub demand: T,
    pub response: T,
}

impl<T: Real> Default for MetricWeights<T> {
    fn default() -> Self {
        Self { inertia: T::lit(0.6), demand: T::lit(0.2), response: T::lit(0.2) }
    }
}

/// Per-variable mean and standard deviation used to standardise the metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalisation<T = f64> {
    pub mean: [T; 3],
    pub stdev: [T; 3],
}

impl<T: Real> Normalisation<T> {
    /// Population moments of (H, D, R) over the records.
    pub fn from_records(records: &[StateRecord<T>]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no state records".into()));
        }
        let n = T::from_usize(records.len()).expect("count");
        let columns: [Vec<T>; 3] = [
            records.iter().map(|r| r.inertia_gva_s).collect(),
            records.iter().map(|r| r.demand_gw).collect(),
            records.iter().map(|r| r.response_mw).collect(),
        ];
        let mut mean = [T::zero(); 3];
        let mut stdev = [T::zero(); 3];
        for (i, col) in columns.iter().enumerate() {
            mean[i] = kahan_sum(col.iter().copied()) / n;
            let var = kahan_sum(col.iter().map(|x| (*x - mean[i]) * (*x - mean[i]))) / n;
            stdev[i] = var.sqrt();
        }
        Ok(Self { mean, stdev })
    }
}

/// Severity score `-wH z(H) - wD z(D) - wR z(R)`; higher is more severe.
pub fn composite_metric<T: Real>(
    record: &StateRecord<T>,
    weights: &MetricWeights<T>,
    norm: &Normalisation<T>,
) -> Result<T> {
    const NAMES: [&str; 3] = ["inertia", "demand", "response"];
    for (i, sd) in norm.stdev.iter().enumerate() {
        if !(*sd > T::zero()) || !sd.is_finite() {
            return Err(Error::DegenerateStdev(NAMES[i]));
        }
    }
    Ok(severity(record, weights, norm))
}

fn severity<T: Real>(record: &StateRecord<T>, weights: &MetricWeights<T>, norm: &Normalisation<T>) -> T {
    let z = |x: T, i: usize| (x - norm.mean[i]) / norm.stdev[i];
    -(weights.inertia * z(record.inertia_gva_s, 0)
        + weights.demand * z(record.demand_gw, 1)
        + weights.response * z(record.response_mw, 2))
}

/// Sorts records by severity and splits them into `n_bins` equal-count bins.
///
/// Bin 0 is the most severe regime. A variable with zero spread contributes
/// nothing to the ordering. Ties fall back to timestamp order.
pub fn quantile_bin<T: Real>(
    records: &[StateRecord<T>],
    n_bins: usize,
    weights: &MetricWeights<T>,
) -> Result<Vec<StateBin<T>>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no state records".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidInput("need at least one state bin".into()));
    }
    if n_bins > records.len() {
        return Err(Error::TooManyBins { bins: n_bins, records: records.len() });
    }
    let mut norm = Normalisation::from_records(records)?;
    for sd in norm.stdev.iter_mut() {
        if !(*sd > T::zero()) {
            *sd = T::one();
        }
    }
    let mut order: Vec<(T, usize)> =
        records.iter().enumerate().map(|(i, r)| (severity(r, weights, &norm), i)).collect();
    order.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| records[a.1].timestamp.cmp(&records[b.1].timestamp))
            .then_with(|| a.1.cmp(&b.1))
    });

    let n = records.len();
    let total = T::from_usize(n).expect("count");
    let bins = (0..n_bins)
        .map(|k| {
            let lo = k * n / n_bins;
            let hi = (k + 1) * n / n_bins;
            let members = &order[lo..hi];
            let count = T::from_usize(members.len()).expect("count");
            let mean = |f: fn(&StateRecord<T>) -> T| kahan_sum(members.iter().map(|(_, i)| f(&records[*i]))) / count;
            StateBin {
                bin_index: k,
                weight: count / total,
                mean_inertia_gva_s: mean(|r| r.inertia_gva_s),
                mean_demand_gw: mean(|r| r.demand_gw),
                mean_response_mw: mean(|r| r.response_mw),
                mean_dc_mw: mean(|r| r.dc_contracted_mw),
                record_count: members.len(),
            }
        })
        .collect();
    Ok(bins)
}

#[derive(Debug, Deserialize)]
struct StateRow {
    timestamp_iso8601: String,
    inertia_gva_s: f64,
    demand_gw: f64,
    response_mw: f64,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    dc_contracted_mw: Option<f64>,
}

pub fn parse_states<T: Real, R: Read>(reader: R, origin: &Path) -> Result<Vec<StateRecord<T>>> {
    let rows: Vec<StateRow> = io::read_rows(reader, origin)?;
    rows.into_iter()
        .map(|r| {
            let record = StateRecord {
                timestamp: io::parse_timestamp(&r.timestamp_iso8601).map_err(|e| Error::file(origin, e))?,
                inertia_gva_s: T::lit(r.inertia_gva_s),
                demand_gw: T::lit(r.demand_gw),
                response_mw: T::lit(r.response_mw),
                dc_contracted_mw: T::lit(r.dc_contracted_mw.unwrap_or(0.0)),
            };
            record.validate().map_err(|e| Error::file(origin, e))?;
            Ok(record)
        })
        .collect()
}

pub fn load_states<T: Real>(path: &Path) -> Result<Vec<StateRecord<T>>> {
    parse_states(io::open(path)?, path)
}
