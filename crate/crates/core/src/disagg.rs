//! Breaks a threshold's hazard rate down by source, loss size, state and epsilon.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardResult;
use crate::scalar::{KahanSum, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Source,
    LossSize,
    State,
    Epsilon,
    SizeInertiaEpsilon,
    SizeDemand,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Source,
        Dimension::LossSize,
        Dimension::State,
        Dimension::Epsilon,
        Dimension::SizeInertiaEpsilon,
        Dimension::SizeDemand,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Source => "source",
            Dimension::LossSize => "loss_size",
            Dimension::State => "state",
            Dimension::Epsilon => "epsilon",
            Dimension::SizeInertiaEpsilon => "size_inertia_epsilon",
            Dimension::SizeDemand => "size_demand",
        }
    }

    pub fn is_multi(self) -> bool {
        matches!(self, Dimension::SizeInertiaEpsilon | Dimension::SizeDemand)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown disaggregation dimension `{s}`")))
    }
}

/// Banding used to key cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisaggOptions {
    /// Interior epsilon edges; bands are left-closed, with open-ended first and last bands.
    pub epsilon_edges: Vec<f64>,
    pub inertia_band_gva_s: f64,
    pub demand_band_gw: f64,
    /// Loss bands; `None` keys each PMF bin value on its own.
    pub loss_band_mw: Option<f64>,
}

impl Default for DisaggOptions {
    fn default() -> Self {
        Self {
            epsilon_edges: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            inertia_band_gva_s: 10.0,
            demand_band_gw: 5.0,
            loss_band_mw: None,
        }
    }
}

impl DisaggOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon_edges.windows(2).all(|w| w[0] < w[1])
            && self.inertia_band_gva_s > 0.0
            && self.demand_band_gw > 0.0
            && self.loss_band_mw.is_none_or(|w| w > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("disaggregation bands must be positive and edges ascending".into()))
        }
    }

    /// Band index of `eps`: 0 below the first edge, `edges.len()` at or above the last.
    pub fn epsilon_band(&self, eps: f64) -> usize {
        self.epsilon_edges.partition_point(|&e| e <= eps)
    }

    pub fn epsilon_label(&self, band: usize) -> String {
        let e = &self.epsilon_edges;
        match band {
            0 => format!("<{}", e[0]),
            b if b == e.len() => format!(">={}", e[e.len() - 1]),
            b => format!("[{},{})", e[b - 1], e[b]),
        }
    }
}

/// Lower edge of the band holding `x`.
fn band_floor(x: f64, width: f64) -> f64 {
    (x / width).floor() * width
}

/// Grouping key; only the fields of the requested dimension are set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisaggKey {
    pub source_id: Option<String>,
    pub loss_bin_mw: Option<f64>,
    pub state_bin: Option<usize>,
    pub inertia_band: Option<f64>,
    pub demand_band: Option<f64>,
    pub epsilon_band: Option<usize>,
}

impl DisaggKey {
    fn empty() -> Self {
        Self {
            source_id: None,
            loss_bin_mw: None,
            state_bin: None,
            inertia_band: None,
            demand_band: None,
            epsilon_band: None,
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        let f = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        self.source_id
            .cmp(&other.source_id)
            .then(f(self.loss_bin_mw, other.loss_bin_mw))
            .then(self.state_bin.cmp(&other.state_bin))
            .then(f(self.inertia_band, other.inertia_band))
            .then(f(self.demand_band, other.demand_band))
            .then(self.epsilon_band.cmp(&other.epsilon_band))
    }
}

impl Eq for DisaggKey {}

impl PartialOrd for DisaggKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DisaggKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_key(other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisaggCell {
    pub key: DisaggKey,
    pub contribution_per_yr: f64,
    pub fraction: f64,
    /// Contribution-weighted mean epsilon of the group.
    pub mean_epsilon: f64,
}

fn key_for<T: Real>(
    result: &HazardResult<T>,
    cell: &crate::hazard::HazardCell<T>,
    eps: f64,
    dim: Dimension,
    opts: &DisaggOptions,
) -> DisaggKey {
    let mut key = DisaggKey::empty();
    let state = &result.state_bins[cell.state_bin];
    let loss = || {
        let v = cell.loss_bin_mw.as_f64();
        opts.loss_band_mw.map_or(v, |w| band_floor(v, w))
    };
    match dim {
        Dimension::Source => key.source_id = Some(result.source_ids[cell.source_index].clone()),
        Dimension::LossSize => key.loss_bin_mw = Some(loss()),
        Dimension::State => key.state_bin = Some(cell.state_bin),
        Dimension::Epsilon => key.epsilon_band = Some(opts.epsilon_band(eps)),
        Dimension::SizeInertiaEpsilon => {
            key.loss_bin_mw = Some(loss());
            key.inertia_band = Some(band_floor(state.mean_inertia_gva_s.as_f64(), opts.inertia_band_gva_s));
            key.epsilon_band = Some(opts.epsilon_band(eps));
        }
        Dimension::SizeDemand => {
            key.loss_bin_mw = Some(loss());
            key.demand_band = Some(band_floor(state.mean_demand_gw.as_f64(), opts.demand_band_gw));
        }
    }
    key
}

/// Groups the retained cell contributions at `threshold_hz` by the requested key.
///
/// Cells are returned in key order.
pub fn disaggregate<T: Real>(
    result: &HazardResult<T>,
    threshold_hz: T,
    dim: Dimension,
    opts: &DisaggOptions,
) -> Result<Vec<DisaggCell>> {
    opts.validate()?;
    let col = result.cell_column(threshold_hz)?;
    let mut total = KahanSum::new();
    let mut groups: BTreeMap<DisaggKey, (KahanSum<f64>, KahanSum<f64>)> = BTreeMap::new();
    for cell in &result.cells {
        let c = cell.contributions[col].as_f64();
        let eps = cell.epsilon_star(threshold_hz).as_f64();
        total.add(c);
        let g = groups.entry(key_for(result, cell, eps, dim, opts)).or_default();
        g.0.add(c);
        g.1.add(c * eps);
    }
    let total = total.total();
    if !(total > 0.0) {
        return Err(Error::ZeroRate(threshold_hz.as_f64()));
    }
    Ok(groups
        .into_iter()
        .map(|(key, (sum, eps))| {
            let c = sum.total();
            DisaggCell {
                key,
                contribution_per_yr: c,
                fraction: c / total,
                mean_epsilon: if c > 0.0 { eps.total() / c } else { 0.0 },
            }
        })
        .collect())
}

/// Epsilon disaggregation with the given band options.
pub fn epsilon_bands<T: Real>(
    result: &HazardResult<T>,
    threshold_hz: T,
    opts: &DisaggOptions,
) -> Result<Vec<DisaggCell>> {
    disaggregate(result, threshold_hz, Dimension::Epsilon, opts)
}

/// Largest-fraction cell; ties go to the first in key order.
pub fn modal_cell(cells: &[DisaggCell]) -> Option<&DisaggCell> {
    cells.iter().fold(None, |best: Option<&DisaggCell>, c| match best {
        Some(b) if b.fraction >= c.fraction => Some(b),
        _ => Some(c),
    })
}

/// Sums cells over every key not listed in `keep`.
pub fn marginalise(cells: &[DisaggCell], keep: &[Dimension]) -> Vec<DisaggCell> {
    let mut out: BTreeMap<DisaggKey, (KahanSum<f64>, KahanSum<f64>)> = BTreeMap::new();
    for c in cells {
        let mut k = DisaggKey::empty();
        for d in keep {
            match d {
                Dimension::Source => k.source_id = c.key.source_id.clone(),
                Dimension::LossSize => k.loss_bin_mw = c.key.loss_bin_mw,
                Dimension::State => k.state_bin = c.key.state_bin,
                Dimension::Epsilon => k.epsilon_band = c.key.epsilon_band,
                Dimension::SizeInertiaEpsilon | Dimension::SizeDemand => {}
            }
        }
        let e = out.entry(k).or_default();
        e.0.add(c.contribution_per_yr);
        e.1.add(c.mean_epsilon * c.contribution_per_yr);
    }
    let total: f64 = cells.iter().map(|c| c.contribution_per_yr).sum();
    out.into_iter()
        .map(|(key, (c, e))| {
            let c = c.total();
            DisaggCell {
                key,
                contribution_per_yr: c,
                fraction: c / total,
                mean_epsilon: if c > 0.0 { e.total() / c } else { 0.0 },
            }
        })
        .collect()
}
