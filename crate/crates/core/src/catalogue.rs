//! Source catalogue: loss sources, their empirical loss-size PMFs, and the
//! BMU-to-source registry.
//!
//! Loss-size PMFs are histograms of settlement-period output on a uniform
//! bin lattice. Bins are left-closed/right-open and each bin is represented
//! by its centre. Output above a source's maximum credible loss is clamped
//! into the top bin so that the trip probability mass is preserved.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::io::{self, Timestamp};
use crate::scalar::{kahan_sum, Real};

/// Default histogram resolution.
pub const DEFAULT_BIN_WIDTH_MW: f64 = 25.0;
/// Fewest positive-generation periods accepted when building a PMF from data.
pub const MIN_PMF_PERIODS: usize = 100;
/// Tolerance on the unit-mass invariant.
pub const PMF_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    Ccgt,
    Interconnector,
    Nuclear,
    Biomass,
    PumpedStorage,
    Wind,
    FleetCatchall,
    Pair,
    Cascade,
}

impl SourceType {
    pub const ALL: [SourceType; 9] = [
        SourceType::Ccgt,
        SourceType::Interconnector,
        SourceType::Nuclear,
        SourceType::Biomass,
        SourceType::PumpedStorage,
        SourceType::Wind,
        SourceType::FleetCatchall,
        SourceType::Pair,
        SourceType::Cascade,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceType::Ccgt => "ccgt",
            SourceType::Interconnector => "interconnector",
            SourceType::Nuclear => "nuclear",
            SourceType::Biomass => "biomass",
            SourceType::PumpedStorage => "pumped_storage",
            SourceType::Wind => "wind",
            SourceType::FleetCatchall => "fleet_catchall",
            SourceType::Pair => "pair",
            SourceType::Cascade => "cascade",
        }
    }

    /// Layer A sources: one physical unit (or fleet) rather than a composite event.
    pub fn is_single(self) -> bool {
        !matches!(self, SourceType::Pair | SourceType::Cascade)
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        SourceType::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .or(match key.as_str() {
                "ic" => Some(SourceType::Interconnector),
                "ps" => Some(SourceType::PumpedStorage),
                "catchall" | "catch_all" | "fleet_catch_all" => Some(SourceType::FleetCatchall),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownSourceType(s.to_string()))
    }
}

/// Technology class carrying a Gamma prior on trip rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorClass {
    Ccgt,
    Nuclear,
    Biomass,
    Interconnector,
    Wind,
    PumpedStorage,
}

impl PriorClass {
    pub const ALL: [PriorClass; 6] = [
        PriorClass::Ccgt,
        PriorClass::Nuclear,
        PriorClass::Biomass,
        PriorClass::Interconnector,
        PriorClass::Wind,
        PriorClass::PumpedStorage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PriorClass::Ccgt => "ccgt",
            PriorClass::Nuclear => "nuclear",
            PriorClass::Biomass => "biomass",
            PriorClass::Interconnector => "interconnector",
            PriorClass::Wind => "wind",
            PriorClass::PumpedStorage => "pumped_storage",
        }
    }
}

impl fmt::Display for PriorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        PriorClass::ALL.into_iter().find(|c| c.as_str() == key).ok_or_else(|| Error::UnknownPriorClass(s.to_string()))
    }
}

/// Discretised loss-size distribution on a uniform lattice of bin centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPmf<T = f64> {
    first_value_mw: T,
    bin_width_mw: T,
    weights: Vec<T>,
}

impl<T: Real> LossPmf<T> {
    /// Builds a PMF whose `k`-th bin is represented by `first_value_mw + k * bin_width_mw`.
    pub fn new(first_value_mw: T, bin_width_mw: T, weights: Vec<T>) -> Result<Self> {
        if !(bin_width_mw > T::zero()) || !bin_width_mw.is_finite() {
            return Err(Error::InvalidInput(format!("bin width must be positive, got {bin_width_mw}")));
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput("PMF needs at least one bin".into()));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput("PMF weights must be finite and non-negative".into()));
        }
        let mass = kahan_sum(weights.iter().copied());
        let tol = T::lit(PMF_MASS_TOLERANCE).max(T::epsilon() * T::lit(64.0));
        if (mass - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!("PMF weights sum to {mass}, expected 1")));
        }
        Ok(Self { first_value_mw, bin_width_mw, weights })
    }

    /// Point mass at `value_mw`.
    pub fn delta(value_mw: T, bin_width_mw: T) -> Result<Self> {
        Self::new(value_mw, bin_width_mw, vec![T::one()])
    }

    pub fn bin_width_mw(&self) -> T {
        self.bin_width_mw
    }

    pub fn first_value_mw(&self) -> T {
        self.first_value_mw
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Representative (centre) value of bin `k`.
    pub fn value(&self, k: usize) -> T {
        self.first_value_mw + T::from_usize(k).expect("bin index") * self.bin_width_mw
    }

    /// `(value, weight)` pairs in ascending value order.
    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.weights.iter().enumerate().map(|(k, w)| (self.value(k), *w))
    }

    /// `len() + 1` ascending bin edges.
    pub fn bin_edges_mw(&self) -> Vec<T> {
        let half = self.bin_width_mw / T::lit(2.0);
        (0..=self.len())
            .map(|k| self.first_value_mw - half + T::from_usize(k).expect("edge index") * self.bin_width_mw)
            .collect()
    }

    pub fn min_value_mw(&self) -> T {
        self.first_value_mw
    }

    pub fn max_value_mw(&self) -> T {
        self.value(self.len() - 1)
    }

    pub fn mean_mw(&self) -> T {
        kahan_sum(self.iter().map(|(v, w)| v * w))
    }

    pub fn total_mass(&self) -> T {
        kahan_sum(self.weights.iter().copied())
    }
}

/// One entry of the catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord<T = f64> {
    pub source_id: String,
    pub source_type: SourceType,
    pub capacity_mw: T,
    pub max_credible_loss_mw: T,
    pub bmu_ids: Vec<String>,
    /// Absent for composite (pair / cascade) sources.
    pub prior_class: Option<PriorClass>,
    /// Annual trip rate; zero until rates are estimated.
    pub trip_rate_per_yr: T,
    pub pmf: Option<LossPmf<T>>,
}

impl<T: Real> SourceRecord<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_credible_loss_mw > T::zero()) {
            return Err(Error::InvalidInput(format!("{}: max credible loss must be positive", self.source_id)));
        }
        if self.source_type.is_single() && self.max_credible_loss_mw > self.capacity_mw {
            return Err(Error::InvalidInput(format!(
                "{}: max credible loss {} MW exceeds capacity {} MW",
                self.source_id, self.max_credible_loss_mw, self.capacity_mw
            )));
        }
        if self.trip_rate_per_yr < T::zero() {
            return Err(Error::InvalidInput(format!("{}: negative trip rate", self.source_id)));
        }
        Ok(())
    }

    pub fn pmf(&self) -> Result<&LossPmf<T>> {
        self.pmf.as_ref().ok_or_else(|| Error::InvalidInput(format!("{}: no loss PMF attached", self.source_id)))
    }
}

fn bin_index<T: Real>(value: T, width: T) -> i64 {
    (value / width).floor().to_i64().expect("finite bin index")
}

/// Histogram of weighted samples onto the centred lattice; shared by the public builders.
fn histogram<T: Real>(
    samples: impl IntoIterator<Item = (T, T)>,
    max_credible_loss_mw: T,
    bin_width_mw: T,
) -> Result<LossPmf<T>> {
    if !(bin_width_mw > T::zero()) {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    if !(max_credible_loss_mw > T::zero()) {
        return Err(Error::InvalidInput("max credible loss must be positive".into()));
    }
    let half = bin_width_mw / T::lit(2.0);
    // Top bin is the last one whose centre does not exceed the credible limit.
    let top = bin_index(max_credible_loss_mw - half, bin_width_mw).max(0);
    let mut mass: BTreeMap<i64, T> = BTreeMap::new();
    let mut total = T::zero();
    for (value, weight) in samples {
        if !(value > T::zero()) || !value.is_finite() {
            continue;
        }
        let k = bin_index(value, bin_width_mw).min(top);
        let slot = mass.entry(k).or_insert_with(T::zero);
        *slot = *slot + weight;
        total = total + weight;
    }
    let (&lo, _) = mass.first_key_value().ok_or(Error::NoPositiveGeneration)?;
    let (&hi, _) = mass.last_key_value().expect("non-empty");
    let weights = (lo..=hi).map(|k| mass.get(&k).copied().unwrap_or_else(T::zero) / total).collect();
    let first = T::from_i64(lo).expect("bin index") * bin_width_mw + half;
    LossPmf::new(first, bin_width_mw, weights)
}

/// Empirical loss-size PMF from settlement-period output.
///
/// Only periods with positive output count; output above the credible limit
/// is clamped into the top bin.
pub fn build_pmf<T: Real>(outputs_mw: &[T], max_credible_loss_mw: T, bin_width_mw: T) -> Result<LossPmf<T>> {
    histogram(outputs_mw.iter().map(|&x| (x, T::one())), max_credible_loss_mw, bin_width_mw)
}

/// Re-histograms an existing PMF's bin centres (weighted) on a lattice of the given width.
pub fn rebin_pmf<T: Real>(pmf: &LossPmf<T>, max_credible_loss_mw: T, bin_width_mw: T) -> Result<LossPmf<T>> {
    histogram(pmf.iter(), max_credible_loss_mw, bin_width_mw)
}

/// As [`build_pmf`], but refuses samples with fewer than `min_periods` positive periods.
pub fn build_pmf_checked<T: Real>(
    source_id: &str,
    outputs_mw: &[T],
    max_credible_loss_mw: T,
    bin_width_mw: T,
    min_periods: usize,
) -> Result<LossPmf<T>> {
    let found = outputs_mw.iter().filter(|x| **x > T::zero()).count();
    if found == 0 {
        return Err(Error::NoPositiveGeneration);
    }
    if found < min_periods {
        return Err(Error::InsufficientPeriods { source_id: source_id.to_string(), found, required: min_periods });
    }
    build_pmf(outputs_mw, max_credible_loss_mw, bin_width_mw)
}

#[derive(Debug, Deserialize)]
struct CatalogueRow {
    source_id: String,
    source_type: String,
    capacity_mw: f64,
    max_credible_loss_mw: f64,
    #[serde(default)]
    prior_class: String,
    #[serde(default)]
    bmu_ids: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RegistryRow {
    pub bmu_id: String,
    pub source_id: String,
}

/// One half-hourly output observation for a BMU.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord<T = f64> {
    pub bmu_id: String,
    pub timestamp: Timestamp,
    pub output_mw: T,
}

#[derive(Debug, Deserialize)]
struct GenerationRow {
    bmu_id: String,
    timestamp_iso8601: String,
    output_mw: f64,
}

fn parse_catalogue_rows<T: Real, R: Read>(reader: R, origin: &Path) -> Result<Vec<SourceRecord<T>>> {
    let rows: Vec<CatalogueRow> = io::read_rows(reader, origin)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let source_type: SourceType = row.source_type.parse()?;
        if !seen.insert(row.source_id.clone()) {
            return Err(Error::DuplicateSourceId(row.source_id));
        }
        let prior_class = match row.prior_class.trim() {
            "" => None,
            s => Some(s.parse()?),
        };
        if prior_class.is_none() && source_type.is_single() {
            return Err(Error::file(origin, format!("{}: prior_class required", row.source_id)));
        }
        let bmu_ids = row.bmu_ids.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
        let record = SourceRecord {
            source_id: row.source_id,
            source_type,
            capacity_mw: T::lit(row.capacity_mw),
            max_credible_loss_mw: T::lit(row.max_credible_loss_mw),
            bmu_ids,
            prior_class,
            trip_rate_per_yr: T::zero(),
            pmf: None,
        };
        record.validate().map_err(|e| Error::file(origin, e))?;
        out.push(record);
    }
    Ok(out)
}

/// Merges registry mappings into the catalogue, enforcing one source per BMU.
pub fn apply_registry<T: Real>(catalogue: &mut [SourceRecord<T>], registry: &[RegistryRow]) -> Result<()> {
    let index: HashMap<String, usize> = catalogue.iter().enumerate().map(|(i, s)| (s.source_id.clone(), i)).collect();
    let mut owner: HashMap<String, usize> = HashMap::new();
    for (i, source) in catalogue.iter().enumerate() {
        for bmu in &source.bmu_ids {
            if let Some(&prev) = owner.get(bmu) {
                if prev != i {
                    return Err(Error::BmuConflict {
                        bmu: bmu.clone(),
                        first: catalogue[prev].source_id.clone(),
                        second: source.source_id.clone(),
                    });
                }
            }
            owner.insert(bmu.clone(), i);
        }
    }
    for row in registry {
        let &target = index.get(&row.source_id).ok_or_else(|| Error::UnknownSource(row.source_id.clone()))?;
        match owner.get(&row.bmu_id) {
            Some(&prev) if prev != target => {
                return Err(Error::BmuConflict {
                    bmu: row.bmu_id.clone(),
                    first: catalogue[prev].source_id.clone(),
                    second: row.source_id.clone(),
                })
            }
            Some(_) => {}
            None => {
                owner.insert(row.bmu_id.clone(), target);
                catalogue[target].bmu_ids.push(row.bmu_id.clone());
            }
        }
    }
    Ok(())
}

/// Parses catalogue and registry text.
pub fn parse_catalogue<T: Real, C: Read, R: Read>(catalogue: C, registry: Option<R>) -> Result<Vec<SourceRecord<T>>> {
    let mut sources = parse_catalogue_rows(catalogue, Path::new("<catalogue>"))?;
    let rows: Vec<RegistryRow> = match registry {
        Some(reg) => io::read_rows(reg, Path::new("<registry>"))?,
        None => Vec::new(),
    };
    apply_registry(&mut sources, &rows)?;
    if sources.is_empty() {
        warn!("source catalogue is empty");
    }
    Ok(sources)
}

/// Loads the catalogue file and (optionally) the BMU registry file.
pub fn load_catalogue<T: Real>(catalogue_path: &Path, registry_path: Option<&Path>) -> Result<Vec<SourceRecord<T>>> {
    let mut sources = parse_catalogue_rows(io::open(catalogue_path)?, catalogue_path)?;
    match registry_path {
        Some(path) => {
            let rows: Vec<RegistryRow> = io::read_file_rows(path)?;
            apply_registry(&mut sources, &rows).map_err(|e| Error::file(path, e))?;
        }
        None => apply_registry(&mut sources, &[]).map_err(|e| Error::file(catalogue_path, e))?,
    }
    if sources.is_empty() {
        warn!(path = %catalogue_path.display(), "source catalogue is empty");
    }
    Ok(sources)
}

pub fn parse_generation<T: Real, R: Read>(reader: R, origin: &Path) -> Result<Vec<GenerationRecord<T>>> {
    let rows: Vec<GenerationRow> = io::read_rows(reader, origin)?;
    rows.into_iter()
        .map(|r| {
            Ok(GenerationRecord {
                timestamp: io::parse_timestamp(&r.timestamp_iso8601).map_err(|e| Error::file(origin, e))?,
                bmu_id: r.bmu_id,
                output_mw: T::lit(r.output_mw),
            })
        })
        .collect()
}

pub fn load_generation<T: Real>(path: &Path) -> Result<Vec<GenerationRecord<T>>> {
    parse_generation(io::open(path)?, path)
}

/// Per-settlement-period output of a source: its BMUs summed at each timestamp.
pub fn source_period_outputs<T: Real>(source: &SourceRecord<T>, records: &[GenerationRecord<T>]) -> Vec<T> {
    let bmus: HashSet<&str> = source.bmu_ids.iter().map(String::as_str).collect();
    let mut periods: BTreeMap<Timestamp, T> = BTreeMap::new();
    for rec in records.iter().filter(|r| bmus.contains(r.bmu_id.as_str())) {
        let slot = periods.entry(rec.timestamp).or_insert_with(T::zero);
        *slot = *slot + rec.output_mw;
    }
    periods.into_values().collect()
}

/// Builds and attaches an empirical PMF to every single source in the catalogue.
///
/// Composite sources (pairs, cascades) and sources that already carry a PMF
/// are left untouched.
pub fn attach_pmfs<T: Real>(
    catalogue: &mut [SourceRecord<T>],
    records: &[GenerationRecord<T>],
    bin_width_mw: T,
    min_periods: usize,
) -> Result<()> {
    for source in catalogue.iter_mut().filter(|s| s.source_type.is_single() && s.pmf.is_none()) {
        let outputs = source_period_outputs(source, records);
        let pmf =
            build_pmf_checked(&source.source_id, &outputs, source.max_credible_loss_mw, bin_width_mw, min_periods)
                .map_err(|e| match e {
                    Error::NoPositiveGeneration => {
                        Error::InvalidInput(format!("{}: no positive-generation periods", source.source_id))
                    }
                    other => other,
                })?;
        source.pmf = Some(pmf);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn repeat(value: f64, n: usize) -> Vec<f64> {
        vec![value; n]
    }

    #[test]
    fn degenerate_output_gives_single_bin() {
        let pmf = build_pmf(&repeat(500.0, 200), 600.0, 25.0).unwrap();
        assert_eq!(pmf.weights(), &[1.0]);
        assert_eq!(pmf.bin_edges_mw(), vec![500.0, 525.0]);
        assert_eq!(pmf.value(0), 512.5);
    }

    #[test]
    fn hand_counted_histogram() {
        let mut outputs = vec![100.0];
        outputs.extend(repeat(300.0, 3));
        let pmf = build_pmf(&outputs, 400.0, 25.0).unwrap();
        let masses: Vec<(f64, f64)> = pmf.iter().filter(|(_, w)| *w > 0.0).collect();
        assert_eq!(masses, vec![(112.5, 0.25), (312.5, 0.75)]);
        // Interior empty bins are retained with zero weight.
        assert_eq!(pmf.len(), 9);
    }

    #[test]
    fn truncation_clamps_into_top_bin() {
        let pmf: LossPmf<f64> = build_pmf(&[700.0, 900.0], 800.0, 25.0).unwrap();
        assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
        assert!(pmf.max_value_mw() <= 800.0);
        assert_eq!(pmf.max_value_mw(), 787.5);
        assert_eq!(pmf.weights()[0], 0.5);
        assert_eq!(*pmf.weights().last().unwrap(), 0.5);
    }

    #[test]
    fn nonpositive_periods_are_filtered() {
        let pmf = build_pmf(&[-300.0, 0.0, 410.0, 420.0], 1000.0, 25.0).unwrap();
        assert_eq!(pmf.weights(), &[1.0]);
        assert!(matches!(build_pmf(&[-5.0, 0.0], 100.0, 25.0), Err(Error::NoPositiveGeneration)));
        assert!(matches!(build_pmf::<f64>(&[], 100.0, 25.0), Err(Error::NoPositiveGeneration)));
    }

    #[test]
    fn minimum_period_rule() {
        let err = build_pmf_checked("X", &repeat(300.0, 99), 400.0, 25.0, MIN_PMF_PERIODS).unwrap_err();
        assert!(matches!(err, Error::InsufficientPeriods { found: 99, .. }));
        assert!(build_pmf_checked("X", &repeat(300.0, 100), 400.0, 25.0, MIN_PMF_PERIODS).is_ok());
    }

    #[test]
    fn source_type_parsing() {
        assert_eq!("CCGT".parse::<SourceType>().unwrap(), SourceType::Ccgt);
        assert_eq!("pumped_storage".parse::<SourceType>().unwrap(), SourceType::PumpedStorage);
        assert!(matches!("geothermal".parse::<SourceType>(), Err(Error::UnknownSourceType(_))));
    }

    const HEADER: &str = "source_id,source_type,capacity_mw,max_credible_loss_mw,prior_class,bmu_ids\n";

    #[test]
    fn catalogue_rejects_duplicates_and_shared_bmus() {
        let dup = format!("{HEADER}A,ccgt,800,800,ccgt,A-1\nA,ccgt,800,800,ccgt,A-2\n");
        let err = parse_catalogue::<f64, _, &[u8]>(dup.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::DuplicateSourceId(id) if id == "A"));

        let shared = format!("{HEADER}A,ccgt,800,800,ccgt,X-1\nB,ccgt,800,800,ccgt,X-1\n");
        let err = parse_catalogue::<f64, _, &[u8]>(shared.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::BmuConflict { .. }));

        let ok = format!("{HEADER}A,ccgt,800,800,ccgt,A-1\n");
        let registry = "bmu_id,source_id\nA-1,A\nB-9,A\n";
        let sources = parse_catalogue::<f64, _, _>(ok.as_bytes(), Some(registry.as_bytes())).unwrap();
        assert_eq!(sources[0].bmu_ids, vec!["A-1", "B-9"]);

        let two = format!("{HEADER}A,ccgt,800,800,ccgt,A-1\nB,wind,500,500,wind,\n");
        let registry = "bmu_id,source_id\nA-1,B\n";
        let err = parse_catalogue::<f64, _, _>(two.as_bytes(), Some(registry.as_bytes())).unwrap_err();
        assert!(matches!(err, Error::BmuConflict { .. }));
    }

    #[test]
    fn catalogue_rejects_unknown_type_and_excess_loss() {
        let bad = format!("{HEADER}A,tidal,800,800,ccgt,\n");
        assert!(matches!(parse_catalogue::<f64, _, &[u8]>(bad.as_bytes(), None), Err(Error::UnknownSourceType(_))));
        let excess = format!("{HEADER}A,ccgt,800,900,ccgt,\n");
        assert!(parse_catalogue::<f64, _, &[u8]>(excess.as_bytes(), None).is_err());
    }

    #[test]
    fn empty_catalogue_is_allowed() {
        let sources = parse_catalogue::<f64, _, &[u8]>(HEADER.as_bytes(), None).unwrap();
        assert!(sources.is_empty());
        let sources = parse_catalogue::<f64, _, &[u8]>(&b""[..], None).unwrap();
        assert!(sources.is_empty());
    }

    #[test]
    fn table_two_type_counts() {
        let counts = [
            ("ccgt", 19),
            ("interconnector", 10),
            ("nuclear", 2),
            ("biomass", 1),
            ("pumped_storage", 3),
            ("wind", 12),
            ("fleet_catchall", 2),
        ];
        let mut text = HEADER.to_string();
        for (ty, n) in counts {
            let class = if ty == "fleet_catchall" { "ccgt" } else { ty };
            for i in 0..n {
                text.push_str(&format!("{ty}_{i},{ty},1000,900,{class},{ty}-{i}\n"));
            }
        }
        let sources = parse_catalogue::<f64, _, &[u8]>(text.as_bytes(), None).unwrap();
        // The per-type counts add up to 49.
        assert_eq!(sources.len(), 49);
        for (ty, n) in counts {
            let ty: SourceType = ty.parse().unwrap();
            assert_eq!(sources.iter().filter(|s| s.source_type == ty).count(), n);
        }
        for i in 0..2 {
            text.push_str(&format!("extra_{i},interconnector,1000,900,interconnector,extra-{i}\n"));
        }
        let sources = parse_catalogue::<f64, _, &[u8]>(text.as_bytes(), None).unwrap();
        assert_eq!(sources.len(), 51);
    }

    #[test]
    fn generation_aggregates_bmus_per_period() {
        let text = "bmu_id,timestamp_iso8601,output_mw\n\
                    A-1,2024-01-01T00:00:00Z,200\n\
                    A-2,2024-01-01T00:00:00Z,150\n\
                    A-1,2024-01-01T00:30:00Z,-10\n\
                    Z-9,2024-01-01T00:30:00Z,999\n";
        let records: Vec<GenerationRecord<f64>> = parse_generation(text.as_bytes(), Path::new("gen")).unwrap();
        let source = SourceRecord {
            source_id: "A".into(),
            source_type: SourceType::Interconnector,
            capacity_mw: 1000.0,
            max_credible_loss_mw: 1000.0,
            bmu_ids: vec!["A-1".into(), "A-2".into()],
            prior_class: Some(PriorClass::Interconnector),
            trip_rate_per_yr: 0.0,
            pmf: None,
        };
        assert_eq!(source_period_outputs(&source, &records), vec![350.0, -10.0]);
    }

    fn outputs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 1 => -500.0..0.0, 6 => 0.5..1500.0f64], 1..300)
    }

    proptest! {
        #[test]
        fn pmf_mass_and_mean(values in outputs(), max in 50.0..1400.0f64) {
            prop_assume!(values.iter().any(|v| *v > 0.0));
            let pmf = build_pmf(&values, max, 25.0).unwrap();
            prop_assert!((pmf.total_mass() - 1.0).abs() < 1e-9);
            prop_assert!(pmf.weights().iter().all(|w| *w >= 0.0));
            prop_assert!(pmf.mean_mw() <= max.max(12.5));
        }

        #[test]
        fn pmf_is_order_invariant(mut values in outputs(), seed in any::<u64>()) {
            prop_assume!(values.iter().any(|v| *v > 0.0));
            let a = build_pmf(&values, 1200.0, 25.0).unwrap();
            // Deterministic shuffle.
            let n = values.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                values.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = build_pmf(&values, 1200.0, 25.0).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn rebinning_centres_reproduces_pmf(values in outputs()) {
            prop_assume!(values.iter().any(|v| *v > 0.0));
            let pmf = build_pmf(&values, 1000.0, 25.0).unwrap();
            let again = rebin_pmf(&pmf, 1000.0, 25.0).unwrap();
            prop_assert_eq!(pmf.first_value_mw(), again.first_value_mw());
            prop_assert_eq!(pmf.len(), again.len());
            for (a, b) in pmf.weights().iter().zip(again.weights()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
