//! Simultaneous-pair sources (PMF convolution) and the RoCoF-gated cascade split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::catalogue::{LossPmf, SourceRecord, SourceType};
use crate::error::{Error, Result};
use crate::frpe::sfr::rocof;
use crate::io;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependency {
    Independent,
    CommonCause,
    Proximity,
    OperatorCoupled,
}

impl FromStr for Dependency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "independent" => Ok(Dependency::Independent),
            "common_cause" => Ok(Dependency::CommonCause),
            "proximity" => Ok(Dependency::Proximity),
            "operator_coupled" => Ok(Dependency::OperatorCoupled),
            other => Err(Error::InvalidInput(format!("unknown dependency type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Moderate,
    Severe,
    Extreme,
}

impl Severity {
    /// Assessed annual rate used when a pair gives none.
    pub fn default_rate(self) -> f64 {
        match self {
            Severity::Moderate => 0.10,
            Severity::Severe => 0.03,
            Severity::Extreme => 0.01,
        }
    }

    /// Inclusive plausible rate range for the class.
    pub fn rate_band(self) -> (f64, f64) {
        match self {
            Severity::Moderate => (0.10, 0.25),
            Severity::Severe => (0.03, 0.10),
            Severity::Extreme => (0.01, 0.03),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
            Severity::Extreme => "extreme",
        })
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "moderate" => Ok(Severity::Moderate),
            "severe" => Ok(Severity::Severe),
            "extreme" => Ok(Severity::Extreme),
            other => Err(Error::InvalidInput(format!("unknown severity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec<T = f64> {
    pub pair_id: String,
    pub source_id_a: String,
    pub source_id_b: String,
    pub dependency: Dependency,
    pub severity: Severity,
    /// Explicit rate; `None` takes the severity default.
    pub rate_per_yr: Option<T>,
}

impl<T: Real> PairSpec<T> {
    pub fn rate(&self) -> T {
        self.rate_per_yr.unwrap_or_else(|| T::lit(self.severity.default_rate()))
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rate();
        if !(r > T::zero()) || !r.is_finite() {
            return Err(Error::InvalidInput(format!("pair {}: rate must be positive", self.pair_id)));
        }
        if self.source_id_a == self.source_id_b {
            return Err(Error::InvalidInput(format!("pair {}: constituents must differ", self.pair_id)));
        }
        let (lo, hi) = self.severity.rate_band();
        if r.as_f64() < lo || r.as_f64() > hi {
            warn!(pair = %self.pair_id, rate = r.as_f64(), severity = %self.severity, "pair rate outside its severity band (explicit override)");
        }
        Ok(())
    }
}

/// Full discrete convolution of two loss PMFs on the same lattice width.
pub fn convolve_pmfs<T: Real>(a: &LossPmf<T>, b: &LossPmf<T>) -> Result<LossPmf<T>> {
    let (wa, wb) = (a.bin_width_mw(), b.bin_width_mw());
    if (wa - wb).abs() > T::lit(1e-9) * wa.max(wb) {
        return Err(Error::BinWidthMismatch(wa.as_f64(), wb.as_f64()));
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.weights().iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.weights().iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    LossPmf::new(a.first_value_mw() + b.first_value_mw(), wa, out)
}

/// Pair source with the convolved PMF; its credible limit is the constituents' sum.
pub fn build_pair_source<T: Real>(spec: &PairSpec<T>, catalogue: &[SourceRecord<T>]) -> Result<SourceRecord<T>> {
    spec.validate()?;
    let find = |id: &str| {
        catalogue
            .iter()
            .find(|s| s.source_id == id)
            .ok_or_else(|| Error::UnknownSource(format!("{id} (pair {})", spec.pair_id)))
    };
    let a = find(&spec.source_id_a)?;
    let b = find(&spec.source_id_b)?;
    let pmf = convolve_pmfs(a.pmf()?, b.pmf()?)?;
    Ok(SourceRecord {
        source_id: spec.pair_id.clone(),
        source_type: SourceType::Pair,
        capacity_mw: a.capacity_mw + b.capacity_mw,
        max_credible_loss_mw: a.max_credible_loss_mw + b.max_credible_loss_mw,
        bmu_ids: Vec::new(),
        prior_class: None,
        trip_rate_per_yr: spec.rate(),
        pmf: Some(pmf),
    })
}

/// Builds every pair source, rejecting duplicate ids against the catalogue.
pub fn build_pair_sources<T: Real>(
    specs: &[PairSpec<T>],
    catalogue: &[SourceRecord<T>],
) -> Result<Vec<SourceRecord<T>>> {
    let mut seen: HashSet<&str> = catalogue.iter().map(|s| s.source_id.as_str()).collect();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        if !seen.insert(spec.pair_id.as_str()) {
            return Err(Error::DuplicateSourceId(spec.pair_id.clone()));
        }
        out.push(build_pair_source(spec, catalogue)?);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    pair_id: String,
    source_a: String,
    source_b: String,
    dependency: String,
    severity: String,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    rate_per_yr: Option<f64>,
}

pub fn parse_pairs<T: Real, R: Read>(reader: R, origin: &Path) -> Result<Vec<PairSpec<T>>> {
    let rows: Vec<PairRow> = io::read_rows(reader, origin)?;
    let mut ids = HashMap::new();
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if ids.insert(r.pair_id.clone(), i).is_some() {
                return Err(Error::DuplicateSourceId(r.pair_id));
            }
            let spec = PairSpec {
                dependency: r.dependency.parse().map_err(|e| Error::file(origin, e))?,
                severity: r.severity.parse().map_err(|e| Error::file(origin, e))?,
                pair_id: r.pair_id,
                source_id_a: r.source_a,
                source_id_b: r.source_b,
                rate_per_yr: r.rate_per_yr.map(T::lit),
            };
            spec.validate().map_err(|e| Error::file(origin, e))?;
            Ok(spec)
        })
        .collect()
}

pub fn load_pairs<T: Real>(path: &Path) -> Result<Vec<PairSpec<T>>> {
    parse_pairs(io::open(path)?, path)
}

/// RoCoF-gated cascade of distributed generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CascadeSpec<T = f64> {
    pub rocof_threshold_hz_per_s: T,
    pub p_cond: T,
    pub der_loss_mw: T,
    pub f0: T,
}

impl<T: Real> Default for CascadeSpec<T> {
    fn default() -> Self {
        Self {
            rocof_threshold_hz_per_s: T::lit(0.125),
            p_cond: T::lit(0.3),
            der_loss_mw: T::lit(350.0),
            f0: T::lit(50.0),
        }
    }
}

impl<T: Real> CascadeSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_cond >= T::zero()
            && self.p_cond <= T::one()
            && self.der_loss_mw >= T::zero()
            && self.rocof_threshold_hz_per_s > T::zero()
            && self.f0 > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("cascade settings need 0 <= p_cond <= 1, der_loss >= 0".into()))
        }
    }

    /// Whether the initial RoCoF reaches the gate (inclusive).
    #[inline]
    pub fn gated(&self, loss_mw: T, inertia_gva_s: T) -> bool {
        rocof(loss_mw, inertia_gva_s, self.f0) >= self.rocof_threshold_hz_per_s
    }
}

/// `(effective loss, probability)` terms replacing a single loss outcome.
pub fn cascade_adjusted_terms<T: Real>(loss_mw: T, inertia_gva_s: T, spec: &CascadeSpec<T>) -> Vec<(T, T)> {
    if spec.gated(loss_mw, inertia_gva_s) && spec.p_cond > T::zero() {
        vec![(loss_mw, T::one() - spec.p_cond), (loss_mw + spec.der_loss_mw, spec.p_cond)]
    } else {
        vec![(loss_mw, T::one())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::PriorClass;
    use proptest::prelude::*;

    fn pmf(first: f64, weights: Vec<f64>) -> LossPmf<f64> {
        LossPmf::new(first, 25.0, weights).unwrap()
    }

    fn source(id: &str, pmf: LossPmf<f64>) -> SourceRecord<f64> {
        SourceRecord {
            source_id: id.into(),
            source_type: SourceType::Interconnector,
            capacity_mw: 1000.0,
            max_credible_loss_mw: 1000.0,
            bmu_ids: vec![],
            prior_class: Some(PriorClass::Interconnector),
            trip_rate_per_yr: 1.0,
            pmf: Some(pmf),
        }
    }

    /// Brute force over all outcome pairs.
    fn brute(a: &LossPmf<f64>, b: &LossPmf<f64>) -> Vec<(f64, f64)> {
        let mut m: std::collections::BTreeMap<i64, f64> = Default::default();
        for (x, p) in a.iter() {
            for (y, q) in b.iter() {
                *m.entry(((x + y) * 1000.0).round() as i64).or_default() += p * q;
            }
        }
        m.into_iter().filter(|(_, w)| *w > 0.0).map(|(k, w)| (k as f64 / 1000.0, w)).collect()
    }

    #[test]
    fn convolution_examples() {
        let d = convolve_pmfs(&LossPmf::delta(500.0, 25.0).unwrap(), &LossPmf::delta(700.0, 25.0).unwrap()).unwrap();
        assert_eq!(d.weights(), &[1.0]);
        assert_eq!(d.value(0), 1200.0);

        let mut w = vec![0.0; 17];
        w[0] = 0.5;
        w[16] = 0.5;
        let a = pmf(400.0, w);
        let c = convolve_pmfs(&a, &LossPmf::delta(600.0, 25.0).unwrap()).unwrap();
        let nz: Vec<(f64, f64)> = c.iter().filter(|(_, w)| *w > 0.0).collect();
        assert_eq!(nz, vec![(1000.0, 0.5), (1400.0, 0.5)]);
        assert_eq!(nz, brute(&a, &LossPmf::delta(600.0, 25.0).unwrap()));
    }

    #[test]
    fn width_mismatch() {
        let a = LossPmf::delta(500.0, 25.0).unwrap();
        let b = LossPmf::delta(500.0, 50.0).unwrap();
        assert!(matches!(convolve_pmfs(&a, &b), Err(Error::BinWidthMismatch(..))));
    }

    #[test]
    fn pair_sources() {
        let cat = vec![
            source("IFA_BP1", LossPmf::delta(1000.0, 25.0).unwrap()),
            source("IFA_BP2", LossPmf::delta(1000.0, 25.0).unwrap()),
        ];
        let spec = PairSpec {
            pair_id: "IFA_PAIR".into(),
            source_id_a: "IFA_BP1".into(),
            source_id_b: "IFA_BP2".into(),
            dependency: Dependency::CommonCause,
            severity: Severity::Moderate,
            rate_per_yr: Some(0.25),
        };
        let pair = build_pair_source(&spec, &cat).unwrap();
        assert_eq!(pair.trip_rate_per_yr, 0.25);
        assert_eq!(pair.source_type, SourceType::Pair);
        assert_eq!(pair.max_credible_loss_mw, 2000.0);
        let p = pair.pmf().unwrap();
        assert_eq!((p.value(0), p.weights()), (2000.0, &[1.0][..]));

        let extreme = PairSpec {
            severity: Severity::Extreme,
            dependency: Dependency::Independent,
            rate_per_yr: None,
            ..spec.clone()
        };
        assert_eq!(build_pair_source(&extreme, &cat).unwrap().trip_rate_per_yr, 0.01);

        let missing = PairSpec { source_id_b: "NOPE".into(), ..spec };
        assert!(matches!(build_pair_source(&missing, &cat), Err(Error::UnknownSource(_))));
    }

    #[test]
    fn pairs_file() {
        let text = "pair_id,source_a,source_b,dependency,severity,rate_per_yr\n\
                    P1,A,B,common_cause,moderate,0.2\n\
                    P2,A,C,independent,extreme,\n";
        let pairs: Vec<PairSpec<f64>> = parse_pairs(text.as_bytes(), Path::new("p")).unwrap();
        assert_eq!(pairs[0].rate(), 0.2);
        assert_eq!(pairs[1].rate(), 0.01);
        assert_eq!(pairs[1].dependency, Dependency::Independent);
        let bad = "pair_id,source_a,source_b,dependency,severity,rate_per_yr\nP1,A,B,telepathic,moderate,\n";
        assert!(parse_pairs::<f64, _>(bad.as_bytes(), Path::new("p")).is_err());
    }

    #[test]
    fn cascade_gate() {
        let spec = CascadeSpec::default();
        assert_eq!(cascade_adjusted_terms(700.0, 150.0, &spec), vec![(700.0, 1.0)]);
        assert_eq!(cascade_adjusted_terms(749.9, 150.0, &spec), vec![(749.9, 1.0)]);
        assert_eq!(cascade_adjusted_terms(750.0, 150.0, &spec), vec![(750.0, 0.7), (1100.0, 0.3)]);
        let off = CascadeSpec { p_cond: 0.0, ..spec };
        assert_eq!(cascade_adjusted_terms(2000.0, 80.0, &off), vec![(2000.0, 1.0)]);
    }

    fn arb_pmf() -> impl Strategy<Value = LossPmf<f64>> {
        (0usize..40, prop::collection::vec(0.0..1.0f64, 1..30)).prop_filter_map("mass", |(k, raw)| {
            let total: f64 = raw.iter().sum();
            if total <= 1e-6 {
                return None;
            }
            LossPmf::new(12.5 + 25.0 * k as f64, 25.0, raw.iter().map(|x| x / total).collect()).ok()
        })
    }

    proptest! {
        #[test]
        fn convolution_laws(a in arb_pmf(), b in arb_pmf(), c in arb_pmf()) {
            let ab = convolve_pmfs(&a, &b).unwrap();
            let ba = convolve_pmfs(&b, &a).unwrap();
            prop_assert!((ab.total_mass() - 1.0).abs() < 1e-9);
            prop_assert!((ab.mean_mw() - (a.mean_mw() + b.mean_mw())).abs() < 1e-9 * ab.mean_mw());
            prop_assert_eq!(ab.min_value_mw(), a.min_value_mw() + b.min_value_mw());
            prop_assert_eq!(ab.max_value_mw(), a.max_value_mw() + b.max_value_mw());
            prop_assert_eq!(ab.len(), ba.len());
            for (x, y) in ab.weights().iter().zip(ba.weights()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let l = convolve_pmfs(&ab, &c).unwrap();
            let r = convolve_pmfs(&a, &convolve_pmfs(&b, &c).unwrap()).unwrap();
            for (x, y) in l.weights().iter().zip(r.weights()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn cascade_terms_sum_to_one(loss in 1.0..4000.0f64, h in 20.0..500.0f64, p in 0.0..1.0f64, der in 0.0..600.0f64) {
            let spec = CascadeSpec { p_cond: p, der_loss_mw: der, ..CascadeSpec::default() };
            let terms = cascade_adjusted_terms(loss, h, &spec);
            prop_assert!((terms.iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(terms.iter().all(|t| t.0 >= loss));
        }
    }
}
