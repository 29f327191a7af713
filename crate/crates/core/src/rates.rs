//! Gamma–Poisson trip-rate estimation.
//!
//! Each technology class carries a `Gamma(alpha, beta)` prior on the annual
//! trip rate (shape `alpha`, rate `beta` in years). Observing `n` trips over
//! `T` years gives the posterior `Gamma(alpha + n, beta + T)`, whose mean is
//! never zero even for sources that have not tripped.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::catalogue::{PriorClass, SourceRecord};
use crate::error::{Error, Result};
use crate::io::{self, Timestamp};
use crate::scalar::Real;

/// Bisection tolerance for posterior quantiles (events/yr).
pub const QUANTILE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior<T = f64> {
    pub prior_class: PriorClass,
    /// Shape.
    pub alpha: T,
    /// Rate, in years.
    pub beta: T,
}

impl<T: Real> GammaPrior<T> {
    pub fn new(prior_class: PriorClass, alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero() && beta > T::zero()) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{prior_class}: prior needs alpha > 0 and beta > 0 (got {alpha}, {beta})"
            )));
        }
        Ok(Self { prior_class, alpha, beta })
    }

    /// Prior with unit shape whose mean equals `mean_per_yr`.
    pub fn with_mean(prior_class: PriorClass, mean_per_yr: T) -> Result<Self> {
        Self::new(prior_class, T::one(), T::one() / mean_per_yr)
    }

    pub fn mean(&self) -> T {
        self.alpha / self.beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentCount<T = f64> {
    pub source_id: String,
    pub n_events: u64,
    pub observation_years: T,
}

impl<T: Real> IncidentCount<T> {
    pub fn new(source_id: impl Into<String>, n_events: u64, observation_years: T) -> Result<Self> {
        if !(observation_years > T::zero()) {
            return Err(Error::InvalidInput("observation period must be positive".into()));
        }
        Ok(Self { source_id: source_id.into(), n_events, observation_years })
    }

    pub fn mle(&self) -> T {
        T::from_u64(self.n_events).expect("count") / self.observation_years
    }
}

fn posterior_shape_rate<T: Real>(prior: &GammaPrior<T>, count: &IncidentCount<T>) -> (T, T) {
    (prior.alpha + T::from_u64(count.n_events).expect("count"), prior.beta + count.observation_years)
}

/// Posterior mean trip rate `(alpha + n) / (beta + T)`.
pub fn posterior_rate<T: Real>(prior: &GammaPrior<T>, count: &IncidentCount<T>) -> T {
    let (shape, rate) = posterior_shape_rate(prior, count);
    shape / rate
}

/// Quantile of `Gamma(shape, rate)` by bisection on the regularised incomplete gamma function.
pub fn gamma_quantile<T: Real>(shape: T, rate: T, p: T) -> T {
    if p <= T::zero() {
        return T::zero();
    }
    if p >= T::one() {
        return T::infinity();
    }
    let cdf = |x: T| T::gamma_p(shape, rate * x);
    let mut lo = T::zero();
    let mut hi = (shape / rate).max(T::min_positive_value());
    while cdf(hi) < p {
        lo = hi;
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            return T::infinity();
        }
    }
    let tol = T::lit(QUANTILE_TOLERANCE);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) / T::lit(2.0)
}

/// Equal-tailed credible interval of the posterior trip rate.
pub fn credible_interval<T: Real>(prior: &GammaPrior<T>, count: &IncidentCount<T>, level: T) -> Result<(T, T)> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::InvalidInput(format!("credible level must lie in (0, 1), got {level}")));
    }
    let (shape, rate) = posterior_shape_rate(prior, count);
    let tail = (T::one() - level) / T::lit(2.0);
    Ok((gamma_quantile(shape, rate, tail), gamma_quantile(shape, rate, T::one() - tail)))
}

/// Default class priors: unit shape, mean at the midpoint of the GB rate ranges per type.
pub fn default_priors<T: Real>() -> BTreeMap<PriorClass, GammaPrior<T>> {
    [
        (PriorClass::Ccgt, (0.16 + 4.24) / 2.0),
        (PriorClass::Interconnector, (0.39 + 13.4) / 2.0),
        (PriorClass::Nuclear, (0.51 + 1.26) / 2.0),
        (PriorClass::Biomass, 0.76),
        (PriorClass::PumpedStorage, (0.34 + 0.51) / 2.0),
        (PriorClass::Wind, (0.34 + 0.51) / 2.0),
    ]
    .into_iter()
    .map(|(class, mean)| (class, GammaPrior::with_mean(class, T::lit(mean)).expect("positive mean")))
    .collect()
}

#[derive(Debug, Deserialize)]
struct PriorRow {
    prior_class: String,
    alpha: f64,
    beta: f64,
}

pub fn parse_priors<T: Real, R: Read>(reader: R, origin: &Path) -> Result<BTreeMap<PriorClass, GammaPrior<T>>> {
    let rows: Vec<PriorRow> = io::read_rows(reader, origin)?;
    let mut out = BTreeMap::new();
    for row in rows {
        let class: PriorClass = row.prior_class.parse()?;
        let prior = GammaPrior::new(class, T::lit(row.alpha), T::lit(row.beta)).map_err(|e| Error::file(origin, e))?;
        out.insert(class, prior);
    }
    Ok(out)
}

/// Loads a priors file over the defaults (file entries override).
pub fn load_priors<T: Real>(path: &Path) -> Result<BTreeMap<PriorClass, GammaPrior<T>>> {
    let mut priors = default_priors();
    priors.extend(parse_priors(io::open(path)?, path)?);
    Ok(priors)
}

/// One recorded frequency incident; also the replay-record schema.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentRecord<T = f64> {
    pub timestamp: Timestamp,
    pub source_id: Option<String>,
    pub rocof_hz_per_s: Option<T>,
    pub inertia_gva_s: Option<T>,
    pub nadir_deviation_hz: Option<T>,
    pub actual_mw: Option<T>,
    pub demand_gw: Option<T>,
    pub response_mw: Option<T>,
}

#[derive(Debug, Deserialize)]
struct IncidentRow {
    timestamp_iso8601: String,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    source_id: Option<String>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    rocof_hz_per_s: Option<f64>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    inertia_gva_s: Option<f64>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    nadir_deviation_hz: Option<f64>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    actual_mw: Option<f64>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    demand_gw: Option<f64>,
    #[serde(default, deserialize_with = "io::blank_as_none")]
    response_mw: Option<f64>,
}

pub fn parse_incidents<T: Real, R: Read>(reader: R, origin: &Path) -> Result<Vec<IncidentRecord<T>>> {
    let rows: Vec<IncidentRow> = io::read_rows(reader, origin)?;
    rows.into_iter()
        .map(|r| {
            Ok(IncidentRecord {
                timestamp: io::parse_timestamp(&r.timestamp_iso8601).map_err(|e| Error::file(origin, e))?,
                source_id: r.source_id,
                rocof_hz_per_s: r.rocof_hz_per_s.map(T::lit),
                inertia_gva_s: r.inertia_gva_s.map(T::lit),
                nadir_deviation_hz: r.nadir_deviation_hz.map(T::lit),
                actual_mw: r.actual_mw.map(T::lit),
                demand_gw: r.demand_gw.map(T::lit),
                response_mw: r.response_mw.map(T::lit),
            })
        })
        .collect()
}

pub fn load_incidents<T: Real>(path: &Path) -> Result<Vec<IncidentRecord<T>>> {
    parse_incidents(io::open(path)?, path)
}

/// Observation window for incident counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl ObservationWindow {
    pub fn years(&self) -> f64 {
        io::years_between(&self.start, &self.end)
    }

    pub fn contains(&self, ts: &Timestamp) -> bool {
        *ts >= self.start && *ts <= self.end
    }
}

/// Counts incidents per single source inside the window.
///
/// Incidents with no (or an unknown) source id go to `unmatched_to` when set,
/// and are otherwise dropped with a warning.
pub fn count_incidents<T: Real>(
    catalogue: &[SourceRecord<T>],
    incidents: &[IncidentRecord<T>],
    window: &ObservationWindow,
    unmatched_to: Option<&str>,
) -> Result<Vec<IncidentCount<T>>> {
    let years = window.years();
    if !(years > 0.0) {
        return Err(Error::Config("observation window must have positive length".into()));
    }
    if let Some(target) = unmatched_to {
        if !catalogue.iter().any(|s| s.source_id == target) {
            return Err(Error::UnknownSource(target.to_string()));
        }
    }
    let mut counts: HashMap<&str, u64> =
        catalogue.iter().filter(|s| s.source_type.is_single()).map(|s| (s.source_id.as_str(), 0)).collect();
    let mut dropped = 0usize;
    for incident in incidents.iter().filter(|i| window.contains(&i.timestamp)) {
        let key = incident.source_id.as_deref().filter(|id| counts.contains_key(id)).or(unmatched_to);
        match key {
            Some(id) => *counts.get_mut(id).expect("known source") += 1,
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!(dropped, "incidents not matched to any catalogued source");
    }
    catalogue
        .iter()
        .filter(|s| s.source_type.is_single())
        .map(|s| IncidentCount::new(s.source_id.clone(), counts[s.source_id.as_str()], T::lit(years)))
        .collect()
}

/// Fills `trip_rate_per_yr` on every single source from its class prior and count.
pub fn apply_posterior_rates<T: Real>(
    catalogue: &mut [SourceRecord<T>],
    counts: &[IncidentCount<T>],
    priors: &BTreeMap<PriorClass, GammaPrior<T>>,
) -> Result<()> {
    let by_id: HashMap<&str, &IncidentCount<T>> = counts.iter().map(|c| (c.source_id.as_str(), c)).collect();
    for source in catalogue.iter_mut().filter(|s| s.source_type.is_single()) {
        let class = source.prior_class.ok_or_else(|| Error::Config(format!("{}: no prior class", source.source_id)))?;
        let prior = priors.get(&class).ok_or_else(|| Error::Config(format!("no prior for class {class}")))?;
        let count =
            by_id.get(source.source_id.as_str()).ok_or_else(|| Error::UnknownSource(source.source_id.clone()))?;
        source.trip_rate_per_yr = posterior_rate(prior, count);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prior(alpha: f64, beta: f64) -> GammaPrior<f64> {
        GammaPrior::new(PriorClass::Ccgt, alpha, beta).unwrap()
    }

    fn count(n: u64, t: f64) -> IncidentCount<f64> {
        IncidentCount::new("S", n, t).unwrap()
    }

    #[test]
    fn posterior_examples() {
        assert!((posterior_rate(&prior(1.0, 2.0), &count(0, 4.0)) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(posterior_rate(&prior(1.0, 1.0), &count(3, 3.0)), 1.0);
        let r = posterior_rate(&prior(1.0, 1.0), &count(53, 4.0));
        assert!((r - 10.8).abs() < 1e-12);
        assert!((r - 13.25).abs() < (r - 1.0).abs());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(GammaPrior::new(PriorClass::Wind, 0.0, 1.0).is_err());
        assert!(GammaPrior::new(PriorClass::Wind, 1.0, -1.0).is_err());
        assert!(IncidentCount::new("S", 1, 0.0_f64).is_err());
        assert!(credible_interval(&prior(1.0, 1.0), &count(0, 1.0), 1.0).is_err());
    }

    #[test]
    fn exponential_credible_interval() {
        // Gamma(1, 1) posterior is Exp(1): quantiles are -ln(1 - p).
        let p = GammaPrior::new(PriorClass::Ccgt, 1.0, 0.5).unwrap();
        let c = count(0, 0.5);
        let (lo, hi) = credible_interval(&p, &c, 0.9).unwrap();
        assert!((lo - (-(0.95_f64).ln())).abs() < 1e-9);
        assert!((hi - (-(0.05_f64).ln())).abs() < 1e-9);
        assert!((lo - 0.0513).abs() < 5e-5 && (hi - 2.996).abs() < 5e-4);
    }

    #[test]
    fn narrow_interval_collapses_to_median() {
        let (lo, hi) = credible_interval(&prior(2.0, 1.0), &count(3, 2.0), 1e-9).unwrap();
        let median = gamma_quantile(5.0, 3.0, 0.5);
        assert!((lo - median).abs() < 1e-8 && (hi - median).abs() < 1e-8);
        let (lo, _) = credible_interval(&prior(1.0, 1.0), &count(0, 4.0), 0.99).unwrap();
        assert!(lo > 0.0);
    }

    #[test]
    fn default_prior_means() {
        let priors = default_priors::<f64>();
        assert_eq!(priors.len(), 6);
        assert!((priors[&PriorClass::Wind].mean() - 0.425).abs() < 1e-12);
        assert!((priors[&PriorClass::Ccgt].mean() - 2.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn posterior_positive_and_monotone(alpha in 0.01..20.0f64, beta in 0.01..20.0f64, n in 0u64..500, t in 0.05..30.0f64) {
            let p = prior(alpha, beta);
            let r = posterior_rate(&p, &count(n, t));
            prop_assert!(r > 0.0);
            prop_assert!(posterior_rate(&p, &count(n + 1, t)) > r);
            prop_assert!(posterior_rate(&p, &count(n, t * 1.5)) < r);
        }

        #[test]
        fn posterior_is_convex_combination(alpha in 0.01..20.0f64, beta in 0.01..20.0f64, n in 0u64..500, t in 0.05..30.0f64) {
            let p = prior(alpha, beta);
            let c = count(n, t);
            let weight = beta / (beta + t);
            let blended = weight * p.mean() + (1.0 - weight) * c.mle();
            let r = posterior_rate(&p, &c);
            prop_assert!((r - blended).abs() <= 1e-12 * r.max(1.0));
            prop_assert!(r >= p.mean().min(c.mle()) - 1e-12 && r <= p.mean().max(c.mle()) + 1e-12);
        }

        #[test]
        fn interval_brackets_mean(alpha in 1.0..10.0f64, beta in 0.2..10.0f64, n in 0u64..100, t in 0.5..10.0f64, level in 0.5..0.99f64) {
            let p = prior(alpha, beta);
            let c = count(n, t);
            let (lo, hi) = credible_interval(&p, &c, level).unwrap();
            let mean = posterior_rate(&p, &c);
            prop_assert!(lo > 0.0 && lo < mean && mean < hi);
        }
    }
}
