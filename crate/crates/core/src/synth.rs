//! Deterministic synthetic dataset at desk scale.
//!
//! Twelve sources across every technology class, half-hourly generation for
//! their BMUs, five years of Poisson incidents (about fifty in total), 5,000
//! state records in which low inertia goes with low demand, thirty pair
//! specifications and the default priors. Everything is drawn from one
//! `ChaCha8` stream, so a seed fixes every byte of the written files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::catalogue::{GenerationRecord, PriorClass, RegistryRow, SourceRecord, SourceType};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::frpe::sfr::{rocof, sfr_median_nadir, SfrParams};
use crate::io::{fmt_sig, format_timestamp, Timestamp};
use crate::layers::{Dependency, PairSpec, Severity};
use crate::rates::{default_priors, GammaPrior, IncidentRecord};
use crate::report::{write_table, TOOL_VERSION};
use crate::state::StateRecord;

pub const SYNTH_STATES: usize = 5000;
pub const SYNTH_GENERATION_PERIODS: usize = 480;
pub const SYNTH_PAIRS: usize = 30;
/// Correlation between the inertia and demand draws.
pub const SYNTH_HD_CORRELATION: f64 = 0.5;
/// Log-normal scatter on synthetic incident nadirs.
pub const SYNTH_NADIR_SIGMA: f64 = 0.3;

struct SourceTemplate {
    id: &'static str,
    source_type: SourceType,
    capacity_mw: f64,
    max_credible_loss_mw: f64,
    prior_class: PriorClass,
    /// Units; those past `listed` are mapped through the registry only.
    units: usize,
    listed: usize,
    true_rate_per_yr: f64,
}

#[allow(clippy::too_many_arguments)]
const fn tpl(
    id: &'static str,
    source_type: SourceType,
    capacity_mw: f64,
    max_credible_loss_mw: f64,
    prior_class: PriorClass,
    units: usize,
    listed: usize,
    true_rate_per_yr: f64,
) -> SourceTemplate {
    SourceTemplate { id, source_type, capacity_mw, max_credible_loss_mw, prior_class, units, listed, true_rate_per_yr }
}

const TEMPLATES: [SourceTemplate; 12] = [
    tpl("CCGT_A", SourceType::Ccgt, 900.0, 880.0, PriorClass::Ccgt, 2, 1, 1.0),
    tpl("CCGT_B", SourceType::Ccgt, 850.0, 820.0, PriorClass::Ccgt, 1, 1, 1.0),
    tpl("CCGT_C", SourceType::Ccgt, 600.0, 580.0, PriorClass::Ccgt, 1, 1, 1.0),
    tpl("CCGT_D", SourceType::Ccgt, 450.0, 440.0, PriorClass::Ccgt, 1, 0, 1.0),
    tpl("IC_A", SourceType::Interconnector, 1000.0, 1000.0, PriorClass::Interconnector, 1, 1, 1.5),
    tpl("IC_B", SourceType::Interconnector, 1400.0, 1000.0, PriorClass::Interconnector, 2, 2, 1.2),
    tpl("IC_C", SourceType::Interconnector, 500.0, 500.0, PriorClass::Interconnector, 1, 1, 0.8),
    tpl("NUC_A", SourceType::Nuclear, 1320.0, 1260.0, PriorClass::Nuclear, 2, 1, 0.5),
    tpl("BIO_A", SourceType::Biomass, 660.0, 660.0, PriorClass::Biomass, 1, 1, 0.4),
    tpl("PS_A", SourceType::PumpedStorage, 600.0, 600.0, PriorClass::PumpedStorage, 2, 2, 0.4),
    tpl("WIND_A", SourceType::Wind, 1200.0, 850.0, PriorClass::Wind, 3, 3, 0.4),
    tpl("FLEET", SourceType::FleetCatchall, 1000.0, 500.0, PriorClass::Ccgt, 1, 1, 0.8),
];

/// In-memory synthetic dataset; [`SynthDataset::write`] serialises it.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub seed: u64,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub catalogue: Vec<SourceRecord<f64>>,
    pub registry: Vec<RegistryRow>,
    pub generation: Vec<GenerationRecord<f64>>,
    pub incidents: Vec<IncidentRecord<f64>>,
    pub states: Vec<StateRecord<f64>>,
    pub pairs: Vec<PairSpec<f64>>,
    pub priors: BTreeMap<PriorClass, GammaPrior<f64>>,
    /// Generating trip rate per source, for checking recovered rates.
    pub true_rates: Vec<(String, f64)>,
}

fn bmu_id(source: &str, unit: usize) -> String {
    format!("{source}-{}", unit + 1)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_output(rng: &mut ChaCha8Rng, source_type: SourceType, unit_cap: f64) -> f64 {
    let out = match source_type {
        SourceType::Ccgt => {
            if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                unit_cap * rng.random_range(0.5..1.0)
            }
        }
        // Negative values are exports; the PMF builder drops them.
        SourceType::Interconnector => unit_cap * (0.6 + 0.35 * normal(rng)).clamp(-1.0, 1.0),
        SourceType::Nuclear => unit_cap * (0.95 + 0.02 * normal(rng)).min(1.0),
        SourceType::Biomass => unit_cap * rng.random_range(0.6..1.0),
        SourceType::PumpedStorage => {
            if rng.random::<f64>() < 0.5 {
                -unit_cap * 0.8
            } else {
                unit_cap * rng.random_range(0.3..1.0)
            }
        }
        SourceType::Wind => unit_cap * rng.random::<f64>().powi(2),
        _ => rng.random_range(100.0..500.0),
    };
    (out * 10.0).round() / 10.0
}

/// Draws a source output from its empirical period totals.
fn sample_positive(rng: &mut ChaCha8Rng, outputs: &[f64]) -> f64 {
    let positive: Vec<f64> = outputs.iter().copied().filter(|x| *x > 0.0).collect();
    positive[rng.random_range(0..positive.len())]
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Generates the dataset for `seed`.
pub fn generate(seed: u64) -> SynthDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window_start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).single().expect("valid date");
    let window_end = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid date");
    let half_hour = Duration::minutes(30);

    let mut catalogue = Vec::new();
    let mut registry = Vec::new();
    for t in &TEMPLATES {
        let bmus: Vec<String> = (0..t.units).map(|u| bmu_id(t.id, u)).collect();
        registry
            .extend(bmus[t.listed..].iter().map(|b| RegistryRow { bmu_id: b.clone(), source_id: t.id.to_string() }));
        catalogue.push(SourceRecord {
            source_id: t.id.to_string(),
            source_type: t.source_type,
            capacity_mw: t.capacity_mw,
            max_credible_loss_mw: t.max_credible_loss_mw,
            bmu_ids: bmus[..t.listed].to_vec(),
            prior_class: Some(t.prior_class),
            trip_rate_per_yr: 0.0,
            pmf: None,
        });
    }

    let mut generation = Vec::new();
    let mut period_totals: Vec<Vec<f64>> = vec![vec![0.0; SYNTH_GENERATION_PERIODS]; TEMPLATES.len()];
    for p in 0..SYNTH_GENERATION_PERIODS {
        let timestamp = window_start + half_hour * p as i32;
        for (s, t) in TEMPLATES.iter().enumerate() {
            let unit_cap = t.capacity_mw / t.units as f64;
            for u in 0..t.units {
                let output_mw = unit_output(&mut rng, t.source_type, unit_cap);
                period_totals[s][p] += output_mw;
                generation.push(GenerationRecord { bmu_id: bmu_id(t.id, u), timestamp, output_mw });
            }
        }
    }

    // Equal spacing of 17 half-hours spans just under the five-year window.
    let state_step = half_hour * 17;
    let rho = SYNTH_HD_CORRELATION;
    let states: Vec<StateRecord<f64>> = (0..SYNTH_STATES)
        .map(|k| {
            let (z1, z2, z3, z4) = (normal(&mut rng), normal(&mut rng), normal(&mut rng), normal(&mut rng));
            let zd = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
            StateRecord {
                timestamp: window_start + state_step * k as i32,
                inertia_gva_s: round1((180.0 + 45.0 * z1).clamp(85.0, 340.0)),
                demand_gw: round1((28.0 + 6.0 * zd).clamp(16.0, 44.0)),
                response_mw: round1((1500.0 + 400.0 * z3).clamp(600.0, 2900.0)),
                dc_contracted_mw: round1((1000.0 + 100.0 * z4).clamp(700.0, 1200.0)),
            }
        })
        .collect();

    let years = crate::io::years_between(&window_start, &window_end);
    let span_s = (window_end - window_start).num_seconds();
    let sfr = SfrParams::<f64>::default();
    let mut incidents = Vec::new();
    let mut true_rates = Vec::new();
    for (s, t) in TEMPLATES.iter().enumerate() {
        true_rates.push((t.id.to_string(), t.true_rate_per_yr));
        let n: f64 = Poisson::new(t.true_rate_per_yr * years).expect("positive mean").sample(&mut rng);
        for _ in 0..n as usize {
            let timestamp = window_start + Duration::seconds(rng.random_range(0..span_s));
            let state = &states[rng.random_range(0..states.len())];
            let actual = sample_positive(&mut rng, &period_totals[s]).min(t.max_credible_loss_mw);
            let median = sfr_median_nadir(actual, state.inertia_gva_s, state.demand_gw, state.response_mw, &sfr);
            let nadir = median * (SYNTH_NADIR_SIGMA * normal(&mut rng)).exp();
            incidents.push(IncidentRecord {
                timestamp,
                source_id: Some(t.id.to_string()),
                rocof_hz_per_s: Some(crate::io::round_sig(rocof(actual, state.inertia_gva_s, sfr.f0))),
                inertia_gva_s: Some(state.inertia_gva_s),
                nadir_deviation_hz: Some(crate::io::round_sig(nadir)),
                actual_mw: Some(actual),
                demand_gw: Some(state.demand_gw),
                response_mw: Some(state.response_mw),
            });
        }
    }
    // Two unattributed incidents exercise the unmatched-incident route.
    for _ in 0..2 {
        let timestamp = window_start + Duration::seconds(rng.random_range(0..span_s));
        incidents.push(IncidentRecord {
            timestamp,
            source_id: None,
            rocof_hz_per_s: None,
            inertia_gva_s: None,
            nadir_deviation_hz: None,
            actual_mw: None,
            demand_gw: None,
            response_mw: None,
        });
    }
    incidents.sort_by_key(|i| i.timestamp);

    let pairs = synth_pairs(&mut rng);

    SynthDataset {
        seed,
        window_start,
        window_end,
        catalogue,
        registry,
        generation,
        incidents,
        states,
        pairs,
        priors: default_priors(),
        true_rates,
    }
}

/// Thirty pairs whose combined credible loss stays at or below 1,800 MW.
fn synth_pairs(rng: &mut ChaCha8Rng) -> Vec<PairSpec<f64>> {
    let mut candidates = Vec::new();
    for (i, a) in TEMPLATES.iter().enumerate() {
        for b in &TEMPLATES[i + 1..] {
            if a.max_credible_loss_mw + b.max_credible_loss_mw <= 1800.0 {
                candidates.push((a, b));
            }
        }
    }
    candidates.shuffle(rng);
    candidates.truncate(SYNTH_PAIRS);
    candidates.sort_by_key(|(a, b)| (a.id, b.id));
    candidates
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let severity = match k % 6 {
                0 => Severity::Extreme,
                1 | 2 => Severity::Severe,
                _ => Severity::Moderate,
            };
            let dependency = if a.source_type == b.source_type {
                Dependency::CommonCause
            } else if a.source_type == SourceType::Interconnector || b.source_type == SourceType::Interconnector {
                Dependency::OperatorCoupled
            } else if k % 2 == 0 {
                Dependency::Proximity
            } else {
                Dependency::Independent
            };
            PairSpec {
                pair_id: format!("PAIR_{:02}", k + 1),
                source_id_a: a.id.to_string(),
                source_id_b: b.id.to_string(),
                dependency,
                severity,
                rate_per_yr: None,
            }
        })
        .collect()
}

fn dependency_str(d: Dependency) -> &'static str {
    match d {
        Dependency::Independent => "independent",
        Dependency::CommonCause => "common_cause",
        Dependency::Proximity => "proximity",
        Dependency::OperatorCoupled => "operator_coupled",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// File names of a written dataset, relative to its directory.
pub struct SynthFiles;

impl SynthFiles {
    pub const CATALOGUE: &'static str = "catalogue.csv";
    pub const REGISTRY: &'static str = "registry.csv";
    pub const GENERATION: &'static str = "generation.csv";
    pub const INCIDENTS: &'static str = "incidents.csv";
    pub const STATES: &'static str = "states.csv";
    pub const PAIRS: &'static str = "pairs.csv";
    pub const PRIORS: &'static str = "priors.csv";
    pub const CONFIG: &'static str = "config.toml";
}

fn table(
    dir: &Path,
    name: &str,
    seed: u64,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let comment = format!("synthetic dataset, seed {seed}, pfha {TOOL_VERSION}");
    write_table(&dir.join(name), &comment, header, rows)
}

impl SynthDataset {
    /// The config written next to the data; every path is relative to it.
    pub fn config(&self) -> Config {
        let mut c = Config { seed: self.seed, ..Config::default() };
        let d = &mut c.data;
        d.catalogue = SynthFiles::CATALOGUE.into();
        d.registry = Some(SynthFiles::REGISTRY.into());
        d.generation = SynthFiles::GENERATION.into();
        d.incidents = SynthFiles::INCIDENTS.into();
        d.states = SynthFiles::STATES.into();
        d.pairs = Some(SynthFiles::PAIRS.into());
        d.priors = Some(SynthFiles::PRIORS.into());
        d.window_start = format_timestamp(&self.window_start);
        d.window_end = format_timestamp(&self.window_end);
        d.unmatched_to = Some("FLEET".into());
        c
    }

    /// Writes every file plus `config.toml`; returns the config path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let seed = self.seed;
        table(
            dir,
            SynthFiles::CATALOGUE,
            seed,
            &["source_id", "source_type", "capacity_mw", "max_credible_loss_mw", "prior_class", "bmu_ids"],
            self.catalogue.iter().map(|s| {
                vec![
                    s.source_id.clone(),
                    s.source_type.as_str().to_string(),
                    fmt_sig(s.capacity_mw),
                    fmt_sig(s.max_credible_loss_mw),
                    s.prior_class.map(|c| c.as_str().to_string()).unwrap_or_default(),
                    s.bmu_ids.join(";"),
                ]
            }),
        )?;
        table(
            dir,
            SynthFiles::REGISTRY,
            seed,
            &["bmu_id", "source_id"],
            self.registry.iter().map(|r| vec![r.bmu_id.clone(), r.source_id.clone()]),
        )?;
        table(
            dir,
            SynthFiles::GENERATION,
            seed,
            &["bmu_id", "timestamp_iso8601", "output_mw"],
            self.generation
                .iter()
                .map(|g| vec![g.bmu_id.clone(), format_timestamp(&g.timestamp), fmt_sig(g.output_mw)]),
        )?;
        table(
            dir,
            SynthFiles::INCIDENTS,
            seed,
            &[
                "timestamp_iso8601",
                "source_id",
                "rocof_hz_per_s",
                "inertia_gva_s",
                "nadir_deviation_hz",
                "actual_mw",
                "demand_gw",
                "response_mw",
            ],
            self.incidents.iter().map(|i| {
                vec![
                    format_timestamp(&i.timestamp),
                    i.source_id.clone().unwrap_or_default(),
                    opt(i.rocof_hz_per_s),
                    opt(i.inertia_gva_s),
                    opt(i.nadir_deviation_hz),
                    opt(i.actual_mw),
                    opt(i.demand_gw),
                    opt(i.response_mw),
                ]
            }),
        )?;
        table(
            dir,
            SynthFiles::STATES,
            seed,
            &["timestamp_iso8601", "inertia_gva_s", "demand_gw", "response_mw", "dc_contracted_mw"],
            self.states.iter().map(|s| {
                vec![
                    format_timestamp(&s.timestamp),
                    fmt_sig(s.inertia_gva_s),
                    fmt_sig(s.demand_gw),
                    fmt_sig(s.response_mw),
                    fmt_sig(s.dc_contracted_mw),
                ]
            }),
        )?;
        table(
            dir,
            SynthFiles::PAIRS,
            seed,
            &["pair_id", "source_a", "source_b", "dependency", "severity", "rate_per_yr"],
            self.pairs.iter().map(|p| {
                vec![
                    p.pair_id.clone(),
                    p.source_id_a.clone(),
                    p.source_id_b.clone(),
                    dependency_str(p.dependency).to_string(),
                    p.severity.to_string(),
                    opt(p.rate_per_yr),
                ]
            }),
        )?;
        table(
            dir,
            SynthFiles::PRIORS,
            seed,
            &["prior_class", "alpha", "beta"],
            self.priors.values().map(|p| vec![p.prior_class.as_str().to_string(), fmt_sig(p.alpha), fmt_sig(p.beta)]),
        )?;
        let path = dir.join(SynthFiles::CONFIG);
        fs::write(&path, self.config().to_toml()).map_err(|e| Error::file(&path, e))?;
        Ok(path)
    }
}
