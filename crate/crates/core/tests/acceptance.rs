//! Acceptance criteria 1 to 15, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed; exits
//! non-zero when any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pfha_core::catalogue::{LossPmf, PriorClass, SourceRecord, SourceType};
use pfha_core::config::{Config, LoadedConfig};
use pfha_core::controls::{lfdd_exceedance_factor, route_dc, run_configuration, ControlSet, DcConfig, LfddConfig};
use pfha_core::disagg::{marginalise, Dimension};
use pfha_core::frpe::physics::grid::{DC, LOSS};
use pfha_core::frpe::sfr::{sfr_median_nadir, SfrParams};
use pfha_core::frpe::{
    aleatory_sigma, exceedance_probability, FrequencyResponseModel, FrpeKind, NadirPrediction, OperatingPoint,
    SigmaParams,
};
use pfha_core::hazard::{compute_hazard, HazardInputs};
use pfha_core::layers::{convolve_pmfs, CascadeSpec};
use pfha_core::logictree::{enumerate_paths, with_path_inputs, BranchKind, TreeSpec};
use pfha_core::pipeline::{self, files, ComputeOutput, Scenario};
use pfha_core::rates::{posterior_rate, GammaPrior, IncidentCount};
use pfha_core::state::StateBin;
use pfha_core::{kahan_sum, synth, PhysicsModel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

const SEED: u64 = 1;

/// The synthetic scenario shared by the end-to-end criteria.
struct Run {
    _dir: TempDir,
    data: PathBuf,
    scenario: Scenario,
    physics: PhysicsModel,
    grid_build: Duration,
    out: ComputeOutput,
    compute: Duration,
}

fn load(config: &Path) -> Scenario {
    let loaded: LoadedConfig = Config::load(config).expect("config loads");
    Scenario::load(&loaded).expect("scenario loads")
}

fn prepare() -> Run {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("run1");
    let config = synth::generate(SEED).write(&data).unwrap();
    let scenario = load(&config);
    let start = Instant::now();
    let (physics, hit) = pipeline::load_physics(&scenario.config).unwrap();
    let grid_build = start.elapsed();
    assert!(!hit, "fresh directory cannot hold a grid");
    let start = Instant::now();
    let out = pipeline::compute(&scenario).unwrap();
    let compute = start.elapsed();
    pipeline::write_compute(&data.join("out"), &scenario, &out).unwrap();
    Run { _dir: dir, data, scenario, physics, grid_build, out, compute }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn c01() -> Outcome {
    let start = Instant::now();
    let p = NadirPrediction::<f64>::new(0.164, 0.317).map_err(|e| e.to_string())?;
    let (z8, p8, z5, p5) = (p.z(0.8), exceedance_probability(&p, 0.8), p.z(0.5), exceedance_probability(&p, 0.5));
    let elapsed = start.elapsed();
    ensure!((z8 + 4.99).abs() <= 0.01, "z(0.8) = {z8}");
    ensure!((2e-7..=4e-7).contains(&p8), "P(0.8) = {p8:e}");
    ensure!((z5 + 3.52).abs() <= 0.01, "z(0.5) = {z5}");
    ensure!((2.0e-4..=2.4e-4).contains(&p5), "P(0.5) = {p5:e}");
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(format!("z = {z8:.3} / {z5:.3}, P = {p8:.3e} / {p5:.3e}, {elapsed:?}"))
}

fn c02() -> Outcome {
    let sfr = SfrParams::default();
    ensure!(sfr.bias == 0.37, "default bias {}", sfr.bias);
    let mu1 = sfr_median_nadir(1000.0, 180.0, 28.0, 1500.0, &sfr);
    let mu2 = sfr_median_nadir(2000.0, 180.0, 28.0, 1500.0, &sfr);
    ensure!((0.355..=0.370).contains(&mu1), "mu(1000 MW) = {mu1}");
    ensure!((0.715..=0.735).contains(&mu2), "mu(2000 MW) = {mu2}");
    Ok(format!("mu = {mu1:.4} Hz at 1000 MW, {mu2:.4} Hz at 2000 MW"))
}

fn c03() -> Outcome {
    let s: f64 = aleatory_sigma(1198.0, 180.0, &SigmaParams::sfr(0.296));
    ensure!((s - 0.3167).abs() <= 0.0005, "sigma = {s}");
    Ok(format!("sigma = {s:.5}"))
}

fn c04() -> Outcome {
    let spec = CascadeSpec::default();
    ensure!(!spec.gated(749.9, 150.0), "gate open at 749.9 MW");
    ensure!(spec.gated(750.0, 150.0), "gate shut at 750.0 MW");
    Ok("inactive at 749.9 MW, active at 750.0 MW".into())
}

fn c05(run: &Run) -> Outcome {
    let paths = enumerate_paths(&TreeSpec::<f64>::default()).map_err(|e| e.to_string())?;
    ensure!(paths.len() == 324, "{} paths", paths.len());
    let total = kahan_sum(paths.iter().map(|p| p.weight));
    ensure!((total - 1.0).abs() <= 1e-12, "weights sum to {total}");
    let distinct = run.out.tree.distinct_evaluations;
    ensure!(distinct <= 216, "{distinct} distinct evaluations");
    ensure!(run.out.central.frpe == FrpeKind::Physics, "central model is {:?}", run.out.central.frpe);
    let rows = pipeline::tornado_table(&run.scenario, 0.8).map_err(|e| e.to_string())?;
    let bias = rows.iter().find(|r| r.branch == BranchKind::Bias).ok_or("no bias row")?;
    ensure!(bias.swing == 1.0, "bias swing {}", bias.swing);
    Ok(format!("324 paths, weight sum 1{:+.1e}, {distinct} distinct, bias swing {}", total - 1.0, bias.swing))
}

/// Median `scale * loss / H * 30 / D`, simple enough to restate in the oracle.
struct TableModel {
    scale: f64,
}

impl FrequencyResponseModel<f64> for TableModel {
    fn kind(&self) -> FrpeKind {
        FrpeKind::Sfr
    }
    fn median_nadir(&self, p: &OperatingPoint) -> pfha_core::Result<f64> {
        Ok(self.scale * p.loss_mw / p.inertia_gva_s * 30.0 / p.demand_gw)
    }
    fn effective_damping(&self, _: &OperatingPoint) -> f64 {
        1000.0
    }
}

fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn c06() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let thresholds = vec![0.2, 0.5, 0.8, 1.2, 2.0];
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let n_src = rng.random_range(1..=5);
        let n_bins = rng.random_range(1..=10);
        let n_states = rng.random_range(1..=10);
        let sources: Vec<SourceRecord> = (0..n_src)
            .map(|i| {
                let raw: Vec<f64> = (0..n_bins).map(|_| rng.random_range(0.01..1.0)).collect();
                let t: f64 = raw.iter().sum();
                SourceRecord {
                    source_id: format!("S{i}"),
                    source_type: SourceType::Ccgt,
                    capacity_mw: 5000.0,
                    max_credible_loss_mw: 5000.0,
                    bmu_ids: vec![],
                    prior_class: Some(PriorClass::Ccgt),
                    trip_rate_per_yr: rng.random_range(0.01..5.0),
                    pmf: Some(
                        LossPmf::new(
                            12.5 + 25.0 * rng.random_range(0..60) as f64,
                            25.0,
                            raw.iter().map(|w| w / t).collect(),
                        )
                        .unwrap(),
                    ),
                }
            })
            .collect();
        let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.01..1.0)).collect();
        let t: f64 = raw.iter().sum();
        let states: Vec<StateBin> = raw
            .iter()
            .enumerate()
            .map(|(k, w)| StateBin {
                bin_index: k,
                weight: w / t,
                ..StateBin::point(rng.random_range(80.0..350.0), rng.random_range(15.0..45.0), 1500.0, 0.0)
            })
            .collect();
        let model = TableModel { scale: rng.random_range(0.01..0.1) };
        let sp = SigmaParams::sfr(rng.random_range(0.2..0.4));
        let r = compute_hazard(&HazardInputs::new(&sources, &states, &model, sp, thresholds.clone()))
            .map_err(|e| e.to_string())?;
        for (k, &delta) in thresholds.iter().enumerate() {
            let mut oracle = 0.0;
            for s in &sources {
                let pmf = s.pmf.as_ref().unwrap();
                for j in 0..pmf.len() {
                    for st in &states {
                        let loss = pmf.value(j);
                        let mu = model.scale * loss / st.mean_inertia_gva_s * 30.0 / st.mean_demand_gw;
                        let sigma = aleatory_sigma(loss, st.mean_inertia_gva_s, &sp);
                        oracle +=
                            s.trip_rate_per_yr * pmf.weights()[j] * st.weight * phi((mu.ln() - delta.ln()) / sigma);
                    }
                }
            }
            let got = r.total_rates[k];
            if oracle > 0.0 {
                worst = worst.max((got - oracle).abs() / oracle);
            }
            ensure!(close(got, oracle, 1e-12), "trial {trial}, {delta} Hz: {got:e} vs oracle {oracle:e}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("100 trials, worst relative error {worst:.1e}, {elapsed:.2?}"))
}

fn c07(run: &Run) -> Outcome {
    let tree = &run.out.tree;
    ensure!(tree.thresholds.len() >= 40, "{} thresholds", tree.thresholds.len());
    ensure!(tree.summary.mean.windows(2).all(|w| w[1] <= w[0]), "mean curve increases");
    for (p, rates) in tree.paths.iter().zip(&tree.rates) {
        ensure!(rates.windows(2).all(|w| w[1] <= w[0]), "path {} curve increases", p.index);
    }

    let sfr = SfrParams::default();
    let physics = &run.physics;
    let mu_sfr = |x: [f64; 4]| sfr_median_nadir(x[0], x[1], x[2], x[3], &sfr);
    let mu_phys = |x: [f64; 4]| physics.median_nadir(&OperatingPoint::new(x[0], x[1], x[2], x[3], 0.0)).unwrap();
    let axes: [Vec<f64>; 4] = [
        (0..=16).map(|k| 150.0 + 110.0 * k as f64).collect(),
        (0..=9).map(|k| 85.0 + 29.0 * k as f64).collect(),
        (0..=6).map(|k| 16.0 + 4.7 * k as f64).collect(),
        (0..=6).map(|k| 520.0 + 410.0 * k as f64).collect(),
    ];
    let loss_max = *physics.grid.axes.axes[LOSS].last().unwrap();
    let mut steps = 0;
    for (name, mu) in [("sfr", &mu_sfr as &dyn Fn([f64; 4]) -> f64), ("physics", &mu_phys)] {
        for a in &axes[0] {
            for h in &axes[1] {
                for d in &axes[2] {
                    for r in &axes[3] {
                        let x = [*a, *h, *d, *r];
                        let m = mu(x);
                        for axis in 0..4 {
                            let mut up = x;
                            up[axis] = axes[axis].iter().copied().find(|v| *v > x[axis]).unwrap_or(f64::NAN);
                            if up[axis].is_nan() {
                                continue;
                            }
                            let n = mu(up);
                            steps += 1;
                            // Larger losses deepen the nadir; more inertia, demand or response never do.
                            // Past the last loss node the physics grid holds its edge values.
                            let flat_beyond = name == "physics" && up[0] > loss_max;
                            let ok = match axis {
                                0 if flat_beyond => n >= m,
                                0 => n > m,
                                _ => n <= m,
                            };
                            ensure!(ok, "{name} mu not monotone along axis {axis} at {x:?}: {m} -> {n}");
                        }
                    }
                }
            }
        }
    }

    let central = &run.out.central;
    let sfr_twin = pfha_core::logictree::LogicTreePath { frpe: FrpeKind::Sfr, bias: 0.37, ..central.clone() };
    let sources = run.scenario.sources();
    let inputs = run.scenario.tree_inputs(&sources, Some(physics), tree.thresholds.clone());
    for path in [central, &sfr_twin] {
        let rates: Vec<Vec<f64>> = ControlSet::ALL
            .iter()
            .map(|&set| with_path_inputs(path, &inputs, &[], None, |h| run_configuration(set, h)))
            .collect::<pfha_core::Result<_>>()
            .map_err(|e| e.to_string())?;
        for (set, r) in ControlSet::ALL.iter().zip(&rates).skip(1) {
            for (k, (&c, &u)) in r.iter().zip(&rates[0]).enumerate() {
                ensure!(c <= u, "{:?} path, {set}: {c:e} > {u:e} at {} Hz", path.frpe, tree.thresholds[k]);
            }
        }
    }
    Ok(format!(
        "{} thresholds x {} paths non-increasing; {steps} mu steps monotone; 3 control sets <= none on both models",
        tree.thresholds.len(),
        tree.paths.len()
    ))
}

fn c08() -> Outcome {
    let mut cases = 0;
    for eff in [0.05, 0.5, 0.7, 0.85, 0.95, 1.0] {
        for credit in [0.05, 0.5, 1.0] {
            let cfg = LfddConfig { relay_effectiveness: eff, stage_credit: credit, ..LfddConfig::default() };
            let at = lfdd_exceedance_factor(1.2, &cfg);
            let beyond = lfdd_exceedance_factor(1.4, &cfg);
            ensure!(at == 1.0, "factor {at} at 1.2 Hz (eff {eff}, credit {credit})");
            ensure!(beyond < 1.0, "factor {beyond} at 1.4 Hz (eff {eff}, credit {credit})");
            cases += 1;
        }
    }
    Ok(format!("{cases} effectiveness/credit combinations"))
}

fn c09(run: &Run) -> Outcome {
    let base = 1500.0;
    let nominal = DcConfig { contracted_mw: 1000.0, effectiveness: 0.85 };
    for p in &run.out.tree.paths {
        for dc in [nominal, DcConfig { effectiveness: p.dc_effectiveness, ..nominal }] {
            let eff = dc.effective_mw();
            let r = route_dc(p.frpe, &dc, base);
            let via_grid = r.grid_dc_mw == eff && r.response_mw == base;
            let via_response = r.grid_dc_mw == 0.0 && r.response_mw == base + eff;
            ensure!(via_grid != via_response, "path {}: grid {} response {}", p.index, r.grid_dc_mw, r.response_mw);
        }
    }
    ensure!(nominal.effective_mw() == 850.0, "effective DC {}", nominal.effective_mw());
    let audit = run.out.tree.dc_audit;
    ensure!(audit.routings > 0, "no routings recorded");
    ensure!(audit.double_counted == 0, "{} double counts", audit.double_counted);
    ensure!(audit.via_grid + audit.via_response == audit.routings, "{audit:?}");
    Ok(format!(
        "324 paths route 850 MW through one pathway; {} routings ({} grid, {} response), 0 double counts",
        audit.routings, audit.via_grid, audit.via_response
    ))
}

fn c10(run: &Run) -> Outcome {
    let g = &run.physics.grid;
    ensure!(g.primary_len() == 6125, "{} primary points", g.primary_len());
    ensure!(g.boundary_len() == 7525, "{} boundary points", g.boundary_len());
    ensure!(g.total_len() == 13650, "{} points", g.total_len());
    let raw = SfrParams::default().with_bias(1.0);
    let mut worst = 0.0f64;
    for flat in 0..g.primary_len() {
        let c = g.axes.node(flat);
        let v = g.values[flat];
        let i = g.interpolate(c);
        worst = worst.max((i - v).abs());
        ensure!((i - v).abs() <= 1e-12, "node {c:?}: {i} vs {v}");
        let sfr = sfr_median_nadir(c[LOSS], c[1], c[2], c[3], &raw);
        ensure!(v <= sfr, "node {c:?}: physics {v} deeper than raw SFR {sfr} (DC {})", c[DC]);
    }
    let build = run.grid_build;
    ensure!(build < Duration::from_secs(600), "grid build took {build:?}");
    Ok(format!(
        "6125 + 7525 = 13650 points, node error {worst:.1e}, physics <= raw SFR, built in {:.1} s on {} threads",
        build.as_secs_f64(),
        rayon::current_num_threads()
    ))
}

fn c11() -> Outcome {
    for (a, b) in [(500.0, 700.0), (12.5, 37.5), (1000.0, 0.0), (1800.0, 1325.0)] {
        let c = convolve_pmfs(&LossPmf::delta(a, 25.0).unwrap(), &LossPmf::delta(b, 25.0).unwrap())
            .map_err(|e| e.to_string())?;
        let mass: Vec<(f64, f64)> = c.iter().filter(|(_, w)| *w > 0.0).collect();
        ensure!(mass == vec![(a + b, 1.0)], "delta({a}) * delta({b}) = {mass:?}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pmf = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..40);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: f64 = raw.iter().sum();
        LossPmf::new(12.5 + 25.0 * rng.random_range(0..40) as f64, 25.0, raw.iter().map(|w| w / t).collect()).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (pmf(&mut rng), pmf(&mut rng));
        let c = convolve_pmfs(&a, &b).map_err(|e| e.to_string())?;
        let err = (c.mean_mw() - a.mean_mw() - b.mean_mw()).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "mean error {err:e}");
        let mass = kahan_sum(c.weights().iter().copied());
        ensure!((mass - 1.0).abs() <= 1e-9, "mass {mass}");
    }
    Ok(format!("delta identities hold; 100 random pairs, worst mean error {worst:.1e} MW"))
}

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let (alpha, beta) = (rng.random_range(0.01..20.0), rng.random_range(0.01..20.0));
        let n: u64 = rng.random_range(0..500);
        let t = rng.random_range(0.05..30.0);
        let prior = GammaPrior::new(PriorClass::Ccgt, alpha, beta).map_err(|e| e.to_string())?;
        let post = posterior_rate(&prior, &IncidentCount::new("S", n, t).map_err(|e| e.to_string())?);
        let expected = (alpha + n as f64) / (beta + t);
        ensure!(close(post, expected, 1e-12), "posterior {post} vs {expected}");
        let zero = posterior_rate(&prior, &IncidentCount::new("S", 0, t).unwrap());
        ensure!(zero > 0.0, "zero-count posterior {zero}");
        let w = beta / (beta + t);
        let mix = w * (alpha / beta) + (1.0 - w) * (n as f64 / t);
        ensure!(close(post, mix, 1e-12), "convex combination {mix} vs {post}");
        let (lo, hi) = ((alpha / beta).min(n as f64 / t), (alpha / beta).max(n as f64 / t));
        ensure!(post >= lo * (1.0 - 1e-12) && post <= hi * (1.0 + 1e-12), "{post} outside [{lo}, {hi}]");
    }
    Ok("1000 random priors and counts".into())
}

fn c13(run: &Run) -> Outcome {
    let threshold = 0.8;
    let mut one_d = Vec::new();
    for dim in Dimension::ALL {
        let cells = pipeline::disaggregate_central(&run.scenario, threshold, dim).map_err(|e| e.to_string())?;
        let total = kahan_sum(cells.iter().map(|c| c.fraction));
        ensure!((total - 1.0).abs() <= 1e-9, "{dim}: fractions sum to {total}");
        one_d.push((dim, cells));
    }
    let cells_of = |d: Dimension| &one_d.iter().find(|(k, _)| *k == d).unwrap().1;
    let joint = cells_of(Dimension::SizeInertiaEpsilon);
    for dim in [Dimension::LossSize, Dimension::Epsilon] {
        let marg = marginalise(joint, &[dim]);
        let direct = cells_of(dim);
        ensure!(marg.len() == direct.len(), "{dim}: {} marginal cells vs {}", marg.len(), direct.len());
        for (m, d) in marg.iter().zip(direct) {
            ensure!(m.key == d.key, "{dim}: key {:?} vs {:?}", m.key, d.key);
            ensure!(
                close(m.contribution_per_yr, d.contribution_per_yr, 1e-12),
                "{dim}: {} vs {}",
                m.contribution_per_yr,
                d.contribution_per_yr
            );
        }
    }
    Ok(format!(
        "{} dimensions partition the rate at {threshold} Hz; joint marginals match size and epsilon",
        Dimension::ALL.len()
    ))
}

/// Synthetic scenario for `seed`, sharing the already-built grid.
fn scenario_for(seed: u64, root: &Path, grid: &Path, split_fraction: f64) -> Scenario {
    let config = synth::generate(seed).write(&root.join(format!("seed{seed}"))).unwrap();
    let mut loaded = Config::load(&config).unwrap();
    loaded.config.physics.grid = grid.to_path_buf();
    loaded.config.validate.split_fraction = split_fraction;
    Scenario::load(&loaded).unwrap()
}

fn c14(run: &Run) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let grid = run.scenario.config.physics.grid.clone();
    let end = pipeline::validate(&scenario_for(SEED, tmp.path(), &grid, 1.0)).map_err(|e| e.to_string())?;
    ensure!(end.split.rows.iter().all(|r| r.ratio == 1.0), "split at end: {:?}", end.split.rows);
    let mut stable = 0;
    let mut worst = (f64::INFINITY, 0.0f64);
    for seed in 1..=20 {
        let v = pipeline::validate(&scenario_for(seed, tmp.path(), &grid, 0.75)).map_err(|e| e.to_string())?;
        for r in &v.split.rows {
            worst = (worst.0.min(r.ratio), worst.1.max(r.ratio));
        }
        stable += usize::from(v.split.all_stable());
    }
    ensure!(stable >= 18, "{stable}/20 splits stable");
    Ok(format!(
        "end split ratios 1.0; {stable}/20 seeded 75/25 splits in [0.5, 2.0], ratios {:.3}..{:.3}",
        worst.0, worst.1
    ))
}

fn c15(run: &Run) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("run2");
    let config = synth::generate(SEED).write(&data).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for entry in fs::read_dir(&data).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(run.data.join(&name)).map_err(|e| format!("{name:?}: {e}"))?;
        ensure!(a == fs::read(data.join(&name)).unwrap(), "synthetic {name:?} differs");
        compared += 1;
    }
    let start = Instant::now();
    let scenario = load(&config);
    let out = pipeline::compute(&scenario).map_err(|e| e.to_string())?;
    let second = start.elapsed();
    pipeline::write_compute(&data.join("out"), &scenario, &out).map_err(|e| e.to_string())?;
    for name in files::ALL {
        let a = fs::read(run.data.join("out").join(name)).unwrap();
        ensure!(a == fs::read(data.join("out").join(name)).unwrap(), "{name} differs between runs");
    }
    let first = run.grid_build + run.compute;
    let limit = Duration::from_secs(900);
    ensure!(first < limit && second < limit, "runs took {first:?} and {second:?}");
    Ok(format!(
        "{compared} data files and {} outputs byte-identical; 324-path run {:.1} s (+{:.1} s grid), rerun with grid build {:.1} s",
        files::ALL.len(),
        run.compute.as_secs_f64(),
        run.grid_build.as_secs_f64(),
        second.as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let run = prepare();
    let criteria: [(&str, &dyn Fn() -> Outcome); 15] = [
        ("worked-example z-chain", &c01),
        ("SFR median anchors", &c02),
        ("sigma anchor", &c03),
        ("RoCoF gate", &c04),
        ("logic tree structure", &|| c05(&run)),
        ("hazard oracle equivalence", &c06),
        ("monotonicity suite", &|| c07(&run)),
        ("LFDD strict inequality", &c08),
        ("DC routing", &|| c09(&run)),
        ("grid and interpolation", &|| c10(&run)),
        ("convolution identities", &c11),
        ("Bayesian rates", &c12),
        ("disaggregation partition", &|| c13(&run)),
        ("out-of-sample harness", &|| c14(&run)),
        ("end-to-end reproducibility", &|| c15(&run)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
