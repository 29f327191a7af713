//! Weighted logic tree over model and parameter choices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalogue::SourceRecord;
use crate::controls::{ControlsConfig, DcAudit, DcAuditSnapshot};
use crate::error::{Error, Result};
use crate::frpe::sfr::{SfrModel, SfrParams};
use crate::frpe::{FrequencyResponseModel, FrpeKind, SigmaParams};
use crate::hazard::{compute_hazard, HazardInputs, HazardResult};
use crate::layers::CascadeSpec;
use crate::scalar::{KahanSum, Real};
use crate::state::StateBin;

/// Tolerance on each branch's weight total and on the cumulative-weight walk.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Occurrence model for pair sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occurrence {
    Poisson,
    /// Pair rates scaled by the tree's compound multiplier.
    Compound,
}

impl Occurrence {
    pub fn as_str(self) -> &'static str {
        match self {
            Occurrence::Poisson => "poisson",
            Occurrence::Compound => "compound",
        }
    }
}

impl fmt::Display for Occurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Occurrence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(Occurrence::Poisson),
            "compound" => Ok(Occurrence::Compound),
            other => Err(Error::Config(format!("unknown occurrence model `{other}`"))),
        }
    }
}

/// The six branch levels, in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Frpe,
    Sigma0,
    Bias,
    Occurrence,
    DcEffectiveness,
    LfddEffectiveness,
}

impl BranchKind {
    pub const ALL: [BranchKind; 6] = [
        BranchKind::Frpe,
        BranchKind::Sigma0,
        BranchKind::Bias,
        BranchKind::Occurrence,
        BranchKind::DcEffectiveness,
        BranchKind::LfddEffectiveness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BranchKind::Frpe => "frpe",
            BranchKind::Sigma0 => "sigma0",
            BranchKind::Bias => "bias",
            BranchKind::Occurrence => "occurrence",
            BranchKind::DcEffectiveness => "dc_effectiveness",
            BranchKind::LfddEffectiveness => "lfdd_effectiveness",
        }
    }
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Branch options as `(value, weight)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct TreeSpec<T = f64> {
    pub frpe: Vec<(FrpeKind, T)>,
    pub sigma0: Vec<(T, T)>,
    pub bias: Vec<(T, T)>,
    pub occurrence: Vec<(Occurrence, T)>,
    pub dc_effectiveness: Vec<(T, T)>,
    pub lfdd_effectiveness: Vec<(T, T)>,
    /// Pair-rate multiplier of the compound occurrence branch.
    pub compound_kappa: T,
}

impl<T: Real> Default for TreeSpec<T> {
    fn default() -> Self {
        let l = |pairs: &[(f64, f64)]| pairs.iter().map(|&(v, w)| (T::lit(v), T::lit(w))).collect::<Vec<_>>();
        let effectiveness = l(&[(0.70, 0.25), (0.85, 0.50), (0.95, 0.25)]);
        Self {
            frpe: vec![(FrpeKind::Sfr, T::lit(0.40)), (FrpeKind::Physics, T::lit(0.60))],
            sigma0: l(&[(0.20, 0.25), (0.296, 0.50), (0.40, 0.25)]),
            bias: l(&[(0.30, 0.30), (0.37, 0.40), (0.50, 0.30)]),
            occurrence: vec![(Occurrence::Poisson, T::lit(0.70)), (Occurrence::Compound, T::lit(0.30))],
            dc_effectiveness: effectiveness.clone(),
            lfdd_effectiveness: effectiveness,
            compound_kappa: T::one(),
        }
    }
}

impl<T: Real> TreeSpec<T> {
    fn weights(&self, kind: BranchKind) -> Vec<T> {
        fn w<V, T: Copy>(b: &[(V, T)]) -> Vec<T> {
            b.iter().map(|o| o.1).collect()
        }
        match kind {
            BranchKind::Frpe => w(&self.frpe),
            BranchKind::Sigma0 => w(&self.sigma0),
            BranchKind::Bias => w(&self.bias),
            BranchKind::Occurrence => w(&self.occurrence),
            BranchKind::DcEffectiveness => w(&self.dc_effectiveness),
            BranchKind::LfddEffectiveness => w(&self.lfdd_effectiveness),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in BranchKind::ALL {
            let w = self.weights(kind);
            let total: T = w.iter().copied().sum();
            if w.is_empty()
                || w.iter().any(|x| !(*x >= T::zero()))
                || (total - T::one()).abs() > T::lit(WEIGHT_TOLERANCE)
            {
                return Err(Error::MalformedWeights(kind.to_string()));
            }
        }
        let unit = |x: &T| *x >= T::zero() && *x <= T::one();
        let ok = self.sigma0.iter().all(|o| o.0 > T::zero())
            && self.bias.iter().all(|o| o.0 > T::zero() && o.0 <= T::one())
            && self.dc_effectiveness.iter().all(|o| unit(&o.0))
            && self.lfdd_effectiveness.iter().all(|o| unit(&o.0))
            && self.compound_kappa >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("logic-tree branch value out of range".into()))
        }
    }

    /// Index of the highest-weight option per branch (first on ties).
    pub fn central_choice(&self) -> [usize; 6] {
        BranchKind::ALL.map(|kind| {
            let w = self.weights(kind);
            (0..w.len()).fold(0, |best, i| if w[i] > w[best] { i } else { best })
        })
    }

    pub fn branch_len(&self, kind: BranchKind) -> usize {
        self.weights(kind).len()
    }

    /// Path for the given option indices, in `BranchKind::ALL` order.
    pub fn path(&self, index: usize, choice: [usize; 6]) -> LogicTreePath<T> {
        let [f, s, b, o, d, l] = choice;
        LogicTreePath {
            index,
            choice,
            frpe: self.frpe[f].0,
            sigma0: self.sigma0[s].0,
            bias: self.bias[b].0,
            occurrence: self.occurrence[o].0,
            dc_effectiveness: self.dc_effectiveness[d].0,
            lfdd_effectiveness: self.lfdd_effectiveness[l].0,
            weight: self.frpe[f].1
                * self.sigma0[s].1
                * self.bias[b].1
                * self.occurrence[o].1
                * self.dc_effectiveness[d].1
                * self.lfdd_effectiveness[l].1,
        }
    }
}

/// One weighted combination of branch options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogicTreePath<T = f64> {
    pub index: usize,
    pub choice: [usize; 6],
    pub frpe: FrpeKind,
    pub sigma0: T,
    /// Carried on physics paths but not used by them.
    pub bias: T,
    pub occurrence: Occurrence,
    pub dc_effectiveness: T,
    pub lfdd_effectiveness: T,
    pub weight: T,
}

impl<T: Real> LogicTreePath<T> {
    pub fn descriptor(&self) -> String {
        format!(
            "{}/sigma0={}/bias={}/{}/dc={}/lfdd={}",
            self.frpe, self.sigma0, self.bias, self.occurrence, self.dc_effectiveness, self.lfdd_effectiveness
        )
    }

    /// Identifies paths with identical hazard; the bias level is dropped for physics paths.
    fn evaluation_key(&self) -> [usize; 6] {
        let mut key = self.choice;
        if self.frpe == FrpeKind::Physics {
            key[2] = usize::MAX;
        }
        key
    }
}

/// Full Cartesian product of the branch options.
pub fn enumerate_paths<T: Real>(spec: &TreeSpec<T>) -> Result<Vec<LogicTreePath<T>>> {
    spec.validate()?;
    let lens = BranchKind::ALL.map(|k| spec.branch_len(k));
    let total: usize = lens.iter().product();
    let mut paths = Vec::with_capacity(total);
    for flat in 0..total {
        let mut choice = [0usize; 6];
        let mut rem = flat;
        for level in (0..6).rev() {
            choice[level] = rem % lens[level];
            rem /= lens[level];
        }
        paths.push(spec.path(flat, choice));
    }
    Ok(paths)
}

/// Shared inputs of every path evaluation.
#[derive(Clone)]
pub struct TreeInputs<'a, T: Real = f64> {
    pub sources: &'a [SourceRecord<T>],
    pub states: &'a [StateBin<T>],
    /// Analytical model parameters; each path overrides the bias.
    pub sfr: SfrParams<T>,
    /// Required when any path selects the physics model.
    pub physics: Option<&'a dyn FrequencyResponseModel<T>>,
    /// Base controls; each path overrides both effectiveness values.
    pub controls: ControlsConfig<T>,
    pub thresholds: Vec<T>,
    pub cascade: Option<CascadeSpec<T>>,
    pub compound_kappa: T,
}

impl<T: Real> fmt::Debug for TreeInputs<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TreeInputs")
            .field("sources", &self.sources.len())
            .field("states", &self.states.len())
            .field("sfr", &self.sfr)
            .field("physics", &self.physics.is_some())
            .field("thresholds", &self.thresholds)
            .finish_non_exhaustive()
    }
}

/// Builds the hazard inputs of one path and hands them to `f`; errors are tagged with the path.
pub fn with_path_inputs<T: Real, R>(
    path: &LogicTreePath<T>,
    inputs: &TreeInputs<'_, T>,
    cell_thresholds: &[T],
    audit: Option<&DcAudit>,
    f: impl FnOnce(&HazardInputs<'_, T>) -> Result<R>,
) -> Result<R> {
    let wrap = |e: Error| Error::Path { path: path.descriptor(), source: Box::new(e) };
    let sfr = SfrModel::new(inputs.sfr.with_bias(path.bias));
    let model: &dyn FrequencyResponseModel<T> = match path.frpe {
        FrpeKind::Sfr => &sfr,
        FrpeKind::Physics => {
            inputs.physics.ok_or_else(|| wrap(Error::Config("physics model requested but not loaded".into())))?
        }
    };
    let mut controls = inputs.controls.clone();
    controls.dc.effectiveness = path.dc_effectiveness;
    controls.lfdd.relay_effectiveness = path.lfdd_effectiveness;
    let hazard = HazardInputs {
        sources: inputs.sources,
        states: inputs.states,
        model,
        sigma: SigmaParams::for_kind(path.frpe, path.sigma0),
        controls,
        thresholds: inputs.thresholds.clone(),
        cascade: inputs.cascade,
        pair_rate_multiplier: match path.occurrence {
            Occurrence::Poisson => T::one(),
            Occurrence::Compound => inputs.compound_kappa,
        },
        cell_thresholds: cell_thresholds.to_vec(),
        prune_below: None,
        audit,
    };
    f(&hazard).map_err(wrap)
}

/// Runs the hazard sum for one path. `cell_thresholds` are passed through for disaggregation.
pub fn evaluate_path<T: Real>(
    path: &LogicTreePath<T>,
    inputs: &TreeInputs<'_, T>,
    cell_thresholds: &[T],
    audit: Option<&DcAudit>,
) -> Result<HazardResult<T>> {
    with_path_inputs(path, inputs, cell_thresholds, audit, compute_hazard)
}

/// The highest-weight path, used for single-path tables.
pub fn central_path<T: Real>(spec: &TreeSpec<T>) -> LogicTreePath<T> {
    let choice = spec.central_choice();
    let index = BranchKind::ALL.iter().zip(choice).fold(0, |acc, (&kind, c)| acc * spec.branch_len(kind) + c);
    spec.path(index, choice)
}

/// Weighted mean and fractiles per threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractileSummary<T = f64> {
    pub thresholds: Vec<T>,
    pub mean: Vec<T>,
    pub median: Vec<T>,
    pub p05: Vec<T>,
    pub p95: Vec<T>,
}

/// Smallest value whose cumulative normalised weight reaches `p`.
///
/// `samples` are `(value, weight, tiebreak)`; equal values are ordered by the tiebreak
/// so the walk does not depend on input order.
pub fn weighted_quantile<T: Real>(samples: &[(T, T, usize)], p: T) -> T {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite rate").then(a.2.cmp(&b.2)));
    let total: T = kahan_total(sorted.iter().map(|s| s.1));
    let target = p * total - T::lit(WEIGHT_TOLERANCE);
    let mut cum = KahanSum::new();
    for s in &sorted {
        cum.add(s.1);
        if cum.total() >= target {
            return s.0;
        }
    }
    sorted.last().map(|s| s.0).unwrap_or_else(T::nan)
}

fn kahan_total<T: Real>(values: impl Iterator<Item = T>) -> T {
    let mut k = KahanSum::new();
    values.for_each(|v| k.add(v));
    k.total()
}

/// Summary over paths; `rates[p][t]` is path `p` at threshold `t`.
pub fn summarise<T: Real>(paths: &[LogicTreePath<T>], rates: &[Vec<T>], thresholds: &[T]) -> FractileSummary<T> {
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by_key(|&i| paths[i].index);
    let total_weight = kahan_total(order.iter().map(|&i| paths[i].weight));
    let mut s = FractileSummary {
        thresholds: thresholds.to_vec(),
        mean: Vec::new(),
        median: Vec::new(),
        p05: Vec::new(),
        p95: Vec::new(),
    };
    for t in 0..thresholds.len() {
        let samples: Vec<(T, T, usize)> =
            order.iter().map(|&i| (rates[i][t], paths[i].weight, paths[i].index)).collect();
        s.mean.push(kahan_total(samples.iter().map(|x| x.0 * x.1)) / total_weight);
        s.median.push(weighted_quantile(&samples, T::lit(0.5)));
        s.p05.push(weighted_quantile(&samples, T::lit(0.05)));
        s.p95.push(weighted_quantile(&samples, T::lit(0.95)));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeResult<T = f64> {
    /// Paths sorted by index.
    pub paths: Vec<LogicTreePath<T>>,
    pub thresholds: Vec<T>,
    /// Rate per path (same order as `paths`) and threshold.
    pub rates: Vec<Vec<T>>,
    pub summary: FractileSummary<T>,
    pub distinct_evaluations: usize,
    pub dc_audit: DcAuditSnapshot,
}

/// Evaluates every path, sharing work between physics paths that differ only in bias.
pub fn evaluate_tree<T: Real>(paths: &[LogicTreePath<T>], inputs: &TreeInputs<'_, T>) -> Result<TreeResult<T>> {
    let mut paths = paths.to_vec();
    paths.sort_by_key(|p| p.index);
    let mut slots: HashMap<[usize; 6], usize> = HashMap::new();
    let mut distinct: Vec<&LogicTreePath<T>> = Vec::new();
    let slot_of: Vec<usize> = paths
        .iter()
        .map(|p| {
            *slots.entry(p.evaluation_key()).or_insert_with(|| {
                distinct.push(p);
                distinct.len() - 1
            })
        })
        .collect();
    let audit = DcAudit::new();
    let evaluated: Vec<Vec<T>> = distinct
        .par_iter()
        .map(|p| evaluate_path(p, inputs, &[], Some(&audit)).map(|r| r.total_rates))
        .collect::<Result<_>>()?;
    let rates: Vec<Vec<T>> = slot_of.iter().map(|&s| evaluated[s].clone()).collect();
    let summary = summarise(&paths, &rates, &inputs.thresholds);
    Ok(TreeResult {
        thresholds: inputs.thresholds.clone(),
        summary,
        distinct_evaluations: distinct.len(),
        dc_audit: audit.snapshot(),
        paths,
        rates,
    })
}

/// Low/high rates when one branch varies with the rest held central.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TornadoRow<T = f64> {
    pub branch: BranchKind,
    pub low_rate: T,
    pub high_rate: T,
    /// `high / low`; 1 when both are zero, infinite when only the low rate is.
    pub swing: T,
}

/// One-at-a-time sensitivity about the central path, sorted by swing descending.
pub fn tornado<T: Real>(spec: &TreeSpec<T>, inputs: &TreeInputs<'_, T>, threshold_hz: T) -> Result<Vec<TornadoRow<T>>> {
    spec.validate()?;
    let central = spec.central_choice();
    let single = TreeInputs { thresholds: vec![threshold_hz], ..inputs.clone() };
    let mut rows = BranchKind::ALL
        .par_iter()
        .enumerate()
        .map(|(level, &branch)| {
            let rates = (0..spec.branch_len(branch))
                .map(|option| {
                    let mut choice = central;
                    choice[level] = option;
                    evaluate_path(&spec.path(0, choice), &single, &[], None).map(|r| r.total_rates[0])
                })
                .collect::<Result<Vec<T>>>()?;
            let low = rates.iter().copied().fold(T::infinity(), T::min);
            let high = rates.iter().copied().fold(T::neg_infinity(), T::max);
            let swing = if high == T::zero() { T::one() } else { high / low };
            Ok(TornadoRow { branch, low_rate: low, high_rate: high, swing })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.swing.partial_cmp(&a.swing).expect("comparable swing").then(a.branch.cmp(&b.branch)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::{LossPmf, PriorClass, SourceType};
    use crate::frpe::OperatingPoint;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_tree_has_324_unit_weight_paths() {
        let spec = TreeSpec::<f64>::default();
        let paths = enumerate_paths(&spec).unwrap();
        assert_eq!(paths.len(), 324);
        let total: f64 = paths.iter().map(|p| p.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p = paths
            .iter()
            .find(|p| {
                p.frpe == FrpeKind::Sfr
                    && p.sigma0 == 0.296
                    && p.bias == 0.37
                    && p.occurrence == Occurrence::Poisson
                    && p.dc_effectiveness == 0.85
                    && p.lfdd_effectiveness == 0.85
            })
            .unwrap();
        assert!((p.weight - 0.40 * 0.50 * 0.40 * 0.70 * 0.50 * 0.50).abs() < 1e-15);
        assert!((p.weight - 0.014).abs() < 1e-12);
        assert_eq!(spec.central_choice(), [1, 1, 1, 0, 1, 1]);
        let central = central_path(&spec);
        assert_eq!(paths[central.index], central);
    }

    #[test]
    fn malformed_weights_rejected() {
        let mut spec = TreeSpec::<f64>::default();
        spec.sigma0[0].1 = 0.3;
        assert!(matches!(enumerate_paths(&spec), Err(Error::MalformedWeights(b)) if b == "sigma0"));
        let mut spec = TreeSpec::<f64>::default();
        spec.bias.clear();
        assert!(enumerate_paths(&spec).is_err());
    }

    fn samples(rates: &[f64], weights: &[f64]) -> Vec<(f64, f64, usize)> {
        rates.iter().zip(weights).enumerate().map(|(i, (&r, &w))| (r, w, i)).collect()
    }

    /// Walks the cumulative weight by hand, with no tolerance and no tiebreak.
    fn direct_quantile(rates: &[f64], weights: &[f64], p: f64) -> f64 {
        let mut idx: Vec<usize> = (0..rates.len()).collect();
        idx.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
        let mut cum = 0.0;
        for i in idx {
            cum += weights[i];
            if cum >= p {
                return rates[i];
            }
        }
        unreachable!()
    }

    #[test]
    fn three_path_fractiles() {
        let s = samples(&[1.0, 2.0, 3.0], &[0.2, 0.3, 0.5]);
        let mean: f64 = s.iter().map(|x| x.0 * x.1).sum();
        assert!((mean - 2.3).abs() < 1e-15);
        // Cumulative weights 0.2, 0.5, 1.0: the median is reached at rate 2.
        assert_eq!(weighted_quantile(&s, 0.5), direct_quantile(&[1.0, 2.0, 3.0], &[0.2, 0.3, 0.5], 0.5));
        assert_eq!(weighted_quantile(&s, 0.5), 2.0);
        assert_eq!(weighted_quantile(&s, 0.05), 1.0);
        assert_eq!(weighted_quantile(&s, 0.95), 3.0);
        let same = samples(&[4.0; 3], &[0.2, 0.3, 0.5]);
        for p in [0.05, 0.5, 0.95] {
            assert_eq!(weighted_quantile(&same, p), 4.0);
        }
    }

    #[test]
    fn quantile_non_decreasing_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::RngExt;
        for _ in 0..50 {
            let n = rng.random_range(1..30);
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let t: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / t).collect();
            let s = samples(&r, &w);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..100 {
                let q = weighted_quantile(&s, k as f64 / 100.0);
                assert!(q >= prev);
                prev = q;
            }
        }
    }

    struct FixedPhysics;

    impl FrequencyResponseModel<f64> for FixedPhysics {
        fn kind(&self) -> FrpeKind {
            FrpeKind::Physics
        }
        fn median_nadir(&self, p: &OperatingPoint<f64>) -> Result<f64> {
            Ok(p.loss_mw / (0.025 * p.demand_gw * 1000.0 + p.response_mw / 2.0 + p.dc_mw / 0.5) * 1.5)
        }
        fn effective_damping(&self, p: &OperatingPoint<f64>) -> f64 {
            0.025 * p.demand_gw * 1000.0 + p.response_mw / 2.0 + p.dc_mw / 0.5
        }
    }

    fn fixture() -> (Vec<SourceRecord<f64>>, Vec<StateBin<f64>>) {
        let mk = |id: &str, t: SourceType, rate: f64, first: f64, w: Vec<f64>| SourceRecord {
            source_id: id.into(),
            source_type: t,
            capacity_mw: 3000.0,
            max_credible_loss_mw: 3000.0,
            bmu_ids: vec![],
            prior_class: Some(PriorClass::Ccgt),
            trip_rate_per_yr: rate,
            pmf: Some(LossPmf::new(first, 25.0, w).unwrap()),
        };
        let sources = vec![
            mk("A", SourceType::Ccgt, 2.0, 812.5, vec![0.3, 0.7]),
            mk("B", SourceType::Interconnector, 4.0, 987.5, vec![1.0]),
            SourceRecord { prior_class: None, ..mk("P", SourceType::Pair, 0.1, 1800.0, vec![1.0]) },
        ];
        let states = vec![
            StateBin { bin_index: 0, weight: 0.4, ..StateBin::point(110.0, 20.0, 1000.0, 0.0) },
            StateBin { bin_index: 1, weight: 0.6, ..StateBin::point(240.0, 32.0, 1600.0, 0.0) },
        ];
        (sources, states)
    }

    fn inputs<'a>(
        sources: &'a [SourceRecord<f64>],
        states: &'a [StateBin<f64>],
        physics: &'a FixedPhysics,
    ) -> TreeInputs<'a, f64> {
        TreeInputs {
            sources,
            states,
            sfr: SfrParams::default(),
            physics: Some(physics),
            controls: ControlsConfig::default(),
            thresholds: vec![0.5, 0.8, 1.2],
            cascade: None,
            compound_kappa: 1.5,
        }
    }

    #[test]
    fn tree_memoises_and_is_order_independent() {
        let (sources, states) = fixture();
        let physics = FixedPhysics;
        let inp = inputs(&sources, &states, &physics);
        let paths = enumerate_paths(&TreeSpec::default()).unwrap();
        let result = evaluate_tree(&paths, &inp).unwrap();
        assert_eq!(result.distinct_evaluations, 216);
        assert_eq!(result.dc_audit.double_counted, 0);
        assert_eq!(result.dc_audit.routings, 216 * 2);
        for (p, r) in result.paths.iter().zip(&result.rates) {
            if p.frpe == FrpeKind::Physics {
                for (q, s) in result.paths.iter().zip(&result.rates) {
                    let mut a = p.choice;
                    let mut b = q.choice;
                    a[2] = 0;
                    b[2] = 0;
                    if a == b {
                        assert_eq!(r, s);
                    }
                }
            }
        }
        let s = &result.summary;
        for t in 0..3 {
            assert!(s.p05[t] <= s.median[t] && s.median[t] <= s.p95[t]);
            let lo = result.rates.iter().map(|r| r[t]).fold(f64::INFINITY, f64::min);
            let hi = result.rates.iter().map(|r| r[t]).fold(0.0, f64::max);
            assert!(s.mean[t] >= lo && s.mean[t] <= hi);
        }
        let mut shuffled = paths.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let again = evaluate_tree(&shuffled, &inp).unwrap();
        assert_eq!(again.summary, result.summary);
    }

    #[test]
    fn identical_paths_collapse_fractiles() {
        let (sources, states) = fixture();
        let physics = FixedPhysics;
        let inp = inputs(&sources, &states, &physics);
        let spec = TreeSpec {
            frpe: vec![(FrpeKind::Physics, 1.0)],
            sigma0: vec![(0.296, 1.0)],
            dc_effectiveness: vec![(0.85, 1.0)],
            lfdd_effectiveness: vec![(0.85, 1.0)],
            occurrence: vec![(Occurrence::Poisson, 1.0)],
            ..TreeSpec::default()
        };
        let result = evaluate_tree(&enumerate_paths(&spec).unwrap(), &inp).unwrap();
        assert_eq!(result.paths.len(), 3);
        assert_eq!(result.distinct_evaluations, 1);
        let s = &result.summary;
        for t in 0..3 {
            let r = result.rates[0][t];
            assert_eq!((s.median[t], s.p05[t], s.p95[t]), (r, r, r));
            assert!((s.mean[t] - r).abs() <= 1e-15 * r);
        }
    }

    #[test]
    fn tornado_bias_flat_under_physics() {
        let (sources, states) = fixture();
        let physics = FixedPhysics;
        let inp = inputs(&sources, &states, &physics);
        let rows = tornado(&TreeSpec::default(), &inp, 0.8).unwrap();
        assert_eq!(rows.len(), 6);
        let bias = rows.iter().find(|r| r.branch == BranchKind::Bias).unwrap();
        assert_eq!(bias.swing, 1.0);
        assert!(rows.windows(2).all(|w| w[0].swing >= w[1].swing));
        let single = TreeSpec { sigma0: vec![(0.296, 1.0)], ..TreeSpec::default() };
        let rows = tornado(&single, &inp, 0.8).unwrap();
        assert_eq!(rows.iter().find(|r| r.branch == BranchKind::Sigma0).unwrap().swing, 1.0);
    }

    #[test]
    fn missing_physics_model_names_path() {
        let (sources, states) = fixture();
        let physics = FixedPhysics;
        let mut inp = inputs(&sources, &states, &physics);
        inp.physics = None;
        let paths = enumerate_paths(&TreeSpec::default()).unwrap();
        let err = evaluate_tree(&paths, &inp).unwrap_err();
        assert!(err.to_string().contains("physics/"), "{err}");
    }
}
