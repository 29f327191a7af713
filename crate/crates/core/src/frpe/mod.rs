//! Frequency-response prediction: median nadir plus log-normal scatter.

pub mod physics;
pub mod sfr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{normal_cdf, Real};

/// Which prediction model a hazard path uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrpeKind {
    Sfr,
    Physics,
}

impl FrpeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrpeKind::Sfr => "sfr",
            FrpeKind::Physics => "physics",
        }
    }
}

impl fmt::Display for FrpeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrpeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sfr" => Ok(FrpeKind::Sfr),
            "physics" => Ok(FrpeKind::Physics),
            other => Err(Error::Config(format!("unknown FRPE kind `{other}`"))),
        }
    }
}

/// Loss size and system state at which a nadir is predicted.
///
/// `dc_mw` is the effective Dynamic Containment volume seen by the model; the
/// analytical model expects it to be zero (DC already folded into response).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T = f64> {
    pub loss_mw: T,
    pub inertia_gva_s: T,
    pub demand_gw: T,
    pub response_mw: T,
    pub dc_mw: T,
}

impl<T: Real> OperatingPoint<T> {
    pub fn new(loss_mw: T, inertia_gva_s: T, demand_gw: T, response_mw: T, dc_mw: T) -> Self {
        Self { loss_mw, inertia_gva_s, demand_gw, response_mw, dc_mw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadirPrediction<T = f64> {
    pub median_nadir_hz: T,
    pub sigma: T,
}

impl<T: Real> NadirPrediction<T> {
    pub fn new(median_nadir_hz: T, sigma: T) -> Result<Self> {
        if !(median_nadir_hz > T::zero()) || !median_nadir_hz.is_finite() {
            return Err(Error::Numeric(format!("median nadir must be positive, got {median_nadir_hz}")));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::Numeric(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { median_nadir_hz, sigma })
    }

    /// Standard score of the median relative to a threshold, `(ln mu - ln delta) / sigma`.
    #[inline]
    pub fn z(&self, threshold_hz: T) -> T {
        (self.median_nadir_hz.ln() - threshold_hz.ln()) / self.sigma
    }

    /// Aleatory standard deviations from the median up to the threshold, `-z`.
    #[inline]
    pub fn epsilon_star(&self, threshold_hz: T) -> T {
        -self.z(threshold_hz)
    }
}

/// Probability that the nadir deviation exceeds `threshold_hz`.
#[inline]
pub fn exceedance_probability<T: Real>(prediction: &NadirPrediction<T>, threshold_hz: T) -> T {
    normal_cdf(prediction.z(threshold_hz))
}

/// Constants of the state- and size-dependent aleatory sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams<T = f64> {
    pub sigma0: T,
    pub inertia_coeff: T,
    pub inertia_ref_gva_s: T,
    pub size_coeff: T,
    pub size_ref_mw: T,
    pub size_scale_mw: T,
}

impl<T: Real> SigmaParams<T> {
    pub fn sfr(sigma0: T) -> Self {
        Self {
            sigma0,
            inertia_coeff: T::lit(0.2),
            inertia_ref_gva_s: T::lit(150.0),
            size_coeff: T::lit(0.1),
            size_ref_mw: T::lit(500.0),
            size_scale_mw: T::lit(1000.0),
        }
    }

    /// Milder scaling: half the inertia penalty and no size term.
    pub fn physics(sigma0: T) -> Self {
        Self { inertia_coeff: T::lit(0.1), size_coeff: T::zero(), ..Self::sfr(sigma0) }
    }

    pub fn for_kind(kind: FrpeKind, sigma0: T) -> Self {
        match kind {
            FrpeKind::Sfr => Self::sfr(sigma0),
            FrpeKind::Physics => Self::physics(sigma0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma0 > T::zero()
            && self.inertia_coeff >= T::zero()
            && self.size_coeff >= T::zero()
            && self.inertia_ref_gva_s > T::zero()
            && self.size_scale_mw > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("sigma parameters must be positive".into()))
        }
    }
}

/// `sigma0 * [1 + cH max(0, (Href - H)/Href)] * [1 + cP max(0, (dP - Pref)/Pscale)]`.
pub fn aleatory_sigma<T: Real>(loss_mw: T, inertia_gva_s: T, params: &SigmaParams<T>) -> T {
    let inertia_term = ((params.inertia_ref_gva_s - inertia_gva_s) / params.inertia_ref_gva_s).max(T::zero());
    let size_term = ((loss_mw - params.size_ref_mw) / params.size_scale_mw).max(T::zero());
    params.sigma0 * (T::one() + params.inertia_coeff * inertia_term) * (T::one() + params.size_coeff * size_term)
}

/// A model mapping an operating point onto a median nadir deviation.
pub trait FrequencyResponseModel<T: Real>: Send + Sync {
    fn kind(&self) -> FrpeKind;

    /// Median nadir deviation in Hz (positive).
    fn median_nadir(&self, point: &OperatingPoint<T>) -> Result<T>;

    /// Aggregate MW/Hz slope used by the demand-disconnection nadir cap.
    fn effective_damping(&self, point: &OperatingPoint<T>) -> T;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn std_normal_cdf(z: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().cdf(z)
    }

    #[test]
    fn worked_z_chain() {
        let p: NadirPrediction<f64> = NadirPrediction::new(0.164, 0.317).unwrap();
        let z8 = p.z(0.8);
        assert!((z8 - -4.99).abs() < 0.01, "{z8}");
        let p8 = exceedance_probability(&p, 0.8);
        assert!((2e-7..=4e-7).contains(&p8), "{p8}");
        let z5 = p.z(0.5);
        assert!((z5 - -3.52).abs() < 0.01, "{z5}");
        let p5 = exceedance_probability(&p, 0.5);
        assert!((2.0e-4..=2.4e-4).contains(&p5), "{p5}");
        assert!((p8 - std_normal_cdf(z8)).abs() < 1e-15);
        assert_eq!(exceedance_probability(&NadirPrediction::new(0.4, 0.3).unwrap(), 0.4), 0.5);
    }

    #[test]
    fn sigma_examples() {
        let sfr: SigmaParams<f64> = SigmaParams::sfr(0.296);
        let s = aleatory_sigma(1198.0, 180.0, &sfr);
        assert!((s - 0.3167).abs() < 5e-4, "{s}");
        assert_eq!(aleatory_sigma(500.0, 150.0, &sfr), 0.296);
        assert_eq!(aleatory_sigma(300.0, 400.0, &sfr), 0.296);
        let s = aleatory_sigma(1500.0, 120.0, &sfr);
        assert!((s - 0.296 * 1.04 * 1.1).abs() < 1e-12, "{s}");
        let phys: SigmaParams<f64> = SigmaParams::physics(0.296);
        assert!((aleatory_sigma(1500.0, 120.0, &phys) - 0.296 * 1.02).abs() < 1e-12);
    }

    #[test]
    fn invalid_predictions() {
        assert!(NadirPrediction::new(0.0, 0.3).is_err());
        assert!(NadirPrediction::new(0.3, 0.0).is_err());
        assert!(NadirPrediction::new(f64::NAN, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn exceedance_matches_normal_cdf(mu in 0.01..3.0f64, sigma in 0.05..1.0f64, delta in 0.01..3.0f64) {
            let p = NadirPrediction::new(mu, sigma).unwrap();
            let z = (mu.ln() - delta.ln()) / sigma;
            prop_assert!((exceedance_probability(&p, delta) - std_normal_cdf(z)).abs() < 1e-10);
        }

        #[test]
        fn exceedance_monotone(mu in 0.01..3.0f64, sigma in 0.05..1.0f64, d1 in 0.01..3.0f64, d2 in 0.01..3.0f64) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assume!(hi - lo > 1e-6);
            let p = NadirPrediction::new(mu, sigma).unwrap();
            prop_assert!(exceedance_probability(&p, lo) >= exceedance_probability(&p, hi));
            let deeper = NadirPrediction::new(mu * 1.1, sigma).unwrap();
            prop_assert!(exceedance_probability(&deeper, lo) >= exceedance_probability(&p, lo));
        }

        #[test]
        fn sigma_floor(loss in 1.0..4000.0f64, h in 10.0..500.0f64, s0 in 0.05..0.6f64) {
            for params in [SigmaParams::sfr(s0), SigmaParams::physics(s0)] {
                let s = aleatory_sigma(loss, h, &params);
                prop_assert!(s >= s0);
                let inactive = h >= 150.0 && (loss <= 500.0 || params.size_coeff == 0.0);
                prop_assert_eq!(s == s0, inactive);
            }
        }
    }

    #[test]
    fn tails() {
        let p = NadirPrediction::new(0.5, 0.3).unwrap();
        assert!(exceedance_probability(&p, 1e-9) > 1.0 - 1e-12);
        assert!(exceedance_probability(&p, 1e9) < 1e-12);
        assert!(exceedance_probability(&p, 1e9) >= 0.0);
    }
}
