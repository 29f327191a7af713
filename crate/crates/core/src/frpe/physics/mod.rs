//! Physics-based prediction: time-domain simulation tabulated on a 5-D grid.

pub mod grid;
pub mod sim;

use std::sync::Arc;

pub use grid::{build_grid, load_or_build, BoundarySlab, GridAxes, NadirGrid, Side};
pub use sim::{simulate, simulate_nadir, BandService, DcProfile, GovernorProfile, SimConfig, SimOutcome, StaticBlock};

use super::{FrequencyResponseModel, FrpeKind, OperatingPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid-backed model; cheap to clone and share across paths.
#[derive(Debug, Clone)]
pub struct PhysicsModel<T = f64> {
    pub grid: Arc<NadirGrid<T>>,
    pub sim: Arc<SimConfig<T>>,
}

impl<T: Real> PhysicsModel<T> {
    pub fn new(grid: Arc<NadirGrid<T>>, sim: Arc<SimConfig<T>>) -> Self {
        Self { grid, sim }
    }
}

impl<T: Real> FrequencyResponseModel<T> for PhysicsModel<T> {
    fn kind(&self) -> FrpeKind {
        FrpeKind::Physics
    }

    fn median_nadir(&self, p: &OperatingPoint<T>) -> Result<T> {
        let mu = self.grid.interpolate([p.loss_mw, p.inertia_gva_s, p.demand_gw, p.response_mw, p.dc_mw]);
        if mu > T::zero() && mu.is_finite() {
            Ok(mu)
        } else {
            Err(Error::Numeric(format!("interpolated nadir {mu} at {p:?}")))
        }
    }

    /// Load relief, droop-proportional response and DC at its full-delivery slope.
    fn effective_damping(&self, p: &OperatingPoint<T>) -> T {
        let s = &self.sim;
        s.load_damping_coeff * p.demand_gw * T::lit(1000.0)
            + p.response_mw / (s.governor.droop * s.f0)
            + p.dc_mw / s.dc.full_delivery_hz
    }
}

/// Direct simulation without a grid; slow, used for replay oracles.
#[derive(Debug, Clone)]
pub struct DirectSimModel<T = f64> {
    pub sim: SimConfig<T>,
}

impl<T: Real> FrequencyResponseModel<T> for DirectSimModel<T> {
    fn kind(&self) -> FrpeKind {
        FrpeKind::Physics
    }

    fn median_nadir(&self, p: &OperatingPoint<T>) -> Result<T> {
        simulate_nadir(p, &self.sim)
    }

    fn effective_damping(&self, p: &OperatingPoint<T>) -> T {
        let s = &self.sim;
        s.load_damping_coeff * p.demand_gw * T::lit(1000.0)
            + p.response_mw / (s.governor.droop * s.f0)
            + p.dc_mw / s.dc.full_delivery_hz
    }
}
