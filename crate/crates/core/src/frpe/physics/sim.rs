//! Single-bus swing-equation simulator with explicit service delivery profiles.
//!
//! The state is the positive frequency deviation `x` (Hz below nominal):
//!
//! ```text
//! M dx/dt = dP - P_gov - P_dc - P_dm - P_dr - P_static - k D x,   M = 2 H 1000 / f0
//! ```
//!
//! Each service output is a time envelope (delay then linear ramp) times a
//! frequency characteristic. Static blocks latch at step boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frpe::OperatingPoint;
use crate::scalar::Real;

/// Droop-proportional governor response: pure delay, then a linear ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorProfile<T = f64> {
    pub delay_s: T,
    pub ramp_s: T,
    pub droop: T,
}

/// Dynamic Containment: creeps up to `creep_fraction` of its volume at the
/// deadband edge, then proportional to full delivery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcProfile<T = f64> {
    pub deadband_hz: T,
    pub full_delivery_hz: T,
    pub delay_s: T,
    pub ramp_s: T,
    pub creep_fraction: T,
}

/// A proportional fast service sized as a fraction of the response holding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandService<T = f64> {
    pub volume_fraction: T,
    pub deadband_hz: T,
    pub full_delivery_hz: T,
    pub delay_s: T,
    pub ramp_s: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticBlock<T = f64> {
    /// Absolute trigger frequency, e.g. 49.7 Hz.
    pub trigger_hz: T,
    pub block_mw: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SimConfig<T = f64> {
    pub f0: T,
    pub step_s: T,
    pub horizon_s: T,
    /// Load relief per Hz as a fraction of demand.
    pub load_damping_coeff: T,
    pub governor: GovernorProfile<T>,
    pub dc: DcProfile<T>,
    pub dm: BandService<T>,
    pub dr: BandService<T>,
    pub static_response: Vec<StaticBlock<T>>,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            f0: T::lit(50.0),
            step_s: T::lit(0.02),
            horizon_s: T::lit(60.0),
            load_damping_coeff: T::lit(0.025),
            governor: GovernorProfile { delay_s: T::lit(0.5), ramp_s: T::lit(2.0), droop: T::lit(0.04) },
            dc: DcProfile {
                deadband_hz: T::lit(0.2),
                full_delivery_hz: T::lit(0.5),
                delay_s: T::lit(0.2),
                ramp_s: T::lit(0.8),
                creep_fraction: T::lit(0.05),
            },
            dm: BandService {
                volume_fraction: T::lit(0.05),
                deadband_hz: T::lit(0.015),
                full_delivery_hz: T::lit(0.2),
                delay_s: T::lit(0.5),
                ramp_s: T::lit(0.5),
            },
            dr: BandService {
                volume_fraction: T::lit(0.05),
                deadband_hz: T::lit(0.015),
                full_delivery_hz: T::lit(0.2),
                delay_s: T::lit(0.5),
                ramp_s: T::lit(1.5),
            },
            static_response: vec![
                StaticBlock { trigger_hz: T::lit(49.7), block_mw: T::lit(100.0) },
                StaticBlock { trigger_hz: T::lit(49.6), block_mw: T::lit(100.0) },
            ],
        }
    }
}

impl<T: Real> SimConfig<T> {
    /// Fast services and static blocks removed; with zero response and DC
    /// only load damping remains.
    pub fn damping_only(&self) -> Self {
        let mut c = self.clone();
        c.dm.volume_fraction = T::zero();
        c.dr.volume_fraction = T::zero();
        c.static_response.clear();
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("simulation config: {m}")));
        if !(self.step_s > T::zero()) {
            return bad("step must be positive");
        }
        if !(self.horizon_s >= T::lit(30.0)) {
            return bad("horizon must be at least 30 s");
        }
        if !(self.f0 > T::zero()) || !(self.load_damping_coeff >= T::zero()) {
            return bad("f0 and damping must be positive");
        }
        if !(self.governor.droop > T::zero()) {
            return bad("governor droop must be positive");
        }
        if !(self.dm.volume_fraction + self.dr.volume_fraction <= T::one()) {
            return bad("DM and DR volume fractions exceed the response holding");
        }
        for s in [&self.dm, &self.dr] {
            if !(s.full_delivery_hz > s.deadband_hz) || s.volume_fraction < T::zero() {
                return bad("fast-service band must widen past its deadband");
            }
        }
        if !(self.dc.full_delivery_hz > self.dc.deadband_hz) || !(self.dc.deadband_hz > T::zero()) {
            return bad("DC band must widen past its deadband");
        }
        if self.static_response.iter().any(|b| !(b.trigger_hz < self.f0) || b.block_mw < T::zero()) {
            return bad("static triggers must lie below nominal frequency");
        }
        Ok(())
    }
}

/// Fraction of full output available `t` seconds after the loss.
#[inline]
fn envelope<T: Real>(t: T, delay: T, ramp: T) -> T {
    if t <= delay {
        T::zero()
    } else if ramp <= T::zero() {
        T::one()
    } else {
        ((t - delay) / ramp).min(T::one())
    }
}

#[inline]
fn band<T: Real>(x: T, lo: T, hi: T) -> T {
    ((x - lo) / (hi - lo)).max(T::zero()).min(T::one())
}

struct Plant<'a, T> {
    cfg: &'a SimConfig<T>,
    loss: T,
    inertia_m: T,
    damping: T,
    governor_mw: T,
    governor_gain: T,
    dm_mw: T,
    dr_mw: T,
    dc_mw: T,
    triggers: Vec<T>,
}

impl<T: Real> Plant<'_, T> {
    fn dc_output(&self, t: T, x: T) -> T {
        let d = &self.cfg.dc;
        let creep = d.creep_fraction;
        let shape = if x <= T::zero() {
            T::zero()
        } else if x < d.deadband_hz {
            creep * x / d.deadband_hz
        } else {
            creep + (T::one() - creep) * band(x, d.deadband_hz, d.full_delivery_hz)
        };
        self.dc_mw * envelope(t, d.delay_s, d.ramp_s) * shape
    }

    fn injections(&self, t: T, x: T, latched_mw: T) -> T {
        let g = &self.cfg.governor;
        let gov =
            self.governor_mw * envelope(t, g.delay_s, g.ramp_s) * (x * self.governor_gain).max(T::zero()).min(T::one());
        let fast = |s: &BandService<T>, mw: T| {
            mw * envelope(t, s.delay_s, s.ramp_s) * band(x, s.deadband_hz, s.full_delivery_hz)
        };
        gov + fast(&self.cfg.dm, self.dm_mw) + fast(&self.cfg.dr, self.dr_mw) + self.dc_output(t, x) + latched_mw
    }

    /// Net surplus (MW): injections plus load relief minus the loss.
    fn net_power(&self, t: T, x: T, latched_mw: T) -> T {
        self.injections(t, x, latched_mw) + self.damping * x - self.loss
    }

    fn rate(&self, t: T, x: T, latched_mw: T) -> T {
        -self.net_power(t, x, latched_mw) / self.inertia_m
    }
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome<T = f64> {
    pub nadir_hz: T,
    pub nadir_time_s: T,
    /// Net surplus power at the nadir sample; non-negative at a true turning point.
    pub net_power_at_nadir_mw: T,
    /// Whether the deviation turned back before the horizon.
    pub recovered: bool,
}

/// Integrates the trajectory with fixed-step RK4 and reports the deepest deviation.
pub fn simulate<T: Real>(point: &OperatingPoint<T>, cfg: &SimConfig<T>) -> Result<SimOutcome<T>> {
    let p = point;
    let invalid = !(p.loss_mw > T::zero())
        || !(p.inertia_gva_s > T::zero())
        || !(p.demand_gw > T::zero())
        || p.response_mw < T::zero()
        || p.dc_mw < T::zero();
    if invalid {
        return Err(Error::InvalidInput(format!("operating point out of range: {p:?}")));
    }
    let two = T::lit(2.0);
    let service_share = T::one() - cfg.dm.volume_fraction - cfg.dr.volume_fraction;
    let plant = Plant {
        cfg,
        loss: p.loss_mw,
        inertia_m: two * p.inertia_gva_s * T::lit(1000.0) / cfg.f0,
        damping: cfg.load_damping_coeff * p.demand_gw * T::lit(1000.0),
        governor_mw: p.response_mw * service_share,
        governor_gain: T::one() / (cfg.governor.droop * cfg.f0),
        dm_mw: p.response_mw * cfg.dm.volume_fraction,
        dr_mw: p.response_mw * cfg.dr.volume_fraction,
        dc_mw: p.dc_mw,
        triggers: cfg.static_response.iter().map(|b| cfg.f0 - b.trigger_hz).collect(),
    };
    let mut latched = vec![false; plant.triggers.len()];
    let mut latched_mw = T::zero();

    let h = cfg.step_s;
    let steps = (cfg.horizon_s / h).ceil().to_usize().expect("step count");
    let six = T::lit(6.0);
    let mut x = T::zero();
    let mut best = (T::zero(), T::zero(), -plant.loss);
    let advance = |t: T, x: T, dt: T, latched_mw: T| {
        let half = dt / two;
        let k1 = plant.rate(t, x, latched_mw);
        let k2 = plant.rate(t + half, x + half * k1, latched_mw);
        let k3 = plant.rate(t + half, x + half * k2, latched_mw);
        let k4 = plant.rate(t + dt, x + dt * k3, latched_mw);
        x + dt / six * (k1 + two * k2 + two * k3 + k4)
    };
    for k in 0..steps {
        let t_next = T::from_usize(k + 1).expect("step") * h;
        let mut t = T::from_usize(k).expect("step") * h;
        loop {
            let dt = t_next - t;
            let x_new = advance(t, x, dt, latched_mw);
            if !x_new.is_finite() {
                return Err(Error::SimulationFailed { time_s: t_next.as_f64(), reason: "non-finite deviation".into() });
            }
            // Locate the earliest trigger crossed inside the step and split the step there.
            let crossing = (0..plant.triggers.len())
                .filter(|&i| !latched[i] && x_new >= plant.triggers[i])
                .min_by(|&a, &b| plant.triggers[a].partial_cmp(&plant.triggers[b]).expect("finite trigger"));
            let Some(i) = crossing else {
                x = x_new;
                break;
            };
            let trig = plant.triggers[i];
            if x < trig {
                let theta = ((trig - x) / (x_new - x)).max(T::zero()).min(T::one());
                // Secant refinement, then snap onto the trigger so the latch
                // point does not depend on where the step grid falls.
                let (mut lo, mut hi) = (T::zero(), T::one());
                let (mut x_lo, mut x_hi) = (x, x_new);
                let mut th = theta;
                for _ in 0..8 {
                    let xt = advance(t, x, th * dt, latched_mw);
                    if (xt - trig).abs() <= T::lit(1e-12) {
                        break;
                    }
                    if xt < trig {
                        (lo, x_lo) = (th, xt);
                    } else {
                        (hi, x_hi) = (th, xt);
                    }
                    th = lo + (hi - lo) * ((trig - x_lo) / (x_hi - x_lo)).max(T::zero()).min(T::one());
                }
                x = trig;
                t = t + th * dt;
            }
            latched[i] = true;
            latched_mw = latched_mw + cfg.static_response[i].block_mw;
            if x > best.0 {
                best = (x, t, plant.net_power(t, x, latched_mw));
            }
        }
        if x > best.0 {
            best = (x, t_next, plant.net_power(t_next, x, latched_mw));
        }
    }
    let (nadir, time, net) = best;
    if !(nadir > T::zero()) {
        return Err(Error::SimulationFailed { time_s: 0.0, reason: "no frequency excursion".into() });
    }
    let horizon = T::from_usize(steps).expect("step") * h;
    Ok(SimOutcome {
        nadir_hz: nadir,
        nadir_time_s: time,
        net_power_at_nadir_mw: net,
        recovered: time + h * T::lit(0.5) < horizon,
    })
}

/// Nadir depth in Hz (positive).
pub fn simulate_nadir<T: Real>(point: &OperatingPoint<T>, cfg: &SimConfig<T>) -> Result<T> {
    simulate(point, cfg).map(|o| o.nadir_hz)
}
