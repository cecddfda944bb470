//! Monetary accounting: AGV power draw, energy, waiting and delay costs,
//! inventory holding cost and the weighted system objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orders::{DelayCostProfile, ExpediteAccrual, ProfileKind};

pub const MINUTES_PER_YEAR: f64 = 365.0 * 24.0 * 60.0;

/// Battery figures used to calibrate the power coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryCalibration {
    pub capacity_ah: f64,
    pub voltage: f64,
    /// Full-load runtime in hours.
    pub runtime_h: f64,
    /// Self-weight plus rated payload, kg.
    pub full_load_kg: f64,
    /// Share of full-load power that does not depend on weight.
    pub fixed_share: f64,
}

impl Default for BatteryCalibration {
    fn default() -> Self {
        Self {
            capacity_ah: 42.0,
            voltage: 24.0,
            runtime_h: 5.0,
            full_load_kg: 720.0,
            fixed_share: 1.0 / 3.0,
        }
    }
}

impl BatteryCalibration {
    pub fn full_load_power(&self) -> f64 {
        self.capacity_ah * self.voltage / self.runtime_h
    }

    /// `(delta1, delta2)` such that the affine power law hits the full-load
    /// power at `full_load_kg`.
    pub fn coefficients(&self) -> (f64, f64) {
        let full = self.full_load_power();
        let delta2 = full * self.fixed_share;
        ((full - delta2) / self.full_load_kg, delta2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// W per kg of carried weight.
    pub delta1: f64,
    /// Load-independent W.
    pub delta2: f64,
    /// Electricity price, $ per Wh.
    pub ep: f64,
    /// Annual holding rate.
    pub gamma: f64,
    /// Unit inventory holding cost, $ per minute per package.
    pub uihc: f64,
    /// Weight of the delay cost inside the time cost.
    pub beta: f64,
    /// Energy weight of the objective.
    pub w_t: f64,
    /// AGV self-weight, kg.
    pub self_weight: f64,
    /// m/s.
    pub speed: f64,
    /// Battery budget per charge, s.
    pub battery_budget: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        let (delta1, delta2) = BatteryCalibration::default().coefficients();
        let gamma = 0.25;
        let mean_price = 0.5 * (crate::orders::PRICE_RANGE.0 + crate::orders::PRICE_RANGE.1);
        Self {
            delta1,
            delta2,
            ep: 0.0120,
            gamma,
            uihc: unit_inventory_cost(gamma, mean_price, 1.0),
            beta: 1.0,
            w_t: 0.5,
            self_weight: 450.0,
            speed: 1.0,
            battery_budget: 5.0 * 3600.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        check_weight(self.w_t)?;
        let nonneg = [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("ep", self.ep),
            ("gamma", self.gamma),
            ("uihc", self.uihc),
            ("beta", self.beta),
            ("self_weight", self.self_weight),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        for (field, v) in [
            ("speed", self.speed),
            ("battery_budget", self.battery_budget),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

fn check_weight(w_t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w_t) {
        Ok(())
    } else {
        Err(Error::WeightRange(w_t))
    }
}

/// Power draw in W at total carried weight `weight_kg` (self-weight included).
pub fn power_unit(weight_kg: f64, params: &CostParams) -> f64 {
    params.delta1 * weight_kg + params.delta2
}

/// Energy in Wh to move `distance_m` at constant weight.
pub fn leg_energy(weight_kg: f64, distance_m: f64, params: &CostParams) -> f64 {
    power_unit(weight_kg, params) * (distance_m / params.speed) / 3600.0
}

pub fn waiting_time(service_start: f64, request: f64) -> f64 {
    (service_start - request).max(0.0)
}

/// Time past the class deadline offset.
pub fn delay_time(waiting: f64, deadline_offset: f64) -> f64 {
    (waiting - deadline_offset).max(0.0)
}

/// Delay cost in dollars after waiting `waiting` seconds.
pub fn delay_cost(profile: &DelayCostProfile, waiting: f64) -> f64 {
    let waiting = waiting.max(0.0);
    let delay = delay_time(waiting, profile.deadline_offset);
    let before_deadline = waiting < profile.deadline_offset;
    match profile.kind {
        ProfileKind::Expedite => {
            if before_deadline {
                let x = match profile.accrual {
                    ExpediteAccrual::AfterDeadline => delay,
                    ExpediteAccrual::FromArrival => waiting,
                };
                (profile.lambda * x).min(profile.cap)
            } else {
                profile.cap
            }
        }
        ProfileKind::FixedDate => {
            if before_deadline {
                0.0
            } else {
                profile.cap
            }
        }
        ProfileKind::StandardUrgency => {
            if before_deadline {
                0.0
            } else if waiting < profile.saturation {
                (profile.lambda * delay).exp().min(profile.cap)
            } else {
                profile.cap
            }
        }
        ProfileKind::Intangible => {
            if before_deadline {
                0.0
            } else if waiting < profile.saturation {
                (profile.lambda * delay).min(profile.cap)
            } else {
                profile.cap
            }
        }
    }
}

/// UIHC in $ per minute per package from an annual inventory cost.
pub fn unit_inventory_cost(gamma: f64, annual_inventory_cost: f64, package_quantity: f64) -> f64 {
    gamma * annual_inventory_cost / (MINUTES_PER_YEAR * package_quantity)
}

/// Holding cost of waiting `waiting` seconds.
pub fn inventory_cost(waiting: f64, params: &CostParams) -> f64 {
    params.uihc * waiting.max(0.0) / 60.0
}

/// Per-order service accounting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderServiceRecord {
    pub order_id: u32,
    pub waiting_time: f64,
    pub travel_time: f64,
    pub delay_time: f64,
    pub order_energy: f64,
    pub inventory_cost: f64,
    pub delay_cost: f64,
}

/// Inventory cost plus beta-weighted delay cost, summed over records.
pub fn time_cost(records: &[OrderServiceRecord], params: &CostParams) -> f64 {
    let inventory: f64 = records.iter().map(|r| r.inventory_cost).sum();
    let delay: f64 = records.iter().map(|r| r.delay_cost).sum();
    inventory + params.beta * delay
}

pub fn energy_cost(total_energy_wh: f64, params: &CostParams) -> f64 {
    params.ep * total_energy_wh
}

/// Weighted objective `w_t * energy + (1 - w_t) * time`.
pub fn system_objective(energy_cost: f64, time_cost: f64, w_t: f64) -> Result<f64> {
    check_weight(w_t)?;
    Ok(w_t * energy_cost + (1.0 - w_t) * time_cost)
}

/// Reported system cost: energy and time weighted equally, on the scale of
/// their plain sum.
pub fn reported_system_cost(energy_cost: f64, time_cost: f64) -> f64 {
    energy_cost + time_cost
}
