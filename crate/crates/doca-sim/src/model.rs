//! Domain types and grid arithmetic shared by the reservation, scheduler and
//! engine modules: DOCA geometry, constant-speed vehicle kinematics on the
//! highway axis, and the TTI/subchannel resource grid.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Unique vehicle identifier. Vehicles are numbered in arrival order.
pub type VehicleId = u32;

/// Travel direction on the two-way highway. Forward vehicles enter at x = 0
/// and move toward +x; reverse vehicles enter at x = l and move toward -x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// One resource block on the radio grid: a (TTI, subchannel) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RbIndex {
    pub tti: u32,
    pub subchannel: u32,
}

/// Speed distribution used for actual and predicted vehicle speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedModel {
    Constant { v: f64 },
    Uniform { v_lo: f64, v_hi: f64 },
}

impl SpeedModel {
    pub fn constant(v: f64) -> Self {
        SpeedModel::Constant { v }
    }

    pub fn uniform(v_lo: f64, v_hi: f64) -> Self {
        SpeedModel::Uniform { v_lo, v_hi }
    }

    pub fn validate(&self, key: &'static str) -> Result<(), ConfigError> {
        let ok = match *self {
            SpeedModel::Constant { v } => v > 0.0 && v.is_finite(),
            SpeedModel::Uniform { v_lo, v_hi } => v_lo > 0.0 && v_lo <= v_hi && v_hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::InvalidValue {
                key,
                reason: format!("speeds must be positive and ordered, got {self:?}"),
            })
        }
    }

    /// Draw one speed. Constant models consume no randomness.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            SpeedModel::Constant { v } => v,
            SpeedModel::Uniform { v_lo, v_hi } => {
                if v_lo == v_hi {
                    v_lo
                } else {
                    rng.gen_range(v_lo..v_hi)
                }
            }
        }
    }

    fn fingerprint_into(&self, h: &mut Sha256) {
        match *self {
            SpeedModel::Constant { v } => {
                h.update(b"constant");
                h.update(v.to_bits().to_le_bytes());
            }
            SpeedModel::Uniform { v_lo, v_hi } => {
                h.update(b"uniform");
                h.update(v_lo.to_bits().to_le_bytes());
                h.update(v_hi.to_bits().to_le_bytes());
            }
        }
    }
}

/// One admissible message period with its selection weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodChoice {
    pub period_s: f64,
    pub weight: f64,
}

/// All system-level parameters of one scenario, plus the speed models,
/// simulation horizon and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub doca_length_m: f64,
    pub interference_range_m: f64,
    pub vehicle_arrival_rate_per_s: f64,
    pub tti_s: f64,
    /// Subchannel width; carried for bookkeeping only, the grid width is
    /// `subchannel_count`.
    pub subchannel_width_hz: f64,
    pub subchannel_count: u32,
    pub max_delay_s: f64,
    pub sr_batch_period_s: f64,
    pub adhoc_rate_per_vehicle_per_m: f64,
    /// Total resources of an equivalent regular cell; used only to validate
    /// reservation requests against capacity.
    pub cell_capacity_rb: u32,
    pub message_period_choices: Vec<PeriodChoice>,
    pub actual_speed_model: SpeedModel,
    pub predicted_speed_model: SpeedModel,
    pub sim_duration_s: f64,
    pub rng_seed: u64,
    /// Occurrences requested before this time are excluded from KPI
    /// aggregation (they still occupy the schedule). Zero disables trimming.
    pub warmup_trim_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            doca_length_m: 1000.0,
            interference_range_m: 75.0,
            vehicle_arrival_rate_per_s: 3.0,
            tti_s: 0.25,
            subchannel_width_hz: 180_000.0,
            subchannel_count: 5,
            max_delay_s: 1.0,
            sr_batch_period_s: 0.3,
            adhoc_rate_per_vehicle_per_m: 0.05,
            cell_capacity_rb: 50,
            message_period_choices: vec![
                PeriodChoice { period_s: 0.25, weight: 1.0 },
                PeriodChoice { period_s: 0.5, weight: 1.0 },
                PeriodChoice { period_s: 0.75, weight: 1.0 },
            ],
            actual_speed_model: SpeedModel::constant(30.0),
            predicted_speed_model: SpeedModel::constant(30.0),
            sim_duration_s: 300.0,
            rng_seed: 1,
            warmup_trim_s: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue { key, reason: format!("must be > 0, got {v}") })
            }
        }
        fn non_negative(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue { key, reason: format!("must be >= 0, got {v}") })
            }
        }

        positive("doca_length_m", self.doca_length_m)?;
        positive("interference_range_m", self.interference_range_m)?;
        positive("tti_s", self.tti_s)?;
        positive("sr_batch_period_s", self.sr_batch_period_s)?;
        positive("sim_duration_s", self.sim_duration_s)?;
        non_negative("vehicle_arrival_rate_per_s", self.vehicle_arrival_rate_per_s)?;
        non_negative("adhoc_rate_per_vehicle_per_m", self.adhoc_rate_per_vehicle_per_m)?;
        non_negative("max_delay_s", self.max_delay_s)?;
        non_negative("warmup_trim_s", self.warmup_trim_s)?;
        if self.subchannel_count < 1 {
            return Err(ConfigError::InvalidValue {
                key: "subchannel_count",
                reason: "must be >= 1".into(),
            });
        }
        if self.message_period_choices.is_empty() {
            return Err(ConfigError::InvalidValue {
                key: "message_period_choices",
                reason: "must not be empty".into(),
            });
        }
        for choice in &self.message_period_choices {
            self.period_ttis(choice.period_s)?;
            if !(choice.weight > 0.0 && choice.weight.is_finite()) {
                return Err(ConfigError::InvalidValue {
                    key: "message_period_choices",
                    reason: format!("weight must be > 0, got {}", choice.weight),
                });
            }
        }
        self.actual_speed_model.validate("actual_speed_model")?;
        self.predicted_speed_model.validate("predicted_speed_model")?;
        Ok(())
    }

    /// Message period expressed in whole TTIs. Errors unless the period is a
    /// positive integer multiple of the TTI length.
    pub fn period_ttis(&self, period_s: f64) -> Result<u32, ConfigError> {
        let ratio = period_s / self.tti_s;
        let rounded = ratio.round();
        if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            Ok(rounded as u32)
        } else {
            Err(ConfigError::InvalidValue {
                key: "message_period_choices",
                reason: format!("period {period_s} s is not a multiple of the TTI ({} s)", self.tti_s),
            })
        }
    }

    /// Largest admissible push, in TTIs: floor(T_d / dt).
    pub fn max_push_ttis(&self) -> u32 {
        let q = self.max_delay_s / self.tti_s;
        ((q + 1e-9).floor()).max(0.0) as u32
    }

    /// Stable hex fingerprint over every parameter, used to key reports.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [
            self.doca_length_m,
            self.interference_range_m,
            self.vehicle_arrival_rate_per_s,
            self.tti_s,
            self.subchannel_width_hz,
            self.max_delay_s,
            self.sr_batch_period_s,
            self.adhoc_rate_per_vehicle_per_m,
            self.sim_duration_s,
            self.warmup_trim_s,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.subchannel_count.to_le_bytes());
        h.update(self.cell_capacity_rb.to_le_bytes());
        h.update(self.rng_seed.to_le_bytes());
        for choice in &self.message_period_choices {
            h.update(choice.period_s.to_bits().to_le_bytes());
            h.update(choice.weight.to_bits().to_le_bytes());
        }
        self.actual_speed_model.fingerprint_into(&mut h);
        self.predicted_speed_model.fingerprint_into(&mut h);
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Configuration validation failure, reported with the offending key.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: &'static str, reason: String },
}

/// One vehicle of the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub direction: Direction,
    pub entry_time_s: f64,
    pub actual_speed_mps: f64,
    pub predicted_speed_mps: f64,
    pub message_period_s: f64,
    /// The paired receiver (the follower behind this vehicle at entry), if
    /// one arrived before the simulation horizon.
    pub rx_target: Option<VehicleId>,
}

/// Which trajectory of a vehicle to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedKind {
    Actual,
    Predicted,
}

/// Position of a constant-speed vehicle on the highway axis at `time_s`.
///
/// Positions live on the infinite line: before entry the vehicle is outside
/// the DOCA approaching its entry boundary, after traversal it is past the
/// far boundary. Only scheduling restricts itself to the DOCA interior.
pub fn line_position(
    direction: Direction,
    entry_time_s: f64,
    speed_mps: f64,
    time_s: f64,
    doca_length_m: f64,
) -> f64 {
    let travelled = speed_mps * (time_s - entry_time_s);
    match direction {
        Direction::Forward => travelled,
        Direction::Reverse => doca_length_m - travelled,
    }
}

/// Position of `vehicle` at `time_s` using its actual or predicted speed.
pub fn position_at(vehicle: &Vehicle, time_s: f64, kind: SpeedKind, doca_length_m: f64) -> f64 {
    let speed = match kind {
        SpeedKind::Actual => vehicle.actual_speed_mps,
        SpeedKind::Predicted => vehicle.predicted_speed_mps,
    };
    line_position(vehicle.direction, vehicle.entry_time_s, speed, time_s, doca_length_m)
}

/// True when two positions are within the broadcast/interference range,
/// boundary included.
pub fn within_range(pos_a_m: f64, pos_b_m: f64, range_m: f64) -> bool {
    (pos_a_m - pos_b_m).abs() <= range_m
}

/// True when a position lies inside the DOCA, boundaries included.
pub fn inside_doca(pos_m: f64, doca_length_m: f64) -> bool {
    (0.0..=doca_length_m).contains(&pos_m)
}

/// Smallest TTI index n with n * tti_s >= time_s, guarded against float
/// noise so that exact grid multiples map to themselves.
pub fn time_to_tti(time_s: f64, tti_s: f64) -> u32 {
    let q = time_s / tti_s;
    let eps = 1e-9 * q.abs().max(1.0);
    (q - eps).ceil().max(0.0) as u32
}

/// Start time of a grid TTI.
pub fn tti_time(tti: u32, tti_s: f64) -> f64 {
    tti as f64 * tti_s
}
