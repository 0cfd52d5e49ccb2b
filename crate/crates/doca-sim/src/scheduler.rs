//! The controller that turns scheduling requests into radio-grid
//! assignments.
//!
//! Requests are collected into batches by SR receipt time, processed in
//! arrival order, and every periodic occurrence is placed first-fit over the
//! subchannels of its requested TTI. When no resource block works there the
//! scan pushes into following TTIs until the delay budget runs out. A block
//! is admissible only if the pair is predicted within range, neither vehicle
//! already acts in that TTI, and the new entry keeps cross separation above
//! the interference range against everything already in the block.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{
    inside_doca, line_position, time_to_tti, tti_time, within_range, ConfigError, Direction,
    RbIndex, ScenarioConfig, VehicleId,
};

/// One scheduling request: a transmitter, its paired receiver, their
/// predicted kinematics and the message period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingRequest {
    pub tx_vehicle_id: VehicleId,
    pub rx_vehicle_id: VehicleId,
    /// Both vehicles of a pair travel the same way; the BS knows the entry
    /// side the SR arrived from.
    pub direction: Direction,
    pub tx_entry_time_s: f64,
    pub rx_entry_time_s: f64,
    pub predicted_tx_speed_mps: f64,
    pub predicted_rx_speed_mps: f64,
    pub message_period_s: f64,
    /// SR receipt sequence; ties inside a batch resolve by this.
    pub arrival_order: u64,
}

impl SchedulingRequest {
    pub fn tx_motion(&self) -> PredictedMotion {
        PredictedMotion {
            direction: self.direction,
            entry_time_s: self.tx_entry_time_s,
            speed_mps: self.predicted_tx_speed_mps,
        }
    }

    pub fn rx_motion(&self) -> PredictedMotion {
        PredictedMotion {
            direction: self.direction,
            entry_time_s: self.rx_entry_time_s,
            speed_mps: self.predicted_rx_speed_mps,
        }
    }
}

/// Constant-speed trajectory the scheduler predicts for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedMotion {
    pub direction: Direction,
    pub entry_time_s: f64,
    pub speed_mps: f64,
}

impl PredictedMotion {
    pub fn position_at(&self, time_s: f64, doca_length_m: f64) -> f64 {
        line_position(self.direction, self.entry_time_s, self.speed_mps, time_s, doca_length_m)
    }
}

/// One requested transmission instance of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occurrence {
    pub sequence_number: u32,
    pub requested_tti: u32,
}

/// A granted resource block and the push it took to get there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub rb: RbIndex,
    pub delay_ttis: u32,
}

/// Why the scheduler refused an occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// The receiver is predicted outside the broadcast range at the
    /// requested TTI.
    RxPredictedOutOfRange,
    /// Every block within the delay budget fails a constraint: predicted
    /// interference, half-duplex conflicts, or range loss at pushed TTIs.
    PredictedInterferenceOrHalfDuplexOrDelay,
}

/// Scheduling verdict for one occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOutcome {
    Assigned(Assignment),
    Dropped(DropReason),
}

impl AssignOutcome {
    pub fn assignment(&self) -> Option<Assignment> {
        match *self {
            AssignOutcome::Assigned(a) => Some(a),
            AssignOutcome::Dropped(_) => None,
        }
    }
}

/// Role a vehicle plays in a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Tx,
    Rx,
}

/// One transmission placed in a resource block, with the predicted
/// positions the admission checks saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEntry {
    pub tx_id: VehicleId,
    pub rx_id: VehicleId,
    pub predicted_tx_pos_m: f64,
    pub predicted_rx_pos_m: f64,
    log_index: usize,
}

impl CellEntry {
    pub fn log_index(&self) -> usize {
        self.log_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ActivitySlot {
    rb: RbIndex,
    role: Role,
    peer: VehicleId,
}

/// One line of the append-only decision log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub arrival_order: u64,
    pub tx_id: VehicleId,
    pub rx_id: VehicleId,
    pub sequence_number: u32,
    pub requested_tti: u32,
    pub outcome: AssignOutcome,
    /// Set when an exit notification removed this assignment before it was
    /// transmitted.
    pub released: bool,
}

/// One element of a scheduling assignment array sent to a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaEntry {
    pub tti: u32,
    pub subchannel: u32,
    pub role: Role,
    pub peer: VehicleId,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScheduleError {
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(VehicleId),
    #[error("invalid request (arrival order {arrival_order}): {reason}")]
    InvalidRequest { arrival_order: u64, reason: String },
}

/// The radio resource grid under construction: live cell contents,
/// per-vehicle per-TTI activity, and the full decision history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    cells: BTreeMap<RbIndex, Vec<CellEntry>>,
    activity: BTreeMap<VehicleId, BTreeMap<u32, ActivitySlot>>,
    known: BTreeSet<VehicleId>,
    log: Vec<DecisionRecord>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    /// Live entries of one resource block.
    pub fn cell(&self, rb: RbIndex) -> &[CellEntry] {
        self.cells.get(&rb).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cells(&self) -> impl Iterator<Item = (RbIndex, &[CellEntry])> {
        self.cells.iter().map(|(&rb, entries)| (rb, entries.as_slice()))
    }

    pub fn log(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn knows_vehicle(&self, vehicle: VehicleId) -> bool {
        self.known.contains(&vehicle)
    }

    /// True when the vehicle already transmits or receives in this TTI, in
    /// any subchannel.
    pub fn is_busy(&self, vehicle: VehicleId, tti: u32) -> bool {
        self.activity.get(&vehicle).is_some_and(|slots| slots.contains_key(&tti))
    }

    fn cell_admits(&self, rb: RbIndex, tx_pos_m: f64, rx_pos_m: f64, range_m: f64) -> bool {
        self.cell(rb).iter().all(|entry| {
            !within_range(entry.predicted_tx_pos_m, rx_pos_m, range_m)
                && !within_range(entry.predicted_rx_pos_m, tx_pos_m, range_m)
        })
    }

    fn record(
        &mut self,
        request: &SchedulingRequest,
        occurrence: Occurrence,
        outcome: AssignOutcome,
        config: &ScenarioConfig,
    ) {
        let log_index = self.log.len();
        if let AssignOutcome::Assigned(assignment) = outcome {
            let at = tti_time(assignment.rb.tti, config.tti_s);
            let entry = CellEntry {
                tx_id: request.tx_vehicle_id,
                rx_id: request.rx_vehicle_id,
                predicted_tx_pos_m: request.tx_motion().position_at(at, config.doca_length_m),
                predicted_rx_pos_m: request.rx_motion().position_at(at, config.doca_length_m),
                log_index,
            };
            self.cells.entry(assignment.rb).or_default().push(entry);
            self.activity.entry(request.tx_vehicle_id).or_default().insert(
                assignment.rb.tti,
                ActivitySlot { rb: assignment.rb, role: Role::Tx, peer: request.rx_vehicle_id },
            );
            self.activity.entry(request.rx_vehicle_id).or_default().insert(
                assignment.rb.tti,
                ActivitySlot { rb: assignment.rb, role: Role::Rx, peer: request.tx_vehicle_id },
            );
        }
        self.log.push(DecisionRecord {
            arrival_order: request.arrival_order,
            tx_id: request.tx_vehicle_id,
            rx_id: request.rx_vehicle_id,
            sequence_number: occurrence.sequence_number,
            requested_tti: occurrence.requested_tti,
            outcome,
            released: false,
        });
    }

    /// Admit a set of requests: batched by SR receipt time, in arrival
    /// order within a batch, occurrence by occurrence. May be called again
    /// later with further requests; earlier decisions are never revisited.
    pub fn admit_requests(
        &mut self,
        requests: &[SchedulingRequest],
        config: &ScenarioConfig,
    ) -> Result<(), ScheduleError> {
        let mut order: Vec<usize> = (0..requests.len()).collect();
        order.sort_by_key(|&i| {
            let r = &requests[i];
            (batch_index(r.tx_entry_time_s, config.sr_batch_period_s), r.arrival_order, i)
        });
        for i in order {
            let request = &requests[i];
            if request.tx_vehicle_id == request.rx_vehicle_id {
                return Err(ScheduleError::InvalidRequest {
                    arrival_order: request.arrival_order,
                    reason: "transmitter and receiver must differ".into(),
                });
            }
            let occurrences = generate_occurrences(request, config, predicted_exit_tti(request, config))
                .map_err(|e| ScheduleError::InvalidRequest {
                    arrival_order: request.arrival_order,
                    reason: e.to_string(),
                })?;
            self.known.insert(request.tx_vehicle_id);
            self.known.insert(request.rx_vehicle_id);
            for occurrence in occurrences {
                let outcome = try_assign(&occurrence, request, self, config);
                self.record(request, occurrence, outcome, config);
            }
        }
        Ok(())
    }

    /// Free every assignment of `vehicle` at TTIs strictly after its actual
    /// exit, in both roles. Counterpart cells are freed too; decisions
    /// already taken (including drops) stay untouched. Returns how many
    /// assignments were released.
    pub fn release_on_exit(
        &mut self,
        vehicle: VehicleId,
        actual_exit_time_s: f64,
        tti_s: f64,
    ) -> Result<usize, ScheduleError> {
        if !self.known.contains(&vehicle) {
            return Err(ScheduleError::UnknownVehicle(vehicle));
        }
        let cutoff = time_to_tti(actual_exit_time_s, tti_s);
        let doomed: Vec<(u32, ActivitySlot)> = self
            .activity
            .get(&vehicle)
            .map(|slots| slots.range(cutoff + 1..).map(|(&tti, &slot)| (tti, slot)).collect())
            .unwrap_or_default();
        for (tti, slot) in &doomed {
            let entries = self.cells.get_mut(&slot.rb).expect("activity points at live cell");
            let at = entries
                .iter()
                .position(|e| e.tx_id == vehicle || e.rx_id == vehicle)
                .expect("activity points at cell entry");
            let entry = entries.remove(at);
            if entries.is_empty() {
                self.cells.remove(&slot.rb);
            }
            self.log[entry.log_index].released = true;
            if let Some(slots) = self.activity.get_mut(&vehicle) {
                slots.remove(tti);
            }
            if let Some(slots) = self.activity.get_mut(&slot.peer) {
                slots.remove(tti);
            }
        }
        Ok(doomed.len())
    }

    /// The scheduling assignment array for one vehicle: every live grid
    /// cell it takes part in, ordered by TTI.
    pub fn emit_sa(&self, vehicle: VehicleId) -> Result<Vec<SaEntry>, ScheduleError> {
        if !self.known.contains(&vehicle) {
            return Err(ScheduleError::UnknownVehicle(vehicle));
        }
        Ok(self
            .activity
            .get(&vehicle)
            .map(|slots| {
                slots
                    .iter()
                    .map(|(&tti, slot)| SaEntry {
                        tti,
                        subchannel: slot.rb.subchannel,
                        role: slot.role,
                        peer: slot.peer,
                    })
                    .collect()
            })
            .unwrap_or_default())
    }
}

/// Batch slot of an SR receipt time: receipts are collected once per batch
/// period.
pub fn batch_index(sr_receipt_time_s: f64, batch_period_s: f64) -> u64 {
    ((sr_receipt_time_s / batch_period_s) + 1e-9).floor().max(0.0) as u64
}

/// TTI by which the transmitter is predicted to have left the DOCA.
pub fn predicted_exit_tti(request: &SchedulingRequest, config: &ScenarioConfig) -> u32 {
    time_to_tti(
        request.tx_entry_time_s + config.doca_length_m / request.predicted_tx_speed_mps,
        config.tti_s,
    )
}

/// The periodic transmission instances of a request: one every period,
/// starting at the entry TTI, for as long as the transmitter is predicted
/// inside the DOCA.
pub fn generate_occurrences(
    request: &SchedulingRequest,
    config: &ScenarioConfig,
    predicted_exit_tti: u32,
) -> Result<Vec<Occurrence>, ConfigError> {
    let period_ttis = config.period_ttis(request.message_period_s)?;
    let entry_tti = time_to_tti(request.tx_entry_time_s, config.tti_s);
    let tx = request.tx_motion();
    let mut occurrences = Vec::new();
    let mut sequence_number = 0u32;
    loop {
        let tti = entry_tti + sequence_number * period_ttis;
        if tti > predicted_exit_tti {
            break;
        }
        let pos = tx.position_at(tti_time(tti, config.tti_s), config.doca_length_m);
        if !inside_doca(pos, config.doca_length_m) {
            break;
        }
        occurrences.push(Occurrence { sequence_number, requested_tti: tti });
        sequence_number += 1;
    }
    Ok(occurrences)
}

/// Place one occurrence, or say why it cannot be placed.
///
/// The scan walks candidate TTIs from the requested one while the push stays
/// within the delay budget, lowest subchannel first inside each TTI. A pair
/// predicted out of range at the requested TTI drops immediately; one that
/// is in range there but never finds an admissible block drops with the
/// catch-all reason.
pub fn try_assign(
    occurrence: &Occurrence,
    request: &SchedulingRequest,
    schedule: &Schedule,
    config: &ScenarioConfig,
) -> AssignOutcome {
    let range = config.interference_range_m;
    let tx = request.tx_motion();
    let rx = request.rx_motion();

    let requested_time = tti_time(occurrence.requested_tti, config.tti_s);
    let tx_at_request = tx.position_at(requested_time, config.doca_length_m);
    let rx_at_request = rx.position_at(requested_time, config.doca_length_m);
    if !within_range(tx_at_request, rx_at_request, range) {
        return AssignOutcome::Dropped(DropReason::RxPredictedOutOfRange);
    }

    for push in 0..=config.max_push_ttis() {
        let tti = occurrence.requested_tti + push;
        let at = tti_time(tti, config.tti_s);
        let tx_pos = tx.position_at(at, config.doca_length_m);
        let rx_pos = rx.position_at(at, config.doca_length_m);
        if !within_range(tx_pos, rx_pos, range) {
            continue;
        }
        if schedule.is_busy(request.tx_vehicle_id, tti)
            || schedule.is_busy(request.rx_vehicle_id, tti)
        {
            continue;
        }
        for subchannel in 0..config.subchannel_count {
            let rb = RbIndex { tti, subchannel };
            if schedule.cell_admits(rb, tx_pos, rx_pos, range) {
                return AssignOutcome::Assigned(Assignment { rb, delay_ttis: push });
            }
        }
    }
    AssignOutcome::Dropped(DropReason::PredictedInterferenceOrHalfDuplexOrDelay)
}

/// Run the whole batching pipeline over a request list and return the
/// resulting schedule, decision log included.
pub fn run_batches(
    requests: &[SchedulingRequest],
    config: &ScenarioConfig,
) -> Result<Schedule, ScheduleError> {
    let mut schedule = Schedule::new();
    schedule.admit_requests(requests, config)?;
    Ok(schedule)
}

/// A broken schedule invariant found after the fact.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleViolation {
    /// A vehicle acts twice in one TTI.
    VehicleDoubleBooked { vehicle: VehicleId, tti: u32 },
    /// Two entries of one block sit closer than the interference range.
    CrossSeparationTooSmall { rb: RbIndex, tx_id: VehicleId, rx_id: VehicleId },
    /// An assignment was pushed beyond the delay budget.
    DelayExceeded { tx_id: VehicleId, sequence_number: u32, delay_ttis: u32 },
    /// A pair sits out of range at its assigned TTI.
    PairOutOfRange { rb: RbIndex, tx_id: VehicleId },
}

/// Post-hoc validity check of a produced schedule: per-TTI vehicle
/// exclusivity, pairwise cross separation above the interference range
/// inside every block, in-range pairs at their assigned TTIs, and the delay
/// bound over the full decision log.
pub fn validate_schedule(schedule: &Schedule, config: &ScenarioConfig) -> Vec<ScheduleViolation> {
    let mut violations = Vec::new();
    let range = config.interference_range_m;

    let mut seen_in_tti: BTreeMap<u32, BTreeSet<VehicleId>> = BTreeMap::new();
    for (rb, entries) in schedule.cells() {
        for entry in entries {
            let seen = seen_in_tti.entry(rb.tti).or_default();
            for vehicle in [entry.tx_id, entry.rx_id] {
                if !seen.insert(vehicle) {
                    violations.push(ScheduleViolation::VehicleDoubleBooked { vehicle, tti: rb.tti });
                }
            }
            if !within_range(entry.predicted_tx_pos_m, entry.predicted_rx_pos_m, range) {
                violations.push(ScheduleViolation::PairOutOfRange { rb, tx_id: entry.tx_id });
            }
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                if within_range(a.predicted_tx_pos_m, b.predicted_rx_pos_m, range)
                    || within_range(b.predicted_tx_pos_m, a.predicted_rx_pos_m, range)
                {
                    violations.push(ScheduleViolation::CrossSeparationTooSmall {
                        rb,
                        tx_id: a.tx_id,
                        rx_id: b.rx_id,
                    });
                }
            }
        }
    }

    let max_push = config.max_push_ttis();
    for record in schedule.log() {
        if let AssignOutcome::Assigned(assignment) = record.outcome {
            if assignment.delay_ttis > max_push {
                violations.push(ScheduleViolation::DelayExceeded {
                    tx_id: record.tx_id,
                    sequence_number: record.sequence_number,
                    delay_ttis: assignment.delay_ttis,
                });
            }
        }
    }
    violations
}
