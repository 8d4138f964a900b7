//! Per-vehicle ETAs and the asymmetric phase-transition delay matrix.
//!
//! The entry `d[i][j]` is the total stopped delay imposed on the vehicles of
//! phase `j` when phase `i` is served immediately before it: every vehicle of
//! `j` waits out the last vehicle of `i` plus the yellow and all-red
//! clearance, less its own arrival time, floored at zero.

use crate::phase::{Movement, PhaseGroup, PhaseId, SignalTiming};
use serde::{Deserialize, Serialize};

/// Speed below which a vehicle counts as stopped, in m/s. Also the clamp
/// floor for ETA quotients of slow-moving vehicles.
pub const STOPPED_SPEED_MPS: f64 = 0.1;

/// Distance within which a slow vehicle counts as already arrived at the
/// stop line, in meters.
pub const ARRIVAL_TOLERANCE_M: f64 = 2.0;

/// State of one connected vehicle inside the VTL zone at snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub vehicle_id: u64,
    pub movement: Movement,
    pub distance_to_stop_line_m: f64,
    pub speed_mps: f64,
}

/// Estimated time of arrival at the stop line, in seconds.
///
/// Distance divided by speed, with two carve-outs: a vehicle at the line
/// (or essentially at it while moving slower than the stopped threshold)
/// has ETA zero, and a slow vehicle far from the line has its speed clamped
/// to the stopped threshold so the quotient stays finite.
pub fn eta(v: &VehicleSnapshot) -> f64 {
    let d = v.distance_to_stop_line_m;
    if d <= 0.0 {
        return 0.0;
    }
    if v.speed_mps < STOPPED_SPEED_MPS {
        if d <= ARRIVAL_TOLERANCE_M {
            return 0.0;
        }
        return d / STOPPED_SPEED_MPS;
    }
    d / v.speed_mps
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DelayError {
    #[error("phase {0} has no in-zone vehicles")]
    UnoccupiedPhase(PhaseId),
    #[error("transition delay requires two distinct phases (got phase {0} twice)")]
    IdenticalPhases(PhaseId),
}

/// ETA of the last vehicle of a phase: per member movement, the vehicle
/// furthest from the stop line; among those, the larger ETA wins.
pub fn last_vehicle_eta(
    phase: &PhaseGroup,
    vehicles: &[VehicleSnapshot],
) -> Result<f64, DelayError> {
    let mut best: Option<f64> = None;
    for movement in phase.movements {
        // Furthest vehicle of this movement; ties on distance resolved by
        // the larger ETA so the result is order-independent.
        let mut furthest: Option<(f64, f64)> = None;
        for v in vehicles.iter().filter(|v| v.movement == movement) {
            let candidate = (v.distance_to_stop_line_m, eta(v));
            match furthest {
                Some(current) if current >= candidate => {}
                _ => furthest = Some(candidate),
            }
        }
        if let Some((_, t)) = furthest {
            best = Some(match best {
                Some(b) => b.max(t),
                None => t,
            });
        }
    }
    best.ok_or(DelayError::UnoccupiedPhase(phase.id))
}

/// Total stopped delay for the vehicles of `to_phase` when `from_phase` is
/// served immediately before it: sum over vehicles i of
/// `max(0, t_from - t_i + Y + R)`.
pub fn transition_delay(
    from_phase: &PhaseGroup,
    to_phase: &PhaseGroup,
    vehicles: &[VehicleSnapshot],
    timing: &SignalTiming,
) -> Result<f64, DelayError> {
    if from_phase.id == to_phase.id {
        return Err(DelayError::IdenticalPhases(from_phase.id));
    }
    let t_from = last_vehicle_eta(from_phase, vehicles)?;
    let clearance = timing.clearance_s();
    let mut total = 0.0;
    let mut occupied = false;
    for v in vehicles
        .iter()
        .filter(|v| to_phase.contains(v.movement))
    {
        occupied = true;
        total += (t_from - eta(v) + clearance).max(0.0);
    }
    if !occupied {
        return Err(DelayError::UnoccupiedPhase(to_phase.id));
    }
    Ok(total)
}

/// Asymmetric delay matrix over the occupied phases, in catalogue order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayMatrix {
    pub occupied_phases: Vec<PhaseId>,
    /// `entries[i][j]` = delay of serving occupied phase i immediately
    /// before occupied phase j; diagonal unused (zero).
    pub entries: Vec<Vec<f64>>,
}

impl DelayMatrix {
    /// Number of occupied phases (matrix dimension).
    pub fn len(&self) -> usize {
        self.occupied_phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied_phases.is_empty()
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.entries[from][to]
    }

    pub fn index_of(&self, phase: PhaseId) -> Option<usize> {
        self.occupied_phases.iter().position(|&p| p == phase)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Build a matrix directly from raw entries; used by the standalone
    /// solver CLI and by tests. Phase ids default to 1..=n.
    pub fn from_entries(entries: Vec<Vec<f64>>) -> Self {
        let n = entries.len();
        DelayMatrix {
            occupied_phases: (1..=n as PhaseId).collect(),
            entries,
        }
    }

    /// Write as CSV: header `phase,<id>,<id>,...`, one row per from-phase.
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["phase".to_string()];
        header.extend(self.occupied_phases.iter().map(|p| p.to_string()));
        wtr.write_record(&header)?;
        for (i, row) in self.entries.iter().enumerate() {
            let mut record = vec![self.occupied_phases[i].to_string()];
            record.extend(row.iter().map(|v| format!("{v}")));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self, MatrixParseError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers().map_err(MatrixParseError::Csv)?.clone();
        if header.is_empty() || &header[0] != "phase" {
            return Err(MatrixParseError::Header);
        }
        let occupied: Vec<PhaseId> = header
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<PhaseId>().map_err(|_| MatrixParseError::Header))
            .collect::<Result<_, _>>()?;
        let n = occupied.len();
        let mut entries = Vec::with_capacity(n);
        for record in rdr.records() {
            let record = record.map_err(MatrixParseError::Csv)?;
            if record.len() != n + 1 {
                return Err(MatrixParseError::Shape);
            }
            let row: Vec<f64> = record
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>().map_err(|_| MatrixParseError::Value))
                .collect::<Result<_, _>>()?;
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(MatrixParseError::Value);
            }
            entries.push(row);
        }
        if entries.len() != n {
            return Err(MatrixParseError::Shape);
        }
        Ok(DelayMatrix {
            occupied_phases: occupied,
            entries,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MatrixParseError {
    #[error("csv error: {0}")]
    Csv(csv::Error),
    #[error("expected header `phase,<id>,...`")]
    Header,
    #[error("matrix is not square or row width mismatches header")]
    Shape,
    #[error("matrix entries must be finite non-negative numbers")]
    Value,
}

/// Build the delay matrix for the occupied phases of a snapshot.
///
/// Phases with no in-zone vehicles are dropped, so a snapshot occupying k of
/// the 8 groups yields a k×k matrix. With fewer than two occupied phases the
/// result is degenerate (size 0 or 1) and callers skip the optimizer.
pub fn build_delay_matrix(
    vehicles: &[VehicleSnapshot],
    catalogue: &[PhaseGroup],
    timing: &SignalTiming,
) -> DelayMatrix {
    let occupied: Vec<&PhaseGroup> = catalogue
        .iter()
        .filter(|g| vehicles.iter().any(|v| g.contains(v.movement)))
        .collect();
    let n = occupied.len();
    let mut entries = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // Both phases occupied by construction.
                entries[i][j] =
                    transition_delay(occupied[i], occupied[j], vehicles, timing).unwrap();
            }
        }
    }
    DelayMatrix {
        occupied_phases: occupied.iter().map(|g| g.id).collect(),
        entries,
    }
}
