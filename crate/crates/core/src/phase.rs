//! Movements, the eight concurrent phase groups, and signal timing constants.
//!
//! A 4-way intersection with two lanes per approach: the right lane carries
//! through (and right-turn) traffic, the left lane carries left turns. Two
//! movements may share right-of-way only when they do not cross paths; the
//! eight compatible pairs form the phase catalogue used everywhere else.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Compass approach a vehicle arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    North,
    South,
    East,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::North,
        Approach::South,
        Approach::East,
        Approach::West,
    ];

    /// True when both approaches belong to the same street (N-S or E-W).
    pub fn same_street(self, other: Approach) -> bool {
        self.is_north_south() == other.is_north_south()
    }

    pub fn is_north_south(self) -> bool {
        matches!(self, Approach::North | Approach::South)
    }

    pub fn opposite(self) -> Approach {
        match self {
            Approach::North => Approach::South,
            Approach::South => Approach::North,
            Approach::East => Approach::West,
            Approach::West => Approach::East,
        }
    }
}

/// Lane-movement kind. Right turns ride along with through traffic, so only
/// two kinds exist per approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MovementKind {
    Through,
    Left,
}

/// One of the eight lane movements at the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Movement {
    pub approach: Approach,
    pub kind: MovementKind,
}

impl Movement {
    pub const fn new(approach: Approach, kind: MovementKind) -> Self {
        Movement { approach, kind }
    }

    /// All eight movements, in a fixed order (approach-major, through first).
    pub fn all() -> [Movement; 8] {
        let mut out = [Movement::new(Approach::North, MovementKind::Through); 8];
        let mut i = 0;
        for approach in Approach::ALL {
            for kind in [MovementKind::Through, MovementKind::Left] {
                out[i] = Movement::new(approach, kind);
                i += 1;
            }
        }
        out
    }

    /// Compact code used in CSV output and JSON: `NT`, `NL`, `ST`, ...
    pub fn code(self) -> &'static str {
        match (self.approach, self.kind) {
            (Approach::North, MovementKind::Through) => "NT",
            (Approach::North, MovementKind::Left) => "NL",
            (Approach::South, MovementKind::Through) => "ST",
            (Approach::South, MovementKind::Left) => "SL",
            (Approach::East, MovementKind::Through) => "ET",
            (Approach::East, MovementKind::Left) => "EL",
            (Approach::West, MovementKind::Through) => "WT",
            (Approach::West, MovementKind::Left) => "WL",
        }
    }

    pub fn from_code(code: &str) -> Option<Movement> {
        Movement::all().into_iter().find(|m| m.code() == code)
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl From<Movement> for String {
    fn from(m: Movement) -> String {
        m.code().to_string()
    }
}

impl TryFrom<String> for Movement {
    type Error = String;

    fn try_from(s: String) -> Result<Movement, String> {
        Movement::from_code(&s).ok_or_else(|| format!("unknown movement code `{s}`"))
    }
}

/// True iff the two movements cannot legally hold right-of-way at the same
/// time. Movements on different streets always conflict; within one street a
/// through conflicts with the opposing left; a movement never conflicts with
/// itself.
pub fn movements_conflict(a: Movement, b: Movement) -> bool {
    if a == b {
        return false;
    }
    if !a.approach.same_street(b.approach) {
        return true;
    }
    // Same street: the crossing pairs are through vs. the opposing left.
    match (a.kind, b.kind) {
        (MovementKind::Through, MovementKind::Left) => b.approach == a.approach.opposite(),
        (MovementKind::Left, MovementKind::Through) => a.approach == b.approach.opposite(),
        _ => false,
    }
}

/// Identifier of a phase group, 1 through 8.
pub type PhaseId = u8;

/// A compatible pair of movements that may receive right-of-way together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseGroup {
    pub id: PhaseId,
    /// Exactly two mutually non-conflicting movements.
    pub movements: [Movement; 2],
}

impl PhaseGroup {
    pub fn contains(&self, m: Movement) -> bool {
        self.movements[0] == m || self.movements[1] == m
    }
}

/// The fixed eight-group catalogue. Per street, in order: both lefts, both
/// throughs, one approach's left+through, the opposite approach's
/// left+through. N-S street first, ids 1..=8.
pub fn standard_phase_groups() -> Vec<PhaseGroup> {
    use Approach::*;
    use MovementKind::*;
    let m = |a, k| Movement::new(a, k);
    let pairs = [
        [m(North, Left), m(South, Left)],
        [m(North, Through), m(South, Through)],
        [m(North, Left), m(North, Through)],
        [m(South, Left), m(South, Through)],
        [m(East, Left), m(West, Left)],
        [m(East, Through), m(West, Through)],
        [m(East, Left), m(East, Through)],
        [m(West, Left), m(West, Through)],
    ];
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, movements)| PhaseGroup {
            id: (i + 1) as PhaseId,
            movements,
        })
        .collect()
}

/// Yellow and all-red clearance intervals, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub yellow_s: f64,
    pub all_red_s: f64,
}

impl SignalTiming {
    pub fn new(yellow_s: f64, all_red_s: f64) -> Result<Self, PhaseError> {
        if !(yellow_s > 0.0) || !(all_red_s >= 0.0) {
            return Err(PhaseError::InvalidTiming {
                yellow_s,
                all_red_s,
            });
        }
        Ok(SignalTiming {
            yellow_s,
            all_red_s,
        })
    }

    /// Combined clearance interval Y + R entering every transition delay.
    pub fn clearance_s(&self) -> f64 {
        self.yellow_s + self.all_red_s
    }
}

impl Default for SignalTiming {
    fn default() -> Self {
        SignalTiming {
            yellow_s: 3.0,
            all_red_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PhaseError {
    #[error("invalid signal timing: yellow={yellow_s}, all_red={all_red_s} (yellow must be > 0, all-red >= 0)")]
    InvalidTiming { yellow_s: f64, all_red_s: f64 },
}
