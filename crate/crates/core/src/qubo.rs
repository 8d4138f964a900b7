//! Penalized QUBO for open-loop phase sequencing, its Ising twin, and the
//! encode/decode bridge between binary assignments and phase sequences.
//!
//! Variables `x[i][k]` say "occupied phase slot i is served at position k".
//! The objective is the path cost over consecutive positions plus a penalty
//! `gamma` times the squared violation of each one-hot row and column
//! constraint, expanded into linear/quadratic/offset terms using `x^2 = x`.

use crate::delay::DelayMatrix;
use crate::phase::PhaseId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Quadratic binary objective: `offset + sum_i linear[i] x_i +
/// sum_{i<j} quadratic[(i,j)] x_i x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboModel {
    /// Number of occupied phases p; variables form a p x p grid.
    pub num_phases: usize,
    /// p * p.
    pub num_vars: usize,
    pub linear: Vec<f64>,
    /// Keys are unordered pairs stored with i < j.
    pub quadratic: BTreeMap<(u32, u32), f64>,
    pub offset: f64,
    /// Penalty weight used at build time; zero for models parsed from text.
    pub gamma: f64,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum QuboError {
    #[error("need at least 2 occupied phases to build a QUBO (got {0})")]
    TooFewPhases(usize),
    #[error("gamma must be positive (got {0})")]
    NonPositiveGamma(f64),
    #[error("assignment length {got} does not match model size {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("sequence is not a permutation of the occupied phases")]
    InvalidSequence,
}

impl QuboModel {
    /// Variable index of (phase slot, position), both 0-based.
    pub fn var_index(&self, phase_slot: usize, position: usize) -> usize {
        phase_slot * self.num_phases + position
    }

    fn add_quadratic(&mut self, a: usize, b: usize, w: f64) {
        debug_assert_ne!(a, b);
        let key = if a < b {
            (a as u32, b as u32)
        } else {
            (b as u32, a as u32)
        };
        *self.quadratic.entry(key).or_insert(0.0) += w;
    }

    /// Objective value at a binary assignment.
    pub fn evaluate(&self, x: &[u8]) -> Result<f64, QuboError> {
        if x.len() != self.num_vars {
            return Err(QuboError::LengthMismatch {
                got: x.len(),
                want: self.num_vars,
            });
        }
        let mut value = self.offset;
        for (i, &w) in self.linear.iter().enumerate() {
            if x[i] != 0 {
                value += w;
            }
        }
        for (&(i, j), &w) in &self.quadratic {
            if x[i as usize] != 0 && x[j as usize] != 0 {
                value += w;
            }
        }
        Ok(value)
    }

    /// Objective value over the relaxed box [0,1]^n; used by the
    /// gradient-based solvers.
    pub fn relaxed_value(&self, x: &[f64]) -> f64 {
        let mut value = self.offset;
        for (i, &w) in self.linear.iter().enumerate() {
            value += w * x[i];
        }
        for (&(i, j), &w) in &self.quadratic {
            value += w * x[i as usize] * x[j as usize];
        }
        value
    }

    /// Analytic gradient of `relaxed_value`.
    pub fn relaxed_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = self.linear.clone();
        for (&(i, j), &w) in &self.quadratic {
            grad[i as usize] += w * x[j as usize];
            grad[j as usize] += w * x[i as usize];
        }
        grad
    }

    /// Neighbor lists for incremental single-flip energy updates:
    /// `adjacency[v]` holds every (other var, coupling weight) touching v.
    pub fn adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.num_vars];
        for (&(i, j), &w) in &self.quadratic {
            adj[i as usize].push((j, w));
            adj[j as usize].push((i, w));
        }
        adj
    }

    /// Plain-text export: `offset <v>`, then `lin <i> <w>` and
    /// `quad <i> <j> <w>` lines, indices ascending.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "offset {}", self.offset)?;
        for (i, &v) in self.linear.iter().enumerate() {
            if v != 0.0 {
                writeln!(w, "lin {i} {v}")?;
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            if v != 0.0 {
                writeln!(w, "quad {i} {j} {v}")?;
            }
        }
        Ok(())
    }

    /// Parse the plain-text format. The variable count is inferred from the
    /// largest index and must be a perfect square; `gamma` is unknown for
    /// parsed models and reported as zero.
    pub fn parse_text<R: BufRead>(r: R) -> Result<QuboModel, TextParseError> {
        let mut offset = 0.0;
        let mut linear: BTreeMap<usize, f64> = BTreeMap::new();
        let mut quadratic: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut max_index = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(TextParseError::Io)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || TextParseError::Malformed {
                line: lineno + 1,
                content: line.to_string(),
            };
            match fields.as_slice() {
                ["offset", v] => offset = v.parse().map_err(|_| bad())?,
                ["lin", i, v] => {
                    let i: usize = i.parse().map_err(|_| bad())?;
                    max_index = max_index.max(i);
                    *linear.entry(i).or_insert(0.0) += v.parse::<f64>().map_err(|_| bad())?;
                }
                ["quad", i, j, v] => {
                    let i: u32 = i.parse().map_err(|_| bad())?;
                    let j: u32 = j.parse().map_err(|_| bad())?;
                    if i == j {
                        return Err(bad());
                    }
                    let key = if i < j { (i, j) } else { (j, i) };
                    max_index = max_index.max(j.max(i) as usize);
                    *quadratic.entry(key).or_insert(0.0) +=
                        v.parse::<f64>().map_err(|_| bad())?;
                }
                _ => return Err(bad()),
            }
        }
        if linear.is_empty() && quadratic.is_empty() {
            return Err(TextParseError::Empty);
        }
        let num_vars = max_index + 1;
        let p = (num_vars as f64).sqrt().round() as usize;
        if p * p != num_vars {
            return Err(TextParseError::NotSquare { num_vars });
        }
        let mut lin = vec![0.0; num_vars];
        for (i, v) in linear {
            lin[i] = v;
        }
        Ok(QuboModel {
            num_phases: p,
            num_vars,
            linear: lin,
            quadratic,
            offset,
            gamma: 0.0,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TextParseError {
    #[error("io error: {0}")]
    Io(std::io::Error),
    #[error("malformed line {line}: `{content}`")]
    Malformed { line: usize, content: String },
    #[error("no terms found")]
    Empty,
    #[error("variable count {num_vars} is not a perfect square")]
    NotSquare { num_vars: usize },
}

/// Penalty weight that provably keeps the penalized optimum feasible: a
/// fixed 100 floor, raised to `2 * max_entry + 1` when delays are large.
/// A flat 100 is not enough once single entries exceed ~100 seconds, since
/// dropping a phase then saves more delay than the constraint penalty costs.
pub fn gamma_auto(d: &DelayMatrix) -> f64 {
    (2.0 * d.max_entry() + 1.0).max(100.0)
}

/// Build the penalized QUBO for a delay matrix with p >= 2 occupied phases.
pub fn build_qubo(d: &DelayMatrix, gamma: f64) -> Result<QuboModel, QuboError> {
    let p = d.len();
    if p < 2 {
        return Err(QuboError::TooFewPhases(p));
    }
    if !(gamma > 0.0) {
        return Err(QuboError::NonPositiveGamma(gamma));
    }
    let num_vars = p * p;
    let mut model = QuboModel {
        num_phases: p,
        num_vars,
        linear: vec![0.0; num_vars],
        quadratic: BTreeMap::new(),
        offset: 0.0,
        gamma,
    };

    // Path cost: d[i][j] couples (i at position k) with (j at position k+1).
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let w = d.entry(i, j);
            if w == 0.0 {
                continue;
            }
            for k in 0..p - 1 {
                model.add_quadratic(model.var_index(i, k), model.var_index(j, k + 1), w);
            }
        }
    }

    // One-hot penalties, expanded with x^2 = x:
    // (sum x - 1)^2 = -sum x + 2 sum_{pairs} x x' + 1.
    for i in 0..p {
        for k in 0..p {
            model.linear[model.var_index(i, k)] -= gamma;
        }
        for k in 0..p {
            for l in (k + 1)..p {
                model.add_quadratic(model.var_index(i, k), model.var_index(i, l), 2.0 * gamma);
            }
        }
        model.offset += gamma;
    }
    for k in 0..p {
        for i in 0..p {
            model.linear[model.var_index(i, k)] -= gamma;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                model.add_quadratic(model.var_index(i, k), model.var_index(j, k), 2.0 * gamma);
            }
        }
        model.offset += gamma;
    }
    Ok(model)
}

/// Spin-space twin of a QUBO under `x = (1 + s) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub j: BTreeMap<(u32, u32), f64>,
    pub offset: f64,
}

impl IsingModel {
    /// Hamiltonian energy at a spin assignment (+1 / -1 entries).
    pub fn energy(&self, s: &[i8]) -> f64 {
        let mut e = self.offset;
        for (i, &hi) in self.h.iter().enumerate() {
            e += hi * s[i] as f64;
        }
        for (&(i, j), &jij) in &self.j {
            e += jij * (s[i as usize] as f64) * (s[j as usize] as f64);
        }
        e
    }
}

/// Exact spin-space transform: energies match the QUBO on every assignment,
/// with the constant absorbed into the offset.
pub fn to_ising(m: &QuboModel) -> IsingModel {
    let mut h = vec![0.0; m.num_vars];
    let mut j: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut offset = m.offset;
    for (i, &a) in m.linear.iter().enumerate() {
        // a*x = a/2 * s + a/2
        h[i] += a / 2.0;
        offset += a / 2.0;
    }
    for (&(a, b), &w) in &m.quadratic {
        // w*x_a*x_b = w/4 * (1 + s_a + s_b + s_a s_b)
        h[a as usize] += w / 4.0;
        h[b as usize] += w / 4.0;
        *j.entry((a, b)).or_insert(0.0) += w / 4.0;
        offset += w / 4.0;
    }
    IsingModel { h, j, offset }
}

/// A permutation of the occupied phases; the first entry is granted
/// right-of-way next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSequence {
    pub order: Vec<PhaseId>,
}

impl PhaseSequence {
    pub fn is_permutation_of(&self, occupied: &[PhaseId]) -> bool {
        if self.order.len() != occupied.len() {
            return false;
        }
        let mut sorted = self.order.clone();
        sorted.sort_unstable();
        let mut want = occupied.to_vec();
        want.sort_unstable();
        sorted == want && sorted.windows(2).all(|w| w[0] != w[1])
    }
}

/// Constraint violations found while decoding an assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibleReport {
    /// Phase-slot rows whose position sum is not exactly one.
    pub bad_rows: Vec<usize>,
    /// Position columns whose phase sum is not exactly one.
    pub bad_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeOutcome {
    Feasible(PhaseSequence),
    Infeasible(InfeasibleReport),
}

/// Decode a binary assignment against the occupied phases of `d`.
pub fn decode(x: &[u8], d: &DelayMatrix) -> Result<DecodeOutcome, QuboError> {
    let p = d.len();
    if x.len() != p * p {
        return Err(QuboError::LengthMismatch {
            got: x.len(),
            want: p * p,
        });
    }
    let mut bad_rows = Vec::new();
    let mut bad_cols = Vec::new();
    for i in 0..p {
        let sum: u32 = (0..p).map(|k| x[i * p + k] as u32).sum();
        if sum != 1 {
            bad_rows.push(i);
        }
    }
    for k in 0..p {
        let sum: u32 = (0..p).map(|i| x[i * p + k] as u32).sum();
        if sum != 1 {
            bad_cols.push(k);
        }
    }
    if !bad_rows.is_empty() || !bad_cols.is_empty() {
        return Ok(DecodeOutcome::Infeasible(InfeasibleReport {
            bad_rows,
            bad_cols,
        }));
    }
    let mut order = vec![0 as PhaseId; p];
    for i in 0..p {
        for k in 0..p {
            if x[i * p + k] != 0 {
                order[k] = d.occupied_phases[i];
            }
        }
    }
    Ok(DecodeOutcome::Feasible(PhaseSequence { order }))
}

/// Encode a phase sequence as the binary assignment decode() inverts.
pub fn encode(seq: &PhaseSequence, d: &DelayMatrix) -> Result<Vec<u8>, QuboError> {
    if !seq.is_permutation_of(&d.occupied_phases) {
        return Err(QuboError::InvalidSequence);
    }
    let p = d.len();
    let mut x = vec![0u8; p * p];
    for (k, &phase) in seq.order.iter().enumerate() {
        let i = d.index_of(phase).ok_or(QuboError::InvalidSequence)?;
        x[i * p + k] = 1;
    }
    Ok(x)
}

/// Open-loop path cost of a sequence: the sum of consecutive transition
/// delays, with no return edge.
pub fn sequence_cost(seq: &PhaseSequence, d: &DelayMatrix) -> Result<f64, QuboError> {
    if !seq.is_permutation_of(&d.occupied_phases) {
        return Err(QuboError::InvalidSequence);
    }
    let mut cost = 0.0;
    for pair in seq.order.windows(2) {
        let a = d.index_of(pair[0]).ok_or(QuboError::InvalidSequence)?;
        let b = d.index_of(pair[1]).ok_or(QuboError::InvalidSequence)?;
        cost += d.entry(a, b);
    }
    Ok(cost)
}
