//! Interchangeable minimizers for the phase-sequencing problem.
//!
//! `exact` enumerates every permutation and is the ground-truth oracle.
//! `branch_bound` searches permutation space with pruning and matches the
//! oracle when its budget is unlimited. The remaining solvers (simulated
//! annealing, binary hill climbing, projected gradient descent, Adam) all
//! minimize the same penalized QUBO; infeasible readouts are repaired into
//! valid permutations.

mod anneal;
mod branch_bound;
mod exact;
mod hill_climb;
mod relaxed;

pub use anneal::solve_simulated_annealing;
pub use branch_bound::solve_branch_and_bound;
pub use exact::solve_exact;
pub use hill_climb::solve_hill_climbing;
pub use relaxed::{solve_adam, solve_gradient_descent};

use crate::delay::DelayMatrix;
use crate::qubo::{
    build_qubo, decode, gamma_auto, sequence_cost, DecodeOutcome, PhaseSequence, QuboError,
    QuboModel,
};
use serde::{Deserialize, Serialize};

/// Which solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Sa,
    Hc,
    Gd,
    Adam,
    Bnb,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Exact,
        SolverKind::Sa,
        SolverKind::Hc,
        SolverKind::Gd,
        SolverKind::Adam,
        SolverKind::Bnb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Sa => "sa",
            SolverKind::Hc => "hc",
            SolverKind::Gd => "gd",
            SolverKind::Adam => "adam",
            SolverKind::Bnb => "bnb",
        }
    }

    /// True for solvers that minimize the penalized QUBO rather than
    /// searching permutations directly.
    pub fn uses_qubo(self) -> bool {
        matches!(
            self,
            SolverKind::Sa | SolverKind::Hc | SolverKind::Gd | SolverKind::Adam
        )
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "sa" => Ok(SolverKind::Sa),
            "hc" => Ok(SolverKind::Hc),
            "gd" => Ok(SolverKind::Gd),
            "adam" => Ok(SolverKind::Adam),
            "bnb" => Ok(SolverKind::Bnb),
            other => Err(format!(
                "unknown solver `{other}` (expected exact|sa|hc|gd|adam|bnb)"
            )),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Penalty-weight policy for QUBO construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum GammaPolicy {
    /// `max(100, 2 * max delay + 1)`; keeps the penalized optimum feasible.
    Auto,
    Fixed(f64),
}

impl GammaPolicy {
    pub fn resolve(self, d: &DelayMatrix) -> f64 {
        match self {
            GammaPolicy::Auto => gamma_auto(d),
            GammaPolicy::Fixed(g) => g,
        }
    }
}

impl Default for GammaPolicy {
    fn default() -> Self {
        GammaPolicy::Auto
    }
}

impl std::str::FromStr for GammaPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(GammaPolicy::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|g| *g > 0.0)
            .map(GammaPolicy::Fixed)
            .ok_or_else(|| format!("gamma must be `auto` or a positive number, got `{s}`"))
    }
}

/// Seed, evaluation budget, and per-solver hyperparameters. Defaults follow
/// the stock schedules; everything is overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub seed: u64,
    /// Cap on objective evaluations (flips, nodes, or iterations depending
    /// on the solver). `None` means each solver's natural schedule: the full
    /// SA schedule, `400 * num_vars` hill-climbing flips, the configured
    /// gradient iteration counts, and unlimited branch-and-bound nodes.
    pub budget: Option<u64>,
    pub gamma: GammaPolicy,
    pub sa_sweeps: u64,
    pub sa_decay: f64,
    /// Starting temperature; `None` estimates `max(1, max |dE|)` from 100
    /// random single flips at the initial state.
    pub sa_initial_temperature: Option<f64>,
    pub hc_flips_per_var: u64,
    pub gd_step: f64,
    pub gd_iterations: u64,
    pub adam_step: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub adam_iterations: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 1,
            budget: None,
            gamma: GammaPolicy::Auto,
            sa_sweeps: 400,
            sa_decay: 0.97,
            sa_initial_temperature: None,
            hc_flips_per_var: 400,
            gd_step: 0.01,
            gd_iterations: 5000,
            adam_step: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            adam_iterations: 5000,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig {
            seed,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if let Some(0) = self.budget {
            return Err(SolverError::ZeroBudget);
        }
        Ok(())
    }
}

/// Search space a result was produced in, recorded for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchSpace {
    Permutation,
    Qubo,
}

/// Outcome of one solve call. `sequence` is always a valid permutation of
/// the occupied phases; `raw_energy` is the penalized objective at the raw
/// readout before any repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub solver_name: String,
    pub search_space: SearchSpace,
    pub sequence: PhaseSequence,
    pub cost_s: f64,
    pub raw_energy: f64,
    pub feasible_at_readout: bool,
    pub evaluations: u64,
    pub budget_exhausted: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("delay matrix has no occupied phases")]
    EmptyMatrix,
    #[error("exact enumeration refused for {p} phases (max {max})")]
    TooManyPhases { p: usize, max: usize },
    #[error("budget must be positive")]
    ZeroBudget,
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Greedy repair of an arbitrary (possibly fractional) p x p assignment into
/// a valid permutation: repeatedly take the largest value over unassigned
/// rows and columns, then run one pass of pairwise swap improvement against
/// the delay matrix. Deterministic; ties go to the smallest row, then
/// column.
pub fn repair_to_sequence(values: &[f64], d: &DelayMatrix) -> PhaseSequence {
    let p = d.len();
    debug_assert_eq!(values.len(), p * p);
    let mut row_used = vec![false; p];
    let mut col_used = vec![false; p];
    // slot_at[k] = occupied-phase slot served at position k
    let mut slot_at = vec![usize::MAX; p];
    for _ in 0..p {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..p {
            if row_used[i] {
                continue;
            }
            for k in 0..p {
                if col_used[k] {
                    continue;
                }
                let v = values[i * p + k];
                if best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, i, k));
                }
            }
        }
        let (_, i, k) = best.expect("p unassigned cells remain");
        slot_at[k] = i;
        row_used[i] = true;
        col_used[k] = true;
    }

    let path_cost = |slots: &[usize]| -> f64 {
        slots.windows(2).map(|w| d.entry(w[0], w[1])).sum()
    };
    let mut cost = path_cost(&slot_at);
    for a in 0..p {
        for b in (a + 1)..p {
            slot_at.swap(a, b);
            let swapped = path_cost(&slot_at);
            if swapped < cost {
                cost = swapped;
            } else {
                slot_at.swap(a, b);
            }
        }
    }

    PhaseSequence {
        order: slot_at
            .into_iter()
            .map(|slot| d.occupied_phases[slot])
            .collect(),
    }
}

/// Best assignments observed during a QUBO-space search.
pub(crate) struct SearchBests {
    pub best_raw: Vec<u8>,
    pub best_raw_energy: f64,
    /// Lowest-energy feasible assignment seen, if any.
    pub best_feasible: Option<(Vec<u8>, f64)>,
}

/// Turn search bests into a final result: decode the raw best, repair it if
/// infeasible, and never return anything worse than the best feasible
/// assignment encountered.
pub(crate) fn result_from_bests(
    kind: SolverKind,
    bests: &SearchBests,
    d: &DelayMatrix,
    evaluations: u64,
    budget_exhausted: bool,
    wall_time_s: f64,
    repair_values: Option<&[f64]>,
) -> SolverResult {
    let (mut sequence, feasible_at_readout) = match decode(&bests.best_raw, d)
        .expect("raw readout has model length")
    {
        DecodeOutcome::Feasible(seq) => (seq, true),
        DecodeOutcome::Infeasible(_) => {
            let owned: Vec<f64>;
            let values = match repair_values {
                Some(v) => v,
                None => {
                    owned = bests.best_raw.iter().map(|&b| b as f64).collect();
                    &owned
                }
            };
            (repair_to_sequence(values, d), false)
        }
    };
    let mut cost_s = sequence_cost(&sequence, d).expect("repair yields a permutation");
    if let Some((x, _)) = &bests.best_feasible {
        if let DecodeOutcome::Feasible(seq) = decode(x, d).expect("tracked state has model length")
        {
            let cost = sequence_cost(&seq, d).expect("feasible decode is a permutation");
            if cost < cost_s {
                sequence = seq;
                cost_s = cost;
            }
        }
    }
    SolverResult {
        solver_name: kind.name().to_string(),
        search_space: SearchSpace::Qubo,
        sequence,
        cost_s,
        raw_energy: bests.best_raw_energy,
        feasible_at_readout,
        evaluations,
        budget_exhausted,
        wall_time_s,
    }
}

/// Incremental single-flip walker over the hypercube: keeps the energy and
/// the one-hot row/column sums current so feasibility checks are O(1).
pub(crate) struct FlipWalker<'a> {
    model: &'a QuboModel,
    adjacency: Vec<Vec<(u32, f64)>>,
    pub x: Vec<u8>,
    pub energy: f64,
    row_sums: Vec<u32>,
    col_sums: Vec<u32>,
    violations: usize,
}

impl<'a> FlipWalker<'a> {
    pub fn new(model: &'a QuboModel, x: Vec<u8>) -> Self {
        let energy = model.evaluate(&x).expect("start state has model length");
        let p = model.num_phases;
        let mut row_sums = vec![0u32; p];
        let mut col_sums = vec![0u32; p];
        for i in 0..p {
            for k in 0..p {
                if x[i * p + k] != 0 {
                    row_sums[i] += 1;
                    col_sums[k] += 1;
                }
            }
        }
        let violations = row_sums.iter().filter(|&&s| s != 1).count()
            + col_sums.iter().filter(|&&s| s != 1).count();
        FlipWalker {
            adjacency: model.adjacency(),
            model,
            x,
            energy,
            row_sums,
            col_sums,
            violations,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.violations == 0
    }

    /// Energy change of flipping variable `v`, without applying it.
    pub fn delta(&self, v: usize) -> f64 {
        let mut field = self.model.linear[v];
        for &(u, w) in &self.adjacency[v] {
            if self.x[u as usize] != 0 {
                field += w;
            }
        }
        if self.x[v] == 0 {
            field
        } else {
            -field
        }
    }

    pub fn flip(&mut self, v: usize, delta: f64) {
        let p = self.model.num_phases;
        let (row, col) = (v / p, v % p);
        let step: i32 = if self.x[v] == 0 { 1 } else { -1 };
        for (sums, idx) in [(&mut self.row_sums, row), (&mut self.col_sums, col)] {
            let before_ok = sums[idx] == 1;
            sums[idx] = (sums[idx] as i32 + step) as u32;
            let after_ok = sums[idx] == 1;
            match (before_ok, after_ok) {
                (true, false) => self.violations += 1,
                (false, true) => self.violations -= 1,
                _ => {}
            }
        }
        self.x[v] ^= 1;
        self.energy += delta;
    }
}

/// Run any solver against a delay matrix. Degenerate matrices (fewer than
/// two occupied phases) short-circuit: a single occupied phase is returned
/// directly, an empty matrix is an error.
pub fn solve(
    kind: SolverKind,
    d: &DelayMatrix,
    cfg: &SolverConfig,
) -> Result<SolverResult, SolverError> {
    cfg.validate()?;
    let p = d.len();
    if p == 0 {
        return Err(SolverError::EmptyMatrix);
    }
    if p == 1 {
        return Ok(SolverResult {
            solver_name: kind.name().to_string(),
            search_space: if kind.uses_qubo() {
                SearchSpace::Qubo
            } else {
                SearchSpace::Permutation
            },
            sequence: PhaseSequence {
                order: d.occupied_phases.clone(),
            },
            cost_s: 0.0,
            raw_energy: 0.0,
            feasible_at_readout: true,
            evaluations: 0,
            budget_exhausted: false,
            wall_time_s: 0.0,
        });
    }
    match kind {
        SolverKind::Exact => solve_exact(d),
        SolverKind::Bnb => Ok(solve_branch_and_bound(d, cfg)),
        _ => {
            let model = build_qubo(d, cfg.gamma.resolve(d))?;
            Ok(match kind {
                SolverKind::Sa => solve_simulated_annealing(&model, d, cfg),
                SolverKind::Hc => solve_hill_climbing(&model, d, cfg),
                SolverKind::Gd => solve_gradient_descent(&model, d, cfg),
                SolverKind::Adam => solve_adam(&model, d, cfg),
                SolverKind::Exact | SolverKind::Bnb => unreachable!(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(seed: u64, p: usize, max: f64) -> DelayMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| if i == j { 0.0 } else { rng.random::<f64>() * max })
                    .collect()
            })
            .collect();
        DelayMatrix::from_entries(entries)
    }

    #[test]
    fn repair_turns_anything_into_a_permutation() {
        let d = random_matrix(1, 4, 50.0);
        let seq = repair_to_sequence(&vec![0.0; 16], &d);
        assert!(seq.is_permutation_of(&d.occupied_phases));
    }

    #[test]
    fn repair_keeps_an_already_valid_assignment() {
        let d = random_matrix(2, 3, 10.0);
        // Identity permutation, as values.
        let values = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let seq = repair_to_sequence(&values, &d);
        assert!(seq.is_permutation_of(&d.occupied_phases));
    }

    proptest! {
        #[test]
        fn repair_always_yields_valid_permutations(seed in 0u64..200, p in 2usize..7) {
            let d = random_matrix(seed, p, 100.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
            let values: Vec<f64> = (0..p * p).map(|_| rng.random::<f64>()).collect();
            let seq = repair_to_sequence(&values, &d);
            prop_assert!(seq.is_permutation_of(&d.occupied_phases));
        }

        /// The swap pass never increases cost relative to the greedy pick.
        #[test]
        fn swap_pass_never_hurts(seed in 0u64..100, p in 2usize..7) {
            let d = random_matrix(seed, p, 100.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..p * p).map(|_| rng.random::<f64>()).collect();
            let seq = repair_to_sequence(&values, &d);
            let cost = crate::qubo::sequence_cost(&seq, &d).unwrap();
            prop_assert!(cost.is_finite() && cost >= 0.0);
        }
    }

    #[test]
    fn flip_walker_tracks_energy_and_feasibility() {
        let d = random_matrix(3, 3, 100.0);
        let model = build_qubo(&d, gamma_auto(&d)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start: Vec<u8> = (0..9).map(|_| rng.random_range(0..=1u8)).collect();
        let mut walker = FlipWalker::new(&model, start);
        for _ in 0..500 {
            let v = rng.random_range(0..9);
            let delta = walker.delta(v);
            walker.flip(v, delta);
            let fresh = model.evaluate(&walker.x).unwrap();
            assert!((walker.energy - fresh).abs() < 1e-6);
            let feasible = matches!(
                decode(&walker.x, &d).unwrap(),
                DecodeOutcome::Feasible(_)
            );
            assert_eq!(walker.is_feasible(), feasible);
        }
    }

    #[test]
    fn dispatch_handles_degenerate_matrices() {
        let empty = DelayMatrix::from_entries(vec![]);
        assert!(matches!(
            solve(SolverKind::Sa, &empty, &SolverConfig::default()),
            Err(SolverError::EmptyMatrix)
        ));
        let single = DelayMatrix::from_entries(vec![vec![0.0]]);
        for kind in SolverKind::ALL {
            let r = solve(kind, &single, &SolverConfig::default()).unwrap();
            assert_eq!(r.sequence.order, vec![1]);
            assert_eq!(r.cost_s, 0.0);
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        let d = random_matrix(4, 3, 10.0);
        let cfg = SolverConfig {
            budget: Some(0),
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(SolverKind::Sa, &d, &cfg),
            Err(SolverError::ZeroBudget)
        ));
    }

    #[test]
    fn solver_kind_parses_cli_names() {
        for kind in SolverKind::ALL {
            assert_eq!(kind.name().parse::<SolverKind>().unwrap(), kind);
        }
        assert!("qpu".parse::<SolverKind>().is_err());
    }
}
