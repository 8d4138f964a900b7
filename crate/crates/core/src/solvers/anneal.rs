//! Metropolis single-bit-flip simulated annealing over the QUBO hypercube;
//! the desk-scale stand-in for the quantum annealer.

use super::{result_from_bests, FlipWalker, SearchBests, SolverConfig, SolverKind, SolverResult};
use crate::delay::DelayMatrix;
use crate::qubo::QuboModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Geometric-schedule simulated annealing. The starting temperature is
/// estimated (unless configured) as `max(1, max |dE|)` over 100 random
/// single flips at the initial state, decays by `sa_decay` per sweep, and
/// each sweep proposes `num_vars` uniformly random flips. The best-seen
/// assignment is decoded and repaired if infeasible. Deterministic for a
/// fixed seed.
pub fn solve_simulated_annealing(
    model: &QuboModel,
    d: &DelayMatrix,
    cfg: &SolverConfig,
) -> SolverResult {
    let start = Instant::now();
    let n = model.num_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
    let mut walker = FlipWalker::new(model, x0);

    let mut temperature = match cfg.sa_initial_temperature {
        Some(t) => t,
        None => {
            let mut max_abs = 0.0f64;
            for _ in 0..100 {
                let v = rng.random_range(0..n);
                max_abs = max_abs.max(walker.delta(v).abs());
            }
            max_abs.max(1.0)
        }
    };

    let mut bests = SearchBests {
        best_raw: walker.x.clone(),
        best_raw_energy: walker.energy,
        best_feasible: if walker.is_feasible() {
            Some((walker.x.clone(), walker.energy))
        } else {
            None
        },
    };

    let budget = cfg.budget.unwrap_or(cfg.sa_sweeps * n as u64);
    let mut flips: u64 = 0;
    let mut exhausted = false;
    'schedule: for _sweep in 0..cfg.sa_sweeps {
        for _ in 0..n {
            if flips >= budget {
                exhausted = true;
                break 'schedule;
            }
            flips += 1;
            let v = rng.random_range(0..n);
            let delta = walker.delta(v);
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
            if !accept {
                continue;
            }
            walker.flip(v, delta);
            if walker.energy < bests.best_raw_energy {
                bests.best_raw_energy = walker.energy;
                bests.best_raw.copy_from_slice(&walker.x);
            }
            if walker.is_feasible() {
                let better = bests
                    .best_feasible
                    .as_ref()
                    .map_or(true, |(_, e)| walker.energy < *e);
                if better {
                    bests.best_feasible = Some((walker.x.clone(), walker.energy));
                }
            }
        }
        temperature *= cfg.sa_decay;
    }

    result_from_bests(
        SolverKind::Sa,
        &bests,
        d,
        flips,
        exhausted,
        start.elapsed().as_secs_f64(),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_matrix;
    use super::super::{solve_exact, GammaPolicy};
    use super::*;
    use crate::qubo::{build_qubo, sequence_cost};

    fn run(d: &DelayMatrix, seed: u64) -> SolverResult {
        let cfg = SolverConfig::with_seed(seed);
        let model = build_qubo(d, cfg.gamma.resolve(d)).unwrap();
        solve_simulated_annealing(&model, d, &cfg)
    }

    #[test]
    fn zero_matrix_yields_any_feasible_sequence_at_zero_cost() {
        let d = DelayMatrix::from_entries(vec![vec![0.0; 4]; 4]);
        let r = run(&d, 3);
        assert!(r.sequence.is_permutation_of(&d.occupied_phases));
        assert_eq!(r.cost_s, 0.0);
    }

    #[test]
    fn matches_exact_on_most_small_instances() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let d = random_matrix(seed, 4, 100.0);
            let exact = solve_exact(&d).unwrap();
            let sa = run(&d, seed);
            assert!(sa.cost_s >= exact.cost_s - 1e-9);
            if (sa.cost_s - exact.cost_s).abs() < 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "SA matched exact on only {hits}/100 runs");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let d = random_matrix(17, 6, 100.0);
        let a = run(&d, 99);
        let b = run(&d, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn result_cost_matches_its_own_sequence() {
        let d = random_matrix(5, 5, 200.0);
        let r = run(&d, 1);
        assert_eq!(r.cost_s, sequence_cost(&r.sequence, &d).unwrap());
    }

    #[test]
    fn respects_explicit_budget() {
        let d = random_matrix(8, 5, 100.0);
        let cfg = SolverConfig {
            budget: Some(50),
            gamma: GammaPolicy::Auto,
            ..SolverConfig::with_seed(4)
        };
        let model = build_qubo(&d, cfg.gamma.resolve(&d)).unwrap();
        let r = solve_simulated_annealing(&model, &d, &cfg);
        assert_eq!(r.evaluations, 50);
        assert!(r.budget_exhausted);
        assert!(r.sequence.is_permutation_of(&d.occupied_phases));
    }
}
