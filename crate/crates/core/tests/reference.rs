//! Library evaluation, bounds and exact solvers against the dense reference.

mod support;

use nilm_core::bounds::{
    modular_upper_bound_of_f, naive, permutation_from_set, subgradient_h, supergradient_g,
    upper_bound_of_g, TailPolicy,
};
use nilm_core::oracle::{enumerate_optimum, viterbi_optimum};
use nilm_core::setfn::{is_submodular_bruteforce, mask_to_indicator};
use nilm_core::solver::{modular_minimize, solve, Initialization, SolverOptions};
use nilm_core::ProblemInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn set_cost_matches_dense_kronecker_form() {
    let (model, agg) = random_problem(11, 2, 2, 1, 3);
    let inst = ProblemInstance::new(&model, &agg).unwrap();
    let dense = DenseCost::new(&model, &agg);
    for s in all_assignments(&model, 3) {
        let z = s.indicator(&model);
        let c = inst.set_cost(&s).unwrap();
        assert!(rel_close(c.f, dense.f(&z), 1e-12), "{} vs {}", c.f, dense.f(&z));
        assert!(rel_close(c.g, dense.g(&z), 1e-12));
        assert!(rel_close(c.h, dense.h(&z), 1e-12));
        assert!(rel_close(inst.residual_cost(&s).unwrap(), dense.residual(&z), 1e-12));
    }
}

#[test]
fn indicator_evaluation_matches_dense_on_arbitrary_subsets() {
    for seed in 0..10 {
        let (model, agg) = random_problem(seed, 2, 3, 3, 2);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let dense = DenseCost::new(&model, &agg);
        let n = inst.ground_size();
        for mask in 0..1u64 << n {
            let z = mask_to_indicator(mask, n);
            assert!(rel_close(inst.g_of(&z), dense.g(&z), 1e-12));
            assert!(rel_close(inst.h_of(&z), dense.h(&z), 1e-12));
        }
    }
}

#[test]
fn both_parts_submodular_on_random_windows() {
    for seed in 0..20 {
        let (model, agg) = random_problem(100 + seed, 2, 2, 2, 3);
        let dense = DenseCost::new(&model, &agg);
        let n = model.width() * 3;
        assert!(is_submodular_bruteforce(n, |z| dense.g(z), 1e-9).unwrap().is_submodular());
        assert!(is_submodular_bruteforce(n, |z| dense.h(z), 1e-6).unwrap().is_submodular());
    }
}

#[test]
fn bounds_dominate_and_touch_dense_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let (model, agg) = random_problem(200 + seed, 2, 2, 2, 3);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let dense = DenseCost::new(&model, &agg);
        let y = random_assignment(&model, 3, &mut rng);
        let yz = y.indicator(&model);
        let pi = permutation_from_set(&inst, &y, rng.random(), TailPolicy::Shuffled).unwrap();
        let u = upper_bound_of_g(&inst, &y).unwrap();
        let v = subgradient_h(&inst, &y, &pi).unwrap();
        let m = modular_upper_bound_of_f(&inst, &y, &pi).unwrap();
        let n = inst.ground_size();
        for mask in 0..1u64 << n {
            let z = mask_to_indicator(mask, n);
            assert!(dense.g(&z) <= u.eval(&z) + 1e-9);
            assert!(dense.h(&z) >= v.eval(&z) - 1e-6);
            assert!(dense.f(&z) <= m.eval(&z) + 1e-6);
        }
        assert!(rel_close(u.eval(&yz), dense.g(&yz), 1e-12));
        assert!(rel_close(v.eval(&yz), dense.h(&yz), 1e-12));
        assert!(rel_close(m.eval(&yz), dense.f(&yz), 1e-12));
        for i in 0..=n {
            let p = pi.prefix_indicator(i);
            assert!(rel_close(v.eval(&p), dense.h(&p), 1e-12));
        }
    }
}

#[test]
fn closed_forms_match_definitions_up_to_sixty_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..30 {
        let horizon = 2 + (seed as usize % 5);
        let (model, agg) = random_problem(300 + seed, 3, 3, 2, horizon);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        assert!(inst.ground_size() <= 60);
        let y = random_assignment(&model, horizon, &mut rng);
        let pi = permutation_from_set(&inst, &y, seed, TailPolicy::Shuffled).unwrap();
        let a = supergradient_g(&inst, &y).unwrap();
        let b = naive::supergradient_g(&inst, &y).unwrap();
        let c = subgradient_h(&inst, &y, &pi).unwrap();
        let d = naive::subgradient_h(&inst, &y, &pi).unwrap();
        for j in 0..inst.ground_size() {
            assert!(rel_close(a.values[j], b.values[j], 1e-9));
            assert!(rel_close(c.values[j], d.values[j], 1e-9));
        }
        let nonzero = a.values.iter().filter(|v| **v != 0.0).count();
        assert!(nonzero <= model.num_appliances() * horizon);
    }
}

#[test]
fn modular_argmin_is_exact_over_feasible_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..10 {
        let (model, agg) = random_problem(400 + seed, 2, 3, 1, 2);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let m = nilm_core::bounds::ModularVector {
            values: (0..inst.ground_size()).map(|_| rng.random_range(-5.0..5.0)).collect(),
        };
        let best = modular_minimize(&inst, &m);
        let best_val = m.eval(&best.indicator(&model));
        for s in all_assignments(&model, 2) {
            assert!(m.eval(&s.indicator(&model)) >= best_val);
        }
    }
}

#[test]
fn oracles_match_dense_brute_force() {
    for seed in 0..15 {
        let (model, agg) = random_problem(500 + seed, 2, 2, 2, 3);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let dense = DenseCost::new(&model, &agg);
        let brute = all_assignments(&model, 3)
            .iter()
            .map(|s| dense.f(&s.indicator(&model)))
            .fold(f64::INFINITY, f64::min);
        let (_, e) = enumerate_optimum(&inst).unwrap();
        let (_, v) = viterbi_optimum(&inst).unwrap();
        assert_eq!(e, v);
        assert!(rel_close(e, brute, 1e-12));
    }
}

#[test]
fn solver_from_the_optimum_stays_there() {
    for seed in 0..10 {
        let (model, agg) = random_problem(600 + seed, 2, 2, 1, 3);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let (best, cost) = enumerate_optimum(&inst).unwrap();
        let opts = SolverOptions {
            init: Initialization::Given(best),
            ..SolverOptions::with_seed(seed)
        };
        let (_, trace) = solve(&inst, &opts).unwrap();
        assert_eq!(trace.final_set_cost(), cost);
    }
}

#[test]
fn solver_never_beats_exact_optimum() {
    for seed in 0..40 {
        let (model, agg) = random_problem(700 + seed, 2, 2, 2, 3);
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        let (_, best) = enumerate_optimum(&inst).unwrap();
        let (s, trace) = solve(&inst, &SolverOptions::with_seed(seed)).unwrap();
        assert!(trace.final_set_cost() >= best);
        assert!(trace.is_non_increasing());
        s.validate(&model, 3).unwrap();
    }
}

#[test]
fn reconstruction_matches_internal_line_sums() {
    let (model, agg) = random_problem(800, 3, 3, 2, 20);
    let inst = ProblemInstance::new(&model, &agg).unwrap();
    let d = nilm_core::solver::disaggregate(&model, &agg, &SolverOptions::with_seed(2)).unwrap();
    for t in 0..20 {
        let internal = inst.line_sums(&d.assignment, t);
        for r in 0..2 {
            assert!(rel_close(d.reconstruction[t][r], internal[r], 1e-9));
        }
    }
}
