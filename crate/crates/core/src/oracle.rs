//! Exact minimizers of the set cost, used to check the solver.
//!
//! [`enumerate_optimum`] walks every feasible assignment. [`viterbi_optimum`]
//! exploits the chain structure of the cost: the data term is separable per
//! tick and the smoothness term only couples consecutive ticks, so a forward
//! pass over joint appliance states followed by backtracking is exact.

use crate::error::{Error, Result};
use crate::setfn::{ProblemInstance, StateAssignment};

/// Largest number of feasible assignments [`enumerate_optimum`] will visit.
pub const ENUMERATION_LIMIT: f64 = (1u64 << 20) as f64;

/// Largest joint state space accepted by [`viterbi_optimum`].
pub const VITERBI_JOINT_LIMIT: usize = 4096;

/// Number of feasible assignments `(prod_i N_i)^T`, as a float since it
/// overflows quickly.
pub fn feasible_count(inst: &ProblemInstance) -> f64 {
    let joint: f64 = (0..inst.model().num_appliances())
        .map(|i| inst.model().num_states(i) as f64)
        .product();
    joint.powi(inst.horizon() as i32)
}

/// Global minimum of the set cost by exhaustive enumeration. Among equal
/// costs the lexicographically first assignment (time-major digits) wins.
pub fn enumerate_optimum(inst: &ProblemInstance) -> Result<(StateAssignment, f64)> {
    let count = feasible_count(inst);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "exhaustive enumeration",
            size: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let model = inst.model();
    let l = model.num_appliances();
    let radix: Vec<usize> = (0..l * inst.horizon()).map(|k| model.num_states(k % l)).collect();
    let mut current = StateAssignment::lowest(l, inst.horizon());
    let mut digits = vec![0usize; radix.len()];
    let mut best = (current.clone(), inst.set_cost(&current)?.f);
    loop {
        // odometer with the last digit moving fastest
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
        }
        current = StateAssignment::from_time_major(l, digits.clone())?;
        let cost = inst.set_cost(&current)?.f;
        if cost < best.1 {
            best = (current.clone(), cost);
        }
    }
}

/// Global minimum of the set cost by dynamic programming over joint states.
///
/// Joint states are numbered in mixed radix with appliance 0 most
/// significant, so index order is lexicographic order of the state tuple.
/// Ties in the forward pass go to the smallest predecessor index and the
/// final tick picks the smallest optimal joint state. The returned cost is
/// the set cost of the decoded assignment. Runs in `O(T M^2 L)` for `M`
/// joint states.
pub fn viterbi_optimum(inst: &ProblemInstance) -> Result<(StateAssignment, f64)> {
    let model = inst.model();
    let joint = model.joint_states();
    if joint > VITERBI_JOINT_LIMIT {
        return Err(Error::TooLarge {
            what: "joint-state dynamic programming",
            size: joint as f64,
            limit: VITERBI_JOINT_LIMIT as f64,
        });
    }
    let l = model.num_appliances();
    let lines = inst.num_lines();
    let horizon = inst.horizon();

    let mut tuples = vec![0usize; joint * l];
    for m in 0..joint {
        let mut rest = m;
        for i in (0..l).rev() {
            tuples[m * l + i] = rest % model.num_states(i);
            rest /= model.num_states(i);
        }
    }
    let tuple = |m: usize| &tuples[m * l..(m + 1) * l];

    // per-line consumption of each joint state
    let mut signature = vec![0.0; joint * lines];
    for m in 0..joint {
        for (i, &s) in tuple(m).iter().enumerate() {
            let j = model.offset(i) + s;
            for r in 0..lines {
                signature[m * lines + r] += inst.beta(r)[j];
            }
        }
    }
    let node_cost = |t: usize, m: usize| -> f64 {
        let y = inst.aggregate().row(t);
        (0..lines)
            .map(|r| {
                let sig = signature[m * lines + r];
                sig * sig - 2.0 * y[r] * sig
            })
            .sum()
    };
    let lambda: Vec<f64> = (0..l).map(|i| inst.appliance_lambda(i)).collect();
    let edge_table: Option<Vec<f64>> = (joint * joint <= 1 << 20).then(|| {
        let mut e = vec![0.0; joint * joint];
        for a in 0..joint {
            for b in 0..joint {
                e[a * joint + b] = edge(tuple(a), tuple(b), &lambda);
            }
        }
        e
    });
    let edge_cost = |a: usize, b: usize| match &edge_table {
        Some(e) => e[a * joint + b],
        None => edge(tuple(a), tuple(b), &lambda),
    };

    let mut score: Vec<f64> = (0..joint).map(|m| node_cost(0, m)).collect();
    let mut back = vec![0u32; horizon.saturating_sub(1) * joint];
    let mut next = vec![0.0; joint];
    for t in 1..horizon {
        for b in 0..joint {
            let mut best = (0usize, f64::INFINITY);
            for (a, &sa) in score.iter().enumerate() {
                let c = sa + edge_cost(a, b);
                if c < best.1 {
                    best = (a, c);
                }
            }
            back[(t - 1) * joint + b] = best.0 as u32;
            next[b] = best.1 + node_cost(t, b);
        }
        std::mem::swap(&mut score, &mut next);
    }
    let mut last = 0;
    for (m, &s) in score.iter().enumerate() {
        if s < score[last] {
            last = m;
        }
    }
    let mut path = vec![0usize; horizon];
    path[horizon - 1] = last;
    for t in (1..horizon).rev() {
        path[t - 1] = back[(t - 1) * joint + path[t]] as usize;
    }
    let states: Vec<usize> = path.iter().flat_map(|&m| tuple(m).iter().copied()).collect();
    let assignment = StateAssignment::from_time_major(l, states)?;
    let cost = inst.set_cost(&assignment)?.f;
    Ok((assignment, cost))
}

fn edge(a: &[usize], b: &[usize], lambda: &[f64]) -> f64 {
    -a.iter()
        .zip(b)
        .zip(lambda)
        .filter(|((x, y), _)| x == y)
        .map(|(_, l)| l)
        .sum::<f64>()
}
