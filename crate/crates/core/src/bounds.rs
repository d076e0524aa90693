//! Modular bounds of the two submodular parts of the set cost around a
//! feasible set `Y`.
//!
//! * [`supergradient_g`] gives a modular upper bound of `g` that is tight at `Y`.
//! * [`subgradient_h`] runs Edmonds' greedy procedure along a chain induced by a
//!   permutation whose head enumerates `Y`, giving a modular lower bound of `h`
//!   that is tight on every prefix of the chain.
//!
//! Both are computed in closed form from the instance arrays. The [`naive`]
//! submodule computes the same vectors from their definitions by evaluating
//! `g` and `h` on whole subsets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setfn::{ProblemInstance, StateAssignment};

/// Weights of a modular set function over the flat ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularVector {
    pub values: Vec<f64>,
}

impl ModularVector {
    pub fn zeros(len: usize) -> Self {
        ModularVector { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum_{j in S} values[j]` for an indicator of `S`.
    pub fn eval(&self, ind: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(ind)
            .filter(|(_, &on)| on)
            .map(|(v, _)| v)
            .sum()
    }

    pub fn sum_over(&self, elements: &[usize]) -> f64 {
        elements.iter().map(|&j| self.values[j]).sum()
    }
}

/// An affine modular function `S -> anchor + sum_{j in S} vector[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularBound {
    pub vector: ModularVector,
    pub anchor: f64,
}

impl ModularBound {
    pub fn eval(&self, ind: &[bool]) -> f64 {
        self.anchor + self.vector.eval(ind)
    }
}

/// How positions after the head of a chain permutation are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Remaining elements in ascending flat order.
    Deterministic,
    /// Remaining elements in a seeded random order.
    #[default]
    Shuffled,
}

/// Ordering of the ground set whose first `head_len` entries are a given
/// feasible set. Prefixes form the chain `S(0) ⊂ S(1) ⊂ ... ⊂ S(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub order: Vec<usize>,
    pub head_len: usize,
}

impl Permutation {
    /// Indicator of the chain element `S(i)`, the first `i` entries.
    pub fn prefix_indicator(&self, i: usize) -> Vec<bool> {
        let mut ind = vec![false; self.order.len()];
        for &j in &self.order[..i] {
            ind[j] = true;
        }
        ind
    }
}

/// Builds a chain permutation for `y`: its elements by (tick, appliance)
/// first, then the rest of the ground set according to `tail`.
pub fn permutation_from_set(
    inst: &ProblemInstance,
    y: &StateAssignment,
    seed: u64,
    tail: TailPolicy,
) -> Result<Permutation> {
    y.validate(inst.model(), inst.horizon())?;
    let head = y.flat_indices(inst.model());
    let mut in_head = vec![false; inst.ground_size()];
    for &j in &head {
        in_head[j] = true;
    }
    let mut rest: Vec<usize> = (0..inst.ground_size()).filter(|&j| !in_head[j]).collect();
    if tail == TailPolicy::Shuffled {
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let head_len = head.len();
    let mut order = head;
    order.extend(rest);
    Ok(Permutation { order, head_len })
}

/// Closed-form supergradient of `g` at `y`.
///
/// Entries outside `y` vanish because `g` of a singleton is zero. The entry of
/// the element selected for appliance `i` at tick `t` is `-lambda_i` times the
/// number of neighbouring ticks (`t - 1`, `t + 1`) holding the same state.
pub fn supergradient_g(inst: &ProblemInstance, y: &StateAssignment) -> Result<ModularVector> {
    let model = inst.model();
    let horizon = inst.horizon();
    y.validate(model, horizon)?;
    let n = inst.width();
    let mut u = ModularVector::zeros(inst.ground_size());
    for t in 0..horizon {
        for (i, &s) in y.at_time(t).iter().enumerate() {
            let mut matches = 0u32;
            if t > 0 && y.get(i, t - 1) == s {
                matches += 1;
            }
            if t + 1 < horizon && y.get(i, t + 1) == s {
                matches += 1;
            }
            if matches > 0 {
                u.values[t * n + model.offset(i) + s] = -inst.appliance_lambda(i) * f64::from(matches);
            }
        }
    }
    Ok(u)
}

/// Modular upper bound `u(S) = g(Y) + u(S) - u(Y)` of `g`, tight at `y`.
pub fn upper_bound_of_g(inst: &ProblemInstance, y: &StateAssignment) -> Result<ModularBound> {
    let vector = supergradient_g(inst, y)?;
    let g_y = inst.set_cost(y)?.g;
    let anchor = g_y - vector.sum_over(&y.flat_indices(inst.model()));
    Ok(ModularBound { vector, anchor })
}

fn check_chain_head(inst: &ProblemInstance, y: &StateAssignment, pi: &Permutation) -> Result<()> {
    let size = inst.ground_size();
    if pi.order.len() != size {
        return Err(Error::Dimension {
            axis: "permutation length",
            expected: size,
            found: pi.order.len(),
        });
    }
    let mut seen = vec![false; size];
    for &j in &pi.order {
        if j >= size || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidInput("order is not a permutation of the ground set".into()));
        }
    }
    let target = y.indicator(inst.model());
    let head_ok = pi.head_len == y.num_appliances() * y.horizon()
        && pi.order[..pi.head_len].iter().all(|&j| target[j]);
    if !head_ok {
        return Err(Error::InvalidInput(
            "permutation head does not enumerate the anchor set".into(),
        ));
    }
    Ok(())
}

/// Closed-form greedy subgradient of `h` along the chain of `pi`.
///
/// Walking the permutation, the entry of element `(n, t)` is
/// `-sum_r beta_r(n)^2 - 2 sum_r beta_r(n) acc_r(t) + cbar(n, t)` where
/// `acc_r(t)` is `beta_r . z_t` of the elements already visited. Each step
/// costs `O(R)`, the whole vector `O(N T R)`.
pub fn subgradient_h(
    inst: &ProblemInstance,
    y: &StateAssignment,
    pi: &Permutation,
) -> Result<ModularVector> {
    y.validate(inst.model(), inst.horizon())?;
    check_chain_head(inst, y, pi)?;
    Ok(subgradient_h_unchecked(inst, &pi.order))
}

pub(crate) fn subgradient_h_unchecked(inst: &ProblemInstance, order: &[usize]) -> ModularVector {
    let n = inst.width();
    let lines = inst.num_lines();
    let beta: Vec<&[f64]> = (0..lines).map(|r| inst.beta(r)).collect();
    let beta_sq = inst.beta_sq();
    let cbar = inst.cbar();
    let mut acc = vec![0.0; inst.horizon() * lines];
    let mut v = ModularVector::zeros(order.len());
    for &j in order {
        let t = j / n;
        let within = j % n;
        let acc_t = &mut acc[t * lines..(t + 1) * lines];
        let mut cross = 0.0;
        for r in 0..lines {
            cross += beta[r][within] * acc_t[r];
        }
        v.values[j] = -beta_sq[within] - 2.0 * cross + cbar[j];
        for r in 0..lines {
            acc_t[r] += beta[r][within];
        }
    }
    v
}

/// Modular upper bound of the set cost `f` around `y`:
/// `M(S) = anchor + sum_{j in S} m[j]` with `m = u_g - v_h`. Dominates `f`
/// everywhere and equals it at `y`.
pub fn modular_upper_bound_of_f(
    inst: &ProblemInstance,
    y: &StateAssignment,
    pi: &Permutation,
) -> Result<ModularBound> {
    let upper = upper_bound_of_g(inst, y)?;
    let lower = subgradient_h(inst, y, pi)?;
    let values = upper
        .vector
        .values
        .iter()
        .zip(&lower.values)
        .map(|(u, v)| u - v)
        .collect();
    Ok(ModularBound {
        vector: ModularVector { values },
        anchor: upper.anchor,
    })
}

/// Definitional versions of the bounds, evaluating `g` and `h` on whole
/// subsets. Quadratic in the ground-set size; meant for verification.
pub mod naive {
    use super::*;

    /// `g(Y) - g(Y \ {j})` for `j` in `Y`, `g({j}) - g(∅)` otherwise.
    pub fn supergradient_g(inst: &ProblemInstance, y: &StateAssignment) -> Result<ModularVector> {
        y.validate(inst.model(), inst.horizon())?;
        let size = inst.ground_size();
        let mut ind = y.indicator(inst.model());
        let g_y = inst.g_of(&ind);
        let empty = vec![false; size];
        let g_empty = inst.g_of(&empty);
        let mut single = empty;
        let mut u = ModularVector::zeros(size);
        for j in 0..size {
            if ind[j] {
                ind[j] = false;
                u.values[j] = g_y - inst.g_of(&ind);
                ind[j] = true;
            } else {
                single[j] = true;
                u.values[j] = inst.g_of(&single) - g_empty;
                single[j] = false;
            }
        }
        Ok(u)
    }

    /// `h(S(i)) - h(S(i - 1))` along the chain of `pi`, with `h(S(0)) = 0`.
    pub fn subgradient_h(
        inst: &ProblemInstance,
        y: &StateAssignment,
        pi: &Permutation,
    ) -> Result<ModularVector> {
        y.validate(inst.model(), inst.horizon())?;
        check_chain_head(inst, y, pi)?;
        let mut ind = vec![false; inst.ground_size()];
        let mut prev = inst.h_of(&ind);
        let mut v = ModularVector::zeros(inst.ground_size());
        for &j in &pi.order {
            ind[j] = true;
            let cur = inst.h_of(&ind);
            v.values[j] = cur - prev;
            prev = cur;
        }
        Ok(v)
    }
}
