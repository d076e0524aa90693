//! Dense reference evaluator for the set cost. Builds the quadratic forms as
//! explicit Kronecker products over the flat ground set and never touches the
//! library's precomputed arrays.
#![allow(dead_code)]

use nilm_core::{AggregateSeries, HouseholdModel, StateAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<f64>>;

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = (a.len(), a[0].len());
    let (br, bc) = (b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn quad(m: &Matrix, z: &[bool]) -> f64 {
    let mut s = 0.0;
    for (i, row) in m.iter().enumerate() {
        if !z[i] {
            continue;
        }
        for (j, v) in row.iter().enumerate() {
            if z[j] {
                s += v;
            }
        }
    }
    s
}

fn lin(v: &[f64], z: &[bool]) -> f64 {
    v.iter().zip(z).filter(|(_, &b)| b).map(|(x, _)| x).sum()
}

/// `g(z) = -z^T (D ⊗ Λ) z` and `h(z) = sum_r -z^T (I ⊗ b_r b_r^T) z + 2 (y_r ⊗ b_r)^T z`
/// with `D` symmetric, 1/2 on the first super- and sub-diagonal.
pub struct DenseCost {
    pub smooth: Matrix,
    pub data_quad: Matrix,
    pub data_lin: Vec<f64>,
    pub sum_y_sq: f64,
}

impl DenseCost {
    pub fn new(model: &HouseholdModel, agg: &AggregateSeries) -> Self {
        let horizon = agg.len();
        let mut level_weights: Vec<Vec<f64>> = vec![Vec::new(); model.num_lines()];
        let mut lambdas = Vec::new();
        for a in model.appliances() {
            for &m in &a.mu {
                for (r, lw) in level_weights.iter_mut().enumerate() {
                    lw.push(a.weights[r] * m);
                }
                lambdas.push(a.lambda);
            }
        }
        let n = lambdas.len();
        let mut shift = vec![vec![0.0; horizon]; horizon];
        for t in 0..horizon.saturating_sub(1) {
            shift[t][t + 1] = 0.5;
            shift[t + 1][t] = 0.5;
        }
        let mut lambda_mat = vec![vec![0.0; n]; n];
        for k in 0..n {
            lambda_mat[k][k] = lambdas[k];
        }
        let smooth = kron(&shift, &lambda_mat);

        let mut ident = vec![vec![0.0; horizon]; horizon];
        for t in 0..horizon {
            ident[t][t] = 1.0;
        }
        let mut data_quad = vec![vec![0.0; n * horizon]; n * horizon];
        let mut data_lin = vec![0.0; n * horizon];
        let mut sum_y_sq = 0.0;
        for (r, b) in level_weights.iter().enumerate() {
            let outer: Matrix = b.iter().map(|x| b.iter().map(|y| x * y).collect()).collect();
            let block = kron(&ident, &outer);
            for i in 0..n * horizon {
                for j in 0..n * horizon {
                    data_quad[i][j] += block[i][j];
                }
            }
            let y_col: Matrix = (0..horizon).map(|t| vec![agg.get(t, r)]).collect();
            let b_col: Matrix = b.iter().map(|x| vec![*x]).collect();
            let yb = kron(&y_col, &b_col);
            for (k, v) in yb.iter().enumerate() {
                data_lin[k] += 2.0 * v[0];
            }
            sum_y_sq += (0..horizon).map(|t| agg.get(t, r).powi(2)).sum::<f64>();
        }
        DenseCost { smooth, data_quad, data_lin, sum_y_sq }
    }

    pub fn g(&self, z: &[bool]) -> f64 {
        -quad(&self.smooth, z)
    }

    pub fn h(&self, z: &[bool]) -> f64 {
        -quad(&self.data_quad, z) + lin(&self.data_lin, z)
    }

    pub fn f(&self, z: &[bool]) -> f64 {
        self.g(z) - self.h(z)
    }

    pub fn residual(&self, z: &[bool]) -> f64 {
        self.f(z) + self.sum_y_sq
    }
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

/// Random non-negative model and aggregate. `states` fixes every N_i.
pub fn random_problem(
    seed: u64,
    num_appliances: usize,
    states: usize,
    lines: usize,
    horizon: usize,
) -> (HouseholdModel, AggregateSeries) {
    use nilm_core::ApplianceModel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let appliances = (0..num_appliances)
        .map(|i| {
            let mut mu = vec![0.0];
            for _ in 1..states {
                mu.push(mu.last().unwrap() + 10.0 + 150.0 * rng.random::<f64>());
            }
            let raw: Vec<f64> = (0..lines).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let lambda = 100.0 * rng.random::<f64>();
            ApplianceModel::new(format!("a{i}"), mu, raw.iter().map(|w| w / total).collect(), lambda)
        })
        .collect();
    let model = HouseholdModel::new(lines, appliances).unwrap();
    let rows = (0..horizon)
        .map(|_| (0..lines).map(|_| 400.0 * rng.random::<f64>()).collect())
        .collect();
    (model, AggregateSeries::from_rows(rows).unwrap())
}

pub fn random_assignment(model: &HouseholdModel, horizon: usize, rng: &mut impl Rng) -> StateAssignment {
    let rows: Vec<Vec<usize>> = (0..model.num_appliances())
        .map(|i| (0..horizon).map(|_| rng.random_range(0..model.num_states(i))).collect())
        .collect();
    StateAssignment::from_rows(&rows).unwrap()
}

/// Every feasible assignment, in no particular order.
pub fn all_assignments(model: &HouseholdModel, horizon: usize) -> Vec<StateAssignment> {
    let l = model.num_appliances();
    let mut out = vec![Vec::new()];
    for k in 0..l * horizon {
        let n = model.num_states(k % l);
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..n).map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|s| StateAssignment::from_time_major(l, s).unwrap()).collect()
}
