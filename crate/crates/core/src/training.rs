//! Learning appliance models from sub-metered training data.
//!
//! State levels come from a one-dimensional Lloyd-Max quantizer run on each
//! appliance's readings. Connectivity weights solve a least-squares fit of
//! the per-line aggregates with every appliance's row of weights constrained
//! to the probability simplex.

use crate::error::{Error, Result};
use crate::setfn::{AggregateSeries, ApplianceModel, HouseholdModel};

const LLOYD_MAX_ITERS: usize = 1000;

/// Sub-metered readings, one row per appliance, all on the same time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceSeries {
    pub names: Vec<String>,
    /// `values[i][t]`, watts.
    pub values: Vec<Vec<f64>>,
    pub timestamps: Option<Vec<i64>>,
}

impl ApplianceSeries {
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Dimension {
                axis: "appliance names vs series",
                expected: values.len(),
                found: names.len(),
            });
        }
        if let Some(first) = values.first() {
            if let Some(bad) = values.iter().find(|v| v.len() != first.len()) {
                return Err(Error::Dimension {
                    axis: "appliance series length",
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "appliance readings must be finite and non-negative".into(),
            ));
        }
        Ok(ApplianceSeries {
            names,
            values,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<i64>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::Dimension {
                axis: "timestamps",
                expected: self.len(),
                found: timestamps.len(),
            });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn num_appliances(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, start: usize, end: usize) -> ApplianceSeries {
        ApplianceSeries {
            names: self.names.clone(),
            values: self.values.iter().map(|v| v[start..end].to_vec()).collect(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[start..end].to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantization {
    /// Centroids, ascending.
    pub levels: Vec<f64>,
    pub iterations: usize,
    /// Fewer distinct values than requested levels; `levels` holds the
    /// distinct values padded with copies of the largest.
    pub degenerate: bool,
}

fn nearest(centroids: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate().skip(1) {
        if (x - c).abs() < (x - centroids[best]).abs() {
            best = j;
        }
    }
    best
}

/// Lloyd-Max quantization of a scalar sample into `k` levels.
///
/// Centroids start at the `(2j - 1) / (2k)` quantiles and alternate between
/// nearest-centroid partitioning (ties to the lower index) and centroid
/// means until the partition stops changing. An empty cell is reseeded at
/// the sample with the largest quantization error.
pub fn lloyd_max_quantize(series: &[f64], k: usize) -> Result<Quantization> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 levels, got {k}")));
    }
    if series.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot form {k} levels",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < k {
        let top = *distinct.last().unwrap();
        distinct.resize(k, top);
        return Ok(Quantization {
            levels: distinct,
            iterations: 0,
            degenerate: true,
        });
    }

    let n = sorted.len();
    let mut centroids: Vec<f64> = (0..k)
        .map(|j| sorted[((2 * j + 1) * n / (2 * k)).min(n - 1)])
        .collect();
    let mut cells = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < LLOYD_MAX_ITERS {
        iterations += 1;
        let mut changed = false;
        for (x, cell) in sorted.iter().zip(cells.iter_mut()) {
            let c = nearest(&centroids, *x);
            if c != *cell {
                *cell = c;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in sorted.iter().zip(&cells) {
            sums[c] += x;
            counts[c] += 1;
        }
        let mut reseeded = false;
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut worst = 0;
            let mut worst_err = -1.0;
            for (idx, (x, &c)) in sorted.iter().zip(&cells).enumerate() {
                let err = (x - centroids[c]).abs();
                if counts[c] > 1 && err > worst_err {
                    worst = idx;
                    worst_err = err;
                }
            }
            let donor = cells[worst];
            counts[donor] -= 1;
            sums[donor] -= sorted[worst];
            cells[worst] = j;
            counts[j] = 1;
            sums[j] = sorted[worst];
            reseeded = true;
        }
        for j in 0..k {
            centroids[j] = sums[j] / counts[j] as f64;
        }
        if !changed && !reseeded {
            break;
        }
    }
    centroids.sort_by(f64::total_cmp);
    Ok(Quantization {
        levels: centroids,
        iterations,
        degenerate: false,
    })
}

/// Euclidean projection onto `{w >= 0, sum w = 1}` by sorting and
/// thresholding.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if uk - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityOptions {
    pub max_iters: usize,
    /// Stop once an update moves no weight by more than this.
    pub tol: f64,
    pub power_iters: usize,
    pub record_objective: bool,
}

impl Default for ConnectivityOptions {
    fn default() -> Self {
        ConnectivityOptions {
            max_iters: 50_000,
            tol: 1e-10,
            power_iters: 50,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityFit {
    /// `weights[i][r]`, each row on the simplex.
    pub weights: Vec<Vec<f64>>,
    /// Appliances whose series is identically zero; their rows are uniform.
    pub zero_rows: Vec<usize>,
    pub iterations: usize,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
}

/// `sum_{r,t} (y[t][r] - sum_i w[i][r] x[i][t])^2`.
pub fn connectivity_objective(x: &[Vec<f64>], agg: &AggregateSeries, w: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for t in 0..agg.len() {
        for r in 0..agg.num_lines() {
            let fit: f64 = x.iter().zip(w).map(|(xi, wi)| wi[r] * xi[t]).sum();
            let d = agg.get(t, r) - fit;
            acc += d * d;
        }
    }
    acc
}

pub fn fit_connectivity(x: &[Vec<f64>], agg: &AggregateSeries) -> Result<ConnectivityFit> {
    fit_connectivity_with(x, agg, &ConnectivityOptions::default())
}

/// Projected gradient with step `1 / L_f`, `L_f = 2 lambda_max(X X^T)`
/// estimated by power iteration, on the product of per-appliance simplices.
pub fn fit_connectivity_with(
    x: &[Vec<f64>],
    agg: &AggregateSeries,
    opts: &ConnectivityOptions,
) -> Result<ConnectivityFit> {
    let lines = agg.num_lines();
    let horizon = agg.len();
    if let Some(bad) = x.iter().find(|xi| xi.len() != horizon) {
        return Err(Error::Dimension {
            axis: "appliance series vs aggregate length",
            expected: horizon,
            found: bad.len(),
        });
    }
    let uniform = vec![1.0 / lines as f64; lines];
    let mut weights = vec![uniform.clone(); x.len()];
    let zero_rows: Vec<usize> = (0..x.len()).filter(|&i| x[i].iter().all(|&v| v == 0.0)).collect();
    let active: Vec<usize> = (0..x.len()).filter(|i| !zero_rows.contains(i)).collect();
    let a = active.len();

    let mut gram = vec![0.0; a * a];
    let mut cross = vec![0.0; a * lines];
    for (p, &i) in active.iter().enumerate() {
        for (q, &j) in active.iter().enumerate().skip(p) {
            let dot: f64 = x[i].iter().zip(&x[j]).map(|(u, v)| u * v).sum();
            gram[p * a + q] = dot;
            gram[q * a + p] = dot;
        }
        for r in 0..lines {
            cross[p * lines + r] = (0..horizon).map(|t| x[i][t] * agg.get(t, r)).sum();
        }
    }
    let y_energy: f64 = agg.rows().flatten().map(|v| v * v).sum();
    let objective = |w: &[f64]| -> f64 {
        let mut obj = y_energy;
        for r in 0..lines {
            for p in 0..a {
                obj -= 2.0 * w[p * lines + r] * cross[p * lines + r];
                for q in 0..a {
                    obj += w[p * lines + r] * gram[p * a + q] * w[q * lines + r];
                }
            }
        }
        obj
    };

    let mut w: Vec<f64> = vec![1.0 / lines as f64; a * lines];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let lambda_max = power_iteration(&gram, a, opts.power_iters);
    if a > 0 && lambda_max > 0.0 {
        let step = 1.0 / (2.0 * lambda_max);
        let mut grad = vec![0.0; a * lines];
        if opts.record_objective {
            trace.push(objective(&w));
        }
        while iterations < opts.max_iters {
            iterations += 1;
            for p in 0..a {
                for r in 0..lines {
                    let gw: f64 = (0..a).map(|q| gram[p * a + q] * w[q * lines + r]).sum();
                    grad[p * lines + r] = 2.0 * (gw - cross[p * lines + r]);
                }
            }
            let mut moved: f64 = 0.0;
            for p in 0..a {
                let row: Vec<f64> = (0..lines)
                    .map(|r| w[p * lines + r] - step * grad[p * lines + r])
                    .collect();
                let projected = simplex_project(&row);
                for r in 0..lines {
                    moved = moved.max((projected[r] - w[p * lines + r]).abs());
                    w[p * lines + r] = projected[r];
                }
            }
            if opts.record_objective {
                trace.push(objective(&w));
            }
            if moved < opts.tol {
                break;
            }
        }
    }
    for (p, &i) in active.iter().enumerate() {
        weights[i] = w[p * lines..(p + 1) * lines].to_vec();
    }
    let objective = connectivity_objective(x, agg, &weights);
    Ok(ConnectivityFit {
        weights,
        zero_rows,
        iterations,
        objective,
        objective_trace: trace,
    })
}

fn power_iteration(m: &[f64], n: usize, steps: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..steps.max(1) {
        let mv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect();
        let norm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        v = mv.into_iter().map(|x| x / norm).collect();
    }
    let mv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect();
    let rayleigh: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
    estimate.max(rayleigh)
}

/// Learned model plus anything that needed a fallback.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: HouseholdModel,
    pub warnings: Vec<String>,
}

/// Quantizes each appliance's readings into its number of states, then fits
/// connectivity weights against the raw readings.
pub fn train_model(
    appliances: &ApplianceSeries,
    agg: &AggregateSeries,
    states_per_appliance: &[usize],
    lambdas: &[f64],
) -> Result<TrainedModel> {
    let l = appliances.num_appliances();
    if states_per_appliance.len() != l {
        return Err(Error::Dimension {
            axis: "states per appliance",
            expected: l,
            found: states_per_appliance.len(),
        });
    }
    if lambdas.len() != l {
        return Err(Error::Dimension {
            axis: "smoothness weights",
            expected: l,
            found: lambdas.len(),
        });
    }
    if appliances.len() != agg.len() {
        return Err(Error::Dimension {
            axis: "training length (appliances vs aggregate)",
            expected: agg.len(),
            found: appliances.len(),
        });
    }
    let mut warnings = Vec::new();
    let mut levels = Vec::with_capacity(l);
    for (i, series) in appliances.values.iter().enumerate() {
        let q = lloyd_max_quantize(series, states_per_appliance[i])?;
        if q.degenerate {
            warnings.push(format!(
                "appliance `{}` has fewer than {} distinct readings; levels padded",
                appliances.names[i], states_per_appliance[i]
            ));
        }
        levels.push(q.levels);
    }
    let fit = fit_connectivity(&appliances.values, agg)?;
    for &i in &fit.zero_rows {
        warnings.push(format!(
            "appliance `{}` never draws power; connectivity set uniform",
            appliances.names[i]
        ));
    }
    let models = appliances
        .names
        .iter()
        .zip(levels)
        .zip(fit.weights)
        .zip(lambdas)
        .map(|(((name, mu), weights), &lambda)| ApplianceModel::new(name.clone(), mu, weights, lambda))
        .collect();
    Ok(TrainedModel {
        model: HouseholdModel::new(agg.num_lines(), models)?,
        warnings,
    })
}
