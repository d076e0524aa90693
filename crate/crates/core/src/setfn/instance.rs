use crate::error::{Error, Result};

use super::model::{AggregateSeries, HouseholdModel, StateAssignment};

/// Value of the set cost at a feasible set together with its two submodular
/// parts, `f = g - h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetCost {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// A household model bound to a measurement window.
///
/// Holds the per-line scaled level vectors `beta[r]` (length `N`), the linear
/// coefficients `cbar` (`2 * sum_r y[t][r] * beta[r][n]`, stored at the flat
/// ground index `t * N + n`) and the smoothness weight of every position.
/// The quadratic forms of the cost are evaluated through these arrays; no
/// `NT x NT` matrix is ever formed.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    model: HouseholdModel,
    agg: AggregateSeries,
    beta: Vec<Vec<f64>>,
    beta_sq: Vec<f64>,
    cbar: Vec<f64>,
    lambda: Vec<f64>,
    lambda_diag: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(model: &HouseholdModel, agg: &AggregateSeries) -> Result<Self> {
        if agg.num_lines() != model.num_lines() {
            return Err(Error::Dimension {
                axis: "lines (aggregate columns vs model num_lines)",
                expected: model.num_lines(),
                found: agg.num_lines(),
            });
        }
        let n = model.width();
        let lines = model.num_lines();
        let mut beta = vec![vec![0.0; n]; lines];
        let mut lambda_diag = vec![0.0; n];
        for (i, a) in model.appliances().iter().enumerate() {
            let off = model.offset(i);
            for (k, &mu) in a.mu.iter().enumerate() {
                for r in 0..lines {
                    beta[r][off + k] = a.weights[r] * mu;
                }
                lambda_diag[off + k] = a.lambda;
            }
        }
        let beta_sq = (0..n)
            .map(|j| beta.iter().map(|b| b[j] * b[j]).sum())
            .collect();
        let horizon = agg.len();
        let mut cbar = vec![0.0; horizon * n];
        for t in 0..horizon {
            let row = agg.row(t);
            for j in 0..n {
                cbar[t * n + j] = (0..lines).map(|r| 2.0 * row[r] * beta[r][j]).sum();
            }
        }
        Ok(ProblemInstance {
            model: model.clone(),
            agg: agg.clone(),
            beta,
            beta_sq,
            cbar,
            lambda: model.appliances().iter().map(|a| a.lambda).collect(),
            lambda_diag,
        })
    }

    pub fn model(&self) -> &HouseholdModel {
        &self.model
    }

    pub fn aggregate(&self) -> &AggregateSeries {
        &self.agg
    }

    pub fn horizon(&self) -> usize {
        self.agg.len()
    }

    pub fn width(&self) -> usize {
        self.model.width()
    }

    pub fn num_lines(&self) -> usize {
        self.model.num_lines()
    }

    /// Size of the ground set, `N * T`.
    pub fn ground_size(&self) -> usize {
        self.width() * self.horizon()
    }

    pub fn beta(&self, line: usize) -> &[f64] {
        &self.beta[line]
    }

    /// `sum_r beta[r][n]^2` for each within-time position `n`.
    pub fn beta_sq(&self) -> &[f64] {
        &self.beta_sq
    }

    /// Linear coefficients indexed by flat ground index.
    pub fn cbar(&self) -> &[f64] {
        &self.cbar
    }

    pub fn lambda_diag(&self) -> &[f64] {
        &self.lambda_diag
    }

    pub fn appliance_lambda(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    /// Copy of the instance with every smoothness weight negated. The result
    /// no longer has a submodular `g`; used to exercise the submodularity
    /// checks.
    #[doc(hidden)]
    pub fn with_negated_lambda(&self) -> ProblemInstance {
        let mut out = self.clone();
        out.lambda.iter_mut().for_each(|l| *l = -*l);
        out.lambda_diag.iter_mut().for_each(|l| *l = -*l);
        out
    }

    /// `sum_{r,t} (y[t][r])^2`, the constant separating the residual cost
    /// from the set cost.
    pub fn energy_offset(&self) -> f64 {
        self.agg.rows().flatten().map(|y| y * y).sum()
    }

    /// Per-line reconstruction `beta[r] . z_t` at tick `t`.
    pub fn line_sums(&self, s: &StateAssignment, t: usize) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_lines()];
        for (i, &state) in s.at_time(t).iter().enumerate() {
            let j = self.model.offset(i) + state;
            for (r, b) in self.beta.iter().enumerate() {
                sums[r] += b[j];
            }
        }
        sums
    }

    fn smoothness_reward(&self, s: &StateAssignment) -> f64 {
        let mut reward = 0.0;
        for t in 1..s.horizon() {
            for (i, (&a, &b)) in s.at_time(t - 1).iter().zip(s.at_time(t)).enumerate() {
                if a == b {
                    reward += self.lambda[i];
                }
            }
        }
        reward
    }

    /// Set cost `f` and its parts `g`, `h` at a feasible assignment.
    pub fn set_cost(&self, s: &StateAssignment) -> Result<SetCost> {
        s.validate(&self.model, self.horizon())?;
        let g = -self.smoothness_reward(s);
        let mut h = 0.0;
        for t in 0..s.horizon() {
            let sums = self.line_sums(s, t);
            for (r, &sum) in sums.iter().enumerate() {
                h += -sum * sum + 2.0 * self.agg.get(t, r) * sum;
            }
        }
        Ok(SetCost { f: g - h, g, h })
    }

    /// Least-squares residual minus the smoothness reward. Differs from the
    /// set cost by [`energy_offset`](Self::energy_offset).
    pub fn residual_cost(&self, s: &StateAssignment) -> Result<f64> {
        s.validate(&self.model, self.horizon())?;
        let mut fit = 0.0;
        for t in 0..s.horizon() {
            let sums = self.line_sums(s, t);
            for (r, &sum) in sums.iter().enumerate() {
                let d = self.agg.get(t, r) - sum;
                fit += d * d;
            }
        }
        Ok(fit - self.smoothness_reward(s))
    }

    fn check_indicator(&self, ind: &[bool]) {
        assert_eq!(
            ind.len(),
            self.ground_size(),
            "indicator length must equal the ground set size"
        );
    }

    /// `g` at an arbitrary subset of the ground set.
    pub fn g_of(&self, ind: &[bool]) -> f64 {
        self.check_indicator(ind);
        let n = self.width();
        let mut acc = 0.0;
        for t in 1..self.horizon() {
            let prev = &ind[(t - 1) * n..t * n];
            let cur = &ind[t * n..(t + 1) * n];
            for j in 0..n {
                if prev[j] && cur[j] {
                    acc += self.lambda_diag[j];
                }
            }
        }
        -acc
    }

    /// `h` at an arbitrary subset of the ground set.
    pub fn h_of(&self, ind: &[bool]) -> f64 {
        self.check_indicator(ind);
        let n = self.width();
        let mut acc = 0.0;
        for t in 0..self.horizon() {
            let z = &ind[t * n..(t + 1) * n];
            for b in &self.beta {
                let dot: f64 = z.iter().zip(b).filter(|(&on, _)| on).map(|(_, v)| v).sum();
                acc -= dot * dot;
            }
            acc += z
                .iter()
                .zip(&self.cbar[t * n..(t + 1) * n])
                .filter(|(&on, _)| on)
                .map(|(_, c)| c)
                .sum::<f64>();
        }
        acc
    }

    /// `f = g - h` at an arbitrary subset of the ground set.
    pub fn f_of(&self, ind: &[bool]) -> f64 {
        self.g_of(ind) - self.h_of(ind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::model::ApplianceModel;

    fn single(lambda: f64) -> HouseholdModel {
        HouseholdModel::new(1, vec![ApplianceModel::new("a", vec![0.0, 100.0], vec![1.0], lambda)]).unwrap()
    }

    #[test]
    fn build_single_appliance() {
        let agg = AggregateSeries::from_rows(vec![vec![100.0]]).unwrap();
        let inst = ProblemInstance::new(&single(1.0), &agg).unwrap();
        assert_eq!(inst.beta(0), &[0.0, 100.0]);
        assert_eq!(inst.cbar(), &[0.0, 20000.0]);
    }

    #[test]
    fn build_split_pair_betas() {
        let model = HouseholdModel::new(
            2,
            vec![
                ApplianceModel::new("a", vec![0.0, 50.0], vec![1.0, 0.0], 1.0),
                ApplianceModel::new("b", vec![0.0, 80.0], vec![0.5, 0.5], 1.0),
            ],
        )
        .unwrap();
        let agg = AggregateSeries::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        let inst = ProblemInstance::new(&model, &agg).unwrap();
        assert_eq!(inst.beta(0), &[0.0, 50.0, 0.0, 40.0]);
        assert_eq!(inst.beta(1), &[0.0, 0.0, 0.0, 40.0]);
        assert_eq!(inst.lambda_diag(), &[1.0; 4]);
    }

    #[test]
    fn line_mismatch_names_axis() {
        let model = HouseholdModel::new(
            2,
            vec![ApplianceModel::new("a", vec![0.0, 50.0], vec![1.0, 0.0], 1.0)],
        )
        .unwrap();
        let agg = AggregateSeries::from_rows(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let err = ProblemInstance::new(&model, &agg).unwrap_err();
        assert!(err.to_string().contains("lines"), "{err}");
    }

    #[test]
    fn single_element_costs() {
        let agg = AggregateSeries::from_rows(vec![vec![100.0]]).unwrap();
        let inst = ProblemInstance::new(&single(1.0), &agg).unwrap();
        let on = StateAssignment::from_rows(&[vec![1]]).unwrap();
        let c = inst.set_cost(&on).unwrap();
        assert_eq!((c.f, c.g, c.h), (-10000.0, 0.0, 10000.0));
        assert_eq!(inst.residual_cost(&on).unwrap(), 0.0);
        let off = StateAssignment::from_rows(&[vec![0]]).unwrap();
        assert_eq!(inst.residual_cost(&off).unwrap(), 10000.0);
    }

    #[test]
    fn two_ticks_with_smoothness() {
        let agg = AggregateSeries::from_rows(vec![vec![100.0], vec![100.0]]).unwrap();
        let inst = ProblemInstance::new(&single(1.0), &agg).unwrap();
        let on = StateAssignment::from_rows(&[vec![1, 1]]).unwrap();
        assert_eq!(inst.set_cost(&on).unwrap().f, -20001.0);
        assert_eq!(inst.f_of(&on.indicator(inst.model())), -20001.0);
    }

    #[test]
    fn empty_set_is_zero() {
        let agg = AggregateSeries::from_rows(vec![vec![100.0], vec![30.0]]).unwrap();
        let inst = ProblemInstance::new(&single(2.0), &agg).unwrap();
        let empty = vec![false; inst.ground_size()];
        assert_eq!(inst.g_of(&empty), 0.0);
        assert_eq!(inst.h_of(&empty), 0.0);
    }

    #[test]
    fn infeasible_assignment_is_rejected() {
        let agg = AggregateSeries::from_rows(vec![vec![100.0]]).unwrap();
        let inst = ProblemInstance::new(&single(1.0), &agg).unwrap();
        let bad = StateAssignment::from_rows(&[vec![0, 1]]).unwrap();
        assert!(inst.set_cost(&bad).is_err());
        assert!(inst.residual_cost(&bad).is_err());
    }
}
