use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

pub const DEFAULT_LAMBDA: f64 = 1.0;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

/// Finite-state description of one appliance.
///
/// `mu` holds the consumption level (watts) of each state, `weights` the
/// fraction of the appliance's power drawn from each line, and `lambda` the
/// weight of the reward for staying in the same state between ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplianceModel {
    pub name: String,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

impl ApplianceModel {
    pub fn new(name: impl Into<String>, mu: Vec<f64>, weights: Vec<f64>, lambda: f64) -> Self {
        ApplianceModel {
            name: name.into(),
            mu,
            weights,
            lambda,
        }
    }

    pub fn num_states(&self) -> usize {
        self.mu.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHouseholdModel {
    num_lines: usize,
    appliances: Vec<ApplianceModel>,
}

/// The set of appliances of one household together with the number of
/// measured supply lines. Owns the layout of the ground set: appliance `i`
/// occupies the contiguous block `[offset(i), offset(i) + N_i)` inside every
/// time slice of width `N = width()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHouseholdModel", into = "RawHouseholdModel")]
pub struct HouseholdModel {
    num_lines: usize,
    appliances: Vec<ApplianceModel>,
    offsets: Vec<usize>,
    width: usize,
}

impl TryFrom<RawHouseholdModel> for HouseholdModel {
    type Error = Error;

    fn try_from(raw: RawHouseholdModel) -> Result<Self> {
        HouseholdModel::new(raw.num_lines, raw.appliances)
    }
}

impl From<HouseholdModel> for RawHouseholdModel {
    fn from(m: HouseholdModel) -> Self {
        RawHouseholdModel {
            num_lines: m.num_lines,
            appliances: m.appliances,
        }
    }
}

impl HouseholdModel {
    /// Validates the appliances and stores every `mu` in ascending order.
    pub fn new(num_lines: usize, mut appliances: Vec<ApplianceModel>) -> Result<Self> {
        if num_lines == 0 {
            return Err(Error::InvalidModel("num_lines must be at least 1".into()));
        }
        if appliances.is_empty() {
            return Err(Error::InvalidModel("model has no appliances".into()));
        }
        let mut names = std::collections::HashSet::new();
        for a in appliances.iter_mut() {
            if !names.insert(a.name.clone()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate appliance name `{}`",
                    a.name
                )));
            }
            if a.mu.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` needs at least 2 states, has {}",
                    a.name,
                    a.mu.len()
                )));
            }
            if a.mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` has a negative or non-finite level",
                    a.name
                )));
            }
            if a.weights.len() != num_lines {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` has {} connectivity weights for {} lines",
                    a.name,
                    a.weights.len(),
                    num_lines
                )));
            }
            if a.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` has a connectivity weight outside [0, 1]",
                    a.name
                )));
            }
            let sum: f64 = a.weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` connectivity weights sum to {sum}",
                    a.name
                )));
            }
            if !a.lambda.is_finite() || a.lambda < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "appliance `{}` has negative smoothness weight",
                    a.name
                )));
            }
            a.mu.sort_by(f64::total_cmp);
        }
        let mut offsets = Vec::with_capacity(appliances.len());
        let mut width = 0;
        for a in &appliances {
            offsets.push(width);
            width += a.num_states();
        }
        Ok(HouseholdModel {
            num_lines,
            appliances,
            offsets,
            width,
        })
    }

    pub fn num_lines(&self) -> usize {
        self.num_lines
    }

    pub fn num_appliances(&self) -> usize {
        self.appliances.len()
    }

    pub fn appliances(&self) -> &[ApplianceModel] {
        &self.appliances
    }

    pub fn appliance(&self, i: usize) -> &ApplianceModel {
        &self.appliances[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.appliances.iter().map(|a| a.name.clone()).collect()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn num_states(&self, i: usize) -> usize {
        self.appliances[i].num_states()
    }

    /// Total number of states across appliances (`N`).
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of joint states `Π N_i`, saturating at `usize::MAX`.
    pub fn joint_states(&self) -> usize {
        self.appliances
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.num_states()))
            .unwrap_or(usize::MAX)
    }

    /// Replaces every appliance's smoothness weight.
    pub fn set_lambda_all(&mut self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidModel(format!(
                "smoothness weight must be >= 0, got {lambda}"
            )));
        }
        for a in &mut self.appliances {
            a.lambda = lambda;
        }
        Ok(())
    }

    pub fn flat_index(&self, idx: GroundIndex) -> usize {
        idx.time * self.width + self.offsets[idx.appliance] + idx.state
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn ground_index(&self, flat: usize) -> GroundIndex {
        let time = flat / self.width;
        let within = flat % self.width;
        let appliance = self.appliance_of(within);
        GroundIndex {
            appliance,
            state: within - self.offsets[appliance],
            time,
        }
    }

    /// Appliance owning a within-time position `n < width()`.
    pub fn appliance_of(&self, within: usize) -> usize {
        // offsets[0] == 0 so the partition point is at least 1
        self.offsets.partition_point(|&o| o <= within) - 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Position of one element of the ground set: appliance `appliance` in state
/// `state` at tick `time` (all zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundIndex {
    pub appliance: usize,
    pub state: usize,
    pub time: usize,
}

/// Per-line aggregate power readings, `T` rows of `R` values.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    num_lines: usize,
    values: Vec<f64>,
    timestamps: Option<Vec<i64>>,
}

impl AggregateSeries {
    /// Builds a series from rows of per-line readings.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_lines = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || num_lines == 0 {
            return Err(Error::InvalidInput("aggregate series is empty".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * num_lines);
        for row in &rows {
            if row.len() != num_lines {
                return Err(Error::Dimension {
                    axis: "aggregate lines",
                    expected: num_lines,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::check_values(&values)?;
        Ok(AggregateSeries {
            num_lines,
            values,
            timestamps: None,
        })
    }

    pub fn from_flat(num_lines: usize, values: Vec<f64>) -> Result<Self> {
        if num_lines == 0 || values.is_empty() || !values.len().is_multiple_of(num_lines) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of {num_lines} lines",
                values.len()
            )));
        }
        Self::check_values(&values)?;
        Ok(AggregateSeries {
            num_lines,
            values,
            timestamps: None,
        })
    }

    fn check_values(values: &[f64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "aggregate readings must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn with_timestamps(mut self, timestamps: Vec<i64>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::Dimension {
                axis: "timestamps",
                expected: self.len(),
                found: timestamps.len(),
            });
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "timestamps must be strictly increasing".into(),
            ));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.num_lines
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_lines(&self) -> usize {
        self.num_lines
    }

    pub fn get(&self, t: usize, r: usize) -> f64 {
        self.values[t * self.num_lines + r]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_lines..(t + 1) * self.num_lines]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.num_lines)
    }

    /// Sum over lines at tick `t`.
    pub fn total(&self, t: usize) -> f64 {
        self.row(t).iter().sum()
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    /// Sub-window `[start, end)`, timestamps included.
    pub fn slice(&self, start: usize, end: usize) -> AggregateSeries {
        AggregateSeries {
            num_lines: self.num_lines,
            values: self.values[start * self.num_lines..end * self.num_lines].to_vec(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[start..end].to_vec()),
        }
    }
}

/// One state per appliance per tick, stored time-major. Being a
/// `StateAssignment` is exactly membership in the partition-constrained
/// feasible family, provided the state indices fit the model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateAssignment {
    num_appliances: usize,
    horizon: usize,
    states: Vec<usize>,
}

impl StateAssignment {
    /// Every appliance in state 0 at every tick.
    pub fn lowest(num_appliances: usize, horizon: usize) -> Self {
        StateAssignment {
            num_appliances,
            horizon,
            states: vec![0; num_appliances * horizon],
        }
    }

    /// Builds from `L` per-appliance rows of length `T`.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let l = rows.len();
        let t = rows.first().map(Vec::len).unwrap_or(0);
        if l == 0 || t == 0 {
            return Err(Error::InvalidInput("empty state assignment".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != t) {
            return Err(Error::Dimension {
                axis: "assignment horizon",
                expected: t,
                found: bad.len(),
            });
        }
        let mut states = vec![0; l * t];
        for (i, row) in rows.iter().enumerate() {
            for (tt, &s) in row.iter().enumerate() {
                states[tt * l + i] = s;
            }
        }
        Ok(StateAssignment {
            num_appliances: l,
            horizon: t,
            states,
        })
    }

    /// Builds from a time-major buffer (`states[t * L + i]`).
    pub fn from_time_major(num_appliances: usize, states: Vec<usize>) -> Result<Self> {
        if num_appliances == 0 || states.is_empty() || !states.len().is_multiple_of(num_appliances) {
            return Err(Error::InvalidInput(
                "time-major buffer does not match appliance count".into(),
            ));
        }
        Ok(StateAssignment {
            num_appliances,
            horizon: states.len() / num_appliances,
            states,
        })
    }

    pub fn num_appliances(&self) -> usize {
        self.num_appliances
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, appliance: usize, t: usize) -> usize {
        self.states[t * self.num_appliances + appliance]
    }

    pub fn set(&mut self, appliance: usize, t: usize, state: usize) {
        self.states[t * self.num_appliances + appliance] = state;
    }

    /// States of all appliances at tick `t`.
    pub fn at_time(&self, t: usize) -> &[usize] {
        &self.states[t * self.num_appliances..(t + 1) * self.num_appliances]
    }

    pub fn as_time_major(&self) -> &[usize] {
        &self.states
    }

    /// Ticks `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> StateAssignment {
        let l = self.num_appliances;
        StateAssignment {
            num_appliances: l,
            horizon: end - start,
            states: self.states[start * l..end * l].to_vec(),
        }
    }

    pub fn row(&self, appliance: usize) -> Vec<usize> {
        (0..self.horizon).map(|t| self.get(appliance, t)).collect()
    }

    /// Checks the assignment against a model and horizon.
    pub fn validate(&self, model: &HouseholdModel, horizon: usize) -> Result<()> {
        if self.num_appliances != model.num_appliances() {
            return Err(Error::Infeasible(format!(
                "assignment covers {} appliances, model has {}",
                self.num_appliances,
                model.num_appliances()
            )));
        }
        if self.horizon != horizon {
            return Err(Error::Infeasible(format!(
                "assignment spans {} ticks, expected {horizon}",
                self.horizon
            )));
        }
        for t in 0..self.horizon {
            for (i, &s) in self.at_time(t).iter().enumerate() {
                if s >= model.num_states(i) {
                    return Err(Error::Infeasible(format!(
                        "appliance {i} at tick {t} is in state {s} of {}",
                        model.num_states(i)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flat ground-set indices of the selected elements, ascending. Ascending
    /// flat order is the same as ordering by (tick, appliance).
    pub fn flat_indices(&self, model: &HouseholdModel) -> Vec<usize> {
        let n = model.width();
        let mut out = Vec::with_capacity(self.states.len());
        for t in 0..self.horizon {
            for (i, &s) in self.at_time(t).iter().enumerate() {
                out.push(t * n + model.offset(i) + s);
            }
        }
        out
    }

    /// Indicator vector over the ground set (length `N * T`).
    pub fn indicator(&self, model: &HouseholdModel) -> Vec<bool> {
        let mut ind = vec![false; model.width() * self.horizon];
        for j in self.flat_indices(model) {
            ind[j] = true;
        }
        ind
    }

    /// Recovers an assignment from an indicator, if it selects exactly one
    /// state per appliance per tick.
    pub fn from_indicator(model: &HouseholdModel, ind: &[bool]) -> Option<Self> {
        let n = model.width();
        if n == 0 || !ind.len().is_multiple_of(n) {
            return None;
        }
        let horizon = ind.len() / n;
        let l = model.num_appliances();
        let mut states = vec![0; l * horizon];
        for t in 0..horizon {
            for i in 0..l {
                let block = &ind[t * n + model.offset(i)..t * n + model.offset(i) + model.num_states(i)];
                let mut chosen = block.iter().enumerate().filter(|(_, &b)| b);
                let (s, _) = chosen.next()?;
                if chosen.next().is_some() {
                    return None;
                }
                states[t * l + i] = s;
            }
        }
        Some(StateAssignment {
            num_appliances: l,
            horizon,
            states,
        })
    }

    /// Per-appliance power `mu_i(s(i, t))`, `L` rows of length `T`.
    pub fn power(&self, model: &HouseholdModel) -> Vec<Vec<f64>> {
        (0..self.num_appliances)
            .map(|i| {
                let mu = &model.appliance(i).mu;
                (0..self.horizon).map(|t| mu[self.get(i, t)]).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_appliances() -> HouseholdModel {
        HouseholdModel::new(
            2,
            vec![
                ApplianceModel::new("a", vec![0.0, 50.0], vec![1.0, 0.0], 1.0),
                ApplianceModel::new("b", vec![0.0, 80.0, 30.0], vec![0.5, 0.5], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn levels_are_sorted_on_construction() {
        let m = two_appliances();
        assert_eq!(m.appliance(1).mu, vec![0.0, 30.0, 80.0]);
        assert_eq!(m.width(), 5);
        assert_eq!(m.offset(1), 2);
    }

    #[test]
    fn rejects_bad_weights() {
        let bad = HouseholdModel::new(
            2,
            vec![ApplianceModel::new("a", vec![0.0, 1.0], vec![0.7, 0.7], 1.0)],
        );
        assert!(matches!(bad, Err(Error::InvalidModel(_))));
        let bad = HouseholdModel::new(
            2,
            vec![ApplianceModel::new("a", vec![0.0, 1.0], vec![1.5, -0.5], 1.0)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_single_state_and_negative_lambda() {
        assert!(HouseholdModel::new(1, vec![ApplianceModel::new("a", vec![5.0], vec![1.0], 1.0)]).is_err());
        assert!(HouseholdModel::new(1, vec![ApplianceModel::new("a", vec![0.0, 5.0], vec![1.0], -1.0)]).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let m = two_appliances();
        for t in 0..4 {
            for i in 0..2 {
                for s in 0..m.num_states(i) {
                    let g = GroundIndex { appliance: i, state: s, time: t };
                    assert_eq!(m.ground_index(m.flat_index(g)), g);
                }
            }
        }
        assert_eq!(m.flat_index(GroundIndex { appliance: 1, state: 2, time: 3 }), 3 * 5 + 2 + 2);
    }

    #[test]
    fn json_rejects_unknown_fields_and_defaults_lambda() {
        let doc = r#"{"num_lines": 1, "appliances": [{"name": "a", "mu": [0, 10], "weights": [1]}]}"#;
        let m = HouseholdModel::from_json(doc).unwrap();
        assert_eq!(m.appliance(0).lambda, 1.0);
        let doc = r#"{"num_lines": 1, "extra": 3, "appliances": []}"#;
        assert!(HouseholdModel::from_json(doc).is_err());
        let doc = r#"{"num_lines": 1, "appliances": [{"name": "a", "mu": [0, 10], "weights": [1], "colour": 1}]}"#;
        assert!(HouseholdModel::from_json(doc).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = HouseholdModel::new(
            2,
            vec![ApplianceModel::new("a", vec![0.1, 123.456789012345], vec![0.3, 0.7], 0.25)],
        )
        .unwrap();
        let back = HouseholdModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn indicator_round_trip() {
        let m = two_appliances();
        let s = StateAssignment::from_rows(&[vec![0, 1, 1], vec![2, 0, 1]]).unwrap();
        s.validate(&m, 3).unwrap();
        let ind = s.indicator(&m);
        assert_eq!(ind.iter().filter(|&&b| b).count(), 6);
        assert_eq!(StateAssignment::from_indicator(&m, &ind).unwrap(), s);
    }

    #[test]
    fn validate_catches_out_of_range_state() {
        let m = two_appliances();
        let s = StateAssignment::from_rows(&[vec![2], vec![0]]).unwrap();
        assert!(matches!(s.validate(&m, 1), Err(Error::Infeasible(_))));
    }
}
