use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::setfn::{AggregateSeries, ApplianceModel, HouseholdModel, StateAssignment, DEFAULT_LAMBDA};
use crate::training::ApplianceSeries;

/// How an appliance is wired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// All power from one line (zero-based).
    SingleLine(usize),
    /// `fraction` of the power from the first line, the rest from the second.
    SplitPair(usize, usize, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    /// `"auto"`: first level 0 W, later levels spaced by at least `gap`.
    Auto(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for Levels {
    fn default() -> Self {
        Levels::Auto("auto".into())
    }
}

fn default_gap() -> f64 {
    50.0
}

fn default_start() -> i64 {
    1_700_000_000
}

fn default_interval() -> i64 {
    60
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

/// Parameters of a synthetic household with planted ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_appliances: usize,
    pub num_lines: usize,
    /// States per appliance; a single entry applies to every appliance.
    pub states: Vec<usize>,
    #[serde(default)]
    pub levels: Levels,
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Per-appliance wiring. Defaults to appliance `i` on line `i mod R`.
    #[serde(default)]
    pub connectivity: Option<Vec<Connectivity>>,
    pub p_stay: f64,
    pub horizon: usize,
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default = "default_start")]
    pub start_timestamp: i64,
    #[serde(default = "default_interval")]
    pub interval_secs: i64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

impl SyntheticSpec {
    /// Small noiseless household with alternating single-line and split
    /// wiring, three states each.
    pub fn example(num_appliances: usize, num_lines: usize, horizon: usize, seed: u64) -> Self {
        let connectivity = (0..num_appliances)
            .map(|i| {
                if i % 2 == 1 && num_lines >= 2 {
                    Connectivity::SplitPair(i % num_lines, (i + 1) % num_lines, 0.5)
                } else {
                    Connectivity::SingleLine(i % num_lines)
                }
            })
            .collect();
        SyntheticSpec {
            num_appliances,
            num_lines,
            states: vec![3],
            levels: Levels::default(),
            gap: default_gap(),
            connectivity: Some(connectivity),
            p_stay: 0.95,
            horizon,
            noise_std: 0.0,
            seed,
            names: None,
            start_timestamp: default_start(),
            interval_secs: default_interval(),
            lambda: default_lambda(),
        }
    }

    fn states_of(&self, i: usize) -> usize {
        if self.states.len() == 1 {
            self.states[0]
        } else {
            self.states[i]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.num_appliances == 0 || self.num_lines == 0 || self.horizon == 0 {
            return bad("num_appliances, num_lines and horizon must be positive".into());
        }
        if self.states.len() != 1 && self.states.len() != self.num_appliances {
            return bad(format!("states lists {} entries for {} appliances", self.states.len(), self.num_appliances));
        }
        if self.states.iter().any(|&n| n < 2) {
            return bad("every appliance needs at least 2 states".into());
        }
        if !(self.p_stay > 0.0 && self.p_stay <= 1.0) {
            return bad(format!("p_stay must lie in (0, 1], got {}", self.p_stay));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return bad(format!("gap must be positive, got {}", self.gap));
        }
        if self.interval_secs <= 0 {
            return bad("interval_secs must be positive".into());
        }
        match &self.levels {
            Levels::Auto(s) if s == "auto" => {}
            Levels::Auto(s) => return bad(format!("levels must be \"auto\" or a list, got \"{s}\"")),
            Levels::Explicit(lv) => {
                if lv.len() != self.num_appliances {
                    return bad(format!("levels lists {} appliances", lv.len()));
                }
                for (i, l) in lv.iter().enumerate() {
                    if l.len() != self.states_of(i) {
                        return bad(format!("appliance {i} has {} levels for {} states", l.len(), self.states_of(i)));
                    }
                    if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return bad(format!("appliance {i} has a negative level"));
                    }
                }
            }
        }
        if let Some(c) = &self.connectivity {
            if c.len() != self.num_appliances {
                return bad(format!("connectivity lists {} appliances", c.len()));
            }
            for pattern in c {
                match *pattern {
                    Connectivity::SingleLine(r) if r >= self.num_lines => {
                        return bad(format!("line {r} does not exist"));
                    }
                    Connectivity::SplitPair(r, s, f) => {
                        if r >= self.num_lines || s >= self.num_lines || r == s {
                            return bad(format!("split pair ({r}, {s}) is not two distinct lines"));
                        }
                        if !(0.0..=1.0).contains(&f) {
                            return bad(format!("split fraction {f} outside [0, 1]"));
                        }
                    }
                    _ => {}
                }
            }
        }
        if let Some(n) = &self.names {
            if n.len() != self.num_appliances {
                return bad(format!("names lists {} appliances", n.len()));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0".into());
        }
        Ok(())
    }
}

/// Draws a household, its state trajectories and the implied aggregates.
///
/// Each appliance follows a Markov chain that keeps its state with
/// probability `p_stay` and otherwise jumps uniformly to another state.
/// Aggregates get independent Gaussian noise, clamped at zero.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.num_appliances;
    let lines = spec.num_lines;

    let levels: Vec<Vec<f64>> = match &spec.levels {
        Levels::Explicit(lv) => lv
            .iter()
            .map(|l| {
                let mut l = l.clone();
                l.sort_by(f64::total_cmp);
                l
            })
            .collect(),
        Levels::Auto(_) => (0..l)
            .map(|i| {
                let mut acc = 0.0;
                let mut v = vec![0.0];
                for _ in 1..spec.states_of(i) {
                    acc += spec.gap * (1.0 + 2.0 * rng.random::<f64>());
                    v.push(acc);
                }
                v
            })
            .collect(),
    };
    let wiring: Vec<Connectivity> = spec
        .connectivity
        .clone()
        .unwrap_or_else(|| (0..l).map(|i| Connectivity::SingleLine(i % lines)).collect());
    let names: Vec<String> = spec
        .names
        .clone()
        .unwrap_or_else(|| (0..l).map(|i| format!("appliance{}", i + 1)).collect());

    let appliances = (0..l)
        .map(|i| {
            let mut w = vec![0.0; lines];
            match wiring[i] {
                Connectivity::SingleLine(r) => w[r] = 1.0,
                Connectivity::SplitPair(r, s, f) => {
                    w[r] = f;
                    w[s] = 1.0 - f;
                }
            }
            ApplianceModel::new(names[i].clone(), levels[i].clone(), w, spec.lambda)
        })
        .collect();
    let model = HouseholdModel::new(lines, appliances)?;

    let mut states = vec![0usize; spec.horizon * l];
    for i in 0..l {
        let n = model.num_states(i);
        let mut s = rng.random_range(0..n);
        for t in 0..spec.horizon {
            if t > 0 && rng.random::<f64>() >= spec.p_stay {
                let jump = rng.random_range(0..n - 1);
                s = if jump >= s { jump + 1 } else { jump };
            }
            states[t * l + i] = s;
        }
    }
    let assignment = StateAssignment::from_time_major(l, states)?;
    let power = assignment.power(&model);

    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut agg = Vec::with_capacity(spec.horizon * lines);
    for t in 0..spec.horizon {
        for r in 0..lines {
            let clean: f64 = model
                .appliances()
                .iter()
                .zip(&power)
                .map(|(a, p)| a.weights[r] * p[t])
                .sum();
            let y = if spec.noise_std > 0.0 {
                (clean + noise.sample(&mut rng)).max(0.0)
            } else {
                clean
            };
            agg.push(y);
        }
    }
    let timestamps: Vec<i64> = (0..spec.horizon as i64)
        .map(|t| spec.start_timestamp + t * spec.interval_secs)
        .collect();
    let aggregate = AggregateSeries::from_flat(lines, agg)?.with_timestamps(timestamps.clone())?;
    let appliances = ApplianceSeries::new(names, power)?.with_timestamps(timestamps)?;
    Ok(Dataset {
        aggregate,
        appliances: Some(appliances),
        planted_model: Some(model),
        planted_states: Some(assignment),
    })
}

/// Smallest Euclidean distance between the per-line consumption of two
/// different joint states. Zero when two joint states look identical on
/// every line.
pub fn joint_signature_separation(model: &HouseholdModel) -> f64 {
    let joint = model.joint_states();
    let lines = model.num_lines();
    let l = model.num_appliances();
    let mut sigs = Vec::with_capacity(joint);
    for m in 0..joint {
        let mut rest = m;
        let mut sig = vec![0.0; lines];
        for i in (0..l).rev() {
            let a = model.appliance(i);
            let s = rest % a.num_states();
            rest /= a.num_states();
            for (r, v) in sig.iter_mut().enumerate() {
                *v += a.weights[r] * a.mu[s];
            }
        }
        sigs.push(sig);
    }
    let mut best = f64::INFINITY;
    for a in 0..joint {
        for b in a + 1..joint {
            let d: f64 = sigs[a].iter().zip(&sigs[b]).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d.sqrt());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_output_satisfies_line_identity() {
        let ds = generate(&SyntheticSpec::example(4, 2, 200, 3)).unwrap();
        let model = ds.planted_model.as_ref().unwrap();
        let x = &ds.appliances.as_ref().unwrap().values;
        for t in 0..ds.len() {
            for r in 0..2 {
                let sum: f64 = (0..4).map(|i| model.appliance(i).weights[r] * x[i][t]).sum();
                assert!((ds.aggregate.get(t, r) - sum).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn full_stay_probability_freezes_states() {
        let mut spec = SyntheticSpec::example(3, 2, 40, 8);
        spec.p_stay = 1.0;
        let ds = generate(&spec).unwrap();
        let s = ds.planted_states.unwrap();
        for i in 0..3 {
            let row = s.row(i);
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn seeded_generation_repeats() {
        let mut spec = SyntheticSpec::example(3, 3, 100, 21);
        spec.noise_std = 5.0;
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn auto_levels_respect_gap() {
        let ds = generate(&SyntheticSpec::example(4, 2, 5, 2)).unwrap();
        for a in ds.planted_model.unwrap().appliances() {
            assert_eq!(a.mu[0], 0.0);
            assert!(a.mu.windows(2).all(|w| w[1] - w[0] >= 50.0));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SyntheticSpec::example(2, 2, 10, 0);
        spec.noise_std = -1.0;
        assert!(generate(&spec).is_err());
        let mut spec = SyntheticSpec::example(2, 2, 10, 0);
        spec.p_stay = 0.0;
        assert!(generate(&spec).is_err());
        let mut spec = SyntheticSpec::example(2, 2, 10, 0);
        spec.connectivity = Some(vec![Connectivity::SingleLine(0), Connectivity::SplitPair(0, 0, 0.5)]);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let doc = r#"{
            "num_appliances": 2, "num_lines": 2, "states": [2, 3],
            "levels": [[0, 100], [0, 40, 250]],
            "connectivity": [{"single_line": 1}, {"split_pair": [0, 1, 0.25]}],
            "p_stay": 0.9, "horizon": 12, "seed": 4
        }"#;
        let spec: SyntheticSpec = serde_json::from_str(doc).unwrap();
        let ds = generate(&spec).unwrap();
        let m = ds.planted_model.unwrap();
        assert_eq!(m.appliance(0).weights, vec![0.0, 1.0]);
        assert_eq!(m.appliance(1).weights, vec![0.25, 0.75]);
        assert_eq!(m.appliance(1).mu, vec![0.0, 40.0, 250.0]);
    }
}
