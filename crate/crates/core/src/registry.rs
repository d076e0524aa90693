//! Named minimizers of the set cost, selectable at runtime.

use crate::error::{Error, Result};
use crate::oracle;
use crate::setfn::{AggregateSeries, HouseholdModel, ProblemInstance, StateAssignment};
use crate::solver::{self, Disaggregation, SolveTrace, SolverOptions, StopReason};

/// A method that picks one state per appliance per tick for an instance.
pub trait Minimizer: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn minimize(
        &self,
        inst: &ProblemInstance,
        opts: &SolverOptions,
    ) -> Result<(StateAssignment, SolveTrace)>;
}

pub struct MajorizationMinimizer;

impl Minimizer for MajorizationMinimizer {
    fn name(&self) -> &'static str {
        "mm"
    }

    fn description(&self) -> &'static str {
        "majorization-minimization over modular upper bounds (approximate, scalable)"
    }

    fn minimize(
        &self,
        inst: &ProblemInstance,
        opts: &SolverOptions,
    ) -> Result<(StateAssignment, SolveTrace)> {
        solver::solve(inst, opts)
    }
}

fn exact_trace(inst: &ProblemInstance, s: &StateAssignment, cost: f64) -> Result<SolveTrace> {
    Ok(SolveTrace {
        set_costs: vec![cost],
        residual_costs: vec![inst.residual_cost(s)?],
        iterations: 0,
        stop_reason: StopReason::Exact,
        rejected_increase: None,
    })
}

pub struct ViterbiMinimizer;

impl Minimizer for ViterbiMinimizer {
    fn name(&self) -> &'static str {
        "viterbi"
    }

    fn description(&self) -> &'static str {
        "exact dynamic programming over joint appliance states (prod N_i <= 4096)"
    }

    fn minimize(
        &self,
        inst: &ProblemInstance,
        _opts: &SolverOptions,
    ) -> Result<(StateAssignment, SolveTrace)> {
        let (s, cost) = oracle::viterbi_optimum(inst)?;
        let trace = exact_trace(inst, &s, cost)?;
        Ok((s, trace))
    }
}

pub struct ExhaustiveMinimizer;

impl Minimizer for ExhaustiveMinimizer {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn description(&self) -> &'static str {
        "exact enumeration of every feasible assignment (tiny instances only)"
    }

    fn minimize(
        &self,
        inst: &ProblemInstance,
        _opts: &SolverOptions,
    ) -> Result<(StateAssignment, SolveTrace)> {
        let (s, cost) = oracle::enumerate_optimum(inst)?;
        let trace = exact_trace(inst, &s, cost)?;
        Ok((s, trace))
    }
}

pub struct MinimizerRegistry {
    entries: Vec<Box<dyn Minimizer>>,
}

impl Default for MinimizerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MinimizerRegistry {
    pub fn empty() -> Self {
        MinimizerRegistry { entries: Vec::new() }
    }

    /// `mm`, `viterbi` and `exhaustive`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(MajorizationMinimizer)).unwrap();
        reg.register(Box::new(ViterbiMinimizer)).unwrap();
        reg.register(Box::new(ExhaustiveMinimizer)).unwrap();
        reg
    }

    pub fn register(&mut self, m: Box<dyn Minimizer>) -> Result<()> {
        if self.entries.iter().any(|e| e.name() == m.name()) {
            return Err(Error::InvalidInput(format!(
                "method `{}` is already registered",
                m.name()
            )));
        }
        self.entries.push(m);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Minimizer> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Minimizer> {
        self.entries.iter().map(|b| b.as_ref())
    }
}

/// Disaggregates with an arbitrary minimizer.
pub fn disaggregate_with(
    method: &dyn Minimizer,
    model: &HouseholdModel,
    agg: &AggregateSeries,
    opts: &SolverOptions,
) -> Result<Disaggregation> {
    let inst = ProblemInstance::new(model, agg)?;
    let (s, trace) = method.minimize(&inst, opts)?;
    Ok(Disaggregation::from_assignment(model, s, trace))
}
