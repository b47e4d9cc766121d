//! Name-addressed solver registry used by the command line.

use std::collections::BTreeMap;

use crate::error::SolveError;
use crate::exact::solve_exact;
use crate::glc::{glc_solve, GlcConfig};
use crate::lp::solve_lp;
use crate::model::{ProblemInstance, SolveReport};
use crate::rc::{rc_greedy_skip_solve, rc_prefix_solve};

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError>;
}

pub struct Exact;

impl Solver for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
        solve_exact(inst)
    }
}

pub struct Lp;

impl Solver for Lp {
    fn name(&self) -> &'static str {
        "lp"
    }

    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
        Ok(solve_lp(inst)?.into_report(inst))
    }
}

#[derive(Default)]
pub struct Glc(pub GlcConfig);

impl Solver for Glc {
    fn name(&self) -> &'static str {
        "glc"
    }

    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
        Ok(glc_solve(inst, &self.0)?.report)
    }
}

pub struct RcPrefix;

impl Solver for RcPrefix {
    fn name(&self) -> &'static str {
        "rc-prefix"
    }

    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
        rc_prefix_solve(inst)
    }
}

pub struct RcSkip;

impl Solver for RcSkip {
    fn name(&self) -> &'static str {
        "rc-skip"
    }

    fn solve(&self, inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
        rc_greedy_skip_solve(inst)
    }
}

pub struct Registry {
    solvers: BTreeMap<&'static str, Box<dyn Solver>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            solvers: BTreeMap::new(),
        }
    }

    /// All built-in methods, GLC with the given configuration.
    pub fn with_glc(glc: GlcConfig) -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Exact));
        r.register(Box::new(Lp));
        r.register(Box::new(Glc(glc)));
        r.register(Box::new(RcPrefix));
        r.register(Box::new(RcSkip));
        r
    }

    pub fn with_defaults() -> Self {
        Self::with_glc(GlcConfig::default())
    }

    /// Replaces any solver already registered under the same name.
    pub fn register(&mut self, solver: Box<dyn Solver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Solver> {
        self.solvers.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
