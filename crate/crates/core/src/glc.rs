//! Greedy-Lagrangian selection with a forced coverage core.
//!
//! For a budget price `lambda` units are ranked by `a_i = v_i - lambda w_i`.
//! The top `K` form the core; if the core is affordable, the remaining units
//! are scanned in score order and every positive-score unit that still fits is
//! added (an unaffordable unit is skipped, the scan stops at the first
//! non-positive score). `lambda` is bisected until the selection sits within
//! `epsilon * W` of the budget.

use std::cmp::Ordering;
use std::fmt;

use crate::error::SolveError;
use crate::model::{Allocation, BinaryAllocation, DualPrices, ProblemInstance, SolveReport};

/// Bracket growth stops here.
const LAMBDA_CAP: f64 = (1u64 << 60) as f64;

/// Deterministic order among equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Smaller cost first, then lower index.
    #[default]
    CheaperFirst,
    /// Lower index only.
    IndexOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub tie_break: TieBreak,
}

impl Default for GlcConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_iterations: 100,
            tie_break: TieBreak::CheaperFirst,
        }
    }
}

impl GlcConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SolveError::InvalidConfig(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The selection induced by one value of `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcSelection {
    pub lambda: f64,
    /// `v_i - lambda w_i` for every unit, in original order.
    pub scores: Vec<f64>,
    /// Units by decreasing score.
    pub ranking: Vec<usize>,
    pub core: Vec<usize>,
    pub core_cost: f64,
    pub core_value: f64,
    pub core_feasible: bool,
    /// Units added during augmentation, in scan order.
    pub added: Vec<usize>,
    /// Positive-score units skipped because they did not fit.
    pub rejected: Vec<usize>,
    pub allocation: BinaryAllocation,
}

pub fn glc_select_at_lambda(inst: &ProblemInstance, lambda: f64) -> GlcSelection {
    select(inst, lambda, TieBreak::CheaperFirst)
}

fn select(inst: &ProblemInstance, lambda: f64, tie_break: TieBreak) -> GlcSelection {
    let n = inst.len();
    let v = inst.values();
    let w = inst.costs();
    let scores: Vec<f64> = (0..n).map(|i| v[i] - lambda * w[i]).collect();
    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by(|&a, &b| {
        let by_score = scores[b].total_cmp(&scores[a]);
        let by_cost = match tie_break {
            TieBreak::CheaperFirst => w[a].total_cmp(&w[b]),
            TieBreak::IndexOnly => Ordering::Equal,
        };
        by_score.then(by_cost).then(a.cmp(&b))
    });

    let floor = inst.coverage_floor();
    let limit = inst.budget_limit();
    let core: Vec<usize> = ranking[..floor].to_vec();
    let core_cost: f64 = core.iter().map(|&i| w[i]).sum();
    let core_value: f64 = core.iter().map(|&i| v[i]).sum();
    let mut decisions = vec![false; n];
    for &i in &core {
        decisions[i] = true;
    }
    let core_feasible = core_cost <= limit;
    let mut added = Vec::new();
    let mut rejected = Vec::new();
    if core_feasible {
        let mut cost = core_cost;
        for &j in &ranking[floor..] {
            if scores[j] <= 0.0 {
                break;
            }
            if cost + w[j] <= limit {
                decisions[j] = true;
                cost += w[j];
                added.push(j);
            } else {
                rejected.push(j);
            }
        }
    }
    let allocation = BinaryAllocation::new(inst, decisions).expect("sized to the instance");
    GlcSelection {
        lambda,
        scores,
        ranking,
        core,
        core_cost,
        core_value,
        core_feasible,
        added,
        rejected,
        allocation,
    }
}

/// What the bisection did after evaluating a multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlcAction {
    /// Bracket construction probe at the upper multiplier.
    Bracket,
    /// Core over budget: lower end raised to the midpoint.
    RaiseLower,
    /// Too much slack: upper end lowered to the midpoint.
    LowerUpper,
    /// Selection within tolerance of the budget: stop.
    Stop,
    /// Every unit selected with slack left: nothing more to admit, stop.
    AllSelected,
}

impl GlcAction {
    pub fn label(self) -> &'static str {
        match self {
            GlcAction::Bracket => "bracket",
            GlcAction::RaiseLower => "raise-lower",
            GlcAction::LowerUpper => "lower-upper",
            GlcAction::Stop => "augment-and-stop",
            GlcAction::AllSelected => "all-selected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlcStep {
    /// 0 for bracket probes, then 1, 2, ...
    pub iteration: usize,
    pub lambda: f64,
    /// Bracket after the update.
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub core: Vec<usize>,
    pub cost: f64,
    pub value: f64,
    pub action: GlcAction,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlcTrace {
    pub steps: Vec<GlcStep>,
}

impl fmt::Display for GlcTrace {
    /// One line per evaluated multiplier; unit indices are 0-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            let core: Vec<String> = s.core.iter().map(|i| i.to_string()).collect();
            writeln!(
                f,
                "iter={} lambda={} lower={} upper={} core={{{}}} cost={} value={} action={}",
                s.iteration,
                s.lambda,
                s.lambda_lower,
                s.lambda_upper,
                core.join(","),
                s.cost,
                s.value,
                s.action.label()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlcOutcome {
    pub report: SolveReport,
    pub trace: GlcTrace,
    /// Multiplier of the returned selection.
    pub lambda: f64,
}

pub fn glc_solve(inst: &ProblemInstance, cfg: &GlcConfig) -> Result<GlcOutcome, SolveError> {
    cfg.validate()?;
    inst.ensure_feasible()?;
    let budget = inst.budget();
    let limit = inst.budget_limit();
    let mut trace = GlcTrace::default();
    let mut best: Option<GlcSelection> = None;

    let mut lower = 0.0;
    let mut upper = 1.0;
    loop {
        let sel = select(inst, upper, cfg.tie_break);
        trace.steps.push(GlcStep {
            iteration: 0,
            lambda: upper,
            lambda_lower: lower,
            lambda_upper: upper,
            core: sel.core.clone(),
            cost: sel.allocation.cost(),
            value: sel.allocation.value(),
            action: GlcAction::Bracket,
        });
        if sel.core_feasible {
            keep(&sel, &mut best);
            break;
        }
        upper *= 2.0;
        if upper > LAMBDA_CAP {
            return Err(SolveError::BracketOverflow(LAMBDA_CAP));
        }
    }

    for iteration in 1..=cfg.max_iterations {
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        let sel = select(inst, mid, cfg.tie_break);
        let cost = sel.allocation.cost();
        let action = if !sel.core_feasible {
            lower = mid;
            GlcAction::RaiseLower
        } else if cost <= limit && budget - cost <= cfg.epsilon * budget {
            GlcAction::Stop
        } else if sel.allocation.count() == inst.len() {
            GlcAction::AllSelected
        } else {
            upper = mid;
            GlcAction::LowerUpper
        };
        trace.steps.push(GlcStep {
            iteration,
            lambda: mid,
            lambda_lower: lower,
            lambda_upper: upper,
            core: sel.core.clone(),
            cost,
            value: sel.allocation.value(),
            action,
        });
        match action {
            GlcAction::Stop | GlcAction::AllSelected => {
                return Ok(finish(inst, sel, trace, true));
            }
            GlcAction::LowerUpper => keep(&sel, &mut best),
            _ => {}
        }
    }

    let sel = best.expect("bracket construction yields a feasible selection");
    Ok(finish(inst, sel, trace, false))
}

fn keep(sel: &GlcSelection, best: &mut Option<GlcSelection>) {
    if best
        .as_ref()
        .is_none_or(|b| sel.allocation.value() > b.allocation.value())
    {
        *best = Some(sel.clone());
    }
}

fn finish(
    inst: &ProblemInstance,
    sel: GlcSelection,
    trace: GlcTrace,
    converged: bool,
) -> GlcOutcome {
    let iterations = trace.steps.iter().filter(|s| s.iteration > 0).count();
    let lambda = sel.lambda;
    let report = SolveReport::new("glc", inst, Allocation::Binary(sel.allocation))
        .with_iterations(iterations)
        .with_prices(DualPrices::new(lambda, 0.0))
        .with_optimal(converged);
    GlcOutcome {
        report,
        trace,
        lambda,
    }
}

/// `OPT - GLC`, non-negative.
pub fn glc_regret(inst: &ProblemInstance, cfg: &GlcConfig) -> Result<f64, SolveError> {
    let exact = crate::exact::solve_exact(inst)?;
    let glc = glc_solve(inst, cfg)?;
    Ok(exact.objective - glc.report.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::six_units;

    #[test]
    fn low_multiplier_core_is_infeasible() {
        let sel = glc_select_at_lambda(&six_units(), 0.2);
        assert_eq!(sel.core, vec![0, 1]);
        assert_eq!(sel.core_cost, 19.0);
        assert_eq!(sel.core_value, 38.0);
        assert!(!sel.core_feasible);
        assert!(sel.added.is_empty());
    }

    #[test]
    fn high_multiplier_regime_shift() {
        let sel = glc_select_at_lambda(&six_units(), 1.2);
        let expected = [8.0, 7.2, 9.2, 8.2, 5.6, 4.6];
        for (s, e) in sel.scores.iter().zip(expected) {
            assert!((s - e).abs() < 1e-9);
        }
        assert_eq!(sel.ranking, vec![2, 3, 0, 1, 4, 5]);
        assert_eq!(sel.core, vec![2, 3]);
        assert_eq!((sel.core_cost, sel.core_value), (8.0, 27.0));
        assert_eq!(sel.rejected, vec![0, 1]);
        assert_eq!(sel.added, vec![4, 5]);
        assert_eq!(sel.allocation.treated(), vec![2, 3, 4, 5]);
        assert_eq!(
            (sel.allocation.cost(), sel.allocation.value()),
            (12.0, 42.0)
        );
    }

    #[test]
    fn solve_six_units() {
        let out = glc_solve(
            &six_units(),
            &GlcConfig {
                max_iterations: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(
            out.report.binary().unwrap().decisions(),
            &[false, false, true, true, true, true]
        );
        assert_eq!(out.report.objective, 42.0);
        assert_eq!(out.report.budget_used, 12.0);
        let lowers: Vec<f64> = out.trace.steps.iter().map(|s| s.lambda_lower).collect();
        let uppers: Vec<f64> = out
            .trace
            .steps
            .iter()
            .skip(1)
            .map(|s| s.lambda_upper)
            .collect();
        assert!(lowers.windows(2).all(|p| p[0] <= p[1]));
        assert!(uppers.windows(2).all(|p| p[0] >= p[1]));
        assert!(out.trace.to_string().lines().count() == out.trace.steps.len());
    }

    #[test]
    fn infeasible_pair() {
        let inst = ProblemInstance::new(vec![1.0, 1.0], vec![10.0, 9.0], 12.0, 2).unwrap();
        assert!(matches!(
            glc_solve(&inst, &GlcConfig::default()),
            Err(SolveError::Infeasible { .. })
        ));
    }

    #[test]
    fn everything_fits() {
        let inst = ProblemInstance::new(vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 1.0], 10.0, 0).unwrap();
        let out = glc_solve(&inst, &GlcConfig::default()).unwrap();
        assert_eq!(out.report.binary().unwrap().count(), 3);
        assert_eq!(
            out.trace.steps.last().unwrap().action,
            GlcAction::AllSelected
        );
    }

    #[test]
    fn non_positive_scores_select_nothing() {
        let inst = ProblemInstance::new(vec![-1.0, -2.0], vec![1.0, 1.0], 5.0, 0).unwrap();
        assert_eq!(glc_select_at_lambda(&inst, 0.0).allocation.count(), 0);
    }

    #[test]
    fn regret_examples() {
        assert_eq!(
            glc_regret(&six_units(), &GlcConfig::default()).unwrap(),
            0.0
        );
        let inst = ProblemInstance::new(vec![10.0, 6.0], vec![4.0, 3.0], 5.0, 1).unwrap();
        let out = glc_solve(&inst, &GlcConfig::default()).unwrap();
        assert_eq!(out.report.binary().unwrap().decisions(), &[true, false]);
        assert_eq!(glc_regret(&inst, &GlcConfig::default()).unwrap(), 0.0);
    }
}
