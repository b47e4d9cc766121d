//! Seeded data-generating processes and the two Monte Carlo harnesses.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(seed, n, replication, attempt)`, so results do not depend on how rayon
//! schedules the work. Aggregation folds replications in index order.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::{
    disagreeing_indices, margin_band_check, scored_units, unit_diagnostics, UnitDiagnostic,
};
use crate::error::ExperimentError;
use crate::exact::solve_exact;
use crate::glc::{glc_solve, GlcConfig};
use crate::lp::{round_lp_to_feasible, solve_lp};
use crate::model::{coverage_floor_for, ProblemInstance};
use crate::rc::{rc_threshold, rc_with_target_count};

/// Draws per replication before giving up on finding a feasible instance.
pub const MAX_ATTEMPTS: usize = 64;
/// Mean coverage price above which a scenario counts as coverage-binding.
pub const BINDING_NU: f64 = 1e-6;

const DGP1_TAG: u64 = 0x4447_5031;
const DGP2_TAG: u64 = 0x4447_5032;

fn stream(tag: u64, seed: u64, n: usize, replication: usize, attempt: usize) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&tag.to_le_bytes());
    key[8..16].copy_from_slice(&seed.to_le_bytes());
    key[16..24].copy_from_slice(&(n as u64).to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(((attempt as u64) << 32) | replication as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgp1Config {
    pub n: usize,
    /// Covariate dimension, at least 2.
    pub d: usize,
    /// Cost dispersion: `w = exp(gamma * x1)`.
    pub gamma: f64,
    /// Per-capita budget `C`.
    pub budget_per_capita: f64,
    pub rho: f64,
    pub seed: u64,
}

impl Default for Dgp1Config {
    fn default() -> Self {
        Self {
            n: 100,
            d: 2,
            gamma: 2.0,
            budget_per_capita: 0.6,
            rho: 0.3,
            seed: 0,
        }
    }
}

impl Dgp1Config {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.d < 2 {
            return bad("covariate dimension must be at least 2");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and non-negative");
        }
        if !(self.budget_per_capita > 0.0 && self.budget_per_capita.is_finite()) {
            return bad("per-capita budget must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        Ok(())
    }
}

fn dgp1_draw(cfg: &Dgp1Config, replication: usize, attempt: usize) -> ProblemInstance {
    let mut rng = stream(DGP1_TAG, cfg.seed, cfg.n, replication, attempt);
    let mut values = Vec::with_capacity(cfg.n);
    let mut costs = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
        values.push(x[0] + 0.5 * x[1]);
        costs.push((cfg.gamma * x[0]).exp());
    }
    ProblemInstance::new(
        values,
        costs,
        cfg.n as f64 * cfg.budget_per_capita,
        coverage_floor_for(cfg.n, cfg.rho),
    )
    .expect("draws are finite with positive costs")
}

/// First draw of a replication, feasible or not.
pub fn dgp1_sample(
    cfg: &Dgp1Config,
    replication: usize,
) -> Result<ProblemInstance, ExperimentError> {
    cfg.validate()?;
    Ok(dgp1_draw(cfg, replication, 0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgp2Config {
    pub n: usize,
    pub beta0: f64,
    pub beta1: f64,
    /// Quadratic coefficient of the effect.
    pub gamma_sq: f64,
    pub c0: f64,
    /// Cost heterogeneity: `c = c0 + delta |x|`.
    pub delta: f64,
    pub budget_per_capita: f64,
    pub rho: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for Dgp2Config {
    fn default() -> Self {
        Self {
            n: 500,
            beta0: 0.0,
            beta1: 1.0,
            gamma_sq: 0.5,
            c0: 1.0,
            delta: 1.0,
            budget_per_capita: 0.8,
            rho: 0.5,
            replications: 100,
            seed: 0,
        }
    }
}

impl Dgp2Config {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad("c0 must be positive");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be finite and non-negative");
        }
        if !(self.budget_per_capita > 0.0 && self.budget_per_capita.is_finite()) {
            return bad("per-capita budget must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if ![self.beta0, self.beta1, self.gamma_sq]
            .iter()
            .all(|b| b.is_finite())
        {
            return bad("effect coefficients must be finite");
        }
        Ok(())
    }
}

fn dgp2_draw(cfg: &Dgp2Config, replication: usize, attempt: usize) -> (ProblemInstance, Vec<f64>) {
    let mut rng = stream(DGP2_TAG, cfg.seed, cfg.n, replication, attempt);
    let xs: Vec<f64> = (0..cfg.n).map(|_| rng.sample(StandardNormal)).collect();
    let slope = cfg.beta1 - cfg.beta0;
    let values = xs
        .iter()
        .map(|&x| slope * x + cfg.gamma_sq * x * x)
        .collect();
    let costs = xs.iter().map(|&x| cfg.c0 + cfg.delta * x.abs()).collect();
    let inst = ProblemInstance::new(
        values,
        costs,
        cfg.n as f64 * cfg.budget_per_capita,
        coverage_floor_for(cfg.n, cfg.rho),
    )
    .expect("draws are finite with positive costs");
    (inst, xs)
}

/// First draw of a replication together with its scalar covariates.
pub fn dgp2_sample(
    cfg: &Dgp2Config,
    replication: usize,
) -> Result<(ProblemInstance, Vec<f64>), ExperimentError> {
    cfg.validate()?;
    Ok(dgp2_draw(cfg, replication, 0))
}

/// Resamples until feasible. Returns the instance and the number of rejected draws.
fn feasible_draw<T>(
    mut draw: impl FnMut(usize) -> (ProblemInstance, T),
) -> Option<(ProblemInstance, T, usize)> {
    (0..MAX_ATTEMPTS).find_map(|attempt| {
        let (inst, extra) = draw(attempt);
        inst.is_feasible().then_some((inst, extra, attempt))
    })
}

fn check_draws(n: usize, reps: usize, resamples: usize) -> Result<(), ExperimentError> {
    let draws = reps + resamples;
    if 2 * resamples > draws {
        return Err(ExperimentError::TooManyInfeasibleDraws {
            n,
            infeasible: resamples,
            draws,
        });
    }
    Ok(())
}

/// Raw (not per-capita) outcomes of one MC1 replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mc1Replication {
    pub n: usize,
    pub opt: f64,
    pub glc: f64,
    pub lp: f64,
    pub lp_frac: usize,
    pub v_max: f64,
    /// Whether the exact search finished within its node limit.
    pub exact_optimal: bool,
    pub resamples: usize,
}

impl Mc1Replication {
    pub fn regret(&self) -> f64 {
        (self.opt - self.glc) / self.n as f64
    }

    pub fn gap(&self) -> f64 {
        (self.lp - self.opt) / self.n as f64
    }
}

/// Runs exact, LP and GLC on one instance.
pub fn mc1_replicate(
    inst: &ProblemInstance,
    glc: &GlcConfig,
) -> Result<Mc1Replication, ExperimentError> {
    let exact = solve_exact(inst)?;
    let lp = solve_lp(inst)?;
    let g = glc_solve(inst, glc)?;
    Ok(Mc1Replication {
        n: inst.len(),
        opt: exact.objective,
        glc: g.report.objective,
        lp: lp.objective,
        lp_frac: lp.fractional_indices.len(),
        v_max: inst.v_max(),
        exact_optimal: exact.optimal,
        resamples: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mc1Config {
    pub grid: Vec<usize>,
    pub replications: usize,
    /// `n` is overridden by each grid point.
    pub template: Dgp1Config,
    pub glc: GlcConfig,
}

impl Default for Mc1Config {
    fn default() -> Self {
        Self {
            grid: vec![50, 100, 200, 400],
            replications: 25,
            template: Dgp1Config::default(),
            glc: GlcConfig::default(),
        }
    }
}

/// One grid point of MC1. All value columns are per capita.
#[derive(Debug, Clone, PartialEq)]
pub struct Mc1Row {
    pub n: usize,
    pub opt_value: f64,
    pub glc_value: f64,
    pub glc_regret: f64,
    pub lp_gap: f64,
    pub lp_frac: f64,
    /// Mean over replications of `max |v|`.
    pub v_max: f64,
    pub resamples: usize,
    pub replications: Vec<Mc1Replication>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        0.0
    } else {
        s / k as f64
    }
}

impl Mc1Row {
    pub fn from_replications(n: usize, reps: Vec<Mc1Replication>) -> Self {
        let per = |f: fn(&Mc1Replication) -> f64| mean(reps.iter().map(f));
        Self {
            n,
            opt_value: per(|r| r.opt / r.n as f64),
            glc_value: per(|r| r.glc / r.n as f64),
            glc_regret: per(Mc1Replication::regret),
            lp_gap: per(Mc1Replication::gap),
            lp_frac: per(|r| r.lp_frac as f64),
            v_max: per(|r| r.v_max),
            resamples: reps.iter().map(|r| r.resamples).sum(),
            replications: reps,
        }
    }
}

pub fn run_mc1(cfg: &Mc1Config) -> Result<Vec<Mc1Row>, ExperimentError> {
    if cfg.grid.is_empty() || cfg.replications == 0 {
        return Err(ExperimentError::InvalidConfig(
            "grid and replication count must be non-empty".into(),
        ));
    }
    cfg.glc.validate()?;
    let mut grid = cfg.grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let mut rows = Vec::with_capacity(grid.len());
    for n in grid {
        let dgp = Dgp1Config { n, ..cfg.template };
        dgp.validate()?;
        let draws: Vec<Option<(ProblemInstance, (), usize)>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| feasible_draw(|attempt| (dgp1_draw(&dgp, rep, attempt), ())))
            .collect();
        let resamples = draws
            .iter()
            .map(|d| d.as_ref().map_or(MAX_ATTEMPTS, |(_, _, r)| *r))
            .sum();
        check_draws(n, cfg.replications, resamples)?;
        let reps = draws
            .into_par_iter()
            .map(|d| {
                let (inst, _, resamples) = d.ok_or(ExperimentError::TooManyInfeasibleDraws {
                    n,
                    infeasible: MAX_ATTEMPTS,
                    draws: MAX_ATTEMPTS,
                })?;
                let mut r = mc1_replicate(&inst, &cfg.glc)?;
                r.resamples = resamples;
                Ok(r)
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        rows.push(Mc1Row::from_replications(n, reps));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mc2Scenario {
    pub label: String,
    pub delta: f64,
    pub rho: f64,
}

impl Mc2Scenario {
    pub fn new(label: impl Into<String>, delta: f64, rho: f64) -> Self {
        Self {
            label: label.into(),
            delta,
            rho,
        }
    }
}

/// High/low cost heterogeneity crossed with high/low coverage.
pub fn default_scenarios(delta_high: f64, rho_high: f64, rho_low: f64) -> Vec<Mc2Scenario> {
    vec![
        Mc2Scenario::new("(1)", delta_high, rho_high),
        Mc2Scenario::new("(2)", delta_high, rho_low),
        Mc2Scenario::new("(3)", 0.0, rho_high),
        Mc2Scenario::new("(4)", 0.0, rho_low),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageStatus {
    Binding,
    Slack,
}

impl CoverageStatus {
    pub fn label(self) -> &'static str {
        match self {
            CoverageStatus::Binding => "Binding",
            CoverageStatus::Slack => "Slack",
        }
    }
}

/// LP versus calibrated ranking on one MC2 draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mc2Replication {
    pub nu: f64,
    pub lambda: f64,
    pub area: f64,
    pub t_star: f64,
    pub band_violations: usize,
    pub resamples: usize,
}

/// Rounded LP policy and the ranking policy calibrated to its treated count.
pub fn mc2_compare(inst: &ProblemInstance) -> Result<Mc2Replication, ExperimentError> {
    let lp = solve_lp(inst)?;
    let pi_lp = round_lp_to_feasible(&lp, inst)?;
    let rc = rc_with_target_count(inst, pi_lp.count())?;
    let pi_rc = rc.binary().expect("ranking yields a binary allocation");
    let t_star = rc_threshold(inst, pi_rc);
    let disagree = disagreeing_indices(&pi_lp, pi_rc)?;
    let units = scored_units(inst, lp.prices);
    let band = margin_band_check(&units, lp.prices, t_star, &disagree);
    Ok(Mc2Replication {
        nu: lp.prices.nu,
        lambda: lp.prices.lambda,
        area: disagree.len() as f64 / inst.len() as f64,
        t_star,
        band_violations: band.violations,
        resamples: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mc2Row {
    pub scenario: String,
    pub cost_het: f64,
    pub rho: f64,
    pub mean_nu: f64,
    pub status: CoverageStatus,
    pub misallocation_area: f64,
    pub band_violations: usize,
    pub resamples: usize,
    pub replications: Vec<Mc2Replication>,
}

fn mc2_draw(
    cfg: &Dgp2Config,
    rep: usize,
) -> Result<(ProblemInstance, Vec<f64>, usize), ExperimentError> {
    feasible_draw(|attempt| dgp2_draw(cfg, rep, attempt)).ok_or(
        ExperimentError::TooManyInfeasibleDraws {
            n: cfg.n,
            infeasible: MAX_ATTEMPTS,
            draws: MAX_ATTEMPTS,
        },
    )
}

/// Runs every scenario with `template`'s effect and cost parameters, its `delta`
/// and `rho` replaced by the scenario's.
pub fn run_mc2(
    scenarios: &[Mc2Scenario],
    template: &Dgp2Config,
) -> Result<Vec<Mc2Row>, ExperimentError> {
    if scenarios.is_empty() || template.replications == 0 {
        return Err(ExperimentError::InvalidConfig(
            "scenario list and replication count must be non-empty".into(),
        ));
    }
    scenarios
        .iter()
        .map(|s| {
            let cfg = Dgp2Config {
                delta: s.delta,
                rho: s.rho,
                ..*template
            };
            cfg.validate()?;
            let reps = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| {
                    let (inst, _, resamples) = mc2_draw(&cfg, rep)?;
                    let mut r = mc2_compare(&inst)?;
                    r.resamples = resamples;
                    Ok(r)
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let resamples = reps.iter().map(|r| r.resamples).sum();
            check_draws(cfg.n, cfg.replications, resamples)?;
            let mean_nu = mean(reps.iter().map(|r| r.nu));
            Ok(Mc2Row {
                scenario: s.label.clone(),
                cost_het: s.delta,
                rho: s.rho,
                mean_nu,
                status: if mean_nu > BINDING_NU {
                    CoverageStatus::Binding
                } else {
                    CoverageStatus::Slack
                },
                misallocation_area: mean(reps.iter().map(|r| r.area)),
                band_violations: reps.iter().map(|r| r.band_violations).sum(),
                resamples,
                replications: reps,
            })
        })
        .collect()
}

/// Per-unit boundary table for one replication of one scenario.
pub fn mc2_unit_table(
    scenario: &Mc2Scenario,
    template: &Dgp2Config,
    replication: usize,
) -> Result<Vec<UnitDiagnostic>, ExperimentError> {
    let cfg = Dgp2Config {
        delta: scenario.delta,
        rho: scenario.rho,
        ..*template
    };
    cfg.validate()?;
    let (inst, _, _) = mc2_draw(&cfg, replication)?;
    let lp = solve_lp(&inst)?;
    let pi_lp = round_lp_to_feasible(&lp, &inst)?;
    let rc = rc_with_target_count(&inst, pi_lp.count())?;
    Ok(unit_diagnostics(
        &inst,
        lp.prices,
        &pi_lp,
        rc.binary().expect("ranking yields a binary allocation"),
    )?)
}

/// One point of a plotted series with its interquartile band.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub series: &'static str,
    pub n: usize,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        m => {
            let pos = p.clamp(0.0, 1.0) * (m - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

fn point(series: &'static str, n: usize, mean: f64, mut xs: Vec<f64>) -> SeriesPoint {
    xs.sort_by(f64::total_cmp);
    let (q25, q75) = if xs.is_empty() {
        (mean, mean)
    } else {
        (quantile(&xs, 0.25), quantile(&xs, 0.75))
    };
    SeriesPoint {
        series,
        n,
        mean,
        q25,
        q75,
    }
}

/// GLC regret and LP gap against `n`, each with quartiles over replications.
pub fn regret_curve_data(rows: &[Mc1Row]) -> Result<Vec<SeriesPoint>, ExperimentError> {
    if rows.len() < 2 {
        return Err(ExperimentError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let regret = rows.iter().map(|r| {
        let xs = r.replications.iter().map(Mc1Replication::regret).collect();
        point("glc_regret", r.n, r.glc_regret, xs)
    });
    let gap = rows.iter().map(|r| {
        let xs = r.replications.iter().map(Mc1Replication::gap).collect();
        point("lp_gap", r.n, r.lp_gap, xs)
    });
    Ok(regret.chain(gap).collect())
}

pub const TABLE1_HEADER: &str = "n,opt_value,glc_value,glc_regret,lp_gap,lp_frac";
pub const TABLE2_HEADER: &str = "scenario,cost_het,rho,mean_nu,status,misallocation_area";
pub const SERIES_HEADER: &str = "series,n,mean,q25,q75";

pub fn table1_csv(rows: &[Mc1Row]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n, r.opt_value, r.glc_value, r.glc_regret, r.lp_gap, r.lp_frac
        );
    }
    out
}

pub fn table2_csv(rows: &[Mc2Row]) -> String {
    let mut out = format!("{TABLE2_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scenario,
            r.cost_het,
            r.rho,
            r.mean_nu,
            r.status.label(),
            r.misallocation_area
        );
    }
    out
}

pub fn series_csv(points: &[SeriesPoint]) -> String {
    let mut out = format!("{SERIES_HEADER}\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.series, p.n, p.mean, p.q25, p.q75);
    }
    out
}
