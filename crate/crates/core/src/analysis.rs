//! Geometry of disagreement between an affine threshold policy
//! `tau - lambda c + nu >= 0` and a ratio threshold `tau / c >= t*`.
//!
//! The affine rule's boundary in ratio space is `b(c) = lambda - nu / c`; the
//! signed margin of a unit is `m = tau - lambda c + nu = c (r - b(c))`. Units on
//! which the two policies disagree have `|m| <= c_max * delta`, where
//! `delta = max_i |t* - b(c_i)|`.

use serde::Serialize;

use crate::error::SolveError;
use crate::model::{BinaryAllocation, DualPrices, ProblemInstance};

/// Slack added to the band radius when testing containment.
pub const BAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredUnit {
    pub tau: f64,
    pub cost: f64,
    pub ratio: f64,
    pub margin: f64,
}

impl ScoredUnit {
    pub fn new(tau: f64, cost: f64, prices: DualPrices) -> Self {
        Self {
            tau,
            cost,
            ratio: tau / cost,
            margin: tau - prices.lambda * cost + prices.nu,
        }
    }
}

pub fn scored_units(inst: &ProblemInstance, prices: DualPrices) -> Vec<ScoredUnit> {
    inst.values()
        .iter()
        .zip(inst.costs())
        .map(|(&tau, &cost)| ScoredUnit::new(tau, cost, prices))
        .collect()
}

/// `lambda - nu / cost`.
pub fn lp_boundary(prices: DualPrices, cost: f64) -> f64 {
    prices.lambda - prices.nu / cost
}

/// Cost at which the affine boundary meets the flat threshold `t*`:
/// `nu / (lambda - t*)`, or `None` when `lambda <= t*`.
pub fn crossing_cost(prices: DualPrices, t_star: f64) -> Option<f64> {
    (prices.lambda > t_star).then(|| prices.nu / (prices.lambda - t_star))
}

fn check_len(a: &BinaryAllocation, b: &BinaryAllocation) -> Result<(), SolveError> {
    if a.len() != b.len() {
        return Err(SolveError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn disagreeing_indices(
    a: &BinaryAllocation,
    b: &BinaryAllocation,
) -> Result<Vec<usize>, SolveError> {
    check_len(a, b)?;
    Ok(a.decisions()
        .iter()
        .zip(b.decisions())
        .enumerate()
        .filter_map(|(i, (x, y))| (x != y).then_some(i))
        .collect())
}

/// Fraction of units on which two allocations differ.
pub fn misallocation_area(a: &BinaryAllocation, b: &BinaryAllocation) -> Result<f64, SolveError> {
    let d = disagreeing_indices(a, b)?;
    Ok(d.len() as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCheck {
    /// `max_i |t* - b(c_i)|`.
    pub delta: f64,
    /// `max_i c_i`.
    pub c_bar: f64,
    pub contained: bool,
    /// Disagreeing units outside the band.
    pub violations: usize,
}

pub fn margin_band_check(
    units: &[ScoredUnit],
    prices: DualPrices,
    t_star: f64,
    disagreeing: &[usize],
) -> BandCheck {
    let delta = units
        .iter()
        .map(|u| (t_star - lp_boundary(prices, u.cost)).abs())
        .fold(0.0, f64::max);
    let c_bar = units.iter().map(|u| u.cost).fold(0.0, f64::max);
    let radius = c_bar * delta + BAND_TOL;
    let violations = disagreeing
        .iter()
        .filter(|&&i| units[i].margin.abs() > radius)
        .count();
    BandCheck {
        delta,
        c_bar,
        contained: violations == 0,
        violations,
    }
}

/// Mean welfare difference `(1/n) sum tau_i (pi*_i - pi_rc_i)` and the bound
/// `tau_bound * margin_constant * (1/n) sum c_i |t* - b(c_i)|`.
///
/// The bound holds only if `margin_constant` really bounds the margin density
/// of the population; it is reported, not enforced.
pub fn welfare_loss_and_bound(
    units: &[ScoredUnit],
    pi_star: &BinaryAllocation,
    pi_rc: &BinaryAllocation,
    prices: DualPrices,
    t_star: f64,
    margin_constant: f64,
    tau_bound: f64,
) -> Result<(f64, f64), SolveError> {
    check_len(pi_star, pi_rc)?;
    if pi_star.len() != units.len() {
        return Err(SolveError::LengthMismatch {
            expected: units.len(),
            got: pi_star.len(),
        });
    }
    let n = units.len() as f64;
    let loss = units
        .iter()
        .zip(pi_star.decisions().iter().zip(pi_rc.decisions()))
        .map(|(u, (&a, &b))| u.tau * (f64::from(u8::from(a)) - f64::from(u8::from(b))))
        .sum::<f64>()
        / n;
    let spread = units
        .iter()
        .map(|u| u.cost * (t_star - lp_boundary(prices, u.cost)).abs())
        .sum::<f64>()
        / n;
    Ok((loss, tau_bound * margin_constant * spread))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisallocationReport {
    pub area: f64,
    pub disagreeing: Vec<usize>,
    /// `max_i |t* - b(c_i)|`.
    pub delta: f64,
    pub c_bar: f64,
    pub band_radius: f64,
    pub band_containment: bool,
    pub welfare_loss: f64,
    pub loss_bound: f64,
    pub t_star: f64,
}

/// Everything above for one pair of policies: `reference` is the affine
/// (LP-type) policy priced by `prices`, `ranked` the ratio policy cut at `t_star`.
#[allow(clippy::too_many_arguments)]
pub fn compare_policies(
    inst: &ProblemInstance,
    prices: DualPrices,
    t_star: f64,
    reference: &BinaryAllocation,
    ranked: &BinaryAllocation,
    margin_constant: f64,
    tau_bound: f64,
) -> Result<MisallocationReport, SolveError> {
    let units = scored_units(inst, prices);
    let disagreeing = disagreeing_indices(reference, ranked)?;
    let band = margin_band_check(&units, prices, t_star, &disagreeing);
    let (welfare_loss, loss_bound) = welfare_loss_and_bound(
        &units,
        reference,
        ranked,
        prices,
        t_star,
        margin_constant,
        tau_bound,
    )?;
    Ok(MisallocationReport {
        area: disagreeing.len() as f64 / inst.len() as f64,
        disagreeing,
        delta: band.delta,
        c_bar: band.c_bar,
        band_radius: band.c_bar * band.delta,
        band_containment: band.contained,
        welfare_loss,
        loss_bound,
        t_star,
    })
}

/// One row of the per-unit boundary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitDiagnostic {
    pub index: usize,
    pub tau: f64,
    pub cost: f64,
    pub ratio: f64,
    pub margin: f64,
    pub b_lp: f64,
    pub pi_lp: u8,
    pub pi_rc: u8,
    pub disagree: u8,
}

pub fn unit_diagnostics(
    inst: &ProblemInstance,
    prices: DualPrices,
    pi_lp: &BinaryAllocation,
    pi_rc: &BinaryAllocation,
) -> Result<Vec<UnitDiagnostic>, SolveError> {
    check_len(pi_lp, pi_rc)?;
    Ok(scored_units(inst, prices)
        .into_iter()
        .enumerate()
        .map(|(index, u)| {
            let a = pi_lp.is_treated(index);
            let b = pi_rc.is_treated(index);
            UnitDiagnostic {
                index,
                tau: u.tau,
                cost: u.cost,
                ratio: u.ratio,
                margin: u.margin,
                b_lp: lp_boundary(prices, u.cost),
                pi_lp: a.into(),
                pi_rc: b.into(),
                disagree: (a != b).into(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(bits: &[bool]) -> BinaryAllocation {
        let inst =
            ProblemInstance::new(vec![1.0; bits.len()], vec![1.0; bits.len()], 1.0, 0).unwrap();
        BinaryAllocation::new(&inst, bits.to_vec()).unwrap()
    }

    #[test]
    fn boundary_values() {
        assert_eq!(lp_boundary(DualPrices::new(1.2, 0.0), 4.0), 1.2);
        assert_eq!(lp_boundary(DualPrices::new(2.0, 2.0), 2.0), 1.0);
        let p = DualPrices::new(1.0, 0.5);
        assert!(lp_boundary(p, 2.0) > lp_boundary(p, 1.0));
    }

    #[test]
    fn crossing() {
        assert_eq!(crossing_cost(DualPrices::new(2.0, 1.0), 1.0), Some(1.0));
        assert_eq!(crossing_cost(DualPrices::new(2.0, 0.0), 1.0), Some(0.0));
        assert_eq!(crossing_cost(DualPrices::new(1.0, 1.0), 1.0), None);
    }

    #[test]
    fn areas() {
        let a = alloc(&[true, false, true]);
        let b = alloc(&[true, true, false]);
        assert_eq!(misallocation_area(&a, &a).unwrap(), 0.0);
        assert!((misallocation_area(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let c = alloc(&[false, true, false]);
        assert_eq!(misallocation_area(&a, &c).unwrap(), 1.0);
        assert!(matches!(
            misallocation_area(&a, &alloc(&[true])),
            Err(SolveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn band_degenerate_cases() {
        let p = DualPrices::new(1.0, 0.0);
        let units = vec![ScoredUnit::new(2.0, 1.0, p), ScoredUnit::new(1.0, 1.0, p)];
        let empty = margin_band_check(&units, p, 1.5, &[]);
        assert!(empty.contained && empty.delta >= 0.0);
        let flat = margin_band_check(&units, p, 1.0, &[1]);
        assert_eq!(flat.delta, 0.0);
        assert!(flat.contained);
        assert!(!margin_band_check(&units, p, 1.0, &[0]).contained);
    }

    #[test]
    fn loss_examples() {
        let p = DualPrices::new(1.0, 0.0);
        let units = vec![ScoredUnit::new(2.0, 1.0, p), ScoredUnit::new(0.5, 1.0, p)];
        let a = alloc(&[true, false]);
        let (loss, bound) = welfare_loss_and_bound(&units, &a, &a, p, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(bound >= 0.0);
        let b = alloc(&[false, false]);
        let (loss, _) = welfare_loss_and_bound(&units, &a, &b, p, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(loss, 1.0);

        // constant cost with t* on the boundary: zero bound
        let q = DualPrices::new(2.0, 1.0);
        let units = vec![ScoredUnit::new(3.0, 2.0, q), ScoredUnit::new(1.0, 2.0, q)];
        let t = lp_boundary(q, 2.0);
        let (_, bound) = welfare_loss_and_bound(&units, &a, &a, q, t, 5.0, 3.0).unwrap();
        assert_eq!(bound, 0.0);
    }

    #[test]
    fn margin_identity() {
        let p = DualPrices::new(0.7, 0.3);
        for (tau, c) in [(1.0, 2.0), (-0.5, 0.3), (4.0, 9.0)] {
            let u = ScoredUnit::new(tau, c, p);
            let via_ratio = c * (u.ratio - lp_boundary(p, c));
            assert!((u.margin - via_ratio).abs() <= 1e-9 * u.margin.abs().max(1.0));
        }
    }
}
