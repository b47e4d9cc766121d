mod common;

use coverlock_core::exact::{solve_exact, solve_exact_with, solve_exhaustive, ExactConfig};
use coverlock_core::experiments::{dgp1_sample, Dgp1Config};
use coverlock_core::lp::{enumerate_extreme_points_oracle, solve_lp};
use coverlock_core::ProblemInstance;
use rand::Rng;

use common::{grid_instance, rng};

#[test]
fn exact_matches_exhaustive_on_grid_instances() {
    let mut r = rng(11);
    for _ in 0..400 {
        let n = r.gen_range(4..=15);
        let inst = grid_instance(&mut r, n);
        let a = solve_exact(&inst).unwrap();
        let b = solve_exhaustive(&inst).unwrap();
        assert_eq!(a.objective, b.objective, "{inst:?}");
        assert_eq!(a.binary(), b.binary(), "tie-break differs on {inst:?}");
        assert!(a.optimal);
    }
}

#[test]
fn lp_matches_extreme_point_oracle() {
    let mut r = rng(12);
    for _ in 0..300 {
        let n = r.gen_range(2..=10);
        let inst = grid_instance(&mut r, n);
        let lp = solve_lp(&inst).unwrap();
        let oracle = enumerate_extreme_points_oracle(&inst).unwrap();
        assert!(
            (lp.objective - oracle.objective).abs() <= 1e-8,
            "{} vs {} on {inst:?}",
            lp.objective,
            oracle.objective
        );
    }
}

fn check_lp_invariants(inst: &ProblemInstance) {
    let lp = solve_lp(inst).unwrap();
    let opt = solve_exact(inst).unwrap().objective;
    let gap = lp.objective - opt;
    let scale = 1e-9 * (1.0 + lp.objective.abs());
    assert!(gap >= -scale, "negative gap {gap}");
    assert!(gap <= 2.0 * inst.v_max() + scale, "gap {gap} above 2 v_max");
    assert!(lp.fractional_indices.len() <= 2);
    let (budget_res, cover_res) = lp.slackness_residuals(inst);
    let tol = 1e-7 * lp.objective.abs().max(1.0);
    assert!(
        budget_res.abs() <= tol && cover_res.abs() <= tol,
        "{budget_res} {cover_res}"
    );
}

#[test]
fn lp_invariants_on_grid_and_dgp_draws() {
    let mut r = rng(13);
    for _ in 0..200 {
        let n = r.gen_range(4..=15);
        check_lp_invariants(&grid_instance(&mut r, n));
    }
    for n in [50, 200] {
        let cfg = Dgp1Config {
            n,
            seed: 13,
            ..Default::default()
        };
        for rep in 0..40 {
            let inst = dgp1_sample(&cfg, rep).unwrap();
            if inst.is_feasible() {
                check_lp_invariants(&inst);
            }
        }
    }
}

#[test]
fn prunes_never_cut_a_better_completion() {
    let mut r = rng(14);
    let cfg = ExactConfig {
        record_prunes: true,
        ..Default::default()
    };
    let mut checked = 0;
    for _ in 0..150 {
        let n = r.gen_range(6..=12);
        let inst = grid_instance(&mut r, n);
        let out = solve_exact_with(&inst, cfg).unwrap();
        for p in &out.prunes {
            let mut best = f64::NEG_INFINITY;
            'mask: for mask in 0u32..(1 << n) {
                for &(i, on) in &p.fixed {
                    if ((mask >> i) & 1 == 1) != on {
                        continue 'mask;
                    }
                }
                let pick: Vec<usize> = (0..n).filter(|i| (mask >> i) & 1 == 1).collect();
                let cost: f64 = pick.iter().map(|&i| inst.costs()[i]).sum();
                if pick.len() >= inst.coverage_floor() && cost <= inst.budget_limit() {
                    best = best.max(pick.iter().map(|&i| inst.values()[i]).sum());
                }
            }
            assert!(
                best <= p.bound + 1e-9,
                "bound {} below completion {best}",
                p.bound
            );
            assert!(best < p.incumbent + 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn exact_scales_to_mc_sizes() {
    let cfg = Dgp1Config {
        n: 400,
        seed: 2,
        ..Default::default()
    };
    let inst = dgp1_sample(&cfg, 0).unwrap();
    let r = solve_exact(&inst).unwrap();
    assert!(r.optimal);
    assert!(r.objective <= solve_lp(&inst).unwrap().objective + 1e-9);
}
