mod common;

use common::Quadrature;
use minruin::hazard::{fixed_horizon_schedule, HazardSchedule};
use minruin::returns::ReturnModel;
use minruin::ruin::Discretization;
use minruin::solver::{
    compress_stage, solve, solve_stage, solve_with, transition_pmf, AlphaGrid, SolveOptions,
    StageVector,
};

fn model() -> ReturnModel {
    ReturnModel::historical(0.0)
}

#[test]
fn transition_pmf_matches_quadrature() {
    let d = Discretization::new(100, 2, 0.1, f64::INFINITY).unwrap();
    assert_eq!(d.bucket_count(), 10);
    let q = Quadrature::default();
    for (rf, alpha) in [(0.04, 0.5), (0.01, 0.0), (0.1, 1.0), (0.055, 0.3)] {
        let dist = model().portfolio_dist(alpha).unwrap();
        let pmf = transition_pmf(rf, &dist, &d).unwrap();
        let (ruin, interior, overflow) = q.outcomes(rf, &dist, d.p_r, 10);
        let alive = 1.0 - ruin;
        for (i, (&p, &m)) in pmf.iter().zip(&interior).enumerate() {
            assert!(
                (p - m / alive).abs() < 1e-10,
                "rf {rf}, alpha {alpha}, bucket {}",
                i + 1
            );
        }
        assert!((pmf[10] - overflow / alive).abs() < 1e-10);
    }
}

#[test]
fn bucket_pmf_sums_to_one() {
    let d = Discretization::new(1000, 100, 2.75, 4.0).unwrap();
    for alpha in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let dist = model().portfolio_dist(alpha).unwrap();
        for rf in [0.001, 0.02, 0.04, 0.1, 0.3, 0.6] {
            let s: f64 = transition_pmf(rf, &dist, &d).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "alpha {alpha}, rf {rf}: {s}");
        }
    }
}

/// Dense backward induction over quadrature transition masses, with every
/// allocation tried in every cell.
fn dense_dp(h: &[f64], d: &Discretization) -> Vec<Vec<f64>> {
    let q = Quadrature::default();
    let n = d.bucket_count();
    let s_max = h.len() - 1;
    let dists: Vec<_> = d
        .alpha_grid()
        .iter()
        .map(|&a| model().portfolio_dist(a).unwrap())
        .collect();
    let mut v = vec![vec![0.0; n]; s_max];
    let mut next = vec![0.0; n];
    let mut next_overflow = 0.0;
    for t in (0..s_max).rev() {
        for b in 1..=n {
            let rf = d.midpoint(b);
            let best = dists
                .iter()
                .map(|dist| {
                    let (ruin, interior, overflow) = q.outcomes(rf, dist, d.p_r, n);
                    let carry: f64 = interior.iter().zip(&next).map(|(p, x)| p * x).sum();
                    (1.0 - h[t]) * (ruin + carry + overflow * next_overflow)
                })
                .fold(f64::INFINITY, f64::min);
            v[t][b - 1] = best;
        }
        next = v[t].clone();
        next_overflow = 1.0 - h[t];
    }
    v
}

#[test]
fn small_instance_matches_dense_recursion() {
    let d = Discretization::new(4, 4, 2.0, f64::INFINITY).unwrap();
    assert_eq!(d.bucket_count(), 8);
    let h = [0.05, 0.1, 0.3, 1.0];
    let grid = solve(&model(), &HazardSchedule::new(h.to_vec()).unwrap(), &d).unwrap();
    let oracle = dense_dp(&h, &d);
    for t in 0..3 {
        for b in 1..=8 {
            let (got, want) = (grid.value(t, b), oracle[t][b - 1]);
            assert!(
                (got - want).abs() < 1e-12,
                "t {t}, bucket {b}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn small_instance_matches_policy_enumeration() {
    let d = Discretization::new(2, 2, 2.0, f64::INFINITY).unwrap();
    let n = d.bucket_count();
    assert_eq!(n, 4);
    let h = [0.1, 0.2, 1.0];
    let q = Quadrature::default();
    let alphas = d.alpha_grid();
    // outcomes[b][a] for bucket midpoints b = 1..=n
    let outcomes: Vec<Vec<_>> = (1..=n)
        .map(|b| {
            alphas
                .iter()
                .map(|&a| q.outcomes(d.midpoint(b), &model().portfolio_dist(a).unwrap(), d.p_r, n))
                .collect()
        })
        .collect();

    let cells = 2 * n;
    let mut best = vec![f64::INFINITY; cells];
    for code in 0..alphas.len().pow(cells as u32) {
        let mut c = code;
        let choice: Vec<usize> = (0..cells)
            .map(|_| {
                let k = c % alphas.len();
                c /= alphas.len();
                k
            })
            .collect();
        let stage1: Vec<f64> = (0..n)
            .map(|b| (1.0 - h[1]) * outcomes[b][choice[n + b]].0)
            .collect();
        for b in 0..n {
            let (ruin, ref interior, overflow) = outcomes[b][choice[b]];
            let carry: f64 = interior.iter().zip(&stage1).map(|(p, x)| p * x).sum();
            let v0 = (1.0 - h[0]) * (ruin + carry + overflow * (1.0 - h[1]));
            best[b] = best[b].min(v0);
            best[n + b] = best[n + b].min(stage1[b]);
        }
    }

    let grid = solve(&model(), &HazardSchedule::new(h.to_vec()).unwrap(), &d).unwrap();
    for t in 0..2 {
        for b in 1..=n {
            let want = best[t * n + b - 1];
            assert!((grid.value(t, b) - want).abs() < 1e-12, "t {t}, bucket {b}");
        }
    }
}

#[test]
fn values_monotone_and_capped() {
    let d = Discretization::new(100, 20, 2.75, 4.0).unwrap();
    let h = minruin::hazard::derive_hazards(
        &minruin::hazard::AgeTable::bundled(),
        &minruin::hazard::MpuSpec::new(vec![
            minruin::hazard::Member::new(minruin::hazard::Gender::Male, 65),
            minruin::hazard::Member::new(minruin::hazard::Gender::Female, 65),
        ])
        .unwrap(),
    )
    .unwrap();
    let grid = solve(&model(), &h, &d).unwrap();
    for t in 0..grid.stages() {
        let row = &grid.v[t];
        for b in 1..row.len() {
            assert!(row[b] >= row[b - 1] - 1e-15, "t {t}, bucket {}", b + 1);
        }
        assert!(
            row.iter()
                .all(|&x| (0.0..=1.0 - h.h(t) + 2e-16).contains(&x)),
            "t {t}"
        );
    }
}

#[test]
fn compressed_expectation_matches_pmf_sum() {
    let d = Discretization::new(200, 20, 2.75, 4.0).unwrap();
    let h = fixed_horizon_schedule(5).unwrap();
    let grid = solve(&model(), &h, &d).unwrap();
    let next = StageVector {
        t: 1,
        values: grid.v[1].clone(),
        overflow: 1.0,
    };
    let c = compress_stage(&next, 1.0, d.p_r).unwrap();
    for alpha in [0.0, 0.35, 1.0] {
        let dist = model().portfolio_dist(alpha).unwrap();
        for b in [1, 8, 40, 120, 300, 550] {
            let rf = d.midpoint(b);
            let cdf = dist.cdf(rf);
            if cdf == 1.0 {
                continue;
            }
            let pmf = transition_pmf(rf, &dist, &d).unwrap();
            let direct: f64 = pmf[..d.bucket_count()]
                .iter()
                .zip(&next.values)
                .map(|(p, x)| p * x)
                .sum::<f64>()
                + pmf[d.bucket_count()] * next.overflow;
            let e = c.expectation(&dist, rf, cdf);
            assert!(
                (e - direct).abs() < 1e-15,
                "alpha {alpha}, bucket {b}: {e} vs {direct}"
            );
            assert_eq!(e, c.expectation_full(&dist, rf, cdf));
        }
    }
}

#[test]
fn fixed_horizon_equals_equivalent_hazard_schedule() {
    let d = Discretization::new(200, 25, 2.75, 4.0).unwrap();
    let fixed = fixed_horizon_schedule(8).unwrap();
    let mut hz = vec![0.0; 9];
    hz[8] = 1.0;
    let explicit = HazardSchedule::new(hz).unwrap();
    let reread = HazardSchedule::parse_hrates(&fixed.to_hrates()).unwrap();
    let a = solve(&model(), &fixed, &d).unwrap();
    for other in [explicit, reread] {
        let b = solve(&model(), &other, &d).unwrap();
        for (x, y) in a.v.iter().flatten().zip(b.v.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.alpha, b.alpha);
    }
}

#[test]
fn output_identical_across_worker_counts() {
    // 825 buckets: more than one wave even at 8 workers.
    let d = Discretization::new(300, 20, 2.75, 4.0).unwrap();
    let h = fixed_horizon_schedule(6).unwrap();
    let text: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&w| {
            let opts = SolveOptions {
                workers: Some(w),
                ..Default::default()
            };
            let g = solve_with(&model(), &h, &d, &opts).unwrap();
            minruin::output::vertical(&g)
        })
        .collect();
    assert_eq!(text[0], text[1]);
    assert_eq!(text[0], text[2]);
}

#[test]
fn optimal_dominates_every_fixed_allocation() {
    let d = Discretization::new(200, 20, 2.75, f64::INFINITY).unwrap();
    let h = fixed_horizon_schedule(10).unwrap();
    let best = solve(&model(), &h, &d).unwrap();
    for a in d.alpha_grid() {
        let opts = SolveOptions {
            alphas: Some(AlphaGrid::single(a).unwrap()),
            ..Default::default()
        };
        let fixed = solve_with(&model(), &h, &d, &opts).unwrap();
        for (x, y) in best.v.iter().flatten().zip(fixed.v.iter().flatten()) {
            assert!(*x <= y + 1e-15, "alpha {a}: {x} > {y}");
        }
    }
}

#[test]
fn long_horizon_contains_shorter_ones() {
    let d = Discretization::new(100, 20, 2.75, 4.0).unwrap();
    let long = solve(&model(), &fixed_horizon_schedule(50).unwrap(), &d).unwrap();
    for t in [1, 20, 49] {
        let short = solve(&model(), &fixed_horizon_schedule(50 - t).unwrap(), &d).unwrap();
        assert_eq!(long.v[t], short.v[0], "t {t}");
        assert_eq!(long.alpha[t], short.alpha[0], "t {t}");
    }
}

#[test]
fn stepwise_solve_matches_full_solve() {
    let d = Discretization::new(100, 10, 2.75, 4.0).unwrap();
    let h = HazardSchedule::new(vec![0.01, 0.02, 0.05, 0.1, 1.0]).unwrap();
    let opts = SolveOptions::default();
    let full = solve(&model(), &h, &d).unwrap();
    let mut next = StageVector::boundary(4, d.bucket_count());
    for t in (0..4).rev() {
        let (stage, alpha) = solve_stage(t, &next, &model(), &h, &d, &opts).unwrap();
        assert_eq!(stage.values, full.v[t]);
        assert_eq!(alpha, full.alpha[t]);
        assert_eq!(stage.overflow, 1.0 - h.h(t));
        next = stage;
    }
    assert!(solve_stage(4, &next, &model(), &h, &d, &opts).is_err());
    assert!(solve_stage(2, &next, &model(), &h, &d, &opts).is_err());
}

#[test]
fn fixed_horizon_values_fall_with_time() {
    let d = Discretization::new(200, 20, 2.75, 4.0).unwrap();
    let g = solve(&model(), &fixed_horizon_schedule(15).unwrap(), &d).unwrap();
    for t in 1..g.stages() {
        for (later, earlier) in g.v[t].iter().zip(&g.v[t - 1]) {
            assert!(later <= earlier, "t {t}");
        }
    }
}

#[test]
fn pruning_only_touches_cells_at_the_prune_level() {
    let d = Discretization::new(200, 20, 2.75, 4.0).unwrap();
    let free = Discretization {
        prune_power: f64::INFINITY,
        ..d
    };
    let h = HazardSchedule::new(vec![0.02, 0.03, 0.05, 0.08, 0.2, 1.0]).unwrap();
    let pruned = solve(&model(), &h, &d).unwrap();
    let full = solve(&model(), &h, &free).unwrap();
    for t in 0..pruned.stages() {
        let level = (1e4 * (1.0 - h.h(t))).floor() / 1e4;
        let first = pruned.v[t].iter().position(|&v| v >= level - 1.1e-16);
        for b in 0..d.bucket_count() {
            let (p, f) = (pruned.v[t][b], full.v[t][b]);
            if first.is_none_or(|k| b <= k) && t + 1 == pruned.stages() {
                // Nothing downstream of the last stage was pruned.
                assert_eq!(p, f, "t {t}, bucket {}", b + 1);
            }
            assert!(p >= f, "t {t}, bucket {}", b + 1);
            if let Some(k) = first {
                if b > k {
                    assert_eq!(pruned.alpha[t][b], 1.0);
                }
            }
        }
    }
}
