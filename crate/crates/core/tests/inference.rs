use repro_dp_core::depth::{pivot_statistic, Orientation};
use repro_dp_core::engine::{draw_one, draw_seed_bank, Domain, Model, ParamBox, Ranker, Summary};
use repro_dp_core::inference::{accept, accept_threshold, confidence_interval, pvalue, OptimizerSpec, Problem};
use repro_dp_core::models::{BernoulliTulap, MannWhitney, MwFlavor};

const ALPHA: f64 = 0.05;

fn singleton(x: f64) -> ParamBox {
    ParamBox::new(vec![x], vec![x], &["p"]).unwrap()
}

fn bernoulli_case(seed: u64, r: usize) -> (BernoulliTulap, Summary, repro_dp_core::engine::SeedBank) {
    let m = BernoulliTulap::new(100, 1.0).unwrap();
    let s = m.simulate(&[0.2], &draw_one(&m, seed, Domain::Observed, 0)).unwrap();
    let bank = draw_seed_bank(&m, r, seed).unwrap();
    (m, s, bank)
}

#[test]
fn accept_matches_grid_oracle() {
    let opt = OptimizerSpec::default();
    for seed in 0..4 {
        let (m, s, bank) = bernoulli_case(seed, 99);
        let stat = m.default_statistic();
        let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
        let threshold = accept_threshold(ALPHA, 99).unwrap();
        let grid: Vec<f64> = (0..41).map(|k| k as f64 / 40.0).collect();
        let mut ranker = Ranker::new(&m, &stat, &s, &bank).unwrap();
        let oracle: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let (c, t) = ranker.count(&[x]).unwrap();
                c as f64 + 1.0 + t
            })
            .collect();
        for (&x, &o) in grid.iter().zip(&oracle) {
            let a = accept(&problem, &singleton(x), ALPHA, &opt, &[]).unwrap();
            assert_eq!(a.objective, o);
            assert_eq!(a.accepted, o >= threshold, "seed {seed}, theta {x}");
        }
        // windows of the grid, with every grid point passed as a start
        for lo in (0..41).step_by(4) {
            let hi = (lo + 6).min(40);
            let region = ParamBox::new(vec![grid[lo]], vec![grid[hi]], &["p"]).unwrap();
            let warm: Vec<Vec<f64>> = grid[lo..=hi].iter().map(|&x| vec![x]).collect();
            let best = oracle[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let a = accept(&problem, &region, ALPHA, &opt, &warm).unwrap();
            // the search stops once the threshold is met
            if best >= threshold {
                assert!(a.accepted && a.objective >= threshold);
            } else {
                assert!(a.objective >= best);
            }
        }
    }
}

#[test]
fn interval_width_is_within_bound_of_grid_hull() {
    let opt = OptimizerSpec::default();
    let tol = 1e-3;
    let pitch = 1.0 / 4000.0;
    for seed in 10..14 {
        let (m, s, bank) = bernoulli_case(seed, 200);
        let stat = m.default_statistic();
        let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
        let threshold = accept_threshold(ALPHA, 200).unwrap();
        let mut ranker = Ranker::new(&m, &stat, &s, &bank).unwrap();
        let accepted: Vec<f64> = (0..=4000)
            .map(|k| k as f64 * pitch)
            .filter(|&x| {
                let (c, t) = ranker.count(&[x]).unwrap();
                c as f64 + 1.0 + t >= threshold
            })
            .collect();
        let (h_lo, h_hi) = (accepted[0], *accepted.last().unwrap());
        let region = m.search_box(&s).unwrap().with_interest(0).unwrap();
        let ci = confidence_interval(&problem, &region, ALPHA, tol, &opt).unwrap();
        assert!(!ci.empty);
        let slack = 2.0 * tol + pitch;
        assert!(
            (ci.width() - (h_hi - h_lo)).abs() < slack,
            "seed {seed}: interval [{}, {}], hull [{h_lo}, {h_hi}]",
            ci.lower,
            ci.upper
        );
        assert!(ci.lower <= h_lo + pitch && ci.upper >= h_hi - pitch);
    }
}

#[test]
fn intervals_are_nested_in_alpha() {
    let opt = OptimizerSpec::default();
    let tol = 1e-4;
    for seed in 20..23 {
        let (m, s, bank) = bernoulli_case(seed, 200);
        let stat = m.default_statistic();
        let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
        let region = m.search_box(&s).unwrap().with_interest(0).unwrap();
        let wide = confidence_interval(&problem, &region, 0.05, tol, &opt).unwrap();
        let narrow = confidence_interval(&problem, &region, 0.2, tol, &opt).unwrap();
        assert!(narrow.lower >= wide.lower - 2.0 * tol && narrow.upper <= wide.upper + 2.0 * tol);
    }
}

#[test]
fn accept_and_pvalue_are_dual_on_points() {
    let opt = OptimizerSpec::default();
    let (m, s, bank) = bernoulli_case(30, 99);
    let stat = m.default_statistic();
    let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
    for k in 0..=50 {
        let x = k as f64 / 50.0;
        let p = pvalue(&problem, &singleton(x), &opt, None).unwrap();
        for alpha in [0.01, 0.05, 0.1, 0.25] {
            let a = accept(&problem, &singleton(x), alpha, &opt, &[]).unwrap();
            assert_eq!(a.accepted, p.p > alpha, "theta {x}, alpha {alpha}, p {}", p.p);
        }
    }
}

#[test]
fn pvalue_equals_exhaustive_formula_on_integer_nuisance() {
    let opt = OptimizerSpec::default();
    for (flavor, eps_m) in [(MwFlavor::PureDpLaplace, 0.3), (MwFlavor::GdpGaussian, 0.2f64.sqrt())] {
        let eps_u = flavor.remaining_budget(1.0, eps_m).unwrap();
        let m = MannWhitney::new(100, eps_m, eps_u, flavor).unwrap();
        let stat = m.default_statistic();
        for seed in 0..5 {
            let s = m.simulate(&[30.0], &draw_one(&m, seed, Domain::Observed, 0)).unwrap();
            let bank = draw_seed_bank(&m, 200, seed).unwrap();
            let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
            let mut ranker = Ranker::new(&m, &stat, &s, &bank).unwrap();
            let sup = (1..=50)
                .map(|g| {
                    let (c, t) = ranker.count(&[g as f64]).unwrap();
                    c as f64 + t
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let want = (sup.floor() + 1.0).min(201.0) / 201.0;
            let got = pvalue(&problem, m.param_box(), &opt, None).unwrap();
            assert_eq!(got.p, want, "{flavor:?} seed {seed}");
            assert_eq!(got.m, sup);
        }
    }
}

#[test]
fn constant_statistic_gives_unit_pvalue() {
    let (m, s, bank) = bernoulli_case(40, 50);
    let stat = pivot_statistic(|_, _| 0.0, Orientation::TwoSided, "constant");
    let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
    let p = pvalue(&problem, m.param_box(), &OptimizerSpec::default(), None).unwrap();
    assert_eq!(p.p, 1.0);
}

#[test]
fn early_stop_flag_follows_level() {
    let (m, s, bank) = bernoulli_case(41, 99);
    let stat = m.default_statistic();
    let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
    let opt = OptimizerSpec::default();
    let full = pvalue(&problem, m.param_box(), &opt, None).unwrap();
    assert!(!full.early_stopped);
    let stopped = pvalue(&problem, m.param_box(), &opt, Some(0.05)).unwrap();
    assert!(full.p > 0.05);
    assert!(stopped.early_stopped && stopped.p > 0.05);
    assert!(stopped.evaluations <= full.evaluations);
}

#[test]
fn pvalue_is_super_uniform_at_the_truth() {
    let m = BernoulliTulap::new(100, 1.0).unwrap();
    let stat = m.default_statistic();
    let opt = OptimizerSpec::default();
    let reps = 2000;
    let mut hits = 0;
    for i in 0..reps {
        let seed = 1_000 + i as u64;
        let s = m.simulate(&[0.2], &draw_one(&m, seed, Domain::Observed, 0)).unwrap();
        let bank = draw_seed_bank(&m, 99, seed).unwrap();
        let problem = Problem::new(&m, &stat, &s, &bank).unwrap();
        if pvalue(&problem, &singleton(0.2), &opt, None).unwrap().p <= ALPHA {
            hits += 1;
        }
    }
    let rate = hits as f64 / reps as f64;
    let se = (ALPHA * (1.0 - ALPHA) / reps as f64).sqrt();
    assert!(rate <= ALPHA + 3.0 * se, "rejection rate {rate}");
}
