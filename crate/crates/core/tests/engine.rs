use repro_dp_core::depth::scalar_statistic;
use repro_dp_core::dist::norm_cdf;
use repro_dp_core::engine::{count_leq, draw_seed_bank, generate, rank_at, Model, Seed, SeedBank, Summary};
use repro_dp_core::models::{BernoulliTulap, NormalLocScale, PoissonClamped};

fn poisson() -> PoissonClamped {
    PoissonClamped::new(100, 14, 1.0, f64::INFINITY).unwrap()
}

#[test]
fn poisson_bank_layout() {
    let bank = draw_seed_bank(&poisson(), 3, 7).unwrap();
    assert_eq!(bank.r(), 3);
    for s in &bank.seeds {
        assert_eq!(s.data.len(), 100);
        assert_eq!(s.dp.len(), 1);
        assert!(s.data.iter().all(|&u| u > 0.0 && u < 1.0));
        assert!(s.is_finite());
    }
}

#[test]
fn banks_are_deterministic_and_prefix_stable() {
    let m = poisson();
    assert_eq!(draw_seed_bank(&m, 3, 7).unwrap(), draw_seed_bank(&m, 3, 7).unwrap());
    let long = draw_seed_bank(&m, 1000, 7).unwrap();
    let short = draw_seed_bank(&m, 200, 7).unwrap();
    assert_eq!(&long.seeds[..200], &short.seeds[..]);
    assert_ne!(draw_seed_bank(&m, 3, 8).unwrap(), draw_seed_bank(&m, 3, 7).unwrap());
}

#[test]
fn poisson_without_noise_is_clamped_mean() {
    let m = poisson();
    let bank = draw_seed_bank(&m, 1, 3).unwrap();
    let mut seed = Seed::new(bank.seeds[0].data.clone(), vec![0.0]);
    let s = generate(&m, &[10.0], &seed).unwrap();
    // inverse-cdf Poisson(10) by summing the pmf
    let inv = |u: f64| {
        let (mut k, mut pmf) = (0u32, (-10f64).exp());
        let mut cdf = pmf;
        while cdf < u {
            k += 1;
            pmf *= 10.0 / k as f64;
            cdf += pmf;
        }
        k as f64
    };
    let want = seed.data.iter().map(|&u| inv(u).min(14.0)).sum::<f64>() / 100.0;
    assert!((s.0[0] - want).abs() < 1e-12, "{} vs {want}", s.0[0]);
    // the sorted fast path agrees
    m.prepare_seed(&mut seed);
    assert!((generate(&m, &[10.0], &seed).unwrap().0[0] - want).abs() < 1e-12);
}

#[test]
fn bernoulli_hand_evaluation() {
    let m = BernoulliTulap::new(3, 1.0).unwrap();
    // both geometric seeds give zero failures; the uniform part is 0.2 - 0.5
    let seed = Seed::new(vec![0.2, 0.6, 0.9], vec![0.1, 0.1, 0.2]);
    let s = generate(&m, &[0.5], &seed).unwrap();
    assert!((s.0[0] - 0.7).abs() < 1e-12);
    assert!((generate(&m, &[0.0], &seed).unwrap().0[0] + 0.3).abs() < 1e-12);
    assert!((generate(&m, &[1.0], &seed).unwrap().0[0] - 2.7).abs() < 1e-12);
}

#[test]
fn normal_scale_must_be_positive() {
    let m = NormalLocScale::gaussian(100, 0.0, 3.0, 1.0).unwrap();
    assert!(m.param_box().lower[1] > 0.0);
    let bank = draw_seed_bank(&m, 1, 1).unwrap();
    assert!(generate(&m, &[1.0, 0.0], &bank.seeds[0]).is_err());
}

/// Poisson with n = 1, c = 1, eps = 1 and a tiny rate releases `0 + z`, so
/// the dp seeds are the repro summaries.
fn fixed_bank(values: &[f64]) -> (PoissonClamped, SeedBank) {
    let m = PoissonClamped::new(1, 1, 1.0, f64::INFINITY).unwrap();
    let seeds = values.iter().map(|&v| Seed::new(vec![0.5], vec![v])).collect();
    (m, SeedBank { seeds, master_seed: 0 })
}

#[test]
fn rank_counts_ties_as_less_or_equal() {
    assert_eq!(count_leq(0.5, &[0.1, 0.5, 0.7, 0.5]), 3);
    assert_eq!(count_leq(0.0, &[0.1, 0.5, 0.7]), 0);
    assert_eq!(count_leq(1.0, &[0.1, 0.5, 1.0]), 3);

    let (m, bank) = fixed_bank(&[0.1, 0.5, 0.7, 0.5]);
    let stat = scalar_statistic(1).unwrap();
    let theta = [1e-9];
    let r = rank_at(&m, &stat, &theta, &Summary(vec![0.5]), &bank).unwrap();
    assert_eq!(r.count_leq, 3);
    assert_eq!(r.t_repro.len(), 4);
    assert!((r.t_obs - norm_cdf(0.5)).abs() < 1e-15);
    assert_eq!(rank_at(&m, &stat, &theta, &Summary(vec![-10.0]), &bank).unwrap().count_leq, 0);
    assert_eq!(rank_at(&m, &stat, &theta, &Summary(vec![10.0]), &bank).unwrap().count_leq, 4);
}
