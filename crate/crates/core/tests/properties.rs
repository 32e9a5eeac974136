use proptest::prelude::*;
use repro_dp_core::depth::{depth_statistic, scalar_statistic, DepthKind, TestStatistic};
use repro_dp_core::engine::{draw_one, draw_seed_bank, rank_at, Domain, Model};
use repro_dp_core::models::{build_model, ModelParams, MODEL_NAMES};

fn true_theta(model: &str) -> Vec<f64> {
    match model {
        "bernoulli" => vec![0.2],
        "poisson" => vec![10.0],
        "normal" => vec![1.0, 1.0],
        "linreg" => vec![0.2, -0.5, 0.5, 1.0, 0.25],
        "logistic" => vec![0.5, 2.0, 0.5, 0.5],
        "exponential" => vec![10.0],
        "bernoulli-unknown-n" => vec![0.3, 200.0],
        "mann-whitney" => vec![30.0],
        other => panic!("no test parameter for {other}"),
    }
}

/// Every statistic a model can be run with.
fn statistics_of(model: &dyn Model) -> Vec<TestStatistic> {
    let d = model.summary_dim();
    let mut out = vec![model.default_statistic()];
    out.extend(model.pivot_statistic());
    out.push(depth_statistic(DepthKind::Mahalanobis, d).unwrap());
    out.push(depth_statistic(DepthKind::Spatial, d).unwrap());
    if d == 2 {
        out.push(depth_statistic(DepthKind::Halfspace, 2).unwrap());
        out.push(depth_statistic(DepthKind::Simplicial, 2).unwrap());
    }
    if d == 1 {
        out.push(scalar_statistic(1).unwrap());
    }
    out
}

fn shuffle(perm_seed: u64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut s = perm_seed | 1;
    for i in (1..n).rev() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        idx.swap(i, (s % (i as u64 + 1)) as usize);
    }
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn statistics_are_permutation_invariant_and_in_unit_range(
        which in 0..MODEL_NAMES.len(),
        master in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        let name = MODEL_NAMES[which];
        let model = build_model(name, &ModelParams::new()).unwrap();
        let theta = true_theta(name);
        let d = model.summary_dim();
        let r = 30;
        let mut points = vec![0.0; (r + 1) * d];
        let s = model.simulate(&theta, &draw_one(model.as_ref(), master, Domain::Observed, 0)).unwrap();
        points[..d].copy_from_slice(&s.0);
        let bank = draw_seed_bank(model.as_ref(), r, master).unwrap();
        model.generate_bank(&theta, &bank.seeds, &mut points[d..]).unwrap();

        let perm = shuffle(perm_seed, r + 1);
        let mut permuted = vec![0.0; points.len()];
        for (dst, &src) in perm.iter().enumerate() {
            permuted[dst * d..(dst + 1) * d].copy_from_slice(&points[src * d..(src + 1) * d]);
        }
        for stat in statistics_of(model.as_ref()) {
            let mut a = vec![0.0; r + 1];
            let mut b = vec![0.0; r + 1];
            stat.evaluate(&theta, &points, d, &mut a).unwrap();
            stat.evaluate(&theta, &permuted, d, &mut b).unwrap();
            for (dst, &src) in perm.iter().enumerate() {
                prop_assert!((b[dst] - a[src]).abs() < 1e-9, "{name} {}: {} vs {}", stat.label, b[dst], a[src]);
            }
            prop_assert!(a.iter().all(|&t| (0.0..=1.0).contains(&t)), "{name} {} out of range", stat.label);
        }
    }
}

/// Rank of the observed statistic at the truth over fresh (s_obs, bank)
/// pairs; `P(rank <= k) <= k / (R + 1)` up to Monte Carlo error.
fn check_super_uniform(name: &str, r: usize, reps: usize) {
    let model = build_model(name, &ModelParams::new()).unwrap();
    let theta = true_theta(name);
    let stat = model.default_statistic();
    let mut ranks = vec![0usize; r + 2];
    for i in 0..reps {
        let seed = 50_000 + i as u64;
        let s = model.simulate(&theta, &draw_one(model.as_ref(), seed, Domain::Observed, 0)).unwrap();
        let bank = draw_seed_bank(model.as_ref(), r, seed).unwrap();
        let res = rank_at(model.as_ref(), &stat, &theta, &s, &bank).unwrap();
        ranks[res.count_leq + 1] += 1;
    }
    let mut cum = 0;
    for k in 1..=r {
        cum += ranks[k];
        let nominal = k as f64 / (r + 1) as f64;
        let rate = cum as f64 / reps as f64;
        let se = (nominal * (1.0 - nominal) / reps as f64).sqrt();
        assert!(rate <= nominal + 3.0 * se, "{name}, R = {r}: P(rank <= {k}) = {rate} > {nominal}");
    }
}

#[test]
fn ranks_are_super_uniform_small_bank() {
    check_super_uniform("bernoulli", 9, 1000);
    check_super_uniform("normal", 9, 1000);
}

#[test]
fn ranks_are_super_uniform_large_bank() {
    check_super_uniform("bernoulli", 99, 1000);
    check_super_uniform("poisson", 99, 1000);
}
