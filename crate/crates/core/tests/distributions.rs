use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use repro_dp_core::mechanisms::{sample_linf_density, sample_tulap};

const DRAWS: usize = 100_000;

/// Two-sample Kolmogorov-Smirnov distance.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn tulap_matches_library_composition() {
    let eps = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ours: Vec<f64> = (0..DRAWS)
        .map(|_| sample_tulap(&[rng.random(), rng.random(), rng.random()], eps))
        .collect();
    let geom = Geometric::new(1.0 - (-eps).exp()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let oracle: Vec<f64> = (0..DRAWS)
        .map(|_| geom.sample(&mut rng) as f64 - geom.sample(&mut rng) as f64 + rng.random::<f64>() - 0.5)
        .collect();
    let d = ks(ours.clone(), oracle);
    assert!(d < 0.01, "KS distance {d}");
    let mean = ours.iter().sum::<f64>() / DRAWS as f64;
    let var = ours.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / DRAWS as f64;
    assert!(mean.abs() < 4.0 * (var / DRAWS as f64).sqrt());
}

#[test]
fn linf_density_matches_rejection_oracle() {
    let (c, m) = (1.5, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ours: Vec<f64> = (0..DRAWS)
        .map(|_| {
            let seeds: Vec<f64> = (0..=m).map(|_| rng.random()).collect();
            let v = sample_linf_density(c, m, &seeds).unwrap();
            v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
        })
        .collect();
    // uniform proposals on a cube far into the tail, kept with prob exp(-c |v|)
    let half = 20.0 / c;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut oracle = Vec::with_capacity(DRAWS);
    while oracle.len() < DRAWS {
        let norm = (0..m).map(|_| (rng.random::<f64>() * 2.0 - 1.0).abs() * half).fold(0.0, f64::max);
        if rng.random::<f64>() < (-c * norm).exp() {
            oracle.push(norm);
        }
    }
    let d = ks(ours, oracle);
    assert!(d < 0.01, "KS distance {d}");
}
