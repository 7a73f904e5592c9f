use approx::assert_relative_eq;
use glimpse::distribution::estimate_geometric;
use glimpse::metrics::{
    curvature_score, rank_of_token, score, token_moments, token_moments_unclamped,
};
use glimpse::{Estimator, Method, PartialObservation, RankDistribution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-9f64..1.0, m).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        let z: f64 = v.iter().sum();
        v.iter().map(|x| x / z).collect()
    })
}

fn passage() -> impl Strategy<Value = Vec<PartialObservation>> {
    prop::collection::vec((dist(6), 0usize..6), 2..30).prop_map(|rows| {
        rows.into_iter()
            .map(|(p, r)| PartialObservation::new(p[r], p[..3].to_vec()).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn moments_match_enumeration(p in (1usize..=16).prop_flat_map(dist)) {
        let d = RankDistribution::new(p.clone(), 0).unwrap();
        let m = token_moments(&d);
        // E[ln p] and E[(ln p - mu)^2] by direct enumeration, two-pass
        let mu: f64 = p.iter().map(|&x| x * x.ln()).sum();
        let var: f64 = p.iter().map(|&x| x * (x.ln() - mu).powi(2)).sum();
        prop_assert!((m.mu - mu).abs() <= 1e-12);
        prop_assert!((m.sigma2 - var).abs() <= 1e-12, "{} vs {var}", m.sigma2);
        prop_assert!(token_moments_unclamped(&d).sigma2 >= -1e-12);
    }

    #[test]
    fn rank_of_token_bounded_and_monotone(p in (2usize..=40).prop_flat_map(dist), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!(p.windows(2).all(|w| w[0] > w[1]));
        let d = RankDistribution::new(p.clone(), 0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r_lo = rank_of_token(&d, lo);
        let r_hi = rank_of_token(&d, hi);
        prop_assert!((1..=p.len()).contains(&r_lo) && (1..=p.len()).contains(&r_hi));
        prop_assert!(r_hi <= r_lo);
    }

    #[test]
    fn metrics_are_order_invariant(positions in passage(), seed in any::<u64>()) {
        let mut shuffled = positions.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        for method in Method::ALL {
            let a = score(method, &positions, &Estimator::Geometric, 50);
            let b = score(method, &shuffled, &Estimator::Geometric, 50);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a.metric - b.metric).abs() <= 1e-12 * a.metric.abs().max(1.0));
                    prop_assert_eq!(a.n_tokens, b.n_tokens);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{method}: {a:?} vs {b:?}"),
            }
        }
    }
}

#[test]
fn full_observation_matches_true_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = 12;
    let mut positions = Vec::new();
    let (mut ll, mut mu, mut var) = (0.0, 0.0, 0.0);
    for _ in 0..40 {
        let mut p: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        let r = rng.random_range(0..m);
        let e: f64 = p.iter().map(|x| x * x.ln()).sum();
        ll += p[r].ln();
        mu += e;
        var += p.iter().map(|x| x * x.ln() * x.ln()).sum::<f64>() - e * e;
        positions.push(PartialObservation::new(p[r], p).unwrap());
    }
    let want = (ll - mu) / var.sqrt();
    for est in [Estimator::Naive, Estimator::Geometric, Estimator::zipfian()] {
        let got = curvature_score(&positions, &est, m).unwrap().metric;
        assert_relative_eq!(got, want, epsilon = 1e-9);
    }
}

fn sample(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, &x) in p.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    p.len() - 1
}

/// Tokens drawn from the estimated distributions themselves give curvature
/// with mean ~0 and variance ~1.
#[test]
fn curvature_is_standardized_under_its_own_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, k) = (1000, 5);
    let mut scores = Vec::new();
    for _ in 0..200 {
        let mut positions = Vec::new();
        for _ in 0..100 {
            let decay = rng.random_range(0.3..0.9);
            let mut top: Vec<f64> = (0..k).map(|i| 0.5 * f64::powi(decay, i as i32)).collect();
            let mass = rng.random_range(0.4..0.95) / top.iter().sum::<f64>();
            top.iter_mut().for_each(|x| *x *= mass);
            let seed = PartialObservation::new(top[0], top).unwrap();
            let est = estimate_geometric(&seed, m).unwrap();
            let r = sample(&mut rng, est.probs());
            positions.push(PartialObservation::new(est.probs()[r], seed.top_probs().to_vec()).unwrap());
        }
        scores.push(curvature_score(&positions, &Estimator::Geometric, m).unwrap().metric);
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() <= 0.1, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.3, "var {var}");
}
