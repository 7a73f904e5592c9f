use approx::assert_relative_eq;
use glimpse::distribution::{
    build_sum_table, estimate_geometric, estimate_naive, estimate_zipfian, fit_geometric,
    grid_alpha, grid_beta, kl_divergence, solve_geometric_decay, zipfian_loss, SumTable,
    ALPHA_STEPS, BETA_STEPS, MONOTONE_TOLERANCE,
};
use glimpse::{Estimator, PartialObservation, RankDistribution};
use proptest::prelude::*;
use std::sync::OnceLock;

/// Strictly decreasing prefix of length k with total mass in (0.05, 0.999).
fn prefix(k: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.05f64..1.0, k),
        0.05f64..0.999,
    )
        .prop_map(|(mut raw, mass)| {
            raw.sort_by(|a, b| b.total_cmp(a));
            // force strict decrease
            for i in 1..raw.len() {
                if raw[i] >= raw[i - 1] {
                    raw[i] = raw[i - 1] * 0.999;
                }
            }
            let z: f64 = raw.iter().sum();
            raw.iter().map(|x| x / z * mass).collect()
        })
}

fn observation() -> impl Strategy<Value = (PartialObservation, usize)> {
    (1usize..=10)
        .prop_flat_map(|k| (prefix(k), prop::sample::select(vec![k + 1, 100, 1000]), Just(k)))
        .prop_map(|(top, m, _)| (PartialObservation::new(top[0], top).unwrap(), m))
}

fn feasible(obs: &PartialObservation, m: usize) -> bool {
    obs.p_rest() < obs.p_k() * (m - obs.k()) as f64
}

fn zipf_tables() -> &'static Estimator {
    static E: OnceLock<Estimator> = OnceLock::new();
    E.get_or_init(Estimator::zipfian)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn completed_distributions_sum_to_one((obs, m) in observation()) {
        let g = estimate_geometric(&obs, m).unwrap();
        prop_assert!((g.total() - 1.0).abs() <= 1e-6, "geometric total {}", g.total());
        let z = zipf_tables().estimate(&obs, m).unwrap();
        prop_assert!((z.total() - 1.0).abs() <= 1e-6, "zipfian total {}", z.total());
        prop_assert_eq!(&g.probs()[..obs.k()], obs.top_probs());
        prop_assert_eq!(&z.probs()[..obs.k()], obs.top_probs());
    }

    #[test]
    fn completed_distributions_are_monotone((obs, m) in observation()) {
        prop_assume!(feasible(&obs, m));
        let g = estimate_geometric(&obs, m).unwrap();
        prop_assert_eq!(g.monotone_violations(), 0);
        let z = zipf_tables().estimate(&obs, m).unwrap();
        prop_assert_eq!(z.monotone_violations(), 0);
    }

    #[test]
    fn geometric_residual_on_converged(p_rest in 1e-3f64..0.99, frac in 1e-3f64..0.999, k in 1usize..10, m in 11usize..2000) {
        let p_k = p_rest / (frac * (m - k) as f64);
        prop_assume!(p_k < 1.0);
        let params = solve_geometric_decay(p_rest, p_k, m, k).unwrap();
        prop_assert!(params.converged);
        let l = params.decay;
        let series = p_k * (l - l.powi((m - k + 1) as i32)) / (1.0 - l);
        prop_assert!((series - p_rest).abs() <= 1e-9 * p_rest, "residual {}", (series - p_rest).abs());
    }

    #[test]
    fn kl_gibbs(a in prop::collection::vec(1e-6f64..1.0, 2..40), seed in any::<u64>()) {
        let n = a.len();
        let mut b: Vec<f64> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 7) % 1000) as f64 + 1.0).collect();
        let za: f64 = a.iter().sum();
        let zb: f64 = b.iter().sum();
        let a: Vec<f64> = a.iter().map(|x| x / za).collect();
        b.iter_mut().for_each(|x| *x /= zb);
        let da = RankDistribution::new(a, 0).unwrap();
        let db = RankDistribution::new(b, 0).unwrap();
        prop_assert!(kl_divergence(&da, &db).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&da, &da).unwrap().abs() < 1e-15);
    }
}

#[test]
fn perfect_observation_is_identity() {
    let truth = vec![0.4, 0.3, 0.2, 0.1];
    let obs = PartialObservation::new(0.3, truth.clone()).unwrap();
    assert_eq!(estimate_geometric(&obs, 4).unwrap().probs(), &truth[..]);
    assert_eq!(estimate_naive(&obs, 4).unwrap().probs(), &truth[..]);
    assert_eq!(zipf_tables().estimate(&obs, 4).unwrap().probs(), &truth[..]);
}

/// Decay by bisection on the closed-form series, no shared code with the solver.
fn bisect_decay(p_rest: f64, p_k: f64, m: usize, k: usize) -> f64 {
    let n = (m - k) as i32;
    let f = |l: f64| p_k * (l - l.powi(n + 1)) / (1.0 - l) - p_rest;
    let (mut lo, mut hi) = (1e-15, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn geometric_matches_bisection_oracle() {
    // low-decay, mid and near-one roots
    for &(p_rest, p_k, m, k) in &[
        (0.3, 0.6, 4, 1),
        (0.05, 0.2, 1000, 5),
        (0.5, 0.01, 1000, 5),
        (0.28, 0.39, 1000, 1),
        (0.9, 0.001, 1000, 3),
    ] {
        let got = solve_geometric_decay(p_rest, p_k, m, k).unwrap().decay;
        let want = bisect_decay(p_rest, p_k, m, k);
        assert!((got - want).abs() <= 1e-10, "{p_rest} {p_k} {m} {k}: {got} vs {want}");
    }
}

#[test]
fn geometric_infeasible_is_flagged_and_sums_to_one() {
    let obs = PartialObservation::new(0.1, vec![0.1, 0.05]).unwrap();
    let (d, params) = fit_geometric(&obs, 4).unwrap();
    assert!(!params.unwrap().converged);
    assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
}

fn brute_force(table: &SumTable, ratio: f64) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..ALPHA_STEPS {
        for j in 0..BETA_STEPS {
            let a = grid_alpha(i);
            let b = grid_beta(j);
            let s: f64 = (table.k() + 1..=table.rank_size())
                .map(|r| (b / ((r - table.k()) as f64 + b)).powf(a))
                .sum();
            let loss = (s - ratio).powi(2) + (a - 1.0).powi(2) + 0.001 * (b - 2.7).powi(2);
            if loss < best.2 {
                best = (i, j, loss);
            }
        }
    }
    best
}

#[test]
fn zipfian_search_matches_brute_force() {
    let table = build_sum_table(30, 2).unwrap();
    for t in 0..12 {
        let ratio = 0.05 + 2.3 * t as f64;
        let (i, j, loss) = table.search(ratio);
        let (bi, bj, bloss) = brute_force(&table, ratio);
        assert_eq!((i, j), (bi, bj), "ratio {ratio}");
        assert_relative_eq!(loss, bloss, max_relative = 1e-9);
        assert_eq!(loss, zipfian_loss(table.get(i, j), ratio, grid_alpha(i), grid_beta(j)));
    }
}

#[test]
fn zipfian_with_degenerate_mass_is_naive() {
    let table = build_sum_table(10, 2).unwrap();
    let obs = PartialObservation::new(0.5, vec![0.5, 0.5]).unwrap();
    let (d, params) = estimate_zipfian(&obs, 10, &table).unwrap();
    assert!(params.is_none());
    assert_eq!(d.total(), 1.0);
}

#[test]
fn geometric_self_consistency_kl_non_increasing() {
    // truth itself geometric: estimator error should not grow with K
    let decay: f64 = 0.7;
    let m = 200;
    let mut p: Vec<f64> = (0..m).map(|i| decay.powi(i as i32)).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    let truth = RankDistribution::new(p, 0).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=8 {
        let obs = truth.observe(k, truth.probs()[0]).unwrap();
        let kl = kl_divergence(&estimate_geometric(&obs, m).unwrap(), &truth).unwrap();
        assert!(kl <= last + MONOTONE_TOLERANCE, "K={k}: {kl} > {last}");
        last = kl;
    }
}

#[test]
fn zipfian_near_capacity_stays_monotone() {
    let top = vec![0.08515220646215699, 0.02155620531831183, 0.009795295804055127];
    let obs = PartialObservation::new(top[0], top).unwrap();
    let d = zipf_tables().estimate(&obs, 100).unwrap();
    assert_eq!(d.monotone_violations(), 0);
    assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
    assert!(d.probs()[3] <= obs.p_k());
}
