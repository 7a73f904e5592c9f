use glimpse::eval::{auroc, kl_sweep, ScoredPopulation};
use glimpse::metrics::score;
use glimpse::scoring::{gen_synthetic, Family, SynthConfig};
use glimpse::{Error, Estimator, Method};

fn config(machine: f64, human: f64) -> SynthConfig {
    SynthConfig {
        family: Family::Mixture,
        machine_sharpness: machine,
        human_sharpness: human,
        passages: 500,
        length: 40,
        rank_size: 200,
        top_k: 5,
        seed: 21,
    }
}

#[test]
fn equal_sharpness_is_indistinguishable() {
    let corpus = gen_synthetic(&config(1.0, 1.0)).unwrap();
    for method in [Method::Curvature, Method::Likelihood, Method::LogRank] {
        let s = |ps: &[glimpse::scoring::PassageObservation]| -> Vec<f64> {
            ps.iter()
                .map(|p| score(method, &p.positions, &Estimator::Geometric, 200).unwrap().metric)
                .collect()
        };
        let pop = ScoredPopulation::new(s(&corpus.machine), s(&corpus.human)).unwrap();
        let a = auroc(&pop).unwrap();
        assert!((a - 0.5).abs() <= 0.05, "{method}: {a}");
    }
}

#[test]
fn sharper_machine_text_hits_top1_more_often() {
    let corpus = gen_synthetic(&config(2.0, 1.0)).unwrap();
    let top1 = |ps: &[glimpse::scoring::PassageObservation]| {
        let (hits, n) = ps.iter().flat_map(|p| &p.positions).fold((0, 0), |(h, n), o| {
            (h + usize::from(o.token_prob() == o.top_probs()[0]), n + 1)
        });
        hits as f64 / n as f64
    };
    let (m, h) = (top1(&corpus.machine), top1(&corpus.human));
    assert!(m > h, "machine {m} vs human {h}");
}

#[test]
fn full_observation_equals_truth() {
    let cfg = SynthConfig {
        passages: 2,
        length: 5,
        rank_size: 8,
        top_k: 8,
        ..SynthConfig::default()
    };
    let corpus = gen_synthetic(&cfg).unwrap();
    for p in corpus.passages() {
        for (obs, truth) in p.positions.iter().zip(p.truths.as_ref().unwrap()) {
            assert_eq!(obs.top_probs(), truth.probs());
        }
    }
}

#[test]
fn kl_sweep_reports_naive_as_infinite() {
    let cfg = SynthConfig {
        passages: 3,
        length: 10,
        rank_size: 50,
        ..SynthConfig::default()
    };
    let corpus = gen_synthetic(&cfg).unwrap();
    let passages: Vec<_> = corpus.passages().cloned().collect();
    let cells = kl_sweep(
        &passages,
        &[("naive", &Estimator::Naive), ("geometric", &Estimator::Geometric)],
        &[1, 3],
    )
    .unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells[..2].iter().all(|c| c.infinite == 60 && c.finite == 0 && c.mean_kl.is_nan()));
    assert!(cells[2..].iter().all(|c| c.infinite == 0 && c.mean_kl > 0.0));

    let mut no_truth = passages[0].clone();
    no_truth.truths = None;
    assert!(matches!(
        kl_sweep(&[no_truth], &[("geometric", &Estimator::Geometric)], &[1]),
        Err(Error::MissingTruth(_))
    ));
}
