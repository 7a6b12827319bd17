use std::collections::HashSet;

use neucredit::data::{generate_consumers, Dataset, Example, PlantedSignal, Widths};
use neucredit::eval::{
    auc, lr_features_all, lr_features_loan, mean_sd, run_experiment, train_lr, write_results, Experiment, Method,
    LR_ITERATIONS, LR_RATE,
};
use neucredit::network::{ModelKind, View};
use neucredit::numerics::Rng;
use neucredit::training::TrainingConfig;
use proptest::prelude::*;

fn pairwise(samples: &[(f64, bool)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(p, yp) in samples {
        if !yp {
            continue;
        }
        for &(n, yn) in samples {
            if yn {
                continue;
            }
            den += 1.0;
            if p > n {
                num += 1.0;
            } else if p == n {
                num += 0.5;
            }
        }
    }
    num / den
}

fn random_list(rng: &mut Rng) -> Vec<(f64, bool)> {
    let n = rng.int_between(2, 80);
    let levels = rng.int_between(1, 12) as f64;
    let mut out: Vec<(f64, bool)> = (0..n)
        .map(|_| ((rng.uniform(0.0, 1.0) * levels).floor() / levels, rng.bernoulli(0.4)))
        .collect();
    out[0].1 = true;
    out[1].1 = false;
    out
}

#[test]
fn auc_equals_pairwise_concordance_exactly() {
    let mut rng = Rng::new(21);
    for _ in 0..1000 {
        let s = random_list(&mut rng);
        assert_eq!(auc(&s).unwrap(), pairwise(&s));
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(auc(&[(0.9, true), (0.1, false)]).unwrap(), 1.0);
    assert_eq!(auc(&[(0.1, true), (0.9, false)]).unwrap(), 0.0);
    assert_eq!(auc(&[(0.5, true), (0.5, false)]).unwrap(), 0.5);
    assert!(auc(&[(0.5, true), (0.7, true)]).is_err());
    assert!(auc(&[(f64::NAN, true), (0.7, false)]).is_err());
}

proptest! {
    #[test]
    fn auc_ignores_monotone_transforms(raw in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..60)) {
        prop_assume!(raw.iter().any(|s| s.1) && raw.iter().any(|s| !s.1));
        let squashed: Vec<(f64, bool)> = raw.iter().map(|&(s, y)| (s.tanh() * 3.0 + 1.0, y)).collect();
        prop_assert_eq!(auc(&raw).unwrap(), auc(&squashed).unwrap());
        let flipped: Vec<(f64, bool)> = raw.iter().map(|&(s, y)| (s, !y)).collect();
        prop_assert!((auc(&raw).unwrap() + auc(&flipped).unwrap() - 1.0).abs() < 1e-12);
    }
}

fn consumers(n: usize, seed: u64) -> Vec<Example> {
    Dataset::Consumers(generate_consumers(n, Widths::default(), PlantedSignal::default(), seed)).examples()
}

#[test]
fn all_view_features_append_order_and_session_means() {
    let data = consumers(3, 22);
    let step = &data[1].steps[2];
    let x = lr_features_all(step);
    assert_eq!(x.len(), 15 + 45 + 16);
    assert_eq!(lr_features_loan(step), step.features);
    assert_eq!(&x[..15], &step.features[..]);
    let n = step.orders.len() as f64;
    for k in 0..45 {
        let m = step.orders.iter().map(|o| o.features[k]).sum::<f64>() / n;
        assert!((x[15 + k] - m).abs() < 1e-12);
    }
    let n = step.sessions.len() as f64;
    for k in 0..16 {
        let m = step.sessions.iter().map(|o| o.features[k]).sum::<f64>() / n;
        assert!((x[60 + k] - m).abs() < 1e-12);
    }
}

#[test]
fn lr_ignores_an_all_zero_column() {
    let mut rng = Rng::new(23);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
    let labels: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] - r[2] + 0.3 * rng.normal() > 0.0))).collect();
    let a = train_lr(&rows, &labels, LR_RATE, LR_ITERATIONS).unwrap();
    let padded: Vec<Vec<f64>> = rows.iter().map(|r| [r.as_slice(), &[0.0]].concat()).collect();
    let b = train_lr(&padded, &labels, LR_RATE, LR_ITERATIONS).unwrap();
    assert_eq!(b.weights[4], 0.0);
    assert_eq!(&b.weights[..4], &a.weights[..]);
    assert_eq!(a.bias, b.bias);
    assert!(a.weights[0] > 0.5 && a.weights[2] < -0.5);
}

#[test]
fn mean_sd_is_population_spread() {
    let (m, s) = mean_sd(&[1.0, 3.0]);
    assert_eq!(m, 2.0);
    assert_eq!(s, 1.0);
}

#[test]
fn random_scores_hover_at_one_half() {
    let data = consumers(500, 24);
    let r = run_experiment(&Experiment::new(Method::Random, 3), &data).unwrap();
    assert_eq!(r.folds.len(), 5);
    assert!((r.mean - 0.5).abs() < 0.03, "{}", r.mean);
}

#[test]
fn test_consumers_never_reach_training() {
    let data = consumers(60, 25);
    let mut exp = Experiment::new(Method::Network(ModelKind::Tva, View::Loan), 4);
    exp.hidden = 2;
    exp.training = TrainingConfig {
        batch_size: 16,
        max_epochs: 1,
        ..TrainingConfig::default()
    };
    let r = run_experiment(&exp, &data).unwrap();
    let mut tested = HashSet::new();
    for f in &r.folds {
        let train: HashSet<&String> = f.train_ids.iter().collect();
        assert!(f.test_ids.iter().all(|id| !train.contains(id)));
        assert_eq!(f.train_ids.len() + f.test_ids.len(), data.len());
        for id in &f.test_ids {
            assert!(tested.insert(id.clone()));
        }
    }
    assert_eq!(tested.len(), data.len());
}

#[test]
fn experiments_are_reproducible() {
    let data = consumers(50, 26);
    let mut exp = Experiment::new(Method::Network(ModelKind::MvmTva, View::All), 5);
    exp.hidden = 2;
    exp.training = TrainingConfig {
        batch_size: 16,
        max_epochs: 2,
        ..TrainingConfig::default()
    };
    let csv = |e: &Experiment| {
        let mut out = Vec::new();
        write_results(&mut out, &[run_experiment(e, &data).unwrap()]).unwrap();
        out
    };
    let a = csv(&exp);
    assert_eq!(a, csv(&exp));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("method,auc_1,auc_2,auc_3,auc_4,auc_5,avg_auc,sd\n"), "{text}");
    let lr = Experiment::new(Method::Lr(View::All), 5);
    assert_eq!(csv(&lr), csv(&lr));
}
