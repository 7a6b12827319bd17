use neucredit::data::{
    five_fold_split, generate_consumers, generate_synthetic, k_fold_split, load_dataset, pad_and_mask, parse_dataset,
    save_dataset, synthetic_label, synthetic_label_sigmoid, unpad, write_dataset, Dataset, Example, PadSpec,
    PlantedSignal, Standardization, Widths, MAX_LEN,
};
use neucredit::numerics::Rng;
use neucredit::Error;
use proptest::prelude::*;

fn consumers(n: usize, seed: u64) -> Dataset {
    Dataset::Consumers(generate_consumers(n, Widths::default(), PlantedSignal::default(), seed))
}

#[test]
fn save_then_load_round_trips_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    for (name, data) in [
        ("c.jsonl", consumers(25, 3)),
        ("s.jsonl", Dataset::Synthetic(generate_synthetic(12, 9, 4).1)),
    ] {
        let path = dir.path().join(name);
        save_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);
    }
}

#[test]
fn malformed_records_report_their_line() {
    let good = consumers(2, 5);
    let mut text = Vec::new();
    write_dataset(&mut text, &good).unwrap();
    let mut lines: Vec<String> = String::from_utf8(text).unwrap().lines().map(String::from).collect();
    lines.push("{not json".into());
    let err = parse_dataset(lines.join("\n").as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Data { line: 3, .. }), "{err}");

    let Dataset::Consumers(mut c) = consumers(1, 6) else { unreachable!() };
    c[0].loans[1].r = 1.5;
    let line = serde_json::to_string(&c[0]).unwrap();
    assert!(matches!(parse_dataset(line.as_bytes()), Err(Error::Data { line: 1, .. })));

    let Dataset::Consumers(mut c) = consumers(1, 6) else { unreachable!() };
    c[0].loans[2].features[0] = -1.0;
    let line = serde_json::to_string(&c[0]).unwrap();
    assert!(parse_dataset(line.as_bytes()).is_err());

    let Dataset::Consumers(mut c) = consumers(1, 6) else { unreachable!() };
    while c[0].loans.len() < MAX_LEN + 1 {
        let l = c[0].loans[1].clone();
        c[0].loans.push(l);
    }
    let line = serde_json::to_string(&c[0]).unwrap();
    assert!(parse_dataset(line.as_bytes()).is_err());
}

#[test]
fn standardized_training_features_have_zero_mean_and_unit_spread() {
    let data = consumers(60, 7).examples();
    let st = Standardization::fit(&data).unwrap();
    let out = st.apply(&data);
    let rows: Vec<&Vec<f64>> = out.iter().flat_map(|e| &e.steps).map(|s| &s.features).collect();
    let n = rows.len() as f64;
    for k in 0..rows[0].len() {
        let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((sd - 1.0).abs() < 1e-6, "feature {k}: {sd}");
    }
    let orders: Vec<f64> = out
        .iter()
        .flat_map(|e| &e.steps)
        .flat_map(|s| &s.orders)
        .map(|o| o.features[3])
        .collect();
    let m = orders.iter().sum::<f64>() / orders.len() as f64;
    assert!(m.abs() < 1e-9);
}

#[test]
fn constant_feature_is_centered_to_zero() {
    let mut data = consumers(10, 8).examples();
    for e in &mut data {
        for s in &mut e.steps {
            s.features[4] = 2.5;
        }
    }
    let out = Standardization::fit(&data).unwrap().apply(&data);
    assert!(out.iter().flat_map(|e| &e.steps).all(|s| s.features[4] == 0.0));
}

#[test]
fn held_out_data_uses_training_statistics() {
    let train = consumers(30, 9).examples();
    let mut other = consumers(30, 10).examples();
    for e in &mut other {
        for s in &mut e.steps {
            s.features[2] += 5.0;
        }
    }
    let st = Standardization::fit(&train).unwrap();
    let shifted = st.apply(&other);
    let rows: Vec<f64> = shifted.iter().flat_map(|e| &e.steps).map(|s| s.features[2]).collect();
    let mean = rows.iter().sum::<f64>() / rows.len() as f64;
    assert!(mean > 3.0, "{mean}");
    let own = Standardization::fit(&other).unwrap().apply(&other);
    let m2 = own.iter().flat_map(|e| &e.steps).map(|s| s.features[2]).sum::<f64>() / rows.len() as f64;
    assert!(m2.abs() < 1e-9);
}

#[test]
fn ten_consumers_give_folds_of_two() {
    let data = consumers(10, 11).examples();
    let folds = five_fold_split(&data, 3).unwrap();
    assert!(folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
    assert!(five_fold_split(&data[..4], 3).is_err());
}

#[test]
fn folds_keep_the_default_share() {
    let data = consumers(400, 12).examples();
    let share = |idx: &[usize]| idx.iter().filter(|&&i| data[i].has_default()).count() as f64 / idx.len() as f64;
    let all: Vec<usize> = (0..data.len()).collect();
    let overall = share(&all);
    for f in five_fold_split(&data, 5).unwrap() {
        assert!((share(&f.test) - overall).abs() < 0.05);
    }
}

proptest! {
    #[test]
    fn folds_partition_the_items(strata in prop::collection::vec(any::<bool>(), 5..200), k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(strata.len() >= k);
        let folds = k_fold_split(&strata, k, seed).unwrap();
        let mut seen = vec![0; strata.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            let mut both: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            both.sort_unstable();
            prop_assert_eq!(both, (0..strata.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(k_fold_split(&strata, k, seed).unwrap(), folds);
    }

    #[test]
    fn pad_then_unpad_is_identity(n in 1usize..5, seed in any::<u64>()) {
        let data = consumers(n, seed).examples();
        let refs: Vec<&Example> = data.iter().collect();
        let batch = pad_and_mask(&refs, &PadSpec::hierarchical()).unwrap();
        prop_assert_eq!(unpad(&batch), data);
    }
}

#[test]
fn padding_masks_follow_lengths() {
    let data = consumers(40, 13).examples();
    let e3 = data.iter().find(|e| e.steps.len() == 3).unwrap();
    let e15 = data.iter().find(|e| e.steps.len() == MAX_LEN).unwrap();
    let batch = pad_and_mask(&[e3, e15], &PadSpec::hierarchical()).unwrap();
    let col = |b: usize| -> Vec<f64> { batch.mask.iter().map(|m| m.get(0, b)).collect() };
    let mut short = vec![1.0; 3];
    short.resize(MAX_LEN, 0.0);
    assert_eq!(col(0), short);
    assert_eq!(col(1), vec![1.0; MAX_LEN]);
    assert!(pad_and_mask(&[e15], &PadSpec::flat(MAX_LEN - 1)).is_err());
}

#[test]
fn synthetic_recurrence_is_deterministic_given_the_process() {
    let (process, seqs) = generate_synthetic(20, 30, 82);
    let (_, again) = generate_synthetic(20, 30, 82);
    assert_eq!(seqs, again);
    for s in &seqs {
        assert_eq!(s.steps[0].features[0], 0.0);
        for t in 1..s.steps.len() {
            let prev: [f64; 5] = s.steps[t - 1].features[1..6].try_into().unwrap();
            let x = &s.steps[t].features;
            assert!((0.0..10.0).contains(&x[0]));
            let next = process.next(&prev, x[0]);
            for k in 0..5 {
                assert_eq!(x[k + 1].to_bits(), next[k].to_bits());
            }
            assert!(x[6..].iter().all(|v| (-1.0..1.0).contains(v)));
        }
        for st in &s.steps {
            let p: [f64; 5] = st.features[1..6].try_into().unwrap();
            assert_eq!(st.y, synthetic_label(&p));
        }
    }
}

#[test]
fn label_rule_agrees_with_sigmoid_threshold() {
    assert_eq!(synthetic_label(&[0.0; 5]), 1);
    let mut rng = Rng::new(14);
    for _ in 0..1_000_000 {
        let p = [(); 5].map(|_| rng.uniform(-3.0, 3.0));
        assert_eq!(synthetic_label(&p), synthetic_label_sigmoid(&p));
    }
}

#[test]
fn consumer_generator_respects_schema_bounds() {
    let Dataset::Consumers(c) = consumers(200, 15) else { unreachable!() };
    for s in &c {
        assert!((3..=MAX_LEN).contains(&s.loans.len()));
        assert_eq!(s.loans[0].features[0], 0.0);
        for l in &s.loans {
            assert!((3..=MAX_LEN).contains(&l.orders.len()));
            assert!((3..=MAX_LEN).contains(&l.sessions.len()));
            assert!((0.0..=1.0).contains(&l.r));
            assert_eq!(l.y == 1, l.r >= 0.5);
            assert_eq!(l.orders[0][0], 0.0);
            assert_eq!(l.sessions[0][0], 0.0);
        }
    }
}
