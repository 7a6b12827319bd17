//! AUC, logistic-regression baselines and the cross-validation harness.

use serde::{Deserialize, Serialize};

use crate::data::{k_fold_split, Example, Standardization, Standardizer, Step};
use crate::error::{Error, Result};
use crate::network::{DtScale, InputShape, ModelKind, NetworkConfig, View};
use crate::numerics::{sigmoid, Rng};
use crate::training::{holdout, predict, train, TrainingConfig};

/// Area under the ROC curve for `(score, is_positive)` pairs.
///
/// Rank based: each positive/negative pair counts 2 when the positive scores
/// higher and 1 on a tie, and the integer total is divided by `2 * P * N`.
pub fn auc(samples: &[(f64, bool)]) -> Result<f64> {
    if let Some((s, _)) = samples.iter().find(|(s, _)| !s.is_finite()) {
        return Err(Error::domain(format!("non-finite score {s}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut negatives_below, mut doubled): (u128, u128) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    let n_pos = samples.iter().filter(|s| s.1).count() as u128;
    let n_neg = samples.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("AUC needs both positive and negative labels"));
    }
    Ok(doubled as f64 / (2 * n_pos * n_neg) as f64)
}

fn mean_rows(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Vec<f64> {
    let mut sum = vec![0.0; width];
    let mut n = 0usize;
    for r in rows {
        for (s, v) in sum.iter_mut().zip(&r) {
            *s += v;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

pub fn lr_features_loan(step: &Step) -> Vec<f64> {
    step.features.clone()
}

/// Loan features followed by the mean order and mean session vectors.
pub fn lr_features_all(step: &Step) -> Vec<f64> {
    let width = |ev: &[crate::data::Event]| ev.first().map_or(0, |e| e.features.len());
    let mut out = step.features.clone();
    out.extend(mean_rows(step.orders.iter().map(|e| e.features.clone()), width(&step.orders)));
    out.extend(mean_rows(step.sessions.iter().map(|e| e.features.clone()), width(&step.sessions)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LrParams {
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

pub const LR_RATE: f64 = 0.1;
pub const LR_ITERATIONS: usize = 500;

/// Full-batch gradient descent on mean cross-entropy from zero weights.
pub fn train_lr(rows: &[Vec<f64>], labels: &[f64], rate: f64, iterations: usize) -> Result<LrParams> {
    let d = rows.first().ok_or_else(|| Error::domain("no training rows"))?.len();
    if rows.len() != labels.len() {
        return Err(Error::domain("rows and labels differ in length"));
    }
    let n = rows.len() as f64;
    let mut p = LrParams {
        weights: vec![0.0; d],
        bias: 0.0,
    };
    for _ in 0..iterations {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in rows.iter().zip(labels) {
            let e = p.predict(x) - y;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += e * v;
            }
            gb += e;
        }
        for (w, g) in p.weights.iter_mut().zip(&gw) {
            *w -= rate * g / n;
        }
        p.bias -= rate * gb / n;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Network(ModelKind, View),
    Lr(View),
    Random,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Network(m, v) => format!("{} ({})", m.label(), v.label()),
            Method::Lr(v) => format!("lr ({})", v.label()),
            Method::Random => "random".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub method: Method,
    pub folds: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dt_scale: DtScale,
    pub training: TrainingConfig,
}

impl Experiment {
    pub fn new(method: Method, seed: u64) -> Self {
        Experiment {
            method,
            folds: 5,
            seed,
            hidden: 5,
            dt_scale: DtScale::default(),
            training: TrainingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub auc: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub method: String,
    pub folds: Vec<FoldReport>,
    pub mean: f64,
    pub sd: f64,
}

impl ExperimentResult {
    pub fn aucs(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.auc).collect()
    }
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn input_shape(examples: &[Example]) -> Result<InputShape> {
    let step = examples
        .iter()
        .flat_map(|e| e.steps.first())
        .next()
        .ok_or_else(|| Error::domain("dataset has no steps"))?;
    Ok(InputShape {
        d_step: step.features.len(),
        d_o: step.orders.first().map_or(0, |e| e.features.len()),
        d_s: step.sessions.first().map_or(0, |e| e.features.len()),
        max_len: examples.iter().map(|e| e.steps.len()).max().unwrap_or(0),
    })
}

fn lr_rows(examples: &[Example], view: View) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let f = match view {
        View::Loan => lr_features_loan,
        View::All => lr_features_all,
        other => return Err(Error::config(format!("logistic regression takes view loan or all, not {}", other.label()))),
    };
    let steps = examples.iter().flat_map(|e| &e.steps);
    Ok((steps.clone().map(f).collect(), steps.map(|s| s.y).collect()))
}

fn standardized(rows: &[Vec<f64>], s: &Standardizer) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            s.apply(&mut r);
            r
        })
        .collect()
}

fn run_fold(exp: &Experiment, train_raw: &[Example], test_raw: &[Example], seed: u64) -> Result<(Vec<(f64, bool)>, usize)> {
    match exp.method {
        Method::Random => {
            let mut rng = Rng::new(seed);
            let scored = test_raw
                .iter()
                .flat_map(|e| &e.steps)
                .map(|s| (rng.uniform(0.0, 1.0), s.y == 1.0))
                .collect();
            Ok((scored, 0))
        }
        Method::Lr(view) => {
            let (rows, labels) = lr_rows(train_raw, view)?;
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let s = Standardizer::fit(&refs)?;
            let p = train_lr(&standardized(&rows, &s), &labels, LR_RATE, LR_ITERATIONS)?;
            let (test_rows, test_labels) = lr_rows(test_raw, view)?;
            let scored = standardized(&test_rows, &s)
                .iter()
                .zip(test_labels)
                .map(|(x, y)| (p.predict(x), y == 1.0))
                .collect();
            Ok((scored, LR_ITERATIONS))
        }
        Method::Network(model, view) => {
            let mut shape = input_shape(train_raw)?;
            shape.max_len = shape.max_len.max(input_shape(test_raw)?.max_len);
            let mut cfg = NetworkConfig::for_model(model, view, shape, exp.hidden)?;
            cfg.dt_scale = exp.dt_scale;
            let mut tc = exp.training.clone();
            tc.seed = seed;
            let (inner, val) = holdout(train_raw, tc.val_fraction, seed);
            let st = Standardization::fit(&inner)?;
            let outcome = train(&tc, &cfg, &st.apply(&inner), &st.apply(&val))?;
            let scores = predict(&cfg, &outcome.params, &st.apply(test_raw), tc.chunk_size)?;
            Ok((scores.iter().map(|s| (s.y_hat, s.y == 1.0)).collect(), outcome.history.len()))
        }
    }
}

/// Stratified k-fold evaluation; AUC pools every valid step of a test fold.
pub fn run_experiment(exp: &Experiment, examples: &[Example]) -> Result<ExperimentResult> {
    let strata: Vec<bool> = examples.iter().map(Example::has_default).collect();
    let folds = k_fold_split(&strata, exp.folds, exp.seed)?;
    let mut seeds = Rng::new(exp.seed);
    let mut reports = Vec::with_capacity(folds.len());
    for fold in &folds {
        let fold_seed = seeds.next_seed();
        let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect::<Vec<_>>();
        let (train_raw, test_raw) = (pick(&fold.train), pick(&fold.test));
        let (scored, epochs) = run_fold(exp, &train_raw, &test_raw, fold_seed)?;
        reports.push(FoldReport {
            auc: auc(&scored)?,
            train_ids: train_raw.iter().map(|e| e.id.clone()).collect(),
            test_ids: test_raw.iter().map(|e| e.id.clone()).collect(),
            epochs,
        });
    }
    let aucs: Vec<f64> = reports.iter().map(|r| r.auc).collect();
    let (mean, sd) = mean_sd(&aucs);
    Ok(ExperimentResult {
        method: exp.method.label(),
        folds: reports,
        mean,
        sd,
    })
}

/// CSV with columns `method, auc_1..auc_k, avg_auc, sd`.
pub fn write_results(w: impl std::io::Write, results: &[ExperimentResult]) -> Result<()> {
    let k = results.first().map_or(0, |r| r.folds.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["method".to_string()];
    header.extend((1..=k).map(|i| format!("auc_{i}")));
    header.extend(["avg_auc".to_string(), "sd".to_string()]);
    out.write_record(&header).map_err(crate::training::csv_error)?;
    for r in results {
        let mut row = vec![r.method.clone()];
        row.extend(r.aucs().iter().map(|a| a.to_string()));
        row.extend([r.mean.to_string(), r.sd.to_string()]);
        out.write_record(&row).map_err(crate::training::csv_error)?;
    }
    out.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}
