//! Dataset records, validation, standardization, padding and fold splits,
//! plus the two generators used for experiments.
//!
//! Two line-delimited JSON record kinds are understood:
//!
//! ```text
//! {"consumer_id": "c1", "loans": [{"features": [...], "y": 0, "r": 0.1,
//!   "orders": [[...], ...], "sessions": [[...], ...]}, ...]}
//! {"sequence_id": 7, "steps": [{"features": [...], "y": 1}, ...]}
//! ```
//!
//! Column 0 of every loan, order, session and synthetic feature vector is
//! the interval since the previous element of the same sequence (days for
//! loans and orders, minutes for sessions) and is 0 for the first element.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng};

pub const MIN_LEN: usize = 3;
pub const MAX_LEN: usize = 15;
pub const SYNTHETIC_FEATURES: usize = 106;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoanEvent {
    pub features: Vec<f64>,
    pub y: u8,
    pub r: f64,
    pub orders: Vec<Vec<f64>>,
    pub sessions: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerSequence {
    pub consumer_id: String,
    pub loans: Vec<LoanEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStep {
    pub features: Vec<f64>,
    pub y: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSequence {
    pub sequence_id: u64,
    pub steps: Vec<SyntheticStep>,
}

/// Feature widths of a consumer dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths {
    pub loan: usize,
    pub order: usize,
    pub session: usize,
}

impl Default for Widths {
    fn default() -> Self {
        Widths {
            loan: 15,
            order: 45,
            session: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Consumers(Vec<ConsumerSequence>),
    Synthetic(Vec<SyntheticSequence>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Consumers(c) => c.len(),
            Dataset::Synthetic(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self, Dataset::Consumers(_))
    }

    pub fn examples(&self) -> Vec<Example> {
        match self {
            Dataset::Consumers(c) => c.iter().map(ConsumerSequence::to_example).collect(),
            Dataset::Synthetic(s) => s.iter().map(SyntheticSequence::to_example).collect(),
        }
    }

    /// Total labelled steps.
    pub fn num_steps(&self) -> usize {
        match self {
            Dataset::Consumers(c) => c.iter().map(|s| s.loans.len()).sum(),
            Dataset::Synthetic(s) => s.iter().map(|s| s.steps.len()).sum(),
        }
    }

    pub fn positive_fraction(&self) -> f64 {
        let positives: usize = match self {
            Dataset::Consumers(c) => c.iter().flat_map(|s| &s.loans).filter(|l| l.y == 1).count(),
            Dataset::Synthetic(s) => s.iter().flat_map(|s| &s.steps).filter(|l| l.y == 1).count(),
        };
        positives as f64 / self.num_steps().max(1) as f64
    }
}

fn check_row(row: &[f64], width: usize, what: &str) -> std::result::Result<(), String> {
    if row.len() != width {
        return Err(format!("{what} has {} features, expected {width}", row.len()));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite()) {
        return Err(format!("{what} has non-finite feature {v}"));
    }
    if row[0] < 0.0 {
        return Err(format!("{what} has negative interval {}", row[0]));
    }
    Ok(())
}

fn check_len(n: usize, what: &str) -> std::result::Result<(), String> {
    if n < MIN_LEN {
        return Err(format!("{what} has {n} elements, below the minimum length of {MIN_LEN}"));
    }
    if n > MAX_LEN {
        return Err(format!("{what} has {n} elements, above the maximum length of {MAX_LEN}"));
    }
    Ok(())
}

impl ConsumerSequence {
    pub fn validate(&self, widths: &Widths) -> std::result::Result<(), String> {
        check_len(self.loans.len(), "loan sequence")?;
        for (i, loan) in self.loans.iter().enumerate() {
            check_row(&loan.features, widths.loan, &format!("loan {i}"))?;
            if loan.y > 1 {
                return Err(format!("loan {i} has label {}, expected 0 or 1", loan.y));
            }
            if !(0.0..=1.0).contains(&loan.r) {
                return Err(format!("loan {i} has delinquency ratio {} outside [0, 1]", loan.r));
            }
            check_len(loan.orders.len(), &format!("order sequence of loan {i}"))?;
            check_len(loan.sessions.len(), &format!("session sequence of loan {i}"))?;
            for (j, o) in loan.orders.iter().enumerate() {
                check_row(o, widths.order, &format!("order {j} of loan {i}"))?;
            }
            for (j, s) in loan.sessions.iter().enumerate() {
                check_row(s, widths.session, &format!("session {j} of loan {i}"))?;
            }
        }
        Ok(())
    }

    fn widths(&self) -> Option<Widths> {
        let loan = self.loans.first()?;
        Some(Widths {
            loan: loan.features.len(),
            order: loan.orders.first().map_or(0, Vec::len),
            session: loan.sessions.first().map_or(0, Vec::len),
        })
    }

    pub fn has_default(&self) -> bool {
        self.loans.iter().any(|l| l.y == 1)
    }

    pub fn to_example(&self) -> Example {
        let events = |rows: &[Vec<f64>]| {
            rows.iter()
                .map(|f| Event {
                    features: f.clone(),
                    dt: f[0],
                })
                .collect()
        };
        Example {
            id: self.consumer_id.clone(),
            steps: self
                .loans
                .iter()
                .map(|l| Step {
                    features: l.features.clone(),
                    dt: l.features[0],
                    y: l.y as f64,
                    r: l.r,
                    orders: events(&l.orders),
                    sessions: events(&l.sessions),
                })
                .collect(),
        }
    }
}

impl SyntheticSequence {
    pub fn validate(&self, width: usize) -> std::result::Result<(), String> {
        if self.steps.is_empty() {
            return Err("sequence has no steps".into());
        }
        for (t, s) in self.steps.iter().enumerate() {
            check_row(&s.features, width, &format!("step {t}"))?;
            if s.y > 1 {
                return Err(format!("step {t} has label {}, expected 0 or 1", s.y));
            }
        }
        Ok(())
    }

    pub fn to_example(&self) -> Example {
        Example {
            id: self.sequence_id.to_string(),
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    features: s.features.clone(),
                    dt: s.features[0],
                    y: s.y as f64,
                    r: 0.0,
                    orders: Vec::new(),
                    sessions: Vec::new(),
                })
                .collect(),
        }
    }
}

/// Format-neutral view of one sequence used by models.
///
/// `features` may be standardized; `dt` always holds the raw interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub features: Vec<f64>,
    pub dt: f64,
    pub y: f64,
    pub r: f64,
    pub orders: Vec<Event>,
    pub sessions: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub features: Vec<f64>,
    pub dt: f64,
}

impl Example {
    pub fn has_default(&self) -> bool {
        self.steps.iter().any(|s| s.y == 1.0)
    }
}

pub fn parse_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut consumers = Vec::new();
    let mut synthetic = Vec::new();
    let mut widths: Option<Widths> = None;
    let mut synthetic_width: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let data_err = |message: String| Error::Data { line: line_no, message };
        let line = line.map_err(|e| data_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        let is_consumer = value.get("consumer_id").is_some();
        if is_consumer && !synthetic.is_empty() || !is_consumer && !consumers.is_empty() {
            return Err(data_err("file mixes consumer and synthetic records".into()));
        }
        if is_consumer {
            let c: ConsumerSequence = serde_json::from_value(value).map_err(|e| data_err(e.to_string()))?;
            let w = *widths.get_or_insert_with(|| c.widths().unwrap_or_default());
            c.validate(&w).map_err(data_err)?;
            consumers.push(c);
        } else {
            let s: SyntheticSequence = serde_json::from_value(value).map_err(|e| data_err(e.to_string()))?;
            let w = *synthetic_width.get_or_insert_with(|| s.steps.first().map_or(0, |x| x.features.len()));
            s.validate(w).map_err(data_err)?;
            synthetic.push(s);
        }
    }
    Ok(if synthetic.is_empty() {
        Dataset::Consumers(consumers)
    } else {
        Dataset::Synthetic(synthetic)
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file))
}

pub fn write_dataset(mut w: impl Write, data: &Dataset) -> Result<()> {
    match data {
        Dataset::Consumers(c) => {
            for s in c {
                serde_json::to_writer(&mut w, s)?;
                w.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
            }
        }
        Dataset::Synthetic(c) => {
            for s in c {
                serde_json::to_writer(&mut w, s)?;
                w.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
            }
        }
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_atomic(path.as_ref(), |w| write_dataset(w, data))
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(tmp);
    body(&mut w)?;
    let tmp = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Per-feature z-score. Features with spread below `1e-12` are only centered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Result<Standardizer> {
        let first = rows.first().ok_or_else(|| Error::domain("cannot standardize an empty split"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

/// Standardizers for every level present in the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub step: Standardizer,
    pub order: Option<Standardizer>,
    pub session: Option<Standardizer>,
}

impl Standardization {
    pub fn fit(train: &[Example]) -> Result<Standardization> {
        let steps: Vec<&Step> = train.iter().flat_map(|e| &e.steps).collect();
        let rows: Vec<&[f64]> = steps.iter().map(|s| s.features.as_slice()).collect();
        let sub = |pick: fn(&Step) -> &Vec<Event>| -> Result<Option<Standardizer>> {
            let rows: Vec<&[f64]> = steps.iter().flat_map(|s| pick(s)).map(|e| e.features.as_slice()).collect();
            if rows.is_empty() {
                Ok(None)
            } else {
                Standardizer::fit(&rows).map(Some)
            }
        };
        Ok(Standardization {
            step: Standardizer::fit(&rows)?,
            order: sub(|s| &s.orders)?,
            session: sub(|s| &s.sessions)?,
        })
    }

    pub fn apply(&self, data: &[Example]) -> Vec<Example> {
        let mut out = data.to_vec();
        for e in &mut out {
            for s in &mut e.steps {
                self.step.apply(&mut s.features);
                if let Some(o) = &self.order {
                    s.orders.iter_mut().for_each(|ev| o.apply(&mut ev.features));
                }
                if let Some(o) = &self.session {
                    s.sessions.iter_mut().for_each(|ev| o.apply(&mut ev.features));
                }
            }
        }
        out
    }
}

/// What to place in a [`PaddedBatch`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadSpec {
    pub max_len: usize,
    pub sub_max_len: usize,
    /// First step feature column fed to the model.
    pub feature_from: usize,
    pub orders: bool,
    pub sessions: bool,
}

impl PadSpec {
    pub fn flat(max_len: usize) -> Self {
        PadSpec {
            max_len,
            sub_max_len: 0,
            feature_from: 0,
            orders: false,
            sessions: false,
        }
    }

    pub fn hierarchical() -> Self {
        PadSpec {
            max_len: MAX_LEN,
            sub_max_len: MAX_LEN,
            feature_from: 0,
            orders: true,
            sessions: true,
        }
    }
}

/// Step-major padded tensors; column `b` is the `b`-th example.
///
/// Sub-sequence tensors hold one column per (step, example) pair at index
/// `step * batch + b`. Padded entries are zero with mask 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    pub ids: Vec<String>,
    pub batch: usize,
    pub x: Vec<Matrix>,
    pub dt: Vec<Matrix>,
    pub mask: Vec<Matrix>,
    pub y: Vec<Matrix>,
    pub r: Vec<Matrix>,
    pub orders: Option<SubBatch>,
    pub sessions: Option<SubBatch>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubBatch {
    pub x: Vec<Matrix>,
    pub dt: Vec<Matrix>,
    pub mask: Vec<Matrix>,
}

impl PaddedBatch {
    pub fn max_len(&self) -> usize {
        self.mask.len()
    }

    pub fn num_valid(&self) -> usize {
        self.mask.iter().map(|m| m.data().iter().filter(|&&v| v == 1.0).count()).sum()
    }

    pub fn is_valid(&self, step: usize, b: usize) -> bool {
        self.mask[step].get(0, b) == 1.0
    }
}

fn sub_batch(examples: &[&Example], spec: &PadSpec, pick: fn(&Step) -> &Vec<Event>) -> Result<Option<SubBatch>> {
    let batch = examples.len();
    let width = examples
        .iter()
        .flat_map(|e| &e.steps)
        .flat_map(|s| pick(s))
        .map(|e| e.features.len())
        .next();
    let Some(d) = width else {
        return Err(Error::domain("sub-sequences requested but the examples have none"));
    };
    let cols = spec.max_len * batch;
    let mut x = vec![Matrix::zeros(d, cols); spec.sub_max_len];
    let mut dt = vec![Matrix::zeros(1, cols); spec.sub_max_len];
    let mut mask = vec![Matrix::zeros(1, cols); spec.sub_max_len];
    for (b, e) in examples.iter().enumerate() {
        for (i, s) in e.steps.iter().enumerate() {
            let events = pick(s);
            if events.len() > spec.sub_max_len {
                return Err(Error::domain(format!(
                    "sub-sequence of length {} exceeds capacity {}",
                    events.len(),
                    spec.sub_max_len
                )));
            }
            let c = i * batch + b;
            for (j, ev) in events.iter().enumerate() {
                if ev.features.len() != d {
                    return Err(Error::shape("pad_and_mask", (ev.features.len(), 1), (d, 1)));
                }
                for (k, v) in ev.features.iter().enumerate() {
                    x[j].set(k, c, *v);
                }
                dt[j].set(0, c, ev.dt);
                mask[j].set(0, c, 1.0);
            }
        }
    }
    Ok(Some(SubBatch { x, dt, mask }))
}

pub fn pad_and_mask(examples: &[&Example], spec: &PadSpec) -> Result<PaddedBatch> {
    let batch = examples.len();
    if batch == 0 {
        return Err(Error::domain("empty batch"));
    }
    let d = examples
        .iter()
        .flat_map(|e| e.steps.first())
        .map(|s| s.features.len())
        .next()
        .ok_or_else(|| Error::domain("batch has no steps"))?;
    if spec.feature_from >= d {
        return Err(Error::config(format!("feature offset {} leaves no features of {d}", spec.feature_from)));
    }
    let dx = d - spec.feature_from;
    let zeros = |r| vec![Matrix::zeros(r, batch); spec.max_len];
    let (mut x, mut dt, mut mask, mut y, mut r) = (zeros(dx), zeros(1), zeros(1), zeros(1), zeros(1));
    for (b, e) in examples.iter().enumerate() {
        if e.steps.len() > spec.max_len {
            return Err(Error::domain(format!(
                "sequence `{}` has {} steps, capacity is {}",
                e.id,
                e.steps.len(),
                spec.max_len
            )));
        }
        for (t, s) in e.steps.iter().enumerate() {
            if s.features.len() != d {
                return Err(Error::shape("pad_and_mask", (s.features.len(), 1), (d, 1)));
            }
            for (k, v) in s.features[spec.feature_from..].iter().enumerate() {
                x[t].set(k, b, *v);
            }
            dt[t].set(0, b, s.dt);
            mask[t].set(0, b, 1.0);
            y[t].set(0, b, s.y);
            r[t].set(0, b, s.r);
        }
    }
    Ok(PaddedBatch {
        ids: examples.iter().map(|e| e.id.clone()).collect(),
        batch,
        x,
        dt,
        mask,
        y,
        r,
        orders: if spec.orders { sub_batch(examples, spec, |s| &s.orders)? } else { None },
        sessions: if spec.sessions { sub_batch(examples, spec, |s| &s.sessions)? } else { None },
    })
}

/// Recover the examples from a batch. Exact when `feature_from` was 0.
pub fn unpad(batch: &PaddedBatch) -> Vec<Example> {
    let events = |sub: &Option<SubBatch>, c: usize| -> Vec<Event> {
        let Some(sub) = sub else { return Vec::new() };
        (0..sub.mask.len())
            .filter(|&j| sub.mask[j].get(0, c) == 1.0)
            .map(|j| Event {
                features: (0..sub.x[j].rows()).map(|k| sub.x[j].get(k, c)).collect(),
                dt: sub.dt[j].get(0, c),
            })
            .collect()
    };
    (0..batch.batch)
        .map(|b| Example {
            id: batch.ids[b].clone(),
            steps: (0..batch.max_len())
                .filter(|&t| batch.is_valid(t, b))
                .map(|t| Step {
                    features: (0..batch.x[t].rows()).map(|k| batch.x[t].get(k, b)).collect(),
                    dt: batch.dt[t].get(0, b),
                    y: batch.y[t].get(0, b),
                    r: batch.r[t].get(0, b),
                    orders: events(&batch.orders, t * batch.batch + b),
                    sessions: events(&batch.sessions, t * batch.batch + b),
                })
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified `k`-fold partition of item indices.
///
/// Each stratum is shuffled and the concatenation is dealt round-robin, so
/// fold sizes differ by at most one and every fold gets its share of each
/// stratum.
pub fn k_fold_split(strata: &[bool], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    if strata.len() < k {
        return Err(Error::domain(format!("{} items cannot fill {k} folds", strata.len())));
    }
    let mut rng = Rng::new(seed);
    let mut pos: Vec<usize> = (0..strata.len()).filter(|&i| strata[i]).collect();
    let mut neg: Vec<usize> = (0..strata.len()).filter(|&i| !strata[i]).collect();
    rng.shuffle(&mut pos);
    rng.shuffle(&mut neg);
    let mut fold_of = vec![0; strata.len()];
    for (n, i) in pos.into_iter().chain(neg).enumerate() {
        fold_of[i] = n % k;
    }
    Ok((0..k)
        .map(|f| Fold {
            train: (0..strata.len()).filter(|&i| fold_of[i] != f).collect(),
            test: (0..strata.len()).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect())
}

pub fn five_fold_split(examples: &[Example], seed: u64) -> Result<Vec<Fold>> {
    let strata: Vec<bool> = examples.iter().map(Example::has_default).collect();
    k_fold_split(&strata, 5, seed)
}

/// `1(sin(2 x2 + x3) + 3 x4 x5 - x6^3 >= 0)` on `[x2, .., x6]`.
pub fn synthetic_label(p: &[f64; 5]) -> u8 {
    let z = (2.0 * p[0] + p[1]).sin() + 3.0 * p[2] * p[3] - p[4].powi(3);
    u8::from(z >= 0.0)
}

/// The same rule written through the sigmoid.
pub fn synthetic_label_sigmoid(p: &[f64; 5]) -> u8 {
    let z = (2.0 * p[0] + p[1]).sin() + 3.0 * p[2] * p[3] - p[4].powi(3);
    u8::from(sigmoid(z) >= 0.5)
}

/// Shared transformation that carries features 2 to 6 from one step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProcess {
    pub w1: [[f64; 5]; 5],
    pub b1: [f64; 5],
    pub w2: [f64; 5],
    pub b2: [f64; 5],
}

impl SyntheticProcess {
    pub fn draw(rng: &mut Rng) -> Self {
        let mut u = || rng.uniform(-1.0, 1.0);
        let mut w1 = [[0.0; 5]; 5];
        for row in &mut w1 {
            for v in row.iter_mut() {
                *v = u();
            }
        }
        let b1 = [u(), u(), u(), u(), u()];
        let w2 = [u(), u(), u(), u(), u()];
        let b2 = [u(), u(), u(), u(), u()];
        SyntheticProcess { w1, b1, w2, b2 }
    }

    pub fn next(&self, prev: &[f64; 5], interval: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        for k in 0..5 {
            let mut a = self.b1[k];
            for j in 0..5 {
                a += self.w1[k][j] * prev[j];
            }
            out[k] = (self.w2[k] * interval + self.b2[k]).exp() * a.tanh();
        }
        out
    }
}

/// Sequences of 106 features where only features 2 to 6 drive the label.
pub fn generate_synthetic(n: usize, len: usize, seed: u64) -> (SyntheticProcess, Vec<SyntheticSequence>) {
    let mut rng = Rng::new(seed);
    let process = SyntheticProcess::draw(&mut rng);
    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let mut steps: Vec<SyntheticStep> = Vec::with_capacity(len);
        for t in 0..len {
            let mut x = vec![0.0; SYNTHETIC_FEATURES];
            if t == 0 {
                for v in &mut x[1..] {
                    *v = rng.uniform(-1.0, 1.0);
                }
            } else {
                x[0] = rng.uniform(0.0, 10.0);
                let prev: [f64; 5] = steps[t - 1].features[1..6].try_into().expect("five features");
                let next = process.next(&prev, x[0]);
                x[1..6].copy_from_slice(&next);
                for v in &mut x[6..] {
                    *v = rng.uniform(-1.0, 1.0);
                }
            }
            let p: [f64; 5] = x[1..6].try_into().expect("five features");
            steps.push(SyntheticStep {
                y: synthetic_label(&p),
                features: x,
            });
        }
        out.push(SyntheticSequence {
            sequence_id: id as u64,
            steps,
        });
    }
    (process, out)
}

/// Coefficients of the planted default logit in [`generate_consumers`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedSignal {
    pub bias: f64,
    /// On loan feature 1.
    pub loan_a: f64,
    /// On loan feature 2.
    pub loan_b: f64,
    /// On the mean of order feature 1 within the loan.
    pub order_mean: f64,
    /// On the consumer's latent propensity, which is only observed through
    /// noisy copies in loan feature 3.
    pub latent: f64,
}

impl Default for PlantedSignal {
    fn default() -> Self {
        PlantedSignal {
            bias: -1.0,
            loan_a: 1.2,
            loan_b: -1.0,
            order_mean: 1.0,
            latent: 1.5,
        }
    }
}

/// Schema-conformant consumer sequences with a known default mechanism.
///
/// Every loan draws a Bernoulli default with probability
/// `sigmoid(bias + loan_a l1 + loan_b l2 + order_mean mean(o1) + latent u)`
/// where `u ~ N(0, 1)` is fixed per consumer and `l3 = u + N(0, 1)`. Other
/// features are standard normal noise. Defaulted loans get a delinquency
/// ratio in `[0.5, 1)`, others in `[0, 0.4)`.
pub fn generate_consumers(n: usize, widths: Widths, signal: PlantedSignal, seed: u64) -> Vec<ConsumerSequence> {
    assert!(widths.loan >= 4 && widths.order >= 2 && widths.session >= 1);
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let u = rng.normal();
        let n_loans = rng.int_between(MIN_LEN, MAX_LEN);
        let mut loans = Vec::with_capacity(n_loans);
        for i in 0..n_loans {
            let mut l: Vec<f64> = (0..widths.loan).map(|_| rng.normal()).collect();
            l[0] = if i == 0 { 0.0 } else { rng.uniform(0.0, 30.0) };
            l[3] = u + rng.normal();
            let order_shift = rng.normal();
            let n_orders = rng.int_between(MIN_LEN, MAX_LEN);
            let orders: Vec<Vec<f64>> = (0..n_orders)
                .map(|j| {
                    let mut o: Vec<f64> = (0..widths.order).map(|_| rng.normal()).collect();
                    o[0] = if j == 0 { 0.0 } else { rng.uniform(0.0, 10.0) };
                    o[1] = order_shift + 0.5 * o[1];
                    o
                })
                .collect();
            let n_sessions = rng.int_between(MIN_LEN, MAX_LEN);
            let sessions: Vec<Vec<f64>> = (0..n_sessions)
                .map(|j| {
                    let mut s: Vec<f64> = (0..widths.session).map(|_| rng.normal()).collect();
                    s[0] = if j == 0 { 0.0 } else { rng.uniform(0.0, 60.0) };
                    s
                })
                .collect();
            let order_mean = orders.iter().map(|o| o[1]).sum::<f64>() / n_orders as f64;
            let logit = signal.bias
                + signal.loan_a * l[1]
                + signal.loan_b * l[2]
                + signal.order_mean * order_mean
                + signal.latent * u;
            let y = u8::from(rng.bernoulli(sigmoid(logit)));
            let r = if y == 1 { rng.uniform(0.5, 1.0) } else { rng.uniform(0.0, 0.4) };
            loans.push(LoanEvent {
                features: l,
                y,
                r,
                orders,
                sessions,
            });
        }
        out.push(ConsumerSequence {
            consumer_id: format!("c{id:06}"),
            loans,
        });
    }
    out
}
