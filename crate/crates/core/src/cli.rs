//! Command-line front end: argument types, commands and checkpoints.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_consumers, generate_synthetic, load_dataset, save_dataset, write_atomic, Dataset, Example,
    PlantedSignal, Standardization, Widths,
};
use crate::error::{Error, Result};
use crate::eval::{input_shape, run_experiment, write_results, Experiment, Method};
use crate::network::{forward, DtScale, HeadKind, ModelKind, NetworkConfig, View};
use crate::numerics::{ParamRecord, ParamSet};
use crate::training::{holdout, predict, train, write_history, LossKind, TrainingConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "neucredit", version, about = "Time-value-aware sequence models for consumer credit risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated dataset.
    Generate(GenerateArgs),
    /// Train one model and write a checkpoint.
    Train(TrainArgs),
    /// Cross-validate a model and write a results table.
    Cv(CvArgs),
    /// Export per-loan risk components from a decomposed-head checkpoint.
    Decompose(DecomposeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Synthetic,
    Consumers,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of sequences (or consumers).
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Steps per synthetic sequence.
    #[arg(long, default_value_t = 50)]
    pub len: usize,
    #[arg(long, default_value_t = 82)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DataKind::Synthetic)]
    pub kind: DataKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lstm,
    LstmWDt,
    Tlstm,
    Tva,
    FcTva,
    MvmTva,
    Neucredit,
    /// Logistic regression (cross-validation only).
    Lr,
    /// Uniform random scores (cross-validation only).
    Random,
}

impl ModelArg {
    fn network(self) -> Option<ModelKind> {
        Some(match self {
            ModelArg::Lstm => ModelKind::Lstm,
            ModelArg::LstmWDt => ModelKind::LstmWDt,
            ModelArg::Tlstm => ModelKind::Tlstm,
            ModelArg::Tva => ModelKind::Tva,
            ModelArg::FcTva => ModelKind::FcTva,
            ModelArg::MvmTva => ModelKind::MvmTva,
            ModelArg::Neucredit => ModelKind::Neucredit,
            ModelArg::Lr | ModelArg::Random => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    Loan,
    Order,
    Session,
    All,
}

impl From<ViewArg> for View {
    fn from(v: ViewArg) -> View {
        match v {
            ViewArg::Loan => View::Loan,
            ViewArg::Order => View::Order,
            ViewArg::Session => View::Session,
            ViewArg::All => View::All,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Bce,
    Conditional,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum)]
    pub view: ViewArg,
    /// Defaults to conditional for neucredit and bce otherwise.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// JSON run configuration, see [`RunConfig`].
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    #[arg(long)]
    pub history_csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum)]
    pub view: ViewArg,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Optional JSON overrides for `train` and `cv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub training: TrainingConfig,
    /// Hidden width of every cell; 5 when absent.
    pub hidden: Option<usize>,
    pub dt_scale: DtScale,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub model: ModelKind,
    pub view: View,
    pub loss: LossKind,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
}

/// Everything needed to score new data with a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub network: NetworkConfig,
    pub standardization: Standardization,
    pub params: Vec<ParamRecord>,
    pub training: TrainingMeta,
}

impl Checkpoint {
    pub fn param_set(&self) -> Result<ParamSet> {
        let p = ParamSet::from_records(self.params.clone())?;
        self.network.check(&p)?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                c.format_version
            )));
        }
        c.param_set()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    /// Standardize raw examples and score them.
    pub fn predict(&self, raw: &[Example]) -> Result<Vec<crate::training::Scored>> {
        let params = self.param_set()?;
        predict(&self.network, &params, &self.standardization.apply(raw), 64)
    }
}

/// Exit status for an error: 2 usage, 3 data, 4 divergence, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Data { .. } => 3,
        Error::Divergence { .. } => 4,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|f| println!("positive fraction: {f:.4}")),
        Command::Train(a) => cmd_train(&a).map(|c| {
            println!(
                "trained {} ({}) for {} epochs; best epoch {}",
                c.training.model.label(),
                c.training.view.label(),
                c.training.epochs_run,
                c.training.best_epoch
            )
        }),
        Command::Cv(a) => cmd_cv(&a).map(|r| println!("{}: mean AUC {:.4}, sd {:.4}", r.method, r.mean, r.sd)),
        Command::Decompose(a) => cmd_decompose(&a).map(|n| println!("wrote {n} rows")),
    }
}

/// Returns the positive-label fraction of the written dataset.
pub fn cmd_generate(a: &GenerateArgs) -> Result<f64> {
    let data = match a.kind {
        DataKind::Synthetic => Dataset::Synthetic(generate_synthetic(a.n, a.len, a.seed).1),
        DataKind::Consumers => {
            Dataset::Consumers(generate_consumers(a.n, Widths::default(), PlantedSignal::default(), a.seed))
        }
    };
    save_dataset(&a.out, &data)?;
    Ok(data.positive_fraction())
}

fn resolve_loss(model: ModelArg, loss: Option<LossArg>) -> Result<LossKind> {
    match (model, loss) {
        (ModelArg::Neucredit, None | Some(LossArg::Conditional)) => Ok(LossKind::Conditional),
        (ModelArg::Neucredit, Some(LossArg::Bce)) => Err(Error::config("model `neucredit` requires --loss conditional")),
        (_, Some(LossArg::Conditional)) => Err(Error::config("--loss conditional is only valid with model `neucredit`")),
        (_, _) => Ok(LossKind::Bce),
    }
}

const COMBINATIONS: &str = "valid combinations: lstm|lstm-w-dt|tlstm|tva with view loan|order|session; \
fc-tva|mvm-tva|neucredit with view all; lr with view loan|all (cv only); random (cv only)";

fn network_config(model: ModelKind, view: View, examples: &[Example], run: &RunConfig, hierarchical: bool) -> Result<NetworkConfig> {
    if !hierarchical && view != View::Loan {
        return Err(Error::config(format!(
            "synthetic sequences have no sub-sequences; use view loan ({COMBINATIONS})"
        )));
    }
    let mut cfg = NetworkConfig::for_model(model, view, input_shape(examples)?, run.hidden.unwrap_or(5))
        .map_err(|e| Error::config(format!("{e}; {COMBINATIONS}")))?;
    cfg.dt_scale = run.dt_scale;
    if hierarchical {
        cfg.max_len = cfg.max_len.max(crate::data::MAX_LEN);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<Checkpoint> {
    let model = a
        .model
        .network()
        .ok_or_else(|| Error::config(format!("`train` needs a network model; {COMBINATIONS}")))?;
    let loss = resolve_loss(a.model, a.loss)?;
    let mut run = RunConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        run.training.seed = s;
    }
    run.training.loss = loss;
    let data = load_dataset(&a.data)?;
    let examples = data.examples();
    let view = View::from(a.view);
    let cfg = network_config(model, view, &examples, &run, data.is_hierarchical())?;
    let (inner, val) = holdout(&examples, run.training.val_fraction, run.training.seed);
    let st = Standardization::fit(&inner)?;
    let outcome = train(&run.training, &cfg, &st.apply(&inner), &st.apply(&val))?;
    if let Some(h) = &a.history_csv {
        write_atomic(h, |w| write_history(w, &outcome.history))?;
    }
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        network: cfg,
        standardization: st,
        params: outcome.params.to_records(),
        training: TrainingMeta {
            model,
            view,
            loss,
            seed: run.training.seed,
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_auc: outcome.best_val_auc.is_finite().then_some(outcome.best_val_auc),
        },
    };
    ckpt.save(&a.out_checkpoint)?;
    Ok(ckpt)
}

pub fn cmd_cv(a: &CvArgs) -> Result<crate::eval::ExperimentResult> {
    let view = View::from(a.view);
    let method = match (a.model, view) {
        (ModelArg::Lr, View::Loan | View::All) => Method::Lr(view),
        (ModelArg::Lr, _) => return Err(Error::config(format!("lr takes view loan or all; {COMBINATIONS}"))),
        (ModelArg::Random, _) => Method::Random,
        (m, v) => Method::Network(m.network().expect("network model"), v),
    };
    let run = RunConfig::load(a.config.as_deref())?;
    let data = load_dataset(&a.data)?;
    let examples = data.examples();
    let mut exp = Experiment::new(method, a.seed);
    exp.folds = a.folds;
    exp.hidden = run.hidden.unwrap_or(5);
    exp.dt_scale = run.dt_scale;
    exp.training = run.training.clone();
    if let Method::Network(m, v) = method {
        exp.training.loss = resolve_loss(a.model, None)?;
        network_config(m, v, &examples, &run, data.is_hierarchical())?;
    }
    let result = run_experiment(&exp, &examples)?;
    write_atomic(&a.out_csv, |w| write_results(w, std::slice::from_ref(&result)))?;
    Ok(result)
}

/// Returns the number of rows written.
pub fn cmd_decompose(a: &DecomposeArgs) -> Result<usize> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    if ckpt.network.head != HeadKind::Decomposed {
        return Err(Error::config(
            "checkpoint uses the plain head; decomposition needs a model trained with the decomposed head",
        ));
    }
    let examples = load_dataset(&a.data)?.examples();
    let scores = ckpt.predict(&examples)?;
    write_atomic(&a.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["consumer_id", "loan_index", "y", "r", "y_hat", "y_a", "y_w", "y_b"])
            .map_err(crate::training::csv_error)?;
        for s in &scores {
            let [ya, yw, yb] = s.parts.expect("decomposed head");
            out.write_record([
                examples[s.example].id.clone(),
                s.step.to_string(),
                s.y.to_string(),
                s.r.to_string(),
                s.y_hat.to_string(),
                ya.to_string(),
                yw.to_string(),
                yb.to_string(),
            ])
            .map_err(crate::training::csv_error)?;
        }
        out.flush().map_err(|e| Error::io(&a.out, e))
    })?;
    Ok(scores.len())
}

/// Forward pass through a checkpoint on already standardized data.
pub fn checkpoint_forward(ckpt: &Checkpoint, batch: &crate::data::PaddedBatch) -> Result<crate::network::ForwardOutput> {
    forward(&ckpt.network, &ckpt.param_set()?, batch)
}
