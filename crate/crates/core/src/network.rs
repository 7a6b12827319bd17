//! Model assembly and the batched forward pass.
//!
//! A [`NetworkConfig`] describes one of four structures:
//!
//! * `Flat`: a single cell over the step stream. The step's interval column
//!   is dropped from the input and only reaches the cell as `Δt`.
//! * `Order` / `Session`: a bottom cell encodes each loan's sub-sequence and
//!   the up-level cell runs over those encodings.
//! * `Fused`: both sub-sequences are encoded, fused with the full loan vector
//!   and the fused vector drives the up-level cell.
//!
//! All sub-sequences of a batch are encoded together: the bottom cells see
//! one column per (loan, consumer) pair at index `loan * B + consumer`.
//! Steps whose mask is zero for every column are skipped; a masked column
//! keeps its previous state bit for bit either way.

use serde::{Deserialize, Serialize};

use crate::cells::{masked_step_on, CellKind, CellParams, CellSpec, Discount, TapeState};
use crate::data::{PadSpec, PaddedBatch, SubBatch, MAX_LEN};
use crate::error::{Error, Result};
use crate::fusion::{fuse_on, FusionKind, FusionParams, FusionSpec};
use crate::numerics::{Bound, Matrix, ParamSet, Rng, Tape, Var};

/// Command-line model names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lstm,
    LstmWDt,
    Tlstm,
    Tva,
    FcTva,
    MvmTva,
    Neucredit,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::LstmWDt => "lstm-w-dt",
            ModelKind::Tlstm => "tlstm",
            ModelKind::Tva => "tva",
            ModelKind::FcTva => "fc-tva",
            ModelKind::MvmTva => "mvm-tva",
            ModelKind::Neucredit => "neucredit",
        }
    }

    pub fn is_hierarchical(self) -> bool {
        matches!(self, ModelKind::FcTva | ModelKind::MvmTva | ModelKind::Neucredit)
    }

    pub fn cell(self) -> CellKind {
        match self {
            ModelKind::Lstm => CellKind::Lstm,
            ModelKind::LstmWDt => CellKind::LstmWithDt,
            ModelKind::Tlstm => CellKind::Tlstm,
            _ => CellKind::Tva,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum View {
    Loan,
    Order,
    Session,
    All,
}

impl View {
    pub fn label(self) -> &'static str {
        match self {
            View::Loan => "loan",
            View::Order => "order",
            View::Session => "session",
            View::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Flat,
    Order,
    Session,
    Fused(FusionKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Plain,
    Decomposed,
}

/// Divisors applied to raw intervals before they reach a cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtScale {
    pub up: f64,
    pub order: f64,
    pub session: f64,
}

impl Default for DtScale {
    fn default() -> Self {
        DtScale {
            up: 1.0,
            order: 1.0,
            session: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub structure: Structure,
    pub cell: CellKind,
    pub head: HeadKind,
    /// Width of a step's feature vector, interval column included.
    pub d_l: usize,
    pub d_o: usize,
    pub d_s: usize,
    pub d_ho: usize,
    pub d_hs: usize,
    pub d_hl: usize,
    pub d_z: usize,
    pub d_m: usize,
    pub max_len: usize,
    pub sub_max_len: usize,
    #[serde(default)]
    pub dt_scale: DtScale,
    #[serde(default)]
    pub discount: Discount,
}

/// Widths of the data a model will see.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputShape {
    pub d_step: usize,
    pub d_o: usize,
    pub d_s: usize,
    pub max_len: usize,
}

impl NetworkConfig {
    /// Default hierarchical configuration with MvM fusion and the decomposed head.
    pub fn neucredit(d_l: usize, d_o: usize, d_s: usize) -> Self {
        NetworkConfig {
            structure: Structure::Fused(FusionKind::Mvm),
            cell: CellKind::Tva,
            head: HeadKind::Decomposed,
            d_l,
            d_o,
            d_s,
            d_ho: 5,
            d_hs: 5,
            d_hl: 5,
            d_z: 5,
            d_m: 8,
            max_len: MAX_LEN,
            sub_max_len: MAX_LEN,
            dt_scale: DtScale::default(),
            discount: Discount::default(),
        }
    }

    /// Resolve a (model, view) pair. Hierarchical models need `View::All`;
    /// single-cell models take one stream.
    pub fn for_model(model: ModelKind, view: View, input: InputShape, hidden: usize) -> Result<Self> {
        let structure = match (model, view) {
            (ModelKind::FcTva, View::All) => Structure::Fused(FusionKind::Fc),
            (ModelKind::MvmTva | ModelKind::Neucredit, View::All) => Structure::Fused(FusionKind::Mvm),
            (m, _) if m.is_hierarchical() => {
                return Err(Error::config(format!("model `{}` requires view `all`", m.label())));
            }
            (_, View::Loan) => Structure::Flat,
            (_, View::Order) => Structure::Order,
            (_, View::Session) => Structure::Session,
            (m, View::All) => {
                return Err(Error::config(format!(
                    "model `{}` takes a single view: loan, order or session",
                    m.label()
                )));
            }
        };
        let mut cfg = NetworkConfig::neucredit(input.d_step, input.d_o, input.d_s);
        cfg.structure = structure;
        cfg.cell = model.cell();
        cfg.head = if model == ModelKind::Neucredit {
            HeadKind::Decomposed
        } else {
            HeadKind::Plain
        };
        cfg.d_ho = hidden;
        cfg.d_hs = hidden;
        cfg.d_hl = hidden;
        cfg.max_len = input.max_len;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.d_l, self.d_ho, self.d_hs, self.d_hl, self.d_z, self.d_m, self.max_len,
        ];
        if widths.contains(&0) {
            return Err(Error::config("network widths must be positive"));
        }
        if self.structure == Structure::Flat && self.d_l < 2 {
            return Err(Error::config("flat models need at least one feature besides the interval"));
        }
        if self.needs_orders() && self.d_o == 0 || self.needs_sessions() && self.d_s == 0 {
            return Err(Error::config("sub-sequence widths must be positive"));
        }
        if self.structure != Structure::Flat && self.sub_max_len == 0 {
            return Err(Error::config("sub-sequence capacity must be positive"));
        }
        let scales = [self.dt_scale.up, self.dt_scale.order, self.dt_scale.session];
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("interval scales must be positive"));
        }
        Ok(())
    }

    pub fn needs_orders(&self) -> bool {
        matches!(self.structure, Structure::Order | Structure::Fused(_))
    }

    pub fn needs_sessions(&self) -> bool {
        matches!(self.structure, Structure::Session | Structure::Fused(_))
    }

    pub fn up_input(&self) -> usize {
        match self.structure {
            Structure::Flat => self.d_l - 1,
            Structure::Order => self.d_ho,
            Structure::Session => self.d_hs,
            Structure::Fused(_) => self.d_z,
        }
    }

    pub fn pad_spec(&self) -> PadSpec {
        PadSpec {
            max_len: self.max_len,
            sub_max_len: if self.structure == Structure::Flat { 0 } else { self.sub_max_len },
            feature_from: usize::from(self.structure == Structure::Flat),
            orders: self.needs_orders(),
            sessions: self.needs_sessions(),
        }
    }

    fn cell_spec(&self, d_x: usize, d_h: usize) -> CellSpec {
        let mut s = CellSpec::new(self.cell, d_x, d_h).with_lift(self.d_m);
        s.discount = self.discount;
        s
    }

    pub fn up_cell(&self) -> CellSpec {
        self.cell_spec(self.up_input(), self.d_hl)
    }

    pub fn order_cell(&self) -> Option<CellSpec> {
        self.needs_orders().then(|| self.cell_spec(self.d_o, self.d_ho))
    }

    pub fn session_cell(&self) -> Option<CellSpec> {
        self.needs_sessions().then(|| self.cell_spec(self.d_s, self.d_hs))
    }

    pub fn fusion(&self) -> Option<FusionSpec> {
        match self.structure {
            Structure::Fused(kind) => Some(FusionSpec {
                kind,
                d_l: self.d_l,
                d_ho: self.d_ho,
                d_hs: self.d_hs,
                d_z: self.d_z,
            }),
            _ => None,
        }
    }

    pub fn head_shapes(&self) -> Vec<(&'static str, (usize, usize))> {
        let h = self.d_hl;
        match self.head {
            HeadKind::Plain => vec![("w_P", (1, h)), ("b_P", (1, 1))],
            HeadKind::Decomposed => vec![
                ("W_A", (h, h)),
                ("b_A_vec", (h, 1)),
                ("W_W", (h, h)),
                ("b_W_vec", (h, 1)),
                ("w_A", (1, h)),
                ("w_W", (1, h)),
                ("w_B", (1, h)),
                ("b_A", (1, 1)),
                ("b_W", (1, 1)),
                ("b_B", (1, 1)),
            ],
        }
    }

    /// Full parameter layout in flattening order.
    pub fn layout(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        let mut cell = |prefix: &str, spec: Option<CellSpec>| {
            if let Some(s) = spec {
                out.extend(s.shapes().into_iter().map(|(n, sh)| (format!("{prefix}{n}"), sh)));
            }
        };
        cell("up.", Some(self.up_cell()));
        cell("order.", self.order_cell());
        cell("session.", self.session_cell());
        if let Some(f) = self.fusion() {
            out.extend(f.shapes().into_iter().map(|(n, sh)| (format!("fusion.{n}"), sh)));
        }
        out.extend(self.head_shapes().into_iter().map(|(n, sh)| (format!("head.{n}"), sh)));
        out
    }

    pub fn init(&self, rng: &mut Rng) -> Result<ParamSet> {
        self.validate()?;
        let mut p = ParamSet::new();
        self.up_cell().init(rng).write("up.", &mut p)?;
        if let Some(s) = self.order_cell() {
            s.init(rng).write("order.", &mut p)?;
        }
        if let Some(s) = self.session_cell() {
            s.init(rng).write("session.", &mut p)?;
        }
        if let Some(f) = self.fusion() {
            f.init(rng).write("fusion.", &mut p)?;
        }
        let r = 1.0 / (self.d_hl as f64).sqrt();
        for (name, (rows, cols)) in self.head_shapes() {
            let m = if name.starts_with('b') {
                Matrix::zeros(rows, cols)
            } else {
                rng.uniform_matrix(rows, cols, -r, r)
            };
            p.insert(format!("head.{name}"), m)?;
        }
        Ok(p)
    }

    /// Check that `params` has exactly this configuration's layout.
    pub fn check(&self, params: &ParamSet) -> Result<()> {
        let layout = self.layout();
        if layout.len() != params.len() {
            return Err(Error::config(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), (have, m)) in layout.iter().zip(params.iter()) {
            if name != have {
                return Err(Error::config(format!("expected parameter `{name}`, found `{have}`")));
            }
            if m.shape() != *shape {
                return Err(Error::shape("network parameter", m.shape(), *shape));
            }
        }
        Ok(())
    }

    fn assemble<T: Clone>(&self, mut lookup: impl FnMut(&str) -> Result<T>) -> Result<NetParams<T>> {
        let mut cell = |prefix: &str, spec: CellSpec| spec.assemble(|n| lookup(&format!("{prefix}{n}")));
        let up = cell("up.", self.up_cell())?;
        let order = self.order_cell().map(|s| cell("order.", s)).transpose()?;
        let session = self.session_cell().map(|s| cell("session.", s)).transpose()?;
        let fusion = self
            .fusion()
            .map(|f| f.assemble(|n| lookup(&format!("fusion.{n}"))))
            .transpose()?;
        let mut h = |n: &str| lookup(&format!("head.{n}"));
        let head = match self.head {
            HeadKind::Plain => HeadParams::Plain {
                w_p: h("w_P")?,
                b_p: h("b_P")?,
            },
            HeadKind::Decomposed => HeadParams::Decomposed(DecomposedHead {
                w_a_mat: h("W_A")?,
                b_a_vec: h("b_A_vec")?,
                w_w_mat: h("W_W")?,
                b_w_vec: h("b_W_vec")?,
                w_a: h("w_A")?,
                w_w: h("w_W")?,
                w_b: h("w_B")?,
                b_a: h("b_A")?,
                b_w: h("b_W")?,
                b_b: h("b_B")?,
            }),
        };
        Ok(NetParams {
            up,
            order,
            session,
            fusion,
            head,
        })
    }

    pub fn bind(&self, bound: &Bound<'_>) -> Result<NetParams<Var>> {
        self.assemble(|n| bound.get(n))
    }

    /// Parameters as constant tape leaves, for inference.
    pub fn constants(&self, tape: &mut Tape, params: &ParamSet) -> Result<NetParams<Var>> {
        self.check(params)?;
        self.assemble(|n| Ok(tape.constant(params.require(n)?.clone())))
    }
}

#[derive(Clone, Debug)]
pub struct NetParams<T> {
    pub up: CellParams<T>,
    pub order: Option<CellParams<T>>,
    pub session: Option<CellParams<T>>,
    pub fusion: Option<FusionParams<T>>,
    pub head: HeadParams<T>,
}

#[derive(Clone, Debug)]
pub enum HeadParams<T> {
    Plain { w_p: T, b_p: T },
    Decomposed(DecomposedHead<T>),
}

#[derive(Clone, Debug)]
pub struct DecomposedHead<T> {
    pub w_a_mat: T,
    pub b_a_vec: T,
    pub w_w_mat: T,
    pub b_w_vec: T,
    pub w_a: T,
    pub w_w: T,
    pub w_b: T,
    pub b_a: T,
    pub b_w: T,
    pub b_b: T,
}

/// Tape nodes of a forward pass over a batch.
///
/// Every row vector has one column per (step, example) at `t * B + b` for
/// `t < steps`.
#[derive(Clone, Debug)]
pub struct TapeForward {
    pub steps: usize,
    pub batch: usize,
    pub hidden: Var,
    pub y_hat: Var,
    pub parts: Option<Parts>,
}

#[derive(Clone, Copy, Debug)]
pub struct Parts {
    pub h_a: Var,
    pub h_w: Var,
    pub h_b: Var,
    pub y_a: Var,
    pub y_w: Var,
    pub y_b: Var,
}

fn effective_len(masks: &[Matrix]) -> usize {
    masks
        .iter()
        .rposition(|m| m.data().iter().any(|&v| v != 0.0))
        .map_or(0, |t| t + 1)
}

fn leading_cols(m: &Matrix, n: usize) -> Matrix {
    Matrix::from_fn(m.rows(), n, |r, c| m.get(r, c))
}

/// Encode the first `loans * B` columns of a sub-batch; returns `(d_h, loans * B)`.
fn encode_on(
    tape: &mut Tape,
    cell: &CellParams<Var>,
    d_h: usize,
    sub: &SubBatch,
    cols: usize,
    scale: f64,
) -> Result<Var> {
    let mut s = TapeState::zeros(tape, d_h, cols);
    let masks: Vec<Matrix> = sub.mask.iter().map(|m| leading_cols(m, cols)).collect();
    for j in 0..effective_len(&masks) {
        if masks[j].data().iter().all(|&v| v == 0.0) {
            continue;
        }
        let x = tape.constant(leading_cols(&sub.x[j], cols));
        let dt = tape.constant(leading_cols(&sub.dt[j], cols).scale(1.0 / scale));
        let m = tape.constant(masks[j].clone());
        s = masked_step_on(tape, cell, s, x, dt, m)?;
    }
    Ok(s.h)
}

fn sub<'a>(s: &'a Option<SubBatch>, what: &str) -> Result<&'a SubBatch> {
    s.as_ref()
        .ok_or_else(|| Error::config(format!("batch lacks {what} sub-sequences")))
}

fn head_on(tape: &mut Tape, head: &HeadParams<Var>, h: Var) -> Result<(Var, Option<Parts>)> {
    match head {
        HeadParams::Plain { w_p, b_p } => {
            let a = tape.affine(*w_p, h, *b_p)?;
            Ok((tape.sigmoid(a), None))
        }
        HeadParams::Decomposed(p) => {
            let a = tape.affine(p.w_a_mat, h, p.b_a_vec)?;
            let h_a = tape.tanh(a);
            let w = tape.affine(p.w_w_mat, h, p.b_w_vec)?;
            let h_w = tape.tanh(w);
            let rest = tape.sub(h, h_a)?;
            let h_b = tape.sub(rest, h_w)?;
            let mut prob = |w: Var, x: Var, b: Var| -> Result<Var> {
                let a = tape.affine(w, x, b)?;
                Ok(tape.sigmoid(a))
            };
            let y_a = prob(p.w_a, h_a, p.b_a)?;
            let y_w = prob(p.w_w, h_w, p.b_w)?;
            let y_b = prob(p.w_b, h_b, p.b_b)?;
            let aw = tape.mul(y_a, y_w)?;
            let y = tape.mul(aw, y_b)?;
            Ok((
                y,
                Some(Parts {
                    h_a,
                    h_w,
                    h_b,
                    y_a,
                    y_w,
                    y_b,
                }),
            ))
        }
    }
}

/// Record the forward pass of `cfg` over `batch` on `tape`.
pub fn forward_on(cfg: &NetworkConfig, tape: &mut Tape, p: &NetParams<Var>, batch: &PaddedBatch) -> Result<TapeForward> {
    let b = batch.batch;
    let steps = effective_len(&batch.mask);
    if steps == 0 {
        return Err(Error::domain("batch has no valid steps"));
    }
    let cols = steps * b;
    let ho = match &p.order {
        Some(cell) => Some(encode_on(tape, cell, cfg.d_ho, sub(&batch.orders, "order")?, cols, cfg.dt_scale.order)?),
        None => None,
    };
    let hs = match &p.session {
        Some(cell) => Some(encode_on(tape, cell, cfg.d_hs, sub(&batch.sessions, "session")?, cols, cfg.dt_scale.session)?),
        None => None,
    };
    let inputs = match cfg.structure {
        Structure::Flat => None,
        Structure::Order => ho,
        Structure::Session => hs,
        Structure::Fused(_) => {
            let loans: Vec<Var> = batch.x[..steps].iter().map(|m| tape.constant(m.clone())).collect();
            let l = tape.concat_cols(&loans)?;
            let fusion = p.fusion.as_ref().ok_or_else(|| Error::config("fusion parameters missing"))?;
            let (ho, hs) = (ho.expect("fused needs orders"), hs.expect("fused needs sessions"));
            Some(fuse_on(tape, fusion, l, ho, hs)?)
        }
    };
    let mut s = TapeState::zeros(tape, cfg.d_hl, b);
    let mut hidden = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = match inputs {
            Some(all) => tape.slice_cols(all, t * b, (t + 1) * b)?,
            None => tape.constant(batch.x[t].clone()),
        };
        if batch.mask[t].data().iter().any(|&v| v != 0.0) {
            let dt = tape.constant(batch.dt[t].scale(1.0 / cfg.dt_scale.up));
            let m = tape.constant(batch.mask[t].clone());
            s = masked_step_on(tape, &p.up, s, x, dt, m)?;
        }
        hidden.push(s.h);
    }
    let h = tape.concat_cols(&hidden)?;
    let (y_hat, parts) = head_on(tape, &p.head, h)?;
    Ok(TapeForward {
        steps,
        batch: b,
        hidden: h,
        y_hat,
        parts,
    })
}

/// Outputs for one valid step.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskStep {
    pub example: usize,
    pub step: usize,
    pub y_hat: f64,
    /// `(y_a, y_w, y_b)` in decomposed mode.
    pub parts: Option<[f64; 3]>,
}

/// Valid-step outputs ordered by example, then step.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskOutput {
    pub steps: Vec<RiskStep>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub risk: RiskOutput,
    /// `(d_hl, steps * B)` up-level hidden states.
    pub hidden: Matrix,
    /// `(h_a, h_w, h_b)` in decomposed mode, same layout as `hidden`.
    pub decomposition: Option<[Matrix; 3]>,
}

pub fn forward(cfg: &NetworkConfig, params: &ParamSet, batch: &PaddedBatch) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let p = cfg.constants(&mut tape, params)?;
    let f = forward_on(cfg, &mut tape, &p, batch)?;
    let y = tape.value(f.y_hat);
    let parts = f.parts.map(|q| [tape.value(q.y_a), tape.value(q.y_w), tape.value(q.y_b)]);
    let mut steps = Vec::new();
    for b in 0..f.batch {
        for t in 0..f.steps {
            if !batch.is_valid(t, b) {
                continue;
            }
            let c = t * f.batch + b;
            steps.push(RiskStep {
                example: b,
                step: t,
                y_hat: y.get(0, c),
                parts: parts.map(|[a, w, bb]| [a.get(0, c), w.get(0, c), bb.get(0, c)]),
            });
        }
    }
    Ok(ForwardOutput {
        risk: RiskOutput { steps },
        hidden: tape.value(f.hidden).clone(),
        decomposition: f
            .parts
            .map(|q| [tape.value(q.h_a).clone(), tape.value(q.h_w).clone(), tape.value(q.h_b).clone()]),
    })
}

/// Decomposed outputs; an error for plain-head models.
pub fn decompose(cfg: &NetworkConfig, params: &ParamSet, batch: &PaddedBatch) -> Result<RiskOutput> {
    if cfg.head != HeadKind::Decomposed {
        return Err(Error::config("model was not trained with the decomposed head"));
    }
    Ok(forward(cfg, params, batch)?.risk)
}

/// Final hidden state of one padded sub-sequence.
///
/// `seq` is `(max_len, d_x)` with one event per row; `dts` and `mask` are
/// `(max_len, 1)`.
pub fn encode_subsequence(cell: &CellParams, seq: &Matrix, dts: &Matrix, mask: &Matrix) -> Result<Matrix> {
    let n = seq.rows();
    if dts.shape() != (n, 1) {
        return Err(Error::shape("encode_subsequence", dts.shape(), (n, 1)));
    }
    if mask.shape() != (n, 1) {
        return Err(Error::shape("encode_subsequence", mask.shape(), (n, 1)));
    }
    let d_h = cell.gates().b_i.rows();
    let mut tape = Tape::new();
    let p = cell.to_tape(&mut tape);
    let mut s = TapeState::zeros(&mut tape, d_h, 1);
    for j in 0..n {
        if mask.get(j, 0) == 0.0 {
            continue;
        }
        let x = tape.constant(Matrix::from_fn(seq.cols(), 1, |r, _| seq.get(j, r)));
        let dt = tape.constant(Matrix::scalar(dts.get(j, 0)));
        let m = tape.constant(Matrix::scalar(mask.get(j, 0)));
        s = masked_step_on(&mut tape, &p, s, x, dt, m)?;
    }
    Ok(tape.value(s.h).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_consumers, pad_and_mask, PlantedSignal, Widths};

    fn small(head: HeadKind) -> NetworkConfig {
        let mut c = NetworkConfig::neucredit(4, 3, 2);
        c.head = head;
        c.d_ho = 2;
        c.d_hs = 2;
        c.d_hl = 2;
        c.d_z = 2;
        c.d_m = 3;
        c
    }

    fn batch(cfg: &NetworkConfig, n: usize) -> PaddedBatch {
        let w = Widths {
            loan: 4,
            order: 3,
            session: 2,
        };
        let data = crate::data::Dataset::Consumers(generate_consumers(n, w, PlantedSignal::default(), 5)).examples();
        let refs: Vec<_> = data.iter().collect();
        pad_and_mask(&refs, &cfg.pad_spec()).unwrap()
    }

    #[test]
    fn zero_params_give_fixed_probabilities() {
        for (head, expected) in [(HeadKind::Decomposed, 0.125), (HeadKind::Plain, 0.5)] {
            let cfg = small(head);
            let params = cfg.init(&mut Rng::new(0)).unwrap();
            let zeros = params.zeros_like();
            let out = forward(&cfg, &zeros, &batch(&cfg, 3)).unwrap();
            assert!(!out.risk.steps.is_empty());
            for s in &out.risk.steps {
                assert_eq!(s.y_hat, expected);
                if let Some(parts) = s.parts {
                    assert_eq!(parts, [0.5; 3]);
                }
            }
        }
    }

    #[test]
    fn model_view_combinations() {
        let input = InputShape {
            d_step: 15,
            d_o: 45,
            d_s: 16,
            max_len: 15,
        };
        assert!(NetworkConfig::for_model(ModelKind::Neucredit, View::Loan, input, 5).is_err());
        assert!(NetworkConfig::for_model(ModelKind::Tva, View::All, input, 5).is_err());
        let c = NetworkConfig::for_model(ModelKind::Tva, View::Order, input, 5).unwrap();
        assert_eq!(c.structure, Structure::Order);
        assert_eq!(c.up_input(), 5);
        let c = NetworkConfig::for_model(ModelKind::LstmWDt, View::Loan, input, 2).unwrap();
        assert_eq!((c.structure, c.up_input(), c.cell), (Structure::Flat, 14, CellKind::LstmWithDt));
        let c = NetworkConfig::for_model(ModelKind::Neucredit, View::All, input, 5).unwrap();
        assert_eq!(c.head, HeadKind::Decomposed);
    }

    #[test]
    fn layout_matches_init_and_check_rejects_others() {
        let cfg = small(HeadKind::Decomposed);
        let p = cfg.init(&mut Rng::new(1)).unwrap();
        cfg.check(&p).unwrap();
        assert!(small(HeadKind::Plain).check(&p).is_err());
    }

    #[test]
    fn decompose_rejects_plain_head() {
        let cfg = small(HeadKind::Plain);
        let p = cfg.init(&mut Rng::new(2)).unwrap();
        assert!(decompose(&cfg, &p, &batch(&cfg, 2)).is_err());
    }

    #[test]
    fn all_masked_subsequence_is_zero_state() {
        let spec = CellSpec::new(CellKind::Tva, 3, 2).with_lift(3);
        let cell = spec.init(&mut Rng::new(3));
        let h = encode_subsequence(&cell, &Matrix::zeros(15, 3), &Matrix::zeros(15, 1), &Matrix::zeros(15, 1)).unwrap();
        assert_eq!(h, Matrix::zeros(2, 1));
    }
}
