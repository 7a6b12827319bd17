//! Recurrent units for irregularly spaced events.
//!
//! Four variants share the same gating core:
//!
//! * [`CellKind::Lstm`]: plain LSTM; the interval slot of the input is zero.
//! * [`CellKind::LstmWithDt`]: the interval is appended to the input vector.
//! * [`CellKind::Tlstm`]: the previous memory is split into a short-term part
//!   `tanh(W_D c + b_D)` and the long-term remainder; only the short-term part
//!   is scaled by a fixed non-increasing `g(Δt)`.
//! * [`CellKind::Tva`]: the previous memory is lifted to a `(d_h, d_m)`
//!   matrix, multiplied element-wise by `exp(tanh(W_R Δt + B_R))` so every
//!   entry has its own learned growth or decay rate, and projected back.
//!
//! Every kernel `W_*` has `d_x + 1` columns; the extra column sees `Δt` for
//! `LstmWithDt` and zero otherwise.
//!
//! Steps operate on batches: inputs are `(d_x, B)`, states `(d_h, B)` and
//! intervals a `(1, B)` row, one column per sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, Matrix, ParamSet, Rng, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Lstm,
    LstmWithDt,
    Tlstm,
    Tva,
}

impl CellKind {
    pub fn label(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::LstmWithDt => "LSTM-w-dt",
            CellKind::Tlstm => "T-LSTM",
            CellKind::Tva => "Tva-LSTM",
        }
    }
}

/// Preset non-increasing discount `g(Δt)` for T-LSTM, with `g(0) = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discount {
    /// `1 / ln(e + Δt)`
    #[default]
    InverseLog,
    /// `exp(-Δt)`
    ExpDecay,
}

impl Discount {
    pub fn apply(self, dt: f64) -> f64 {
        match self {
            Discount::InverseLog => 1.0 / (std::f64::consts::E + dt).ln(),
            Discount::ExpDecay => (-dt).exp(),
        }
    }
}

/// Shapes of one recurrent unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub kind: CellKind,
    pub d_x: usize,
    pub d_h: usize,
    /// Lift width, used by Tva only.
    pub d_m: usize,
    #[serde(default)]
    pub discount: Discount,
}

impl CellSpec {
    pub fn new(kind: CellKind, d_x: usize, d_h: usize) -> Self {
        CellSpec {
            kind,
            d_x,
            d_h,
            d_m: 8,
            discount: Discount::default(),
        }
    }

    pub fn with_lift(mut self, d_m: usize) -> Self {
        self.d_m = d_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_x == 0 || self.d_h == 0 || (self.kind == CellKind::Tva && self.d_m == 0) {
            return Err(Error::config(format!("cell dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Freshly initialized parameters: kernels uniform in `±1/sqrt(fan_in)`,
    /// biases zero.
    pub fn init(&self, rng: &mut Rng) -> CellParams {
        let (d_x, d_h, d_m) = (self.d_x, self.d_h, self.d_m);
        let mut kernel = |rows: usize, fan_in: usize| {
            let r = 1.0 / (fan_in as f64).sqrt();
            rng.uniform_matrix(rows, fan_in, -r, r)
        };
        let w_i = kernel(d_h, d_x + 1);
        let w_f = kernel(d_h, d_x + 1);
        let w_o = kernel(d_h, d_x + 1);
        let w_c = kernel(d_h, d_x + 1);
        let u_i = kernel(d_h, d_h);
        let u_f = kernel(d_h, d_h);
        let u_o = kernel(d_h, d_h);
        let u_c = kernel(d_h, d_h);
        let zeros = || Matrix::zeros(d_h, 1);
        let gates = LstmParams {
            w_i,
            w_f,
            w_o,
            w_c,
            u_i,
            u_f,
            u_o,
            u_c,
            b_i: zeros(),
            b_f: zeros(),
            b_o: zeros(),
            b_c: zeros(),
            uses_dt: self.kind == CellKind::LstmWithDt,
        };
        match self.kind {
            CellKind::Lstm | CellKind::LstmWithDt => CellParams::Lstm(gates),
            CellKind::Tlstm => {
                let r = 1.0 / (d_h as f64).sqrt();
                CellParams::Tlstm(TlstmParams {
                    gates,
                    w_d: rng.uniform_matrix(d_h, d_h, -r, r),
                    b_d: Matrix::zeros(d_h, 1),
                    discount: self.discount,
                })
            }
            CellKind::Tva => {
                let r_l = 1.0 / (d_m as f64).sqrt();
                CellParams::Tva(TvaLstmParams {
                    gates,
                    w_h: rng.uniform_matrix(1, d_m, -1.0, 1.0),
                    b_h: Matrix::zeros(d_h, d_m),
                    w_r: rng.uniform_matrix(d_h, d_m, -1.0, 1.0),
                    b_r: Matrix::zeros(d_h, d_m),
                    b_disc: Matrix::zeros(d_h, d_m),
                    w_l: rng.uniform_matrix(d_m, 1, -r_l, r_l),
                    b_l: Matrix::zeros(d_h, 1),
                })
            }
        }
    }

    /// Expected `(name, shape)` pairs, in storage order.
    pub fn shapes(&self) -> Vec<(&'static str, (usize, usize))> {
        let (d_x, d_h, d_m) = (self.d_x, self.d_h, self.d_m);
        let mut out = vec![];
        for n in ["W_i", "W_f", "W_o", "W_c"] {
            out.push((n, (d_h, d_x + 1)));
        }
        for n in ["U_i", "U_f", "U_o", "U_c"] {
            out.push((n, (d_h, d_h)));
        }
        for n in ["b_i", "b_f", "b_o", "b_c"] {
            out.push((n, (d_h, 1)));
        }
        match self.kind {
            CellKind::Lstm | CellKind::LstmWithDt => {}
            CellKind::Tlstm => {
                out.push(("W_D", (d_h, d_h)));
                out.push(("b_D", (d_h, 1)));
            }
            CellKind::Tva => {
                out.push(("w_H", (1, d_m)));
                out.push(("B_H", (d_h, d_m)));
                out.push(("W_R", (d_h, d_m)));
                out.push(("B_R", (d_h, d_m)));
                out.push(("B_D", (d_h, d_m)));
                out.push(("w_L", (d_m, 1)));
                out.push(("b_L", (d_h, 1)));
            }
        }
        out
    }

    /// Assemble parameters for this spec from a name lookup.
    pub fn assemble<T: Clone>(&self, mut lookup: impl FnMut(&'static str) -> Result<T>) -> Result<CellParams<T>> {
        let gates = LstmParams {
            w_i: lookup("W_i")?,
            w_f: lookup("W_f")?,
            w_o: lookup("W_o")?,
            w_c: lookup("W_c")?,
            u_i: lookup("U_i")?,
            u_f: lookup("U_f")?,
            u_o: lookup("U_o")?,
            u_c: lookup("U_c")?,
            b_i: lookup("b_i")?,
            b_f: lookup("b_f")?,
            b_o: lookup("b_o")?,
            b_c: lookup("b_c")?,
            uses_dt: self.kind == CellKind::LstmWithDt,
        };
        Ok(match self.kind {
            CellKind::Lstm | CellKind::LstmWithDt => CellParams::Lstm(gates),
            CellKind::Tlstm => CellParams::Tlstm(TlstmParams {
                gates,
                w_d: lookup("W_D")?,
                b_d: lookup("b_D")?,
                discount: self.discount,
            }),
            CellKind::Tva => CellParams::Tva(TvaLstmParams {
                gates,
                w_h: lookup("w_H")?,
                b_h: lookup("B_H")?,
                w_r: lookup("W_R")?,
                b_r: lookup("B_R")?,
                b_disc: lookup("B_D")?,
                w_l: lookup("w_L")?,
                b_l: lookup("b_L")?,
            }),
        })
    }

    /// Look up this cell's tape leaves stored under `prefix`.
    pub fn bind(&self, prefix: &str, bound: &Bound<'_>) -> Result<CellParams<Var>> {
        self.assemble(|n| bound.get(&format!("{prefix}{n}")))
    }

    /// Read this cell's parameters stored under `prefix` and check shapes.
    pub fn read(&self, prefix: &str, params: &ParamSet) -> Result<CellParams> {
        for (name, shape) in self.shapes() {
            let m = params.require(&format!("{prefix}{name}"))?;
            if m.shape() != shape {
                return Err(Error::shape("cell parameter", m.shape(), shape));
            }
        }
        self.assemble(|n| params.require(&format!("{prefix}{n}")).cloned())
    }
}

/// Gate parameters shared by every variant.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T = Matrix> {
    pub w_i: T,
    pub w_f: T,
    pub w_o: T,
    pub w_c: T,
    pub u_i: T,
    pub u_f: T,
    pub u_o: T,
    pub u_c: T,
    pub b_i: T,
    pub b_f: T,
    pub b_o: T,
    pub b_c: T,
    /// Feed `Δt` into the last kernel column instead of zero.
    pub uses_dt: bool,
}

impl<T> LstmParams<T> {
    fn fields(&self) -> [(&'static str, &T); 12] {
        [
            ("W_i", &self.w_i),
            ("W_f", &self.w_f),
            ("W_o", &self.w_o),
            ("W_c", &self.w_c),
            ("U_i", &self.u_i),
            ("U_f", &self.u_f),
            ("U_o", &self.u_o),
            ("U_c", &self.u_c),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_c", &self.b_c),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TlstmParams<T = Matrix> {
    pub gates: LstmParams<T>,
    pub w_d: T,
    pub b_d: T,
    pub discount: Discount,
}

/// Tva-LSTM parameters. `B_H`, `W_R`, `B_R` and `B_D` are `(d_h, d_m)`;
/// `w_H` is `(1, d_m)`, `w_L` is `(d_m, 1)` and `b_L` is `(d_h, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TvaLstmParams<T = Matrix> {
    pub gates: LstmParams<T>,
    pub w_h: T,
    pub b_h: T,
    pub w_r: T,
    pub b_r: T,
    pub b_disc: T,
    pub w_l: T,
    pub b_l: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams<T = Matrix> {
    Lstm(LstmParams<T>),
    Tlstm(TlstmParams<T>),
    Tva(TvaLstmParams<T>),
}

impl<T> CellParams<T> {
    pub fn gates(&self) -> &LstmParams<T> {
        match self {
            CellParams::Lstm(g) => g,
            CellParams::Tlstm(p) => &p.gates,
            CellParams::Tva(p) => &p.gates,
        }
    }

    /// `(name, value)` pairs in storage order.
    pub fn fields(&self) -> Vec<(&'static str, &T)> {
        let mut out = self.gates().fields().to_vec();
        match self {
            CellParams::Lstm(_) => {}
            CellParams::Tlstm(p) => {
                out.push(("W_D", &p.w_d));
                out.push(("b_D", &p.b_d));
            }
            CellParams::Tva(p) => {
                out.push(("w_H", &p.w_h));
                out.push(("B_H", &p.b_h));
                out.push(("W_R", &p.w_r));
                out.push(("B_R", &p.b_r));
                out.push(("B_D", &p.b_disc));
                out.push(("w_L", &p.w_l));
                out.push(("b_L", &p.b_l));
            }
        }
        out
    }
}

impl CellParams {
    pub fn write(&self, prefix: &str, out: &mut ParamSet) -> Result<()> {
        for (name, m) in self.fields() {
            out.insert(format!("{prefix}{name}"), m.clone())?;
        }
        Ok(())
    }

    /// Place every parameter on `tape` as a constant leaf.
    pub fn to_tape(&self, tape: &mut Tape) -> CellParams<Var> {
        let spec_kind = match self {
            CellParams::Lstm(g) if g.uses_dt => CellKind::LstmWithDt,
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Tlstm(_) => CellKind::Tlstm,
            CellParams::Tva(_) => CellKind::Tva,
        };
        let discount = match self {
            CellParams::Tlstm(p) => p.discount,
            _ => Discount::default(),
        };
        let spec = CellSpec {
            kind: spec_kind,
            d_x: 1,
            d_h: 1,
            d_m: 1,
            discount,
        };
        let fields = self.fields();
        spec.assemble(|name| {
            let m = fields
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, m)| (*m).clone())
                .expect("field present for matching kind");
            Ok(tape.constant(m))
        })
        .expect("lookup is infallible")
    }
}

/// Hidden state and cell memory, `(d_h, B)` each.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Matrix,
    pub c: Matrix,
}

impl CellState {
    pub fn zeros(d_h: usize, batch: usize) -> Self {
        CellState {
            h: Matrix::zeros(d_h, batch),
            c: Matrix::zeros(d_h, batch),
        }
    }
}

/// [`CellState`] recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct TapeState {
    pub h: Var,
    pub c: Var,
}

impl TapeState {
    pub fn zeros(tape: &mut Tape, d_h: usize, batch: usize) -> Self {
        let z = tape.constant(Matrix::zeros(d_h, batch));
        TapeState { h: z, c: z }
    }

    pub fn from_values(tape: &mut Tape, s: &CellState) -> Self {
        TapeState {
            h: tape.constant(s.h.clone()),
            c: tape.constant(s.c.clone()),
        }
    }

    pub fn values(&self, tape: &Tape) -> CellState {
        CellState {
            h: tape.value(self.h).clone(),
            c: tape.value(self.c).clone(),
        }
    }
}

fn check_dt(dt: &Matrix) -> Result<()> {
    if let Some(bad) = dt.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::domain(format!("time interval must be non-negative, got {bad}")));
    }
    Ok(())
}

/// The gating core with an already-adjusted previous memory `c_prev`.
pub fn gate_step(
    tape: &mut Tape,
    p: &LstmParams<Var>,
    h_prev: Var,
    c_prev: Var,
    x: Var,
    dt: Var,
) -> Result<TapeState> {
    let slot = if p.uses_dt {
        dt
    } else {
        tape.constant(Matrix::zeros(1, tape.shape(x).1))
    };
    let xa = tape.concat_rows(&[x, slot])?;
    let pre = |w: Var, u: Var, b: Var, tape: &mut Tape| -> Result<Var> {
        let wx = tape.matmul(w, xa)?;
        let uh = tape.matmul(u, h_prev)?;
        let s = tape.add(wx, uh)?;
        tape.add_col(s, b)
    };
    let zi = pre(p.w_i, p.u_i, p.b_i, tape)?;
    let zf = pre(p.w_f, p.u_f, p.b_f, tape)?;
    let zo = pre(p.w_o, p.u_o, p.b_o, tape)?;
    let zc = pre(p.w_c, p.u_c, p.b_c, tape)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let cand = tape.tanh(zc);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, cand)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok(TapeState { h, c })
}

/// T-LSTM memory adjustment. Returns `(c_short, c_long, c_adjusted)`.
pub fn tlstm_memory(tape: &mut Tape, p: &TlstmParams<Var>, c: Var, dt: Var) -> Result<(Var, Var, Var)> {
    check_dt(tape.value(dt))?;
    let g = tape.value(dt).map(|v| p.discount.apply(v));
    let g = tape.constant(g);
    let pre = tape.affine(p.w_d, c, p.b_d)?;
    let short = tape.tanh(pre);
    let long = tape.sub(c, short)?;
    let discounted = tape.mul_row(short, g)?;
    let adjusted = tape.add(long, discounted)?;
    Ok((short, long, adjusted))
}

/// Intermediate matrices of the Tva discounting unit, each `(d_h*d_m, B)`
/// in lifted layout (see [`Tape::lift`]), plus the adjusted memory.
#[derive(Clone, Copy, Debug)]
pub struct TvaParts {
    pub lifted: Var,
    pub discount: Var,
    pub discounted: Var,
    pub memory: Var,
}

pub fn tva_discount_on(tape: &mut Tape, p: &TvaLstmParams<Var>, c: Var, dt: Var) -> Result<TvaParts> {
    check_dt(tape.value(dt))?;
    let (d_h, d_m) = tape.shape(p.b_h);
    let hm = d_h * d_m;
    let flat = |tape: &mut Tape, v: Var| tape.reshape(v, hm, 1);
    let b_h = flat(tape, p.b_h)?;
    let w_r = flat(tape, p.w_r)?;
    let b_r = flat(tape, p.b_r)?;
    let b_d = flat(tape, p.b_disc)?;

    let up = tape.lift(c, p.w_h)?;
    let up = tape.add_col(up, b_h)?;
    let lifted = tape.tanh(up);

    let rate = tape.matmul(w_r, dt)?;
    let rate = tape.add_col(rate, b_r)?;
    let rate = tape.tanh(rate);
    let discount = tape.exp(rate);

    let scaled = tape.mul(lifted, discount)?;
    let scaled = tape.add_col(scaled, b_d)?;
    let discounted = tape.tanh(scaled);

    let down = tape.contract(discounted, p.w_l)?;
    let down = tape.add_col(down, p.b_l)?;
    let memory = tape.tanh(down);
    Ok(TvaParts {
        lifted,
        discount,
        discounted,
        memory,
    })
}

/// One step of any variant. `dt` is a `(1, B)` row of non-negative intervals.
pub fn step_on(tape: &mut Tape, p: &CellParams<Var>, s: TapeState, x: Var, dt: Var) -> Result<TapeState> {
    match p {
        CellParams::Lstm(g) => {
            check_dt(tape.value(dt))?;
            gate_step(tape, g, s.h, s.c, x, dt)
        }
        CellParams::Tlstm(t) => {
            let (_, _, adjusted) = tlstm_memory(tape, t, s.c, dt)?;
            gate_step(tape, &t.gates, s.h, adjusted, x, dt)
        }
        CellParams::Tva(t) => {
            let parts = tva_discount_on(tape, t, s.c, dt)?;
            gate_step(tape, &t.gates, s.h, parts.memory, x, dt)
        }
    }
}

/// Step that leaves columns with `mask == 0` untouched.
pub fn masked_step_on(
    tape: &mut Tape,
    p: &CellParams<Var>,
    s: TapeState,
    x: Var,
    dt: Var,
    mask: Var,
) -> Result<TapeState> {
    let next = step_on(tape, p, s, x, dt)?;
    Ok(TapeState {
        h: tape.select(mask, next.h, s.h)?,
        c: tape.select(mask, next.c, s.c)?,
    })
}

fn dt_row(x: &Matrix, dt: f64) -> Matrix {
    Matrix::filled(1, x.cols(), dt)
}

fn run_single(p: &CellParams, s: &CellState, x: &Matrix, dt: f64) -> Result<CellState> {
    let mut tape = Tape::new();
    let pv = p.to_tape(&mut tape);
    let sv = TapeState::from_values(&mut tape, s);
    let xv = tape.constant(x.clone());
    let dv = tape.constant(dt_row(x, dt));
    Ok(step_on(&mut tape, &pv, sv, xv, dv)?.values(&tape))
}

pub fn lstm_step(p: &LstmParams, s: &CellState, x: &Matrix, dt: f64) -> Result<CellState> {
    run_single(&CellParams::Lstm(p.clone()), s, x, dt)
}

pub fn tlstm_step(p: &TlstmParams, s: &CellState, x: &Matrix, dt: f64) -> Result<CellState> {
    run_single(&CellParams::Tlstm(p.clone()), s, x, dt)
}

pub fn tva_lstm_step(p: &TvaLstmParams, s: &CellState, x: &Matrix, dt: f64) -> Result<CellState> {
    run_single(&CellParams::Tva(p.clone()), s, x, dt)
}

/// Values of the Tva discounting unit for a single memory column.
#[derive(Clone, Debug)]
pub struct TvaDiscount {
    /// `C`, `(d_h, d_m)`
    pub lifted: Matrix,
    /// `D`, `(d_h, d_m)`
    pub discount: Matrix,
    /// `C^D`, `(d_h, d_m)`
    pub discounted: Matrix,
    /// `c'`, `(d_h, 1)`
    pub memory: Matrix,
}

pub fn tva_discount(p: &TvaLstmParams, c: &Matrix, dt: f64) -> Result<TvaDiscount> {
    if c.cols() != 1 {
        return Err(Error::shape("tva_discount", c.shape(), (c.rows(), 1)));
    }
    let mut tape = Tape::new();
    let pv = match CellParams::Tva(p.clone()).to_tape(&mut tape) {
        CellParams::Tva(t) => t,
        _ => unreachable!(),
    };
    let cv = tape.constant(c.clone());
    let dv = tape.constant(Matrix::scalar(dt));
    let parts = tva_discount_on(&mut tape, &pv, cv, dv)?;
    let (d_h, d_m) = p.b_h.shape();
    let square = |v: Var| Matrix::new(d_h, d_m, tape.value(v).data().to_vec());
    Ok(TvaDiscount {
        lifted: square(parts.lifted)?,
        discount: square(parts.discount)?,
        discounted: square(parts.discounted)?,
        memory: tape.value(parts.memory).clone(),
    })
}

/// `(c_short, c_long, c_adjusted)` of T-LSTM for a memory column.
pub fn tlstm_decompose(p: &TlstmParams, c: &Matrix, dt: f64) -> Result<(Matrix, Matrix, Matrix)> {
    let mut tape = Tape::new();
    let pv = match CellParams::Tlstm(p.clone()).to_tape(&mut tape) {
        CellParams::Tlstm(t) => t,
        _ => unreachable!(),
    };
    let cv = tape.constant(c.clone());
    let dv = tape.constant(dt_row(c, dt));
    let (s, l, a) = tlstm_memory(&mut tape, &pv, cv, dv)?;
    Ok((tape.value(s).clone(), tape.value(l).clone(), tape.value(a).clone()))
}
