//! Fusion of a loan vector with the order and session encodings.
//!
//! `Fc` concatenates the three views and applies one tanh layer. `Mvm`
//! appends a constant 1 to each view, projects each with its own factor
//! matrix and multiplies the projections element-wise, so `z` contains every
//! interaction of order 0 through 3 across the views.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, Matrix, ParamSet, Rng, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionKind {
    Fc,
    Mvm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub kind: FusionKind,
    pub d_l: usize,
    pub d_ho: usize,
    pub d_hs: usize,
    pub d_z: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcFusionParams<T = Matrix> {
    /// `(d_z, d_l + d_ho + d_hs)`
    pub w_f: T,
    /// `(d_z, 1)`
    pub b_f: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvmFusionParams<T = Matrix> {
    /// `(d_z, d_l + 1)`
    pub u_f1: T,
    /// `(d_z, d_ho + 1)`
    pub u_f2: T,
    /// `(d_z, d_hs + 1)`
    pub u_f3: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FusionParams<T = Matrix> {
    Fc(FcFusionParams<T>),
    Mvm(MvmFusionParams<T>),
}

impl FusionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_l == 0 || self.d_ho == 0 || self.d_hs == 0 || self.d_z == 0 {
            return Err(Error::config("fusion widths must be positive"));
        }
        Ok(())
    }

    pub fn shapes(&self) -> Vec<(&'static str, (usize, usize))> {
        match self.kind {
            FusionKind::Fc => vec![
                ("W_F", (self.d_z, self.d_l + self.d_ho + self.d_hs)),
                ("b_F", (self.d_z, 1)),
            ],
            FusionKind::Mvm => vec![
                ("U_F1", (self.d_z, self.d_l + 1)),
                ("U_F2", (self.d_z, self.d_ho + 1)),
                ("U_F3", (self.d_z, self.d_hs + 1)),
            ],
        }
    }

    /// Kernels uniform in `±1/sqrt(fan_in)`. The bias column of each MvM
    /// factor starts at 1 so the first-order terms are present from the start.
    pub fn init(&self, rng: &mut Rng) -> FusionParams {
        let mut kernel = |rows: usize, cols: usize| {
            let r = 1.0 / (cols as f64).sqrt();
            rng.uniform_matrix(rows, cols, -r, r)
        };
        match self.kind {
            FusionKind::Fc => FusionParams::Fc(FcFusionParams {
                w_f: kernel(self.d_z, self.d_l + self.d_ho + self.d_hs),
                b_f: Matrix::zeros(self.d_z, 1),
            }),
            FusionKind::Mvm => {
                let mut factor = |d: usize| {
                    let mut m = kernel(self.d_z, d + 1);
                    for r in 0..self.d_z {
                        m.set(r, d, 1.0);
                    }
                    m
                };
                FusionParams::Mvm(MvmFusionParams {
                    u_f1: factor(self.d_l),
                    u_f2: factor(self.d_ho),
                    u_f3: factor(self.d_hs),
                })
            }
        }
    }

    pub fn assemble<T>(&self, mut lookup: impl FnMut(&'static str) -> Result<T>) -> Result<FusionParams<T>> {
        Ok(match self.kind {
            FusionKind::Fc => FusionParams::Fc(FcFusionParams {
                w_f: lookup("W_F")?,
                b_f: lookup("b_F")?,
            }),
            FusionKind::Mvm => FusionParams::Mvm(MvmFusionParams {
                u_f1: lookup("U_F1")?,
                u_f2: lookup("U_F2")?,
                u_f3: lookup("U_F3")?,
            }),
        })
    }

    pub fn bind(&self, prefix: &str, bound: &Bound<'_>) -> Result<FusionParams<Var>> {
        self.assemble(|n| bound.get(&format!("{prefix}{n}")))
    }

    pub fn read(&self, prefix: &str, params: &ParamSet) -> Result<FusionParams> {
        for (name, shape) in self.shapes() {
            let m = params.require(&format!("{prefix}{name}"))?;
            if m.shape() != shape {
                return Err(Error::shape("fusion parameter", m.shape(), shape));
            }
        }
        self.assemble(|n| params.require(&format!("{prefix}{n}")).cloned())
    }
}

impl<T> FusionParams<T> {
    pub fn fields(&self) -> Vec<(&'static str, &T)> {
        match self {
            FusionParams::Fc(p) => vec![("W_F", &p.w_f), ("b_F", &p.b_f)],
            FusionParams::Mvm(p) => vec![("U_F1", &p.u_f1), ("U_F2", &p.u_f2), ("U_F3", &p.u_f3)],
        }
    }
}

impl FusionParams {
    pub fn write(&self, prefix: &str, out: &mut ParamSet) -> Result<()> {
        for (name, m) in self.fields() {
            out.insert(format!("{prefix}{name}"), m.clone())?;
        }
        Ok(())
    }

    pub fn to_tape(&self, tape: &mut Tape) -> FusionParams<Var> {
        match self {
            FusionParams::Fc(p) => FusionParams::Fc(FcFusionParams {
                w_f: tape.constant(p.w_f.clone()),
                b_f: tape.constant(p.b_f.clone()),
            }),
            FusionParams::Mvm(p) => FusionParams::Mvm(MvmFusionParams {
                u_f1: tape.constant(p.u_f1.clone()),
                u_f2: tape.constant(p.u_f2.clone()),
                u_f3: tape.constant(p.u_f3.clone()),
            }),
        }
    }
}

fn with_bias(tape: &mut Tape, v: Var) -> Result<Var> {
    let ones = tape.constant(Matrix::filled(1, tape.shape(v).1, 1.0));
    tape.concat_rows(&[v, ones])
}

/// Fuse `(d_l, B)`, `(d_ho, B)` and `(d_hs, B)` into `(d_z, B)`.
pub fn fuse_on(tape: &mut Tape, p: &FusionParams<Var>, l: Var, ho: Var, hs: Var) -> Result<Var> {
    match p {
        FusionParams::Fc(p) => {
            let x = tape.concat_rows(&[l, ho, hs])?;
            let a = tape.affine(p.w_f, x, p.b_f)?;
            Ok(tape.tanh(a))
        }
        FusionParams::Mvm(p) => {
            let (l, ho, hs) = (with_bias(tape, l)?, with_bias(tape, ho)?, with_bias(tape, hs)?);
            let a = tape.matmul(p.u_f1, l)?;
            let b = tape.matmul(p.u_f2, ho)?;
            let c = tape.matmul(p.u_f3, hs)?;
            let ab = tape.mul(a, b)?;
            tape.mul(ab, c)
        }
    }
}

fn fuse_values(p: FusionParams, l: &Matrix, ho: &Matrix, hs: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let pv = p.to_tape(&mut tape);
    let (l, ho, hs) = (
        tape.constant(l.clone()),
        tape.constant(ho.clone()),
        tape.constant(hs.clone()),
    );
    let z = fuse_on(&mut tape, &pv, l, ho, hs)?;
    Ok(tape.value(z).clone())
}

pub fn fc_fuse(p: &FcFusionParams, l: &Matrix, ho: &Matrix, hs: &Matrix) -> Result<Matrix> {
    fuse_values(FusionParams::Fc(p.clone()), l, ho, hs)
}

pub fn mvm_fuse(p: &MvmFusionParams, l: &Matrix, ho: &Matrix, hs: &Matrix) -> Result<Matrix> {
    fuse_values(FusionParams::Mvm(p.clone()), l, ho, hs)
}
