//! Oracles and loss builders shared by the test targets.

#![allow(dead_code)]

use neucredit::cells::{masked_step_on, CellKind, CellParams, CellSpec, CellState, LstmParams, TapeState, TlstmParams, TvaLstmParams};
use neucredit::fusion::{fuse_on, FusionKind, FusionParams, FusionSpec, MvmFusionParams};
use neucredit::numerics::{Bound, Matrix, Rng, Tape, Var};
use neucredit::Result;

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn col(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|r| m.get(r, 0)).collect()
}

pub fn oracle_gates(p: &LstmParams, h: &[f64], c_prev: &[f64], x: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xa = x.to_vec();
    xa.push(if p.uses_dt { dt } else { 0.0 });
    let d_h = h.len();
    let pre = |w: &Matrix, u: &Matrix, b: &Matrix, k: usize| {
        let mut s = b.get(k, 0);
        for (j, v) in xa.iter().enumerate() {
            s += w.get(k, j) * v;
        }
        for (j, v) in h.iter().enumerate() {
            s += u.get(k, j) * v;
        }
        s
    };
    let mut c = vec![0.0; d_h];
    let mut hn = vec![0.0; d_h];
    for k in 0..d_h {
        let i = sig(pre(&p.w_i, &p.u_i, &p.b_i, k));
        let f = sig(pre(&p.w_f, &p.u_f, &p.b_f, k));
        let o = sig(pre(&p.w_o, &p.u_o, &p.b_o, k));
        let g = pre(&p.w_c, &p.u_c, &p.b_c, k).tanh();
        c[k] = f * c_prev[k] + i * g;
        hn[k] = o * c[k].tanh();
    }
    (hn, c)
}

pub fn oracle_tlstm_memory(p: &TlstmParams, c: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = 1.0 / (std::f64::consts::E + dt).ln();
    let d_h = c.len();
    let mut short = vec![0.0; d_h];
    for k in 0..d_h {
        let mut s = p.b_d.get(k, 0);
        for j in 0..d_h {
            s += p.w_d.get(k, j) * c[j];
        }
        short[k] = s.tanh();
    }
    let long: Vec<f64> = c.iter().zip(&short).map(|(a, b)| a - b).collect();
    let adjusted = long.iter().zip(&short).map(|(l, s)| l + s * g).collect();
    (short, long, adjusted)
}

pub fn oracle_tva_memory(p: &TvaLstmParams, c: &[f64], dt: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (d_h, d_m) = p.b_h.shape();
    let mut d = vec![vec![0.0; d_m]; d_h];
    let mut out = vec![0.0; d_h];
    for k in 0..d_h {
        let mut acc = p.b_l.get(k, 0);
        for j in 0..d_m {
            let lifted = (c[k] * p.w_h.get(0, j) + p.b_h.get(k, j)).tanh();
            let disc = (p.w_r.get(k, j) * dt + p.b_r.get(k, j)).tanh().exp();
            d[k][j] = disc;
            let cd = (lifted * disc + p.b_disc.get(k, j)).tanh();
            acc += cd * p.w_l.get(j, 0);
        }
        out[k] = acc.tanh();
    }
    (d, out)
}

/// Random parameters with every bias perturbed too, so no term is trivially zero.
pub fn random_cell(kind: CellKind, d_x: usize, d_h: usize, d_m: usize, rng: &mut Rng) -> CellParams {
    let spec = CellSpec::new(kind, d_x, d_h).with_lift(d_m);
    let shapes = spec.shapes();
    spec.assemble(|n| {
        let (r, c) = shapes.iter().find(|(m, _)| *m == n).unwrap().1;
        Ok(rng.uniform_matrix(r, c, -1.0, 1.0))
    })
    .unwrap()
}

pub fn random_state(d_h: usize, rng: &mut Rng) -> CellState {
    CellState {
        h: rng.uniform_matrix(d_h, 1, -1.0, 1.0),
        c: rng.uniform_matrix(d_h, 1, -2.0, 2.0),
    }
}

pub struct SeqCase {
    pub spec: CellSpec,
    pub xs: Vec<Matrix>,
    pub dts: Vec<Matrix>,
    pub masks: Vec<Matrix>,
    pub readout: Matrix,
}

pub fn seq_loss(case: &SeqCase, tape: &mut Tape, bound: &Bound<'_>) -> Result<Var> {
    let p = case.spec.bind("cell.", bound)?;
    let batch = case.xs[0].cols();
    let mut s = TapeState::zeros(tape, case.spec.d_h, batch);
    for ((x, dt), m) in case.xs.iter().zip(&case.dts).zip(&case.masks) {
        let x = tape.constant(x.clone());
        let dt = tape.constant(dt.clone());
        let m = tape.constant(m.clone());
        s = masked_step_on(tape, &p, s, x, dt, m)?;
    }
    let r = tape.constant(case.readout.clone());
    let weighted = tape.mul(s.h, r)?;
    let c2 = tape.square(s.c);
    let a = tape.sum(weighted);
    let b = tape.sum(c2);
    let b = tape.scale(b, 0.3);
    tape.add(a, b)
}

pub fn spec(kind: FusionKind, d_l: usize, d_ho: usize, d_hs: usize, d_z: usize) -> FusionSpec {
    FusionSpec { kind, d_l, d_ho, d_hs, d_z }
}

pub fn random_params(s: &FusionSpec, rng: &mut Rng) -> FusionParams {
    let shapes = s.shapes();
    s.assemble(|n| {
        let (r, c) = shapes.iter().find(|(m, _)| *m == n).unwrap().1;
        Ok(rng.uniform_matrix(r, c, -1.0, 1.0))
    })
    .unwrap()
}

/// Sum of every interaction term: for each subset of views, pick one feature
/// from each chosen view and the bias column from the others.
pub fn expansion(p: &MvmFusionParams, views: [&[f64]; 3]) -> Vec<f64> {
    let factors = [&p.u_f1, &p.u_f2, &p.u_f3];
    let d_z = p.u_f1.rows();
    let mut z = vec![0.0; d_z];
    for (k, zk) in z.iter_mut().enumerate() {
        let bias = |v: usize| factors[v].get(k, views[v].len());
        // order 0
        *zk += bias(0) * bias(1) * bias(2);
        // order 1
        for v in 0..3 {
            let (a, b) = ((v + 1) % 3, (v + 2) % 3);
            for (j, x) in views[v].iter().enumerate() {
                *zk += factors[v].get(k, j) * x * bias(a) * bias(b);
            }
        }
        // order 2
        for (v, w) in [(0, 1), (0, 2), (1, 2)] {
            let rest = 3 - v - w;
            for (i, x) in views[v].iter().enumerate() {
                for (j, y) in views[w].iter().enumerate() {
                    *zk += factors[v].get(k, i) * x * factors[w].get(k, j) * y * bias(rest);
                }
            }
        }
        // order 3
        for (i, x) in views[0].iter().enumerate() {
            for (j, y) in views[1].iter().enumerate() {
                for (m, w) in views[2].iter().enumerate() {
                    *zk += factors[0].get(k, i) * x * factors[1].get(k, j) * y * factors[2].get(k, m) * w;
                }
            }
        }
    }
    z
}

pub fn fusion_loss(s: &FusionSpec, inputs: &[Matrix; 4], tape: &mut Tape, bound: &Bound<'_>) -> Result<Var> {
    let p = s.bind("f.", bound)?;
    let [l, ho, hs, r] = inputs.clone().map(|m| tape.constant(m));
    let z = fuse_on(tape, &p, l, ho, hs)?;
    let w = tape.mul(z, r)?;
    Ok(tape.sum(w))
}
