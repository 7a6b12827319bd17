//! Dense matrices, a reverse-mode tape, and a finite-difference oracle.

mod matrix;
mod params;
mod rng;
mod tape;

pub use matrix::{sigmoid, Matrix};
pub use params::{ParamRecord, ParamSet};
pub use rng::Rng;
pub use tape::{Bound, Gradients, Tape, Var};

use crate::error::Result;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Value and reverse-mode gradient of a scalar function of `params`.
///
/// `f` records its computation on the supplied tape using the bound
/// parameter leaves and returns a `(1, 1)` node.
pub fn grad<F>(params: &ParamSet, f: F) -> Result<(f64, ParamSet)>
where
    F: FnOnce(&mut Tape, &Bound<'_>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let out = f(&mut tape, &bound)?;
    let value = tape.value(out).item();
    let grads = tape.backward(out)?;
    Ok((value, bound.collect(&grads)))
}

/// Forward value only.
pub fn evaluate<F>(params: &ParamSet, f: F) -> Result<f64>
where
    F: FnOnce(&mut Tape, &Bound<'_>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let out = f(&mut tape, &bound)?;
    Ok(tape.value(out).item())
}

/// Central differences `(f(p + h e) - f(p - h e)) / 2h`, one coordinate at a time.
pub fn finite_diff_grad<F>(params: &ParamSet, h: f64, mut f: F) -> Result<ParamSet>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    let base = params.flatten();
    let mut out = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let plus = f(&params.unflatten(&probe)?)?;
        probe[i] = base[i] - h;
        let minus = f(&params.unflatten(&probe)?)?;
        probe[i] = base[i];
        out.push((plus - minus) / (2.0 * h));
    }
    params.unflatten(&out)
}

/// `max_i |a_i - b_i| / max(1, |b_i|)`, with `b` the reference.
pub fn max_relative_error(a: &ParamSet, reference: &ParamSet) -> f64 {
    a.flatten()
        .iter()
        .zip(reference.flatten())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, m: Matrix) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert(name, m).unwrap();
        p
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let p = single("w", Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]));
        let (_, g) = grad(&p, |t, b| Ok(t.sum(b.get("w")?))).unwrap();
        assert_eq!(g.get("w").unwrap(), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn grad_of_sigmoid_at_zero() {
        let p = single("w", Matrix::zeros(3, 2));
        let (_, g) = grad(&p, |t, b| {
            let s = t.sigmoid(b.get("w")?);
            Ok(t.sum(s))
        })
        .unwrap();
        assert_eq!(g.get("w").unwrap(), &Matrix::filled(3, 2, 0.25));
    }

    #[test]
    fn finite_diff_simple_cases() {
        let p = single("w", Matrix::scalar(3.0));
        let g = finite_diff_grad(&p, FD_STEP, |q| Ok(q.get("w").unwrap().item().powi(2))).unwrap();
        assert!((g.get("w").unwrap().item() - 6.0).abs() < 1e-6);

        let p = single("w", Matrix::zeros(2, 2));
        let g = finite_diff_grad(&p, FD_STEP, |q| Ok(q.get("w").unwrap().tanh().sum())).unwrap();
        for v in g.get("w").unwrap().data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_parameter_is_an_error() {
        let p = single("w", Matrix::zeros(1, 1));
        assert!(grad(&p, |t, b| Ok(t.sum(b.get("nope")?))).is_err());
    }
}
