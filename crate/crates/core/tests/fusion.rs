//! Fusion layers against scalar and full-expansion oracles.

mod common;

use common::*;

use neucredit::fusion::{fc_fuse, mvm_fuse, FusionKind, FusionParams};
use neucredit::numerics::{evaluate, finite_diff_grad, grad, max_relative_error, Matrix, ParamSet, Rng, FD_STEP};

#[test]
fn mvm_equals_full_order_expansion() {
    let mut rng = Rng::new(200);
    for _ in 0..50 {
        let s = spec(FusionKind::Mvm, 2, 2, 2, 2);
        let FusionParams::Mvm(p) = random_params(&s, &mut rng) else { unreachable!() };
        let l = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let ho = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let hs = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let z = mvm_fuse(&p, &l, &ho, &hs).unwrap();
        let oracle = expansion(&p, [&col(&l), &col(&ho), &col(&hs)]);
        assert!(z.max_abs_diff(&Matrix::column(&oracle)) < 1e-12);
    }
}

#[test]
fn mvm_is_multilinear_in_each_view() {
    let mut rng = Rng::new(201);
    for _ in 0..20 {
        let s = spec(FusionKind::Mvm, 3, 2, 4, 3);
        let FusionParams::Mvm(p) = random_params(&s, &mut rng) else { unreachable!() };
        let l = rng.uniform_matrix(3, 1, -1.0, 1.0);
        let ho = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let hs = rng.uniform_matrix(4, 1, -1.0, 1.0);
        let alpha = rng.uniform(-3.0, 3.0);

        let mut with_one = col(&l).iter().map(|v| alpha * v).collect::<Vec<_>>();
        with_one.push(1.0);
        let mut with_zero = col(&l);
        with_zero.push(0.0);
        let mut bias_only = vec![0.0; 3];
        bias_only.push(1.0);
        let lhs = p.u_f1.matmul(&Matrix::column(&with_one)).unwrap();
        let rhs = p
            .u_f1
            .matmul(&Matrix::column(&with_zero))
            .unwrap()
            .scale(alpha)
            .add(&p.u_f1.matmul(&Matrix::column(&bias_only)).unwrap())
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);

        let ho1 = {
            let mut v = col(&ho);
            v.push(1.0);
            p.u_f2.matmul(&Matrix::column(&v)).unwrap()
        };
        let hs1 = {
            let mut v = col(&hs);
            v.push(1.0);
            p.u_f3.matmul(&Matrix::column(&v)).unwrap()
        };
        let rebuilt = rhs.hadamard(&ho1).unwrap().hadamard(&hs1).unwrap();
        let z = mvm_fuse(&p, &l.scale(alpha), &ho, &hs).unwrap();
        assert!(z.max_abs_diff(&rebuilt) < 1e-12);
        assert_eq!(z.shape(), (3, 1));
    }
}

#[test]
fn fc_matches_concatenate_then_affine() {
    let mut rng = Rng::new(202);
    for _ in 0..20 {
        let s = spec(FusionKind::Fc, 3, 2, 2, 4);
        let FusionParams::Fc(p) = random_params(&s, &mut rng) else { unreachable!() };
        let l = rng.uniform_matrix(3, 1, -1.0, 1.0);
        let ho = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let hs = rng.uniform_matrix(2, 1, -1.0, 1.0);
        let x: Vec<f64> = [col(&l), col(&ho), col(&hs)].concat();
        let oracle: Vec<f64> = (0..4)
            .map(|k| {
                let mut a = p.b_f.get(k, 0);
                for (j, v) in x.iter().enumerate() {
                    a += p.w_f.get(k, j) * v;
                }
                a.tanh()
            })
            .collect();
        let z = fc_fuse(&p, &l, &ho, &hs).unwrap();
        assert!(z.max_abs_diff(&Matrix::column(&oracle)) < 1e-12);
        assert_eq!(z.shape(), (4, 1));
    }
}


#[test]
fn fusion_gradients_match_finite_differences() {
    let mut rng = Rng::new(203);
    for kind in [FusionKind::Fc, FusionKind::Mvm] {
        for _ in 0..5 {
            let s = spec(kind, 3, 2, 3, 2);
            let mut params = ParamSet::new();
            random_params(&s, &mut rng).write("f.", &mut params).unwrap();
            let inputs = [
                rng.uniform_matrix(3, 4, -1.0, 1.0),
                rng.uniform_matrix(2, 4, -1.0, 1.0),
                rng.uniform_matrix(3, 4, -1.0, 1.0),
                rng.uniform_matrix(2, 4, -1.0, 1.0),
            ];
            let (_, g) = grad(&params, |t, b| fusion_loss(&s, &inputs, t, b)).unwrap();
            let fd = finite_diff_grad(&params, FD_STEP, |q| evaluate(q, |t, b| fusion_loss(&s, &inputs, t, b))).unwrap();
            assert!(max_relative_error(&g, &fd) < 1e-4, "{kind:?}");
        }
    }
}
