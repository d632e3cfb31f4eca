//! End-to-end checks through the public API, each comparing two
//! independent routes to the same quantity.

use fracsolve::fde1d::{gmres_first_step, manufactured_problem};
use fracsolve::fde2d::Step2dAssembler;
use fracsolve::{
    assemble_fd_matrix, bss_problem, dense_sylvester, fractional_descriptor, hodlr_from_dense, hodlr_from_toeplitz,
    hodlr_lu, sample_rhs_lowrank, step_2d, toeplitz_to_dense, EkOptions, HodlrOptions, PrecondKind, ToeplitzOperator,
};

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn toeplitz_and_dense_compression_agree() {
    let n = 700;
    let desc = fractional_descriptor(1.4, n).unwrap();
    let fast = hodlr_from_toeplitz(&ToeplitzOperator::new(desc.clone()), 1e-10, 64).unwrap();
    assert!(fast.converged);
    let dense = toeplitz_to_dense(&desc, n).unwrap();
    let slow = hodlr_from_dense(dense.as_ref(), 1e-10, 64).unwrap();
    let x: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin()).collect();
    let (a, b) = (fast.matrix.matvec(&x).unwrap(), slow.matvec(&x).unwrap());
    assert!(rel(&a, &b) < 1e-9, "{}", rel(&a, &b));
}

#[test]
fn hodlr_lu_and_gmres_agree_on_first_step() {
    let p = manufactured_problem(1.6, 1023, 1).unwrap();
    let opts = HodlrOptions {
        trunc_tol: 1e-12,
        ..Default::default()
    };
    let h = assemble_fd_matrix(&p, 1, opts).unwrap();
    let direct = hodlr_lu(&h).unwrap().solve(&p.step_rhs(1, &p.initial())).unwrap();
    let iter = gmres_first_step(&p, Some(PrecondKind::P2), 1e-12, 200).unwrap();
    assert!(iter.outcome.converged);
    assert!(rel(&iter.outcome.x, &direct) < 1e-8, "{}", rel(&iter.outcome.x, &direct));
}

#[test]
fn krylov_step_matches_dense_sylvester() {
    let n = 96;
    let p = bss_problem(1.3, 1.7, n, true).unwrap();
    let opts = HodlrOptions {
        trunc_tol: 1e-12,
        leaf_size: 24,
    };
    let ops = Step2dAssembler::new(&p, opts).unwrap().operators(&p, 1).unwrap();
    let mut f = sample_rhs_lowrank(&p, p.time.time(1), 1e-14).unwrap();
    let dt = p.time.dt();
    f.scale(Some(&vec![dt; n]), None);
    let u0 = p.u0.clone();
    let ek = EkOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let sol = step_2d(&u0, &ops, &f, 1e-12, ek).unwrap();
    assert!(sol.converged);

    let a = ops.a1.to_dense().unwrap();
    let bt = ops.a2.to_dense().unwrap().transpose().to_owned();
    let want = dense_sylvester(a.as_ref(), bt.as_ref(), f.to_dense().as_ref()).unwrap();
    let got = sol.factor.to_dense();
    let err = (&got - &want).norm_l2() / want.norm_l2();
    assert!(err < 1e-8, "{err}");
}
