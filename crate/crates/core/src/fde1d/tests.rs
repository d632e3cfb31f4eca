use faer::Mat;
use statrs::function::gamma::{gamma, ln_gamma};

use super::*;
use crate::dense::{norm2, norm2_est_dense};

fn opts(leaf: usize) -> HodlrOptions {
    HodlrOptions {
        trunc_tol: 1e-8,
        leaf_size: leaf,
    }
}

// g_k = Gamma(k - alpha) / (Gamma(-alpha) Gamma(k + 1)), evaluated through
// log-gamma for k >= 2.
fn gl_oracle(alpha: f64, k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => -alpha,
        _ => (ln_gamma(k as f64 - alpha) - ln_gamma(k as f64 + 1.0)).exp() / gamma(-alpha),
    }
}

// T[i][j] = -g_{i-j+1} for j <= i + 1, zero above the first superdiagonal.
fn dense_t(alpha: f64, n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if j <= i + 1 { -gl_oracle(alpha, i + 1 - j) } else { 0.0 })
}

fn dense_spatial(alpha: f64, dx: f64, dp: &[f64], dm: &[f64]) -> Mat<f64> {
    let n = dp.len();
    let t = dense_t(alpha, n);
    let s = -dx.powf(-alpha);
    Mat::from_fn(n, n, |i, j| s * (dp[i] * t[(i, j)] + dm[i] * t[(j, i)]))
}

fn thomas(sub: f64, diag: f64, sup: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup / diag;
    d[0] = b[0] / diag;
    for i in 1..n {
        let den = diag - sub * c[i - 1];
        c[i] = sup / den;
        d[i] = (b[i] - sub * d[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn zero_coefficients_give_zero_operator() {
    let g = Grid1D::new(0.0, 2.0, 300).unwrap();
    let f = assemble_spatial_operator(1.5, &g, &[0.0; 300], &[0.0; 300], opts(64)).unwrap();
    assert_eq!(f.max_rank(), 0);
    let d = f.to_dense().unwrap();
    assert!(d.col_iter().all(|c| c.iter().all(|v| *v == 0.0)));
}

#[test]
fn second_order_limit_is_the_laplacian() {
    let n = 200;
    let g = Grid1D::new(0.0, 2.0, n).unwrap();
    let f = assemble_spatial_operator(2.0, &g, &vec![1.0; n], &vec![1.0; n], opts(32))
        .unwrap()
        .to_dense()
        .unwrap();
    let h2 = g.dx() * g.dx();
    for i in 0..n {
        for j in 0..n {
            let stencil = match i.abs_diff(j) {
                0 => -4.0 / h2,
                1 => 2.0 / h2,
                _ => 0.0,
            };
            assert!((f[(i, j)] - stencil).abs() < 1e-9 / h2, "({i},{j})");
        }
    }
}

#[test]
fn hodlr_assembly_matches_dense_oracle() {
    let n = 512;
    let alpha = 1.5;
    let g = Grid1D::new(0.0, 2.0, n).unwrap();
    let dp = g.sample(|x| x.powf(alpha));
    let dm = g.sample(|x| (2.0 - x).powf(alpha));
    let f = assemble_spatial_operator(alpha, &g, &dp, &dm, opts(64)).unwrap();
    let exact = dense_spatial(alpha, g.dx(), &dp, &dm);
    let err = norm2((f.to_dense().unwrap() - &exact).as_ref()).unwrap();
    let scale = norm2(exact.as_ref()).unwrap();
    assert!(err <= 1e-6 * scale, "{err} vs {scale}");
    assert!(f.max_rank() < 40);
}

#[test]
fn zero_time_step_gives_identity() {
    let g = Grid1D::new(0.0, 2.0, 100).unwrap();
    let f = assemble_spatial_operator(1.7, &g, &vec![1.0; 100], &vec![2.0; 100], opts(16)).unwrap();
    let a = fd_matrix_from_spatial(&f, 0.0).unwrap().to_dense().unwrap();
    for i in 0..100 {
        for j in 0..100 {
            assert_eq!(a[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn fd_matrix_is_strictly_diagonally_dominant() {
    for alpha in [1.2, 1.8] {
        let p = manufactured_problem(alpha, 256, 1).unwrap();
        let a = assemble_fd_matrix(&p, 1, opts(32)).unwrap().to_dense().unwrap();
        for i in 0..256 {
            let off: f64 = (0..256).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            assert!(a[(i, i)] > off, "alpha {alpha}, row {i}: {} vs {off}", a[(i, i)]);
        }
    }
}

#[test]
fn fd_matrix_matches_matrix_free_operator() {
    let p = manufactured_problem(1.4, 400, 1).unwrap();
    let asm = SpatialAssembler::new(1.4, &p.grid, opts(50)).unwrap();
    let (dp, dm) = p.coefficients_at(1).unwrap();
    let a = fd_matrix_from_spatial(&asm.assemble(&dp, &dm).unwrap(), p.time.dt()).unwrap();
    let x = crate::dense::seeded_unit_vector(400, 9);
    let y1 = a.matvec(&x).unwrap();
    let y2 = asm.operator(p.time.dt(), &dp, &dm).apply(&x);
    assert!(max_abs_diff(&y1, &y2) < 1e-6 * norm(&y2));
}

#[test]
fn heat_equation_trajectory_matches_tridiagonal_solver() {
    let n = 256;
    let g = Grid1D::new(0.0, 2.0, n).unwrap();
    let time = TimeGrid::new(0.5, 9).unwrap();
    let p = Fde1dProblem::new(2.0, g, time)
        .unwrap()
        .with_source(|x, t| x * (2.0 - x) * (1.0 + t))
        .with_initial(|x| (std::f64::consts::PI * x / 2.0).sin());
    let traj = implicit_euler_1d(&p, opts(32), 1e-13).unwrap();
    assert_eq!(traj.states.len(), 11);

    // A = I + c (T + T^T), T + T^T = 2 tridiag(-1, 2, -1)
    let c = time.dt() / (g.dx() * g.dx());
    let mut u = g.sample(|x| (std::f64::consts::PI * x / 2.0).sin());
    for m in 1..=10 {
        let t = time.time(m);
        let b: Vec<f64> = g
            .interior()
            .iter()
            .zip(&u)
            .map(|(x, ui)| ui + time.dt() * x * (2.0 - x) * (1.0 + t))
            .collect();
        u = thomas(-2.0 * c, 1.0 + 4.0 * c, -2.0 * c, &b);
        let err = max_abs_diff(&u, &traj.states[m]);
        let scale = u.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        assert!(err <= 1e-8 * scale, "step {m}: {err}");
    }
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let g = Grid1D::new(0.0, 1.0, 120).unwrap();
    let p = Fde1dProblem::new(1.6, g, TimeGrid::new(1.0, 3).unwrap()).unwrap();
    let traj = implicit_euler_1d(&p, opts(32), 1e-10).unwrap();
    assert!(traj.states.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn maximum_principle() {
    let g = Grid1D::new(0.0, 2.0, 300).unwrap();
    let p = Fde1dProblem::new(1.5, g, TimeGrid::new(1.0, 4).unwrap())
        .unwrap()
        .with_diffusion(|x, t| 1.0 + x * t, |x, _| (2.0 - x).powi(2), false)
        .with_source(|x, t| (x * 3.0).sin().abs() * t)
        .with_initial(|x| x * (2.0 - x));
    let traj = implicit_euler_1d(&p, opts(64), 1e-10).unwrap();
    assert!(traj.stats.iter().all(|s| s.factorized));
    for u in &traj.states {
        let sup = u.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        assert!(u.iter().all(|v| *v >= -1e-8 * sup));
    }
}

#[test]
fn reused_lu_matches_refactorization_bitwise() {
    let reuse = manufactured_problem(1.8, 300, 3).unwrap();
    let mut fresh = manufactured_problem(1.8, 300, 3).unwrap();
    fresh.time_invariant_coeffs = false;
    let a = implicit_euler_1d(&reuse, opts(64), 1e-12).unwrap();
    let b = implicit_euler_1d(&fresh, opts(64), 1e-12).unwrap();
    assert_eq!(a.stats.iter().filter(|s| s.factorized).count(), 1);
    assert_eq!(b.stats.iter().filter(|s| s.factorized).count(), 3);
    assert_eq!(a.states, b.states);
}

#[test]
fn manufactured_solution_converges() {
    let err = |n: usize| {
        let steps = (n + 1) / 8;
        let p = manufactured_problem(1.5, n, steps).unwrap();
        let traj = implicit_euler_1d(&p, opts(64), 1e-10).unwrap();
        let t = p.time.time(steps);
        let exact = p.grid.sample(|x| manufactured_solution(x, t));
        max_abs_diff(traj.last(), &exact)
    };
    let (e1, e2) = (err(127), err(255));
    assert!(e2 < 0.7 * e1, "{e1} -> {e2}");
    assert!(e2 < 0.1);
}

#[test]
fn negative_coefficient_reports_step() {
    let g = Grid1D::new(0.0, 1.0, 40).unwrap();
    let p = Fde1dProblem::new(1.5, g, TimeGrid::new(1.0, 2).unwrap())
        .unwrap()
        .with_diffusion(|_, t| 0.5 - t, |_, _| 1.0, false);
    match implicit_euler_1d(&p, opts(16), 1e-10) {
        Err(Error::Step { step, source }) => {
            assert_eq!(step, 2);
            assert!(matches!(*source, Error::Domain(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn p2_is_exact_for_second_order() {
    let p = manufactured_problem(2.0, 200, 1).unwrap();
    let out = gmres_first_step(&p, Some(PrecondKind::P2), 1e-10, 50).unwrap();
    assert!(out.outcome.converged);
    assert_eq!(out.outcome.iterations, 1);
    assert!(out.residual < 1e-10);
}

#[test]
fn p1_clusters_spectrum_near_first_order() {
    // ||M^{-1} A - I||_2 shrinks as alpha approaches 1
    let dist = |alpha: f64| {
        let n = 128;
        let p = manufactured_problem(alpha, n, 1).unwrap();
        let (dp, dm) = p.coefficients_at(1).unwrap();
        let a = dense_spatial(alpha, p.grid.dx(), &dp, &dm);
        let pre = build_preconditioner(PrecondKind::P1, alpha, &p.grid, p.time.dt(), &dp, &dm).unwrap();
        let dt = p.time.dt();
        let mut e = Mat::zeros(n, n);
        for j in 0..n {
            let col: Vec<f64> = (0..n)
                .map(|i| (if i == j { 1.0 } else { 0.0 }) - dt * a[(i, j)])
                .collect();
            let z = pre.apply(&col);
            for i in 0..n {
                e[(i, j)] = z[i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        norm2_est_dense(e.as_ref(), 60)
    };
    let (near, far) = (dist(1.01), dist(1.5));
    assert!(near < 0.05, "{near}");
    assert!(near < 0.2 * far, "{near} vs {far}");
}

#[test]
fn preconditioning_reduces_gmres_iterations() {
    let p = manufactured_problem(1.8, 1024, 1).unwrap();
    let plain = gmres_first_step(&p, None, 1e-7, 1024).unwrap();
    let pre = gmres_first_step(&p, Some(PrecondKind::P2), 1e-7, 1024).unwrap();
    assert!(pre.outcome.converged);
    assert!(pre.outcome.iterations < plain.outcome.iterations);
    assert!(pre.outcome.precond_residual <= 1e-7);
    assert!(pre.residual < 1e-5);
}
