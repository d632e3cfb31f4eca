//! Left-preconditioned full GMRES.

use crate::dense::{dot, norm};

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final relative residual of the preconditioned system.
    pub precond_residual: f64,
}

/// Solves `A x = b` by GMRES on `M^{-1} A x = M^{-1} b` from `x0 = 0`, with
/// no restarts. Stops once the preconditioned residual drops to
/// `tol * ||M^{-1} b||` or after `max_iter` Arnoldi steps.
pub fn pgmres_solve(
    matvec: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let r0 = precond(b);
    let beta = norm(&r0);
    if beta == 0.0 {
        return GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            precond_residual: 0.0,
        };
    }

    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // columns of the Hessenberg matrix after the Givens rotations
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut residual = 1.0;
    let mut converged = false;

    for j in 0..max_iter.min(n) {
        let mut w = precond(&matvec(&basis[j]));
        let mut h = vec![0.0; j + 2];
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&w, q);
                h[i] += c;
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let hn = norm(&w);
        h[j + 1] = hn;

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s * a + c * b;
        }
        let (a, b) = (h[j], h[j + 1]);
        let r = a.hypot(b);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
        h[j] = r;
        h[j + 1] = 0.0;
        rotations.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        h.truncate(j + 1);
        r_cols.push(h);

        residual = g[j + 1].abs() / beta;
        if residual <= tol || hn == 0.0 {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }

    let k = r_cols.len();
    // back substitution R y = g
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, col) in r_cols.iter().enumerate().skip(i + 1) {
            s -= col[i] * y[jj];
        }
        y[i] = s / r_cols[i][i];
    }
    let mut x = vec![0.0; n];
    for (q, &yi) in basis.iter().zip(&y) {
        x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += yi * qi);
    }
    GmresOutcome {
        x,
        iterations: k,
        converged,
        precond_residual: residual,
    }
}
