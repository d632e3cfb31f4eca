//! Dense Sylvester solvers: complex Schur (Bartels–Stewart) and the
//! Kronecker linearization used as an oracle for small sizes.

use faer::Mat;
use faer::MatRef;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::lu_solve;
use crate::error::{check_len, Error, Result};

/// Default cap on the dimensions accepted by [`dense_sylvester`].
pub const DEFAULT_SYLVESTER_CAP: usize = 512;

/// Largest `m * n` the Kronecker linearization will form.
pub const KRON_CAP: usize = 4096;

const GAP_FACTOR: f64 = 1e-12;

fn to_complex(a: MatRef<'_, f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| Complex64::new(a[(i, j)], 0.0))
}

fn frob(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

fn schur(a: DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let (q, t) = a
        .try_schur(f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?
        .unpack();
    Ok((q, t))
}

/// Solves `A X + X B = C` for dense `A` (m x m), `B` (n x n), `C` (m x n).
pub fn dense_sylvester(a: MatRef<'_, f64>, b: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Result<Mat<f64>> {
    dense_sylvester_capped(a, b, c, DEFAULT_SYLVESTER_CAP)
}

pub fn dense_sylvester_capped(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    c: MatRef<'_, f64>,
    cap: usize,
) -> Result<Mat<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    check_len(m, a.ncols())?;
    check_len(n, b.ncols())?;
    check_len(m, c.nrows())?;
    check_len(n, c.ncols())?;
    for size in [m, n] {
        if size > cap {
            return Err(Error::Resource {
                what: "Sylvester coefficient",
                size,
                cap,
            });
        }
    }
    if m == 0 || n == 0 {
        return Ok(Mat::zeros(m, n));
    }

    let (qa, ta) = schur(to_complex(a))?;
    let (qb, tb) = schur(to_complex(b))?;
    let threshold = GAP_FACTOR * (frob(a) + frob(b)).max(f64::MIN_POSITIVE);
    let mut gap = f64::INFINITY;
    for i in 0..m {
        for j in 0..n {
            gap = gap.min((ta[(i, i)] + tb[(j, j)]).norm());
        }
    }
    if gap < threshold {
        return Err(Error::SingularSylvester { gap, threshold });
    }

    // T_a Y + Y T_b = Q_a^* C Q_b, column by column
    let mut y = qa.adjoint() * to_complex(c) * &qb;
    for j in 0..n {
        for k in 0..j {
            let t = tb[(k, j)];
            if t != Complex64::new(0.0, 0.0) {
                for i in 0..m {
                    let v = y[(i, k)] * t;
                    y[(i, j)] -= v;
                }
            }
        }
        let shift = tb[(j, j)];
        for i in (0..m).rev() {
            let mut s = y[(i, j)];
            for l in i + 1..m {
                s -= ta[(i, l)] * y[(l, j)];
            }
            y[(i, j)] = s / (ta[(i, i)] + shift);
        }
    }
    let x = &qa * y * qb.adjoint();
    Ok(Mat::from_fn(m, n, |i, j| x[(i, j)].re))
}

/// Solves `A X + X B = C` through `(I kron A + B^T kron I) vec X = vec C`.
pub fn kron_sylvester(a: MatRef<'_, f64>, b: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    check_len(m, c.nrows())?;
    check_len(n, c.ncols())?;
    if m * n > KRON_CAP {
        return Err(Error::Resource {
            what: "Kronecker system",
            size: m * n,
            cap: KRON_CAP,
        });
    }
    let k = kron_sum(a, b);
    let rhs = Mat::from_fn(m * n, 1, |p, _| c[(p % m, p / m)]);
    let v = lu_solve(k.as_ref(), rhs.as_ref());
    Ok(Mat::from_fn(m, n, |i, j| v[(i + j * m, 0)]))
}

/// `I_n kron A + B^T kron I_m` acting on column-major `vec X`.
pub fn kron_sum(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    Mat::from_fn(m * n, m * n, |p, q| {
        let (i, j) = (p % m, p / m);
        let (k, l) = (q % m, q / m);
        let mut v = 0.0;
        if j == l {
            v += a[(i, k)];
        }
        if i == k {
            v += b[(l, j)];
        }
        v
    })
}
