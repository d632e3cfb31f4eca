//! Thin wrappers over the dense kernels used throughout the crate.

use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest matrix dimension the dense oracles will materialize.
pub const DEFAULT_DENSE_CAP: usize = 16384;

/// Thin QR factorization `a = q * r` with `q` of size `m x min(m, k)`.
pub fn thin_qr(a: MatRef<'_, f64>) -> (Mat<f64>, Mat<f64>) {
    let (m, k) = (a.nrows(), a.ncols());
    let p = m.min(k);
    if p == 0 {
        return (Mat::zeros(m, 0), Mat::zeros(0, k));
    }
    let qr = a.qr();
    (qr.compute_thin_Q(), qr.thin_R().to_owned())
}

/// Thin SVD `a = u * diag(s) * v^T`, singular values nonincreasing.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn svd(a: MatRef<'_, f64>) -> Result<Svd> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(Svd {
            u: Mat::zeros(m, 0),
            s: Vec::new(),
            v: Mat::zeros(n, 0),
        });
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let s = (0..m.min(n)).map(|i| svd.S()[i]).collect();
    Ok(Svd {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))
}

/// Spectral norm, computed from the singular values.
pub fn norm2(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))
}

/// Solves `a x = b` with partial pivoting.
pub fn lu_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    use faer::linalg::solvers::Solve;
    a.partial_piv_lu().solve(b)
}

/// Horizontal concatenation of blocks sharing a row count.
pub fn hcat(blocks: &[MatRef<'_, f64>]) -> Mat<f64> {
    let m = blocks.first().map_or(0, |b| b.nrows());
    let n: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(m, n);
    let mut off = 0;
    for b in blocks {
        assert_eq!(b.nrows(), m, "hcat: row counts differ");
        out.as_mut().subcols_mut(off, b.ncols()).copy_from(b);
        off += b.ncols();
    }
    out
}

pub fn col_vec(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn to_vec(a: MatRef<'_, f64>) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), 1);
    (0..a.nrows()).map(|i| a[(i, 0)]).collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Deterministic pseudo-random unit vector.
pub fn seeded_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
    v
}

/// Power iteration on `A^T A` through matvec callbacks. Returns an estimate
/// of the spectral norm (a lower bound up to rounding).
pub fn norm2_est_with(
    n: usize,
    iters: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = seeded_unit_vector(n, 0x5eed_2024);
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let y = apply(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        est = ny;
        let mut z = apply_t(&y);
        let nz = norm(&z);
        if nz == 0.0 {
            break;
        }
        z.iter_mut().for_each(|v| *v /= nz);
        x = z;
    }
    est
}

pub fn dense_matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

pub fn dense_matvec_t(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            (0..a.nrows()).map(|i| col[i] * x[i]).sum()
        })
        .collect()
}

/// Power-iteration norm estimate for a dense matrix.
pub fn norm2_est_dense(a: MatRef<'_, f64>, iters: usize) -> f64 {
    norm2_est_with(
        a.ncols(),
        iters,
        |x| dense_matvec(a, x),
        |y| dense_matvec_t(a, y),
    )
}
