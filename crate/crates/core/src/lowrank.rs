//! Low-rank outer-product factors `U V^T`, SVD truncation and a two-sided
//! Lanczos compressor that only needs matrix-vector products.

use faer::{Mat, MatRef};

use crate::dense::{dense_matvec, dense_matvec_t, dot, hcat, norm, seeded_unit_vector, svd, thin_qr};
use crate::error::{check_len, Result};

/// `U V^T` with `U` of size `m x k` and `V` of size `n x k`.
#[derive(Clone, Debug)]
pub struct LowRankFactor {
    u: Mat<f64>,
    v: Mat<f64>,
}

impl LowRankFactor {
    pub fn new(u: Mat<f64>, v: Mat<f64>) -> Result<Self> {
        check_len(u.ncols(), v.ncols())?;
        Ok(Self { u, v })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            u: Mat::zeros(m, 0),
            v: Mat::zeros(n, 0),
        }
    }

    /// Rank-one factor `x y^T`.
    pub fn outer(x: &[f64], y: &[f64]) -> Self {
        Self {
            u: Mat::from_fn(x.len(), 1, |i, _| x[i]),
            v: Mat::from_fn(y.len(), 1, |i, _| y[i]),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }

    pub fn v(&self) -> MatRef<'_, f64> {
        self.v.as_ref()
    }

    pub fn into_parts(self) -> (Mat<f64>, Mat<f64>) {
        (self.u, self.v)
    }

    /// Number of stored scalars.
    pub fn storage(&self) -> usize {
        (self.nrows() + self.ncols()) * self.rank()
    }

    pub fn transpose(&self) -> Self {
        Self {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        if self.rank() == 0 {
            return Mat::zeros(self.nrows(), self.ncols());
        }
        &self.u * self.v.transpose()
    }

    /// `U (V^T x)`, no length check.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let t = dense_matvec_t(self.v.as_ref(), x);
        dense_matvec(self.u.as_ref(), &t)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols(), x.len())?;
        Ok(self.apply(x))
    }

    /// Restriction to rows `r0..r0+m` and columns `c0..c0+n`.
    pub fn restrict(&self, r0: usize, m: usize, c0: usize, n: usize) -> Self {
        Self {
            u: self.u.as_ref().subrows(r0, m).to_owned(),
            v: self.v.as_ref().subrows(c0, n).to_owned(),
        }
    }

    /// `diag(left) U V^T diag(right)`.
    pub fn scale(&mut self, left: Option<&[f64]>, right: Option<&[f64]>) {
        if let Some(d) = left {
            scale_rows(&mut self.u, d);
        }
        if let Some(d) = right {
            scale_rows(&mut self.v, d);
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            u: Mat::from_fn(self.u.nrows(), self.u.ncols(), |i, j| -self.u[(i, j)]),
            v: self.v.clone(),
        }
    }
}

pub(crate) fn scale_rows(a: &mut Mat<f64>, d: &[f64]) {
    for j in 0..a.ncols() {
        for (x, s) in a.col_as_slice_mut(j).iter_mut().zip(d) {
            *x *= s;
        }
    }
}

/// Recompresses `f` to the smallest rank whose dropped singular values are
/// all below `tol_abs`, optionally capped at `max_rank`.
pub fn svd_truncate(f: &LowRankFactor, tol_abs: f64, max_rank: Option<usize>) -> Result<LowRankFactor> {
    let (m, n) = (f.nrows(), f.ncols());
    if f.rank() == 0 || m == 0 || n == 0 {
        return Ok(LowRankFactor::zeros(m, n));
    }
    let (qu, ru) = thin_qr(f.u());
    let (qv, rv) = thin_qr(f.v());
    let core = &ru * rv.transpose();
    let s = svd(core.as_ref())?;
    let mut r = s.s.iter().take_while(|&&x| x > 0.0 && x >= tol_abs).count();
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    let w = Mat::from_fn(s.u.nrows(), r, |i, j| s.u[(i, j)] * s.s[j]);
    let z = s.v.as_ref().subcols(0, r);
    Ok(LowRankFactor {
        u: &qu * &w,
        v: &qv * z,
    })
}

/// Truncated SVD of the sum of `factors`.
pub fn compress_sum(factors: &[&LowRankFactor], tol_abs: f64) -> Result<LowRankFactor> {
    let Some(first) = factors.first() else {
        return Ok(LowRankFactor::zeros(0, 0));
    };
    let (m, n) = (first.nrows(), first.ncols());
    for f in factors {
        check_len(m, f.nrows())?;
        check_len(n, f.ncols())?;
    }
    let us: Vec<_> = factors.iter().map(|f| f.u()).collect();
    let vs: Vec<_> = factors.iter().map(|f| f.v()).collect();
    let cat = LowRankFactor {
        u: hcat_rows(&us, m),
        v: hcat_rows(&vs, n),
    };
    svd_truncate(&cat, tol_abs, None)
}

fn hcat_rows(blocks: &[MatRef<'_, f64>], m: usize) -> Mat<f64> {
    if blocks.iter().all(|b| b.ncols() == 0) {
        return Mat::zeros(m, 0);
    }
    hcat(blocks)
}

/// Starting vector for the Lanczos process.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LanczosStart {
    /// Normalized all-ones vector.
    #[default]
    Ones,
    Seeded(u64),
}

/// Result of [`lanczos_lowrank`]. `converged` is false when the step limit
/// was reached before the stopping test fired; the factor is then the best
/// one available.
#[derive(Clone, Debug)]
pub struct LanczosOutcome {
    pub factor: LowRankFactor,
    pub converged: bool,
    pub steps: usize,
}

/// Golub-Kahan bidiagonalization with full reorthogonalization.
///
/// Stops once two consecutive bidiagonal entries drop below `tol_abs`. The
/// returned factor is `U_k U_k^T A`, truncated at `tol_abs`.
pub fn lanczos_lowrank(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_adjoint: impl Fn(&[f64]) -> Vec<f64>,
    m: usize,
    n: usize,
    tol_abs: f64,
    max_rank: usize,
) -> Result<LanczosOutcome> {
    lanczos_lowrank_with(apply, apply_adjoint, m, n, tol_abs, max_rank, LanczosStart::Ones)
}

pub fn lanczos_lowrank_with(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_adjoint: impl Fn(&[f64]) -> Vec<f64>,
    m: usize,
    n: usize,
    tol_abs: f64,
    max_rank: usize,
    start: LanczosStart,
) -> Result<LanczosOutcome> {
    if m == 0 || n == 0 {
        return Ok(LanczosOutcome {
            factor: LowRankFactor::zeros(m, n),
            converged: true,
            steps: 0,
        });
    }
    let limit = m.min(n).min(max_rank.saturating_add(2));
    let v1 = match start {
        LanczosStart::Ones => vec![1.0 / (n as f64).sqrt(); n],
        LanczosStart::Seeded(seed) => seeded_unit_vector(n, seed),
    };

    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = vec![v1];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut small_run = 0usize;
    let converged = loop {
        // alpha half-step: u_j from A v_j
        let j = us.len();
        let mut u = apply(&vs[j]);
        if let (Some(&b), Some(prev)) = (betas.last(), us.last()) {
            axpy(&mut u, -b, prev);
        }
        reorthogonalize(&mut u, &us);
        let a = norm(&u);
        small_run = if a < tol_abs { small_run + 1 } else { 0 };
        if a == 0.0 {
            // A v_j lies in span(U); v_j only enters through the last beta
            break true;
        }
        u.iter_mut().for_each(|x| *x /= a);
        us.push(u);
        alphas.push(a);

        // beta half-step: v_{j+1} from A^T u_j
        let mut w = apply_adjoint(&us[j]);
        axpy(&mut w, -a, &vs[j]);
        reorthogonalize(&mut w, &vs);
        let b = norm(&w);
        let stop_after = small_run >= 2;
        small_run = if b < tol_abs { small_run + 1 } else { 0 };
        if b == 0.0 {
            betas.push(0.0);
            break true;
        }
        w.iter_mut().for_each(|x| *x /= b);
        vs.push(w);
        betas.push(b);
        if stop_after || small_run >= 2 {
            break true;
        }
        if us.len() >= limit {
            break us.len() >= m.min(n);
        }
    };

    let k = us.len();
    let steps = k;
    if k == 0 {
        return Ok(LanczosOutcome {
            factor: LowRankFactor::zeros(m, n),
            converged,
            steps,
        });
    }
    // A^T U_k = V_{k+1} [B_k^T; beta_k e_k^T]
    let kv = if betas.len() == k && betas[k - 1] != 0.0 { k + 1 } else { k };
    let u_mat = Mat::from_fn(m, k, |i, j| us[j][i]);
    let w = Mat::from_fn(n, k, |i, j| {
        let mut s = alphas[j] * vs[j][i];
        if j + 1 < kv {
            s += betas[j] * vs[j + 1][i];
        }
        s
    });
    let raw = LowRankFactor { u: u_mat, v: w };
    let factor = svd_truncate(&raw, tol_abs, Some(max_rank))?;
    Ok(LanczosOutcome {
        factor,
        converged,
        steps,
    })
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn reorthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(x, q);
            axpy(x, -c, q);
        }
    }
}
