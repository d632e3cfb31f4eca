//! Extended Krylov subspace solver for `A X + X B = U V^T`.

use faer::{Mat, MatRef};

use super::dense::dense_sylvester_capped;
use crate::dense::{hcat, svd, thin_qr};
use crate::error::{check_len, Result};
use crate::hodlr::{HodlrLu, HodlrMatrix};
use crate::lowrank::LowRankFactor;

/// Square operator with products and solves, plain and transposed.
pub trait SylvesterOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
    fn apply_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
    fn solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
    fn solve_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
}

/// A HODLR matrix together with its LU factorization.
#[derive(Clone, Copy, Debug)]
pub struct HodlrOperator<'a> {
    pub matrix: &'a HodlrMatrix,
    pub lu: &'a HodlrLu,
}

impl<'a> HodlrOperator<'a> {
    pub fn new(matrix: &'a HodlrMatrix, lu: &'a HodlrLu) -> Result<Self> {
        check_len(matrix.size(), lu.size())?;
        Ok(Self { matrix, lu })
    }
}

impl SylvesterOperator for HodlrOperator<'_> {
    fn size(&self) -> usize {
        self.matrix.size()
    }
    fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.matrix.matmat(x, false)
    }
    fn apply_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.matrix.matmat(x, true)
    }
    fn solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.lu.solve_mat(x)
    }
    fn solve_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.lu.solve_transpose_mat(x)
    }
}

/// `O^T` as an operator.
#[derive(Clone, Copy, Debug)]
pub struct Transposed<O>(pub O);

impl<O: SylvesterOperator> SylvesterOperator for Transposed<O> {
    fn size(&self) -> usize {
        self.0.size()
    }
    fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.0.apply_t(x)
    }
    fn apply_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.0.apply(x)
    }
    fn solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.0.solve_t(x)
    }
    fn solve_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.0.solve(x)
    }
}

impl<O: SylvesterOperator + ?Sized> SylvesterOperator for &O {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        (**self).apply(x)
    }
    fn apply_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        (**self).apply_t(x)
    }
    fn solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        (**self).solve(x)
    }
    fn solve_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        (**self).solve_t(x)
    }
}

/// New directions whose norm after orthogonalization falls below this
/// fraction of the candidate block norm are dropped.
pub const DEFLATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EkOptions {
    /// Target for the true relative residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest basis size per side; defaults to the problem size.
    pub basis_cap: Option<usize>,
}

impl Default for EkOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            basis_cap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EkStop {
    Converged,
    MaxIter,
    /// A basis outgrew the cap; the projected problem is no longer small.
    BasisCap,
    /// Both bases stopped growing before the residual target was met.
    Breakdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EkIteration {
    pub iteration: usize,
    pub basis_u: usize,
    pub basis_v: usize,
    /// True relative residual of the projected solution.
    pub residual: f64,
    /// Relative residual of the compressed equation.
    pub galerkin_residual: f64,
    /// `max(||Q^T Q - I||_F, ||Z^T Z - I||_F)`.
    pub ortho_error: f64,
}

#[derive(Clone, Debug)]
pub struct SylvesterSolution {
    pub factor: LowRankFactor,
    /// True relative residual of `factor`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: EkStop,
    pub history: Vec<EkIteration>,
}

/// Orthonormal basis of an extended Krylov space of `K` (`K = op` or
/// `K = op^T`) with `K Q` kept alongside.
struct Basis<'o, O> {
    op: &'o O,
    transpose: bool,
    q: Mat<f64>,
    kq: Mat<f64>,
    plus: Mat<f64>,
    minus: Mat<f64>,
}

impl<'o, O: SylvesterOperator> Basis<'o, O> {
    fn new(op: &'o O, transpose: bool, start: MatRef<'_, f64>) -> Result<Self> {
        let n = op.size();
        let mut b = Self {
            op,
            transpose,
            q: Mat::zeros(n, 0),
            kq: Mat::zeros(n, 0),
            plus: Mat::zeros(n, 0),
            minus: Mat::zeros(n, 0),
        };
        let p0 = b.append(start)?;
        b.plus = p0.clone();
        b.minus = p0;
        Ok(b)
    }

    fn len(&self) -> usize {
        self.q.ncols()
    }

    fn k_apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if self.transpose {
            self.op.apply_t(x)
        } else {
            self.op.apply(x)
        }
    }

    fn k_solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if self.transpose {
            self.op.solve_t(x)
        } else {
            self.op.solve(x)
        }
    }

    /// Orthogonalizes `cand` against the basis (two passes), deflates and
    /// appends the surviving directions, which are returned.
    fn append(&mut self, cand: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let n = self.q.nrows();
        let scale = cand.norm_l2();
        if scale == 0.0 || cand.ncols() == 0 {
            return Ok(Mat::zeros(n, 0));
        }
        let mut w = cand.to_owned();
        if self.len() > 0 {
            for _ in 0..2 {
                let coef = self.q.transpose() * &w;
                w -= &self.q * coef;
            }
        }
        let s = svd(w.as_ref())?;
        let r = s.s.iter().take_while(|&&x| x > DEFLATION_TOL * scale).count().min(n - self.len());
        let mut new = s.u.as_ref().subcols(0, r).to_owned();
        if r > 0 && self.len() > 0 {
            // Weak directions carry the leftover basis component scaled by
            // s_1 / s_r, so they get one more pass.
            for _ in 0..2 {
                let coef = self.q.transpose() * &new;
                new -= &self.q * coef;
                new = thin_qr(new.as_ref()).0;
            }
        }
        if r > 0 {
            let knew = self.k_apply(new.as_ref())?;
            self.q = hcat(&[self.q.as_ref(), new.as_ref()]);
            self.kq = hcat(&[self.kq.as_ref(), knew.as_ref()]);
        }
        Ok(new)
    }

    fn extend_plus(&mut self) -> Result<usize> {
        if self.plus.ncols() == 0 {
            return Ok(0);
        }
        let cand = self.k_apply(self.plus.as_ref())?;
        self.plus = self.append(cand.as_ref())?;
        Ok(self.plus.ncols())
    }

    fn extend_minus(&mut self) -> Result<usize> {
        if self.minus.ncols() == 0 {
            return Ok(0);
        }
        let cand = self.k_solve(self.minus.as_ref())?;
        self.minus = self.append(cand.as_ref())?;
        Ok(self.minus.ncols())
    }

    /// `Q^T K Q`.
    fn projection(&self) -> Mat<f64> {
        self.q.transpose() * &self.kq
    }

    fn ortho_error(&self) -> f64 {
        let k = self.len();
        (self.q.transpose() * &self.q - Mat::<f64>::identity(k, k)).norm_l2()
    }
}

/// `||L R^T||_F` from thin QRs of the factors.
pub(crate) fn factored_norm(l: MatRef<'_, f64>, r: MatRef<'_, f64>) -> f64 {
    if l.ncols() == 0 {
        return 0.0;
    }
    let (_, rl) = thin_qr(l);
    let (_, rr) = thin_qr(r);
    (rl * rr.transpose()).norm_l2()
}

/// `||A X_U X_V^T + X_U X_V^T B - U V^T||_F / ||U V^T||_F` using only
/// products with the thin factors. With a zero right-hand side the absolute
/// residual is returned.
pub fn sylvester_residual<A, B>(a: &A, b: &B, x: &LowRankFactor, rhs: &LowRankFactor) -> Result<f64>
where
    A: SylvesterOperator + ?Sized,
    B: SylvesterOperator + ?Sized,
{
    check_len(a.size(), x.nrows())?;
    check_len(b.size(), x.ncols())?;
    check_len(a.size(), rhs.nrows())?;
    check_len(b.size(), rhs.ncols())?;
    let ax = a.apply(x.u())?;
    let btx = b.apply_t(x.v())?;
    let neg_u = rhs.u() * faer::Scale(-1.0);
    let l = hcat(&[ax.as_ref(), x.u(), neg_u.as_ref()]);
    let r = hcat(&[x.v(), btx.as_ref(), rhs.v()]);
    let num = factored_norm(l.as_ref(), r.as_ref());
    let den = factored_norm(rhs.u(), rhs.v());
    Ok(if den > 0.0 { num / den } else { num })
}

/// Solves `A X + X B = U V^T` by Galerkin projection onto extended Krylov
/// spaces `EK(A, U)` and `EK(B^T, V)`, checking the true residual after every
/// projected solve. The returned factor is truncated as far as the residual
/// target allows.
pub fn ek_sylvester<A, B>(a: &A, b: &B, rhs: &LowRankFactor, opts: EkOptions) -> Result<SylvesterSolution>
where
    A: SylvesterOperator,
    B: SylvesterOperator,
{
    let (m, n) = (a.size(), b.size());
    check_len(m, rhs.nrows())?;
    check_len(n, rhs.ncols())?;
    let rhs_norm = factored_norm(rhs.u(), rhs.v());
    if rhs.rank() == 0 || rhs_norm == 0.0 {
        return Ok(SylvesterSolution {
            factor: LowRankFactor::zeros(m, n),
            residual: 0.0,
            iterations: 0,
            converged: true,
            stop: EkStop::Converged,
            history: Vec::new(),
        });
    }
    let cap = opts.basis_cap.unwrap_or(m.max(n)).max(1);

    let mut qa = Basis::new(a, false, rhs.u())?;
    let mut qb = Basis::new(b, true, rhs.v())?;
    qa.extend_minus()?;
    qb.extend_minus()?;

    let mut history = Vec::new();
    let mut best: Option<(Mat<f64>, usize, usize, f64)> = None;
    let mut stop = EkStop::MaxIter;
    for it in 1..=opts.max_iter.max(1) {
        let (ka, kb) = (qa.len(), qb.len());
        let at = qa.projection();
        let bt = qb.projection().transpose().to_owned();
        let cu = qa.q.transpose() * rhs.u();
        let cv = qb.q.transpose() * rhs.v();
        let ct = &cu * cv.transpose();
        let y = dense_sylvester_capped(at.as_ref(), bt.as_ref(), ct.as_ref(), cap)?;

        let galerkin = (&at * &y + &y * &bt - &ct).norm_l2() / ct.norm_l2().max(f64::MIN_POSITIVE);
        let residual = projected_residual(&qa, &qb, &y, rhs)? / rhs_norm;
        history.push(EkIteration {
            iteration: it,
            basis_u: ka,
            basis_v: kb,
            residual,
            galerkin_residual: galerkin,
            ortho_error: qa.ortho_error().max(qb.ortho_error()),
        });
        best = Some((y, ka, kb, residual));
        if residual <= opts.tol {
            stop = EkStop::Converged;
            break;
        }
        if it == opts.max_iter.max(1) {
            break;
        }
        let grown = qa.extend_plus()? + qa.extend_minus()? + qb.extend_plus()? + qb.extend_minus()?;
        if grown == 0 {
            stop = EkStop::Breakdown;
            break;
        }
        if qa.len() > cap || qb.len() > cap {
            stop = EkStop::BasisCap;
            break;
        }
    }

    let (y, ka, kb, residual) = best.expect("at least one projected solve");
    let q = qa.q.as_ref().subcols(0, ka);
    let z = qb.q.as_ref().subcols(0, kb);
    let (factor, residual) = truncate_solution(a, b, rhs, q, z, &y, opts.tol, residual)?;
    Ok(SylvesterSolution {
        factor,
        residual,
        iterations: history.len(),
        converged: stop == EkStop::Converged,
        stop,
        history,
    })
}

/// Unnormalized true residual of `Q Y Z^T`, reusing the stored `K Q`.
fn projected_residual<A: SylvesterOperator, B: SylvesterOperator>(
    qa: &Basis<'_, A>,
    qb: &Basis<'_, B>,
    y: &Mat<f64>,
    rhs: &LowRankFactor,
) -> Result<f64> {
    let aqy = &qa.kq * y;
    let qy = &qa.q * y;
    let neg_u = rhs.u() * faer::Scale(-1.0);
    let l = hcat(&[aqy.as_ref(), qy.as_ref(), neg_u.as_ref()]);
    let r = hcat(&[qb.q.as_ref(), qb.kq.as_ref(), rhs.v()]);
    Ok(factored_norm(l.as_ref(), r.as_ref()))
}

/// SVD truncation of `Q Y Z^T`, relaxed until the true residual meets `tol`
/// (or matches the untruncated one when that already misses it).
#[allow(clippy::too_many_arguments)]
fn truncate_solution<A: SylvesterOperator, B: SylvesterOperator>(
    a: &A,
    b: &B,
    rhs: &LowRankFactor,
    q: MatRef<'_, f64>,
    z: MatRef<'_, f64>,
    y: &Mat<f64>,
    tol: f64,
    full_residual: f64,
) -> Result<(LowRankFactor, f64)> {
    let s = svd(y.as_ref())?;
    let s1 = s.s.first().copied().unwrap_or(0.0);
    let target = tol.max(full_residual);
    let mut rel = tol;
    for _ in 0..8 {
        let r = s.s.iter().take_while(|&&v| v > 0.0 && v > rel * s1).count();
        let w = Mat::from_fn(s.u.nrows(), r, |i, j| s.u[(i, j)] * s.s[j]);
        let factor = LowRankFactor::new(q * &w, z * s.v.as_ref().subcols(0, r))?;
        if r == s.s.len() {
            return Ok((factor, full_residual));
        }
        let res = sylvester_residual(a, b, &factor, rhs)?;
        if res <= target {
            return Ok((factor, res));
        }
        rel *= 1e-2;
    }
    let w = Mat::from_fn(s.u.nrows(), s.s.len(), |i, j| s.u[(i, j)] * s.s[j]);
    Ok((LowRankFactor::new(q * &w, z * &s.v)?, full_residual))
}
