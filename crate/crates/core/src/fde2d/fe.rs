//! Time step for finite element discretizations with a mass matrix:
//! `K1 X M + M X K2^T = M C M` with `K_i = M/2 - dt S_i`, reduced to a
//! standard Sylvester equation by applying `M^{-1}` on both sides.

use faer::{Mat, MatRef};

use super::recompress;
use crate::dense::{hcat, norm2_est_with};
use crate::error::{check_len, Result};
use crate::hodlr::{hodlr_add, hodlr_diag_scale, hodlr_lu, HodlrLu, HodlrMatrix, DEFAULT_NORM_ITERS};
use crate::lowrank::LowRankFactor;
use crate::sylvester::ek::factored_norm;
use crate::sylvester::{ek_sylvester, EkOptions, SylvesterOperator, SylvesterSolution, Transposed};

/// Condition estimate of the mass matrix above which a step is flagged.
pub const ILL_CONDITIONED: f64 = 1e8;

/// `M^{-1} K` applied through products with `K` and solves with `M`.
#[derive(Clone, Copy, Debug)]
pub struct GeneralizedOperator<'a> {
    pub mass: &'a HodlrMatrix,
    pub mass_lu: &'a HodlrLu,
    pub k: &'a HodlrMatrix,
    pub k_lu: &'a HodlrLu,
}

impl SylvesterOperator for GeneralizedOperator<'_> {
    fn size(&self) -> usize {
        self.k.size()
    }
    fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.mass_lu.solve_mat(self.k.matmat(x, false)?.as_ref())
    }
    fn apply_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.k.matmat(self.mass_lu.solve_transpose_mat(x)?.as_ref(), true)
    }
    fn solve(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.k_lu.solve_mat(self.mass.matmat(x, false)?.as_ref())
    }
    fn solve_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.mass.matmat(self.k_lu.solve_transpose_mat(x)?.as_ref(), true)
    }
}

#[derive(Clone, Debug)]
pub struct FeStep {
    pub solution: SylvesterSolution,
    /// `||K1 X M + M X K2^T - M C M||_F / ||M C M||_F`.
    pub generalized_residual: f64,
    pub mass_condition: f64,
    pub ill_conditioned: bool,
}

/// One implicit-Euler step of the finite element scheme. `mass` must be
/// symmetric positive definite; `f` carries the time-step factor.
#[allow(clippy::too_many_arguments)]
pub fn step_2d_fe(
    mass: &HodlrMatrix,
    mass_lu: &HodlrLu,
    s1: &HodlrMatrix,
    s2: &HodlrMatrix,
    u_prev: &LowRankFactor,
    f: &LowRankFactor,
    dt: f64,
    trunc_tol: f64,
    ek: EkOptions,
) -> Result<FeStep> {
    let n = mass.size();
    check_len(n, s1.size())?;
    check_len(n, s2.size())?;
    check_len(n, u_prev.nrows())?;
    check_len(n, u_prev.ncols())?;

    let half = vec![0.5; n];
    let step = vec![-dt; n];
    let k = |s: &HodlrMatrix| -> Result<HodlrMatrix> {
        hodlr_add(&hodlr_diag_scale(mass, &half, None)?, &hodlr_diag_scale(s, &step, None)?, trunc_tol)
    };
    let (k1, k2) = (k(s1)?, k(s2)?);
    let (lu1, lu2) = (hodlr_lu(&k1)?, hodlr_lu(&k2)?);

    let inv_norm = norm2_est_with(
        n,
        DEFAULT_NORM_ITERS,
        |x| mass_lu.solve(x).unwrap_or_else(|_| vec![f64::NAN; x.len()]),
        |x| mass_lu.solve_transpose(x).unwrap_or_else(|_| vec![f64::NAN; x.len()]),
    );
    let mass_condition = mass.norm2_est(DEFAULT_NORM_ITERS) * inv_norm;

    let rhs = recompress(&[f, u_prev], trunc_tol)?;
    let a = GeneralizedOperator {
        mass,
        mass_lu,
        k: &k1,
        k_lu: &lu1,
    };
    let b = Transposed(GeneralizedOperator {
        mass,
        mass_lu,
        k: &k2,
        k_lu: &lu2,
    });
    let solution = ek_sylvester(&a, &b, &rhs, ek)?;

    let x = &solution.factor;
    let mt = |y: MatRef<'_, f64>| mass.matmat(y, true);
    let neg_mc = mass.matmat(rhs.u(), false)? * faer::Scale(-1.0);
    let l = hcat(&[k1.matmat(x.u(), false)?.as_ref(), mass.matmat(x.u(), false)?.as_ref(), neg_mc.as_ref()]);
    let r = hcat(&[mt(x.v())?.as_ref(), k2.matmat(x.v(), false)?.as_ref(), mt(rhs.v())?.as_ref()]);
    let num = factored_norm(l.as_ref(), r.as_ref());
    let den = factored_norm(neg_mc.as_ref(), mt(rhs.v())?.as_ref());
    let generalized_residual = if den > 0.0 { num / den } else { num };

    Ok(FeStep {
        solution,
        generalized_residual,
        mass_condition,
        ill_conditioned: !(mass_condition <= ILL_CONDITIONED),
    })
}
