//! Block LU factorization without pivoting in HODLR format.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve as tri;
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{Accum, Mat, MatMut, MatRef, Par};

use super::{lowrank_acc, Block, HodlrMatrix, DEFAULT_NORM_ITERS};
use crate::error::{check_len, Error, Result};
use crate::lowrank::{compress_sum, LowRankFactor};

#[derive(Clone, Copy, Debug, Default)]
pub struct LuOptions {
    /// Relative tolerance for recompressing Schur-complement updates;
    /// defaults to the construction tolerance of the matrix.
    pub update_tol: Option<f64>,
}

#[derive(Clone, Debug)]
enum LuBlock {
    /// Unit lower and upper triangular factors packed in one matrix.
    Leaf { lu: Mat<f64> },
    Node {
        b11: Box<LuBlock>,
        b22: Box<LuBlock>,
        /// Off-diagonal block of `L`.
        l21: LowRankFactor,
        /// Off-diagonal block of `U`.
        u12: LowRankFactor,
    },
}

/// `A = L U` with `L` unit lower triangular, both in HODLR form.
#[derive(Clone, Debug)]
pub struct HodlrLu {
    root: LuBlock,
    size: usize,
}

pub fn hodlr_lu(h: &HodlrMatrix) -> Result<HodlrLu> {
    hodlr_lu_with(h, LuOptions::default())
}

pub fn hodlr_lu_with(h: &HodlrMatrix, opts: LuOptions) -> Result<HodlrLu> {
    let tol = opts.update_tol.unwrap_or(h.trunc_tol());
    let tol_abs = tol * h.norm2_est(DEFAULT_NORM_ITERS);
    let mut leaf_index = 0;
    let root = factor(h.root().clone(), tol_abs, &mut leaf_index)?;
    Ok(HodlrLu { root, size: h.size() })
}

fn factor(block: Block, tol_abs: f64, leaf_index: &mut usize) -> Result<LuBlock> {
    match block {
        Block::Leaf(mut d) => {
            let leaf = *leaf_index;
            *leaf_index += 1;
            dense_lu_in_place(&mut d).map_err(|row| Error::SingularPivot { leaf, row })?;
            Ok(LuBlock::Leaf { lu: d })
        }
        Block::Node(nd) => {
            let node = *nd;
            let b11 = factor(node.a11, tol_abs, leaf_index)?;
            // U12 = L11^{-1} A12, L21 = A21 U11^{-1}
            let (ua12, va12) = node.a12.into_parts();
            let mut lu12 = ua12;
            lower_solve(&b11, lu12.as_mut());
            let u12 = LowRankFactor::new(lu12, va12)?;
            let (ua21, va21) = node.a21.into_parts();
            let mut lv21 = va21;
            upper_t_solve(&b11, lv21.as_mut());
            let l21 = LowRankFactor::new(ua21, lv21)?;

            // A22 - L21 U12
            let mut a22 = node.a22;
            if l21.rank() > 0 && u12.rank() > 0 {
                let core = l21.v().transpose() * u12.u();
                let neg_x = l21.u() * (-&core);
                lowrank_update(&mut a22, neg_x.as_ref(), u12.v(), tol_abs)?;
            }
            let b22 = factor(a22, tol_abs, leaf_index)?;
            Ok(LuBlock::Node {
                b11: Box::new(b11),
                b22: Box::new(b22),
                l21,
                u12,
            })
        }
    }
}

/// `H += X Y^T`, recompressing the touched off-diagonal factors.
fn lowrank_update(h: &mut Block, x: MatRef<'_, f64>, y: MatRef<'_, f64>, tol_abs: f64) -> Result<()> {
    match h {
        Block::Leaf(d) => {
            matmul(d.as_mut(), Accum::Add, x, y.transpose(), 1.0, Par::Seq);
            Ok(())
        }
        Block::Node(nd) => {
            let n1 = nd.a11.size();
            let (x1, x2) = x.split_at_row(n1);
            let (y1, y2) = y.split_at_row(n1);
            lowrank_update(&mut nd.a11, x1, y1, tol_abs)?;
            lowrank_update(&mut nd.a22, x2, y2, tol_abs)?;
            let up = LowRankFactor::new(x1.to_owned(), y2.to_owned())?;
            let lo = LowRankFactor::new(x2.to_owned(), y1.to_owned())?;
            nd.a12 = compress_sum(&[&nd.a12, &up], tol_abs)?;
            nd.a21 = compress_sum(&[&nd.a21, &lo], tol_abs)?;
            Ok(())
        }
    }
}

/// Doolittle LU without pivoting; returns the offending row on a zero pivot.
fn dense_lu_in_place(a: &mut Mat<f64>) -> std::result::Result<(), usize> {
    let n = a.nrows();
    let scale = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(a[(i, j)].abs()));
    let tiny = scale * f64::EPSILON * n as f64;
    for k in 0..n {
        let p = a[(k, k)];
        if !(p.abs() > tiny) {
            return Err(k);
        }
        for i in k + 1..n {
            a[(i, k)] /= p;
        }
        for j in k + 1..n {
            let akj = a[(k, j)];
            if akj == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let l = a[(i, k)];
                a[(i, j)] -= l * akj;
            }
        }
    }
    Ok(())
}

fn par() -> Par {
    faer::get_global_parallelism()
}

/// `B <- L^{-1} B`.
fn lower_solve(b: &LuBlock, mut rhs: MatMut<'_, f64>) {
    match b {
        LuBlock::Leaf { lu } => tri::solve_unit_lower_triangular_in_place(lu.as_ref(), rhs, par()),
        LuBlock::Node { b11, b22, l21, .. } => {
            let n1 = l21.ncols();
            let (mut r1, mut r2) = rhs.rb_mut().split_at_row_mut(n1);
            lower_solve(b11, r1.rb_mut());
            lowrank_acc(l21, r1.rb(), r2.rb_mut(), false, -1.0);
            lower_solve(b22, r2);
        }
    }
}

/// `B <- U^{-1} B`.
fn upper_solve(b: &LuBlock, mut rhs: MatMut<'_, f64>) {
    match b {
        LuBlock::Leaf { lu } => tri::solve_upper_triangular_in_place(lu.as_ref(), rhs, par()),
        LuBlock::Node { b11, b22, u12, .. } => {
            let n1 = u12.nrows();
            let (mut r1, mut r2) = rhs.rb_mut().split_at_row_mut(n1);
            upper_solve(b22, r2.rb_mut());
            lowrank_acc(u12, r2.rb(), r1.rb_mut(), false, -1.0);
            upper_solve(b11, r1);
        }
    }
}

/// `B <- U^{-T} B`.
fn upper_t_solve(b: &LuBlock, mut rhs: MatMut<'_, f64>) {
    match b {
        LuBlock::Leaf { lu } => tri::solve_lower_triangular_in_place(lu.transpose(), rhs, par()),
        LuBlock::Node { b11, b22, u12, .. } => {
            let n1 = u12.nrows();
            let (mut r1, mut r2) = rhs.rb_mut().split_at_row_mut(n1);
            upper_t_solve(b11, r1.rb_mut());
            lowrank_acc(u12, r1.rb(), r2.rb_mut(), true, -1.0);
            upper_t_solve(b22, r2);
        }
    }
}

/// `B <- L^{-T} B`.
fn lower_t_solve(b: &LuBlock, mut rhs: MatMut<'_, f64>) {
    match b {
        LuBlock::Leaf { lu } => tri::solve_unit_upper_triangular_in_place(lu.transpose(), rhs, par()),
        LuBlock::Node { b11, b22, l21, .. } => {
            let n1 = l21.ncols();
            let (mut r1, mut r2) = rhs.rb_mut().split_at_row_mut(n1);
            lower_t_solve(b22, r2.rb_mut());
            lowrank_acc(l21, r2.rb(), r1.rb_mut(), true, -1.0);
            lower_t_solve(b11, r1);
        }
    }
}

fn dense_factors(b: &LuBlock, mut l: MatMut<'_, f64>, mut u: MatMut<'_, f64>) {
    match b {
        LuBlock::Leaf { lu } => {
            let n = lu.nrows();
            for j in 0..n {
                for i in 0..n {
                    if i > j {
                        l[(i, j)] = lu[(i, j)];
                    } else {
                        u[(i, j)] = lu[(i, j)];
                        if i == j {
                            l[(i, j)] = 1.0;
                        }
                    }
                }
            }
        }
        LuBlock::Node { b11, b22, l21, u12 } => {
            let (n1, n2) = (u12.nrows(), u12.ncols());
            dense_factors(
                b11,
                l.rb_mut().submatrix_mut(0, 0, n1, n1),
                u.rb_mut().submatrix_mut(0, 0, n1, n1),
            );
            dense_factors(
                b22,
                l.rb_mut().submatrix_mut(n1, n1, n2, n2),
                u.rb_mut().submatrix_mut(n1, n1, n2, n2),
            );
            l.rb_mut().submatrix_mut(n1, 0, n2, n1).copy_from(l21.to_dense());
            u.rb_mut().submatrix_mut(0, n1, n1, n2).copy_from(u12.to_dense());
        }
    }
}

fn lu_storage(b: &LuBlock) -> usize {
    match b {
        LuBlock::Leaf { lu } => lu.nrows() * lu.ncols(),
        LuBlock::Node { b11, b22, l21, u12 } => lu_storage(b11) + lu_storage(b22) + l21.storage() + u12.storage(),
    }
}

fn lu_max_rank(b: &LuBlock) -> usize {
    match b {
        LuBlock::Leaf { .. } => 0,
        LuBlock::Node { b11, b22, l21, u12 } => {
            l21.rank().max(u12.rank()).max(lu_max_rank(b11)).max(lu_max_rank(b22))
        }
    }
}

impl HodlrLu {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Solves `A X = B` in place.
    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) -> Result<()> {
        check_len(self.size, rhs.nrows())?;
        let mut rhs = rhs;
        lower_solve(&self.root, rhs.rb_mut());
        upper_solve(&self.root, rhs);
        Ok(())
    }

    /// Solves `A^T X = B` in place.
    pub fn solve_transpose_in_place(&self, rhs: MatMut<'_, f64>) -> Result<()> {
        check_len(self.size, rhs.nrows())?;
        let mut rhs = rhs;
        upper_t_solve(&self.root, rhs.rb_mut());
        lower_t_solve(&self.root, rhs);
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, b.len(), 1))?;
        Ok(x)
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, b.len(), 1))?;
        Ok(x)
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let mut x = b.to_owned();
        self.solve_in_place(x.as_mut())?;
        Ok(x)
    }

    pub fn solve_transpose_mat(&self, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let mut x = b.to_owned();
        self.solve_transpose_in_place(x.as_mut())?;
        Ok(x)
    }

    /// Dense `(L, U)`; meant for checks on small sizes.
    pub fn to_dense_factors(&self) -> (Mat<f64>, Mat<f64>) {
        let mut l = Mat::zeros(self.size, self.size);
        let mut u = Mat::zeros(self.size, self.size);
        dense_factors(&self.root, l.as_mut(), u.as_mut());
        (l, u)
    }

    pub fn storage(&self) -> usize {
        lu_storage(&self.root)
    }

    pub fn max_rank(&self) -> usize {
        lu_max_rank(&self.root)
    }
}

/// Solves `A X = B` for every column of `B` using a computed factorization.
pub fn hodlr_solve(lu: &HodlrLu, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    lu.solve_mat(b)
}
