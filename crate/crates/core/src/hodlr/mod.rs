//! Hierarchically off-diagonal low-rank (HODLR) matrices.
//!
//! Every node splits its index range as `n1 = n / 2`, `n2 = n - n1`, keeps
//! the two diagonal blocks recursively and stores the off-diagonal blocks as
//! [`LowRankFactor`]s. Recursion stops once a block has at most `leaf_size`
//! rows.

mod build;
mod lu;
mod measure;

use faer::reborrow::ReborrowMut;
use faer::{Mat, MatMut, MatRef};

pub use build::{hodlr_from_dense, hodlr_from_toeplitz, HodlrBuild};
pub use lu::{hodlr_lu, hodlr_lu_with, hodlr_solve, HodlrLu, LuOptions};
pub use measure::{qsrank_measure, qsrank_measure_at, split_points};


use crate::dense::{norm2_est_with, DEFAULT_DENSE_CAP};
use crate::error::{check_len, Error, Result};
use crate::lowrank::{compress_sum, LowRankFactor};

pub const DEFAULT_LEAF_SIZE: usize = 256;
pub const DEFAULT_TRUNC_TOL: f64 = 1e-8;
pub const DEFAULT_NORM_ITERS: usize = 20;

/// Compression settings shared by the assembly routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HodlrOptions {
    pub trunc_tol: f64,
    pub leaf_size: usize,
}

impl Default for HodlrOptions {
    fn default() -> Self {
        Self {
            trunc_tol: DEFAULT_TRUNC_TOL,
            leaf_size: DEFAULT_LEAF_SIZE,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Block {
    Leaf(Mat<f64>),
    Node(Box<Node>),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub a11: Block,
    pub a22: Block,
    pub a12: LowRankFactor,
    pub a21: LowRankFactor,
}

#[derive(Clone, Debug)]
pub struct HodlrMatrix {
    root: Block,
    size: usize,
    leaf_size: usize,
    trunc_tol: f64,
}

pub(crate) fn split(n: usize) -> (usize, usize) {
    (n / 2, n - n / 2)
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Leaf(d) => d.nrows(),
            Block::Node(nd) => nd.a11.size() + nd.a22.size(),
        }
    }

    /// `y += self * x` (or `self^T * x`) for a block of columns.
    fn apply_acc(&self, x: MatRef<'_, f64>, mut y: MatMut<'_, f64>, transpose: bool) {
        match self {
            Block::Leaf(d) => {
                let d = if transpose { d.transpose() } else { d.as_ref() };
                faer::linalg::matmul::matmul(y, faer::Accum::Add, d, x, 1.0, faer::Par::Seq);
            }
            Block::Node(nd) => {
                let n1 = nd.a11.size();
                let (x1, x2) = x.split_at_row(n1);
                let (mut y1, mut y2) = y.rb_mut().split_at_row_mut(n1);
                nd.a11.apply_acc(x1, y1.rb_mut(), transpose);
                nd.a22.apply_acc(x2, y2.rb_mut(), transpose);
                let (upper, lower) = if transpose {
                    (&nd.a21, &nd.a12)
                } else {
                    (&nd.a12, &nd.a21)
                };
                lowrank_acc(upper, x2, y1, transpose, 1.0);
                lowrank_acc(lower, x1, y2, transpose, 1.0);
            }
        }
    }

    fn to_dense_into(&self, mut out: MatMut<'_, f64>) {
        match self {
            Block::Leaf(d) => out.copy_from(d),
            Block::Node(nd) => {
                let n1 = nd.a11.size();
                let n2 = nd.a22.size();
                nd.a11.to_dense_into(out.rb_mut().submatrix_mut(0, 0, n1, n1));
                nd.a22.to_dense_into(out.rb_mut().submatrix_mut(n1, n1, n2, n2));
                out.rb_mut().submatrix_mut(0, n1, n1, n2).copy_from(nd.a12.to_dense());
                out.rb_mut().submatrix_mut(n1, 0, n2, n1).copy_from(nd.a21.to_dense());
            }
        }
    }

    fn scale(&mut self, left: &[f64], right: &[f64]) {
        match self {
            Block::Leaf(d) => {
                for j in 0..d.ncols() {
                    for i in 0..d.nrows() {
                        d[(i, j)] *= left[i] * right[j];
                    }
                }
            }
            Block::Node(nd) => {
                let n1 = nd.a11.size();
                let (l1, l2) = left.split_at(n1);
                let (r1, r2) = right.split_at(n1);
                nd.a11.scale(l1, r1);
                nd.a22.scale(l2, r2);
                nd.a12.scale(Some(l1), Some(r2));
                nd.a21.scale(Some(l2), Some(r1));
            }
        }
    }

    fn shift(&mut self, s: f64) {
        match self {
            Block::Leaf(d) => {
                for i in 0..d.nrows() {
                    d[(i, i)] += s;
                }
            }
            Block::Node(nd) => {
                nd.a11.shift(s);
                nd.a22.shift(s);
            }
        }
    }

    fn transpose(&self) -> Block {
        match self {
            Block::Leaf(d) => Block::Leaf(d.transpose().to_owned()),
            Block::Node(nd) => Block::Node(Box::new(Node {
                a11: nd.a11.transpose(),
                a22: nd.a22.transpose(),
                a12: nd.a21.transpose(),
                a21: nd.a12.transpose(),
            })),
        }
    }

    fn add(&self, other: &Block, tol_abs: f64) -> Result<Block> {
        match (self, other) {
            (Block::Leaf(a), Block::Leaf(b)) => {
                check_len(a.nrows(), b.nrows())?;
                Ok(Block::Leaf(a + b))
            }
            (Block::Node(a), Block::Node(b)) => Ok(Block::Node(Box::new(Node {
                a11: a.a11.add(&b.a11, tol_abs)?,
                a22: a.a22.add(&b.a22, tol_abs)?,
                a12: compress_sum(&[&a.a12, &b.a12], tol_abs)?,
                a21: compress_sum(&[&a.a21, &b.a21], tol_abs)?,
            }))),
            _ => Err(Error::Structure("leaf layouts differ".into())),
        }
    }

    fn visit<'a>(&'a self, level: usize, f: &mut impl FnMut(usize, &'a Block)) {
        f(level, self);
        if let Block::Node(nd) = self {
            nd.a11.visit(level + 1, f);
            nd.a22.visit(level + 1, f);
        }
    }
}

/// `y += c * F x` (or `c * F^T x`).
pub(crate) fn lowrank_acc(
    f: &LowRankFactor,
    x: MatRef<'_, f64>,
    y: MatMut<'_, f64>,
    transpose: bool,
    c: f64,
) {
    if f.rank() == 0 {
        return;
    }
    let (left, right) = if transpose { (f.v(), f.u()) } else { (f.u(), f.v()) };
    let t = right.transpose() * x;
    faer::linalg::matmul::matmul(y, faer::Accum::Add, left, &t, c, faer::Par::Seq);
}

impl HodlrMatrix {
    pub(crate) fn from_parts(root: Block, leaf_size: usize, trunc_tol: f64) -> Self {
        let size = root.size();
        Self {
            root,
            size,
            leaf_size,
            trunc_tol,
        }
    }

    /// The identity of size `n` in HODLR form.
    pub fn identity(n: usize, leaf_size: usize) -> Self {
        fn build(n: usize, leaf: usize) -> Block {
            if n <= leaf {
                return Block::Leaf(Mat::identity(n, n));
            }
            let (n1, n2) = split(n);
            Block::Node(Box::new(Node {
                a11: build(n1, leaf),
                a22: build(n2, leaf),
                a12: LowRankFactor::zeros(n1, n2),
                a21: LowRankFactor::zeros(n2, n1),
            }))
        }
        Self::from_parts(build(n, leaf_size.max(1)), leaf_size.max(1), 0.0)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn trunc_tol(&self) -> f64 {
        self.trunc_tol
    }

    pub fn root(&self) -> &Block {
        &self.root
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.size, x.len())?;
        Ok(self.apply_vec(x, false))
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.size, x.len())?;
        Ok(self.apply_vec(x, true))
    }

    pub(crate) fn apply_vec(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let xm = MatRef::from_column_major_slice(x, x.len(), 1);
        let mut y = Mat::zeros(self.size, 1);
        self.root.apply_acc(xm, y.as_mut(), transpose);
        y.col_as_slice(0).to_vec()
    }

    /// `H X` for a block of columns.
    pub fn matmat(&self, x: MatRef<'_, f64>, transpose: bool) -> Result<Mat<f64>> {
        check_len(self.size, x.nrows())?;
        let mut y = Mat::zeros(self.size, x.ncols());
        self.root.apply_acc(x, y.as_mut(), transpose);
        Ok(y)
    }

    pub fn to_dense(&self) -> Result<Mat<f64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Mat<f64>> {
        if self.size > cap {
            return Err(Error::Resource {
                what: "HODLR reconstruction",
                size: self.size,
                cap,
            });
        }
        let mut out = Mat::zeros(self.size, self.size);
        self.root.to_dense_into(out.as_mut());
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self::from_parts(self.root.transpose(), self.leaf_size, self.trunc_tol)
    }

    /// Largest off-diagonal rank.
    pub fn max_rank(&self) -> usize {
        let mut r = 0;
        self.root.visit(0, &mut |_, b| {
            if let Block::Node(nd) = b {
                r = r.max(nd.a12.rank()).max(nd.a21.rank());
            }
        });
        r
    }

    /// Total number of stored scalars (dense leaves plus factors).
    pub fn storage(&self) -> usize {
        let mut s = 0;
        self.root.visit(0, &mut |_, b| match b {
            Block::Leaf(d) => s += d.nrows() * d.ncols(),
            Block::Node(nd) => s += nd.a12.storage() + nd.a21.storage(),
        });
        s
    }

    pub fn depth(&self) -> usize {
        let mut d = 0;
        self.root.visit(0, &mut |l, _| d = d.max(l));
        d
    }

    /// Off-diagonal ranks `(level, rank of A12, rank of A21)` in preorder.
    pub fn ranks(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        self.root.visit(0, &mut |l, b| {
            if let Block::Node(nd) = b {
                out.push((l, nd.a12.rank(), nd.a21.rank()));
            }
        });
        out
    }

    pub fn norm2_est(&self, iters: usize) -> f64 {
        norm2_est_with(
            self.size,
            iters,
            |x| self.apply_vec(x, false),
            |y| self.apply_vec(y, true),
        )
    }
}

/// `diag(d_left) H diag(d_right)`; ranks are unchanged.
pub fn hodlr_diag_scale(h: &HodlrMatrix, d_left: &[f64], d_right: Option<&[f64]>) -> Result<HodlrMatrix> {
    check_len(h.size, d_left.len())?;
    let ones;
    let right = match d_right {
        Some(d) => {
            check_len(h.size, d.len())?;
            d
        }
        None => {
            ones = vec![1.0; h.size];
            &ones
        }
    };
    let mut out = h.clone();
    out.root.scale(d_left, right);
    Ok(out)
}

/// Blockwise sum with off-diagonal factors recompressed at
/// `trunc_tol * ||A + B||_2` (norm estimated once on the sum). Cancellation
/// below rounding level of `||A|| + ||B||` is dropped as well.
pub fn hodlr_add(a: &HodlrMatrix, b: &HodlrMatrix, trunc_tol: f64) -> Result<HodlrMatrix> {
    check_len(a.size, b.size)?;
    let n = a.size;
    let norm = norm2_est_with(
        n,
        DEFAULT_NORM_ITERS,
        |x| {
            let mut y = a.apply_vec(x, false);
            y.iter_mut().zip(b.apply_vec(x, false)).for_each(|(p, q)| *p += q);
            y
        },
        |x| {
            let mut y = a.apply_vec(x, true);
            y.iter_mut().zip(b.apply_vec(x, true)).for_each(|(p, q)| *p += q);
            y
        },
    );
    let floor = f64::EPSILON * (a.norm2_est(DEFAULT_NORM_ITERS) + b.norm2_est(DEFAULT_NORM_ITERS));
    let root = a.root.add(&b.root, (trunc_tol * norm).max(floor))?;
    Ok(HodlrMatrix::from_parts(root, a.leaf_size, trunc_tol))
}

/// `H + s I`; only the dense leaves change.
pub fn hodlr_shift(h: &HodlrMatrix, s: f64) -> HodlrMatrix {
    let mut out = h.clone();
    out.root.shift(s);
    out
}
