use faer::{Mat, MatRef};

use super::{split, Block, HodlrMatrix, Node, DEFAULT_NORM_ITERS};
use crate::dense::{norm2_est_dense, norm2_est_with, svd};
use crate::error::{Error, Result};
use crate::gl::ToeplitzDescriptor;
use crate::lowrank::{lanczos_lowrank, svd_truncate, LowRankFactor};
use crate::toeplitz::ToeplitzOperator;

/// Compresses a dense square matrix. Off-diagonal blocks keep the singular
/// values at or above `trunc_tol * ||A||_2`.
pub fn hodlr_from_dense(a: MatRef<'_, f64>, trunc_tol: f64, leaf_size: usize) -> Result<HodlrMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let leaf_size = leaf_size.max(1);
    let tol_abs = trunc_tol * norm2_est_dense(a, 2 * DEFAULT_NORM_ITERS);
    let root = dense_block(a, tol_abs, leaf_size)?;
    Ok(HodlrMatrix::from_parts(root, leaf_size, trunc_tol))
}

fn dense_block(a: MatRef<'_, f64>, tol_abs: f64, leaf: usize) -> Result<Block> {
    let n = a.nrows();
    if n <= leaf {
        return Ok(Block::Leaf(a.to_owned()));
    }
    let (n1, n2) = split(n);
    Ok(Block::Node(Box::new(Node {
        a11: dense_block(a.submatrix(0, 0, n1, n1), tol_abs, leaf)?,
        a22: dense_block(a.submatrix(n1, n1, n2, n2), tol_abs, leaf)?,
        a12: dense_lowrank(a.submatrix(0, n1, n1, n2), tol_abs)?,
        a21: dense_lowrank(a.submatrix(n1, 0, n2, n1), tol_abs)?,
    })))
}

fn dense_lowrank(b: MatRef<'_, f64>, tol_abs: f64) -> Result<LowRankFactor> {
    let s = svd(b)?;
    let r = s.s.iter().take_while(|&&x| x > 0.0 && x >= tol_abs).count();
    let u = Mat::from_fn(b.nrows(), r, |i, j| s.u[(i, j)] * s.s[j]);
    let v = s.v.as_ref().subcols(0, r).to_owned();
    LowRankFactor::new(u, v)
}

/// HODLR matrix built from a Toeplitz operator, with a flag telling whether
/// the Lanczos compressions of the top-level blocks converged.
#[derive(Clone, Debug)]
pub struct HodlrBuild {
    pub matrix: HodlrMatrix,
    pub converged: bool,
}

/// Compresses the two top-level off-diagonal blocks from FFT matvecs and
/// obtains every deeper off-diagonal block by restricting those factors:
/// all off-diagonal blocks of a Toeplitz matrix are sub-blocks of the
/// top-level ones.
pub fn hodlr_from_toeplitz(op: &ToeplitzOperator, trunc_tol: f64, leaf_size: usize) -> Result<HodlrBuild> {
    let n = op.size();
    let leaf_size = leaf_size.max(1);
    let desc = op.descriptor();
    if n <= leaf_size {
        let leaf = Block::Leaf(Mat::from_fn(n, n, |i, j| desc.entry(i, j)));
        return Ok(HodlrBuild {
            matrix: HodlrMatrix::from_parts(leaf, leaf_size, trunc_tol),
            converged: true,
        });
    }
    let norm = norm2_est_with(n, DEFAULT_NORM_ITERS, |x| op.apply(x, false), |x| op.apply(x, true));
    let tol_abs = trunc_tol * norm;
    let (n1, n2) = split(n);

    let mut converged = true;
    let a12 = match corner(desc.first_row(), n1, n2, true) {
        Some(f) => f,
        None => {
            let out = lanczos_lowrank(
                |x| block_apply(op, x, 0, n1, n1, false),
                |y| block_apply(op, y, n1, 0, n2, true),
                n1,
                n2,
                tol_abs,
                n1.min(n2),
            )?;
            converged &= out.converged;
            out.factor
        }
    };
    let a21 = match corner(desc.first_col(), n1, n2, false) {
        Some(f) => f,
        None => {
            let out = lanczos_lowrank(
                |x| block_apply(op, x, n1, 0, n2, false),
                |y| block_apply(op, y, 0, n1, n1, true),
                n2,
                n1,
                tol_abs,
                n1.min(n2),
            )?;
            converged &= out.converged;
            out.factor
        }
    };

    let top = TopFactors { n1, a12, a21, tol_abs };
    let root = Block::Node(Box::new(Node {
        a11: top.restricted(desc, n1, leaf_size)?,
        a22: top.restricted(desc, n2, leaf_size)?,
        a12: top.a12.clone(),
        a21: top.a21.clone(),
    }));
    Ok(HodlrBuild {
        matrix: HodlrMatrix::from_parts(root, leaf_size, trunc_tol),
        converged,
    })
}

/// Exact factor of a top-level off-diagonal block when the only entry of
/// `v` that reaches it is `v[1]`. It sits at `(n1 - 1, 0)` of the upper
/// block and at `(0, n1 - 1)` of the lower one.
fn corner(v: &[f64], n1: usize, n2: usize, upper: bool) -> Option<LowRankFactor> {
    let band = v.iter().rposition(|&x| x != 0.0).unwrap_or(0);
    let (m, n) = if upper { (n1, n2) } else { (n2, n1) };
    match band {
        0 => Some(LowRankFactor::zeros(m, n)),
        1 => {
            let mut u = vec![0.0; m];
            let mut w = vec![0.0; n];
            if upper {
                u[n1 - 1] = v[1];
                w[0] = 1.0;
            } else {
                u[0] = v[1];
                w[n1 - 1] = 1.0;
            }
            Some(LowRankFactor::outer(&u, &w))
        }
        _ => None,
    }
}

/// `T` restricted to rows `r0..r0+m`, applied to `x` placed at columns
/// `c0..c0+x.len()`; with `transpose`, the roles of rows and columns swap.
fn block_apply(op: &ToeplitzOperator, x: &[f64], r0: usize, c0: usize, m: usize, transpose: bool) -> Vec<f64> {
    let n = op.size();
    let mut padded = vec![0.0; n];
    padded[c0..c0 + x.len()].copy_from_slice(x);
    let y = op.apply(&padded, transpose);
    y[r0..r0 + m].to_vec()
}

struct TopFactors {
    n1: usize,
    a12: LowRankFactor,
    a21: LowRankFactor,
    tol_abs: f64,
}

impl TopFactors {
    fn restricted(&self, desc: &ToeplitzDescriptor, n: usize, leaf: usize) -> Result<Block> {
        if n <= leaf {
            return Ok(Block::Leaf(Mat::from_fn(n, n, |i, j| desc.entry(i, j))));
        }
        let (m1, m2) = split(n);
        let big = self.n1;
        // A21 of the sub-block has entries t_{m1 + i - j}; in the top A21
        // (entries t_{n1 + i - j}) these sit at rows 0.., columns n1 - m1..
        let a21 = self.a21.restrict(0, m2, big - m1, m1);
        // A12 likewise sits at rows n1 - m1.., columns 0.. of the top A12
        let a12 = self.a12.restrict(big - m1, m1, 0, m2);
        Ok(Block::Node(Box::new(Node {
            a11: self.restricted(desc, m1, leaf)?,
            a22: self.restricted(desc, m2, leaf)?,
            a12: svd_truncate(&a12, self.tol_abs, None)?,
            a21: svd_truncate(&a21, self.tol_abs, None)?,
        })))
    }
}
