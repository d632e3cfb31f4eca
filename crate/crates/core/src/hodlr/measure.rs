//! Numerical quasiseparable rank of dense matrices.

use faer::MatRef;

use crate::dense::{norm2_est_dense, singular_values, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};

/// Split points of the HODLR bisection whose diagonal blocks are still at
/// least `2 * min_block` wide, in preorder.
pub fn split_points(n: usize, min_block: usize) -> Vec<usize> {
    fn walk(off: usize, n: usize, min_block: usize, out: &mut Vec<usize>) {
        if n < 2 * min_block.max(1) {
            return;
        }
        let n1 = n / 2;
        out.push(off + n1);
        walk(off, n1, min_block, out);
        walk(off + n1, n - n1, min_block, out);
    }
    let mut out = Vec::new();
    walk(0, n, min_block, &mut out);
    out
}

/// Largest number of singular values above `eps * ||A||_2` over the maximal
/// off-diagonal blocks `A[k.., ..k]` and `A[..k, k..]` at the split points
/// of the first four bisection levels.
pub fn qsrank_measure(a: MatRef<'_, f64>, eps: f64) -> Result<usize> {
    let n = a.nrows();
    qsrank_measure_at(a, eps, &split_points(n, (n / 16).max(1)))
}

pub fn qsrank_measure_at(a: MatRef<'_, f64>, eps: f64, splits: &[usize]) -> Result<usize> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension {
            expected: n,
            found: a.ncols(),
        });
    }
    if n > DEFAULT_DENSE_CAP {
        return Err(Error::Resource {
            what: "qsrank measurement",
            size: n,
            cap: DEFAULT_DENSE_CAP,
        });
    }
    let thresh = eps * norm2_est_dense(a, 100);
    let mut best = 0;
    for &k in splits {
        if k == 0 || k >= n {
            continue;
        }
        for block in [a.submatrix(k, 0, n - k, k), a.submatrix(0, k, k, n - k)] {
            let s = singular_values(block)?;
            best = best.max(s.iter().filter(|&&x| x > thresh).count());
        }
    }
    Ok(best)
}
