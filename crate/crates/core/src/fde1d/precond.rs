//! Tridiagonal preconditioners obtained by replacing the fractional
//! Grünwald–Letnikov matrix with its order-1 or order-2 counterpart.

use crate::error::{check_len, Error, Result};
use crate::gl::Grid1D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondKind {
    /// `T_{1,N}`: upper bidiagonal, diagonal 1 and superdiagonal -1.
    P1,
    /// `T_{2,N} = tridiag(-1, 2, -1)`.
    P2,
}

/// `I + c (D+ T_k + D- T_k^T)` with `c = dt / dx^alpha`, stored as a
/// tridiagonal matrix together with its Thomas factorization.
#[derive(Clone, Debug)]
pub struct TridiagPreconditioner {
    kind: PrecondKind,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    // forward-eliminated superdiagonal and inverted pivots
    sup_mod: Vec<f64>,
    inv_piv: Vec<f64>,
}

pub fn build_preconditioner(
    kind: PrecondKind,
    alpha: f64,
    grid: &Grid1D,
    dt: f64,
    d_plus: &[f64],
    d_minus: &[f64],
) -> Result<TridiagPreconditioner> {
    let n = grid.len();
    check_len(n, d_plus.len())?;
    check_len(n, d_minus.len())?;
    let c = dt / grid.dx().powf(alpha);
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let (dp, dm) = (d_plus[i], d_minus[i]);
        match kind {
            PrecondKind::P1 => {
                diag[i] = 1.0 + c * (dp + dm);
                sup[i] = -c * dp;
                sub[i] = -c * dm;
            }
            PrecondKind::P2 => {
                diag[i] = 1.0 + 2.0 * c * (dp + dm);
                sup[i] = -c * (dp + dm);
                sub[i] = -c * (dp + dm);
            }
        }
    }
    // sub[0] and sup[n-1] fall outside the matrix
    if n > 0 {
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
    }
    TridiagPreconditioner::factor(kind, sub, diag, sup)
}

impl TridiagPreconditioner {
    fn factor(kind: PrecondKind, sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let scale = diag.iter().chain(&sub).chain(&sup).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut sup_mod = vec![0.0; n];
        let mut inv_piv = vec![0.0; n];
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i] * sup_mod[i - 1]
            };
            if p.abs() <= n as f64 * f64::EPSILON * scale {
                return Err(Error::Numerical(format!("zero pivot in tridiagonal factorization at row {i}")));
            }
            inv_piv[i] = 1.0 / p;
            sup_mod[i] = sup[i] * inv_piv[i];
        }
        Ok(Self {
            kind,
            sub,
            diag,
            sup,
            sup_mod,
            inv_piv,
        })
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `M x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `M^{-1} r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { self.sub[i] * y[i - 1] };
            y[i] = (r[i] - prev) * self.inv_piv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.sup_mod[i] * y[i + 1];
        }
        y
    }
}
