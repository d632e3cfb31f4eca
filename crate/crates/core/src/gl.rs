//! Grünwald–Letnikov coefficients, uniform grids and the Toeplitz descriptor
//! of the shifted fractional difference operator.

use crate::error::{Error, Result};

/// The alternating fractional binomial coefficients `g_0..g_n` of order `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlCoefficients {
    alpha: f64,
    values: Vec<f64>,
}

impl GlCoefficients {
    /// Computes `g_0..g_n` by the ratio recursion
    /// `g_{k+1} = g_k (k - alpha) / (k + 1)`.
    ///
    /// `alpha` must lie in `(1, 2]`; the endpoint 2 is accepted so the
    /// classical second-difference limit can be exercised.
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!(
                "fractional order {alpha} outside (1, 2]"
            )));
        }
        Ok(Self {
            alpha,
            values: recurrence(alpha, n.max(1)),
        })
    }

    /// Same recursion without the `(1, 2]` restriction. Used for the integer
    /// orders of the banded preconditioners and for the positivity studies.
    pub fn new_unchecked(alpha: f64, n: usize) -> Self {
        Self {
            alpha,
            values: recurrence(alpha, n.max(1)),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the last stored coefficient.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }
}

fn recurrence(alpha: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    let mut cur = 1.0;
    for k in 0..n {
        cur *= (k as f64 - alpha) / (k as f64 + 1.0);
        g.push(cur);
    }
    g
}

/// Convenience wrapper over [`GlCoefficients::new`].
pub fn gl_coeffs(alpha: f64, n: usize) -> Result<GlCoefficients> {
    GlCoefficients::new(alpha, n)
}

/// Uniform grid on `[left, right]` with `n` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    left: f64,
    right: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(left: f64, right: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs at least one interior node".into()));
        }
        if !(right > left) {
            return Err(Error::Domain(format!("empty interval [{left}, {right}]")));
        }
        Ok(Self { left, right, n })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.right - self.left) / (self.n as f64 + 1.0)
    }

    /// Node `x_i = L + i dx`, `i = 0..=n+1`.
    pub fn node(&self, i: usize) -> f64 {
        self.left + i as f64 * self.dx()
    }

    /// Interior nodes `x_1..x_n`; the boundary nodes carry zero values.
    pub fn interior(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.interior().into_iter().map(f).collect()
    }
}

/// Time grid `t_m = m dt` with `dt = T / (M + 1)`, i.e. `M + 1` implicit steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    m: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, m: usize) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::Domain(format!("final time {t_final} must be positive")));
        }
        Ok(Self { t_final, m })
    }

    /// Grid taking `steps` implicit steps of size `dt`.
    pub fn from_step(dt: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain("at least one time step is required".into()));
        }
        Self::new(dt * steps as f64, steps - 1)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.m as f64 + 1.0)
    }

    /// Number of implicit steps from `t_0` to `t_{M+1}`.
    pub fn steps(&self) -> usize {
        self.m + 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }
}

/// First column and first row of a Toeplitz matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzDescriptor {
    first_col: Vec<f64>,
    first_row: Vec<f64>,
}

impl ToeplitzDescriptor {
    pub fn new(first_col: Vec<f64>, first_row: Vec<f64>) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::Domain("empty Toeplitz descriptor".into()));
        }
        if first_col.len() != first_row.len() {
            return Err(Error::Dimension {
                expected: first_col.len(),
                found: first_row.len(),
            });
        }
        if first_col[0] != first_row[0] {
            return Err(Error::Domain(format!(
                "first column starts with {} but first row with {}",
                first_col[0], first_row[0]
            )));
        }
        Ok(Self {
            first_col,
            first_row,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut e = vec![0.0; n.max(1)];
        e[0] = 1.0;
        Self {
            first_col: e.clone(),
            first_row: e,
        }
    }

    /// The lower Hessenberg matrix `T_{alpha,N}` of the shifted scheme:
    /// first column `-(g_1..g_N)`, first row `-(g_1, g_0, 0, ..)`.
    pub fn fractional(coeffs: &GlCoefficients, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Toeplitz size must be positive".into()));
        }
        if coeffs.order() < n {
            return Err(Error::Length {
                needed: n + 1,
                available: coeffs.values().len(),
            });
        }
        let g = coeffs.values();
        let first_col = (1..=n).map(|k| -g[k]).collect();
        let mut first_row = vec![0.0; n];
        first_row[0] = -g[1];
        if n > 1 {
            first_row[1] = -g[0];
        }
        Ok(Self {
            first_col,
            first_row,
        })
    }

    pub fn size(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.first_col[i - j]
        } else {
            self.first_row[j - i]
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            first_col: self.first_row.clone(),
            first_row: self.first_col.clone(),
        }
    }
}

/// `T_{alpha,N}` from precomputed coefficients.
pub fn assemble_t_descriptor(coeffs: &GlCoefficients, n: usize) -> Result<ToeplitzDescriptor> {
    ToeplitzDescriptor::fractional(coeffs, n)
}

/// `T_{alpha,N}` for the given order and size.
pub fn fractional_descriptor(alpha: f64, n: usize) -> Result<ToeplitzDescriptor> {
    ToeplitzDescriptor::fractional(&GlCoefficients::new(alpha, n)?, n)
}
