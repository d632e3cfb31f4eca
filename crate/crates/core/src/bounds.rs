//! Closed-form rank bounds for the Grünwald–Letnikov matrices and a
//! constructive separable approximation of `(x + y)^(-alpha)`.

use std::f64::consts::PI;

use faer::Mat;
use statrs::function::gamma::gamma;

use crate::dense::sym_eigenvalues;
use crate::error::{Error, Result};
use crate::gl::GlCoefficients;
use crate::lowrank::LowRankFactor;

/// `ceil` that ignores round-off just above an integer.
fn ceil_guarded(x: f64) -> f64 {
    (x - 1e-12 * x.abs().max(1.0)).ceil()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")))
    }
}

fn log_term(n: usize, arg: f64) -> f64 {
    2.0 / (PI * PI) * (4.0 * n as f64 / PI).ln() * arg.ln()
}

/// Rank bound for the off-diagonal blocks of an `n x n` positive
/// semidefinite Hankel matrix at relative accuracy `eps`:
/// `2 + 2 ceil((2 / pi^2) ln(4n / pi) ln(16 / eps))`.
pub fn bound_b(n: usize, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    if n < 2 {
        return Err(Error::Domain(format!("size must be at least 2, got {n}")));
    }
    Ok(2 + 2 * ceil_guarded(log_term(n, 16.0 / eps)) as usize)
}

/// epsilon-qsrank bound for `T_{alpha,n}`, i.e. `bound_b(n, eps / 2)`.
pub fn qsrank_bound_fd(n: usize, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    bound_b(n, eps / 2.0)
}

/// Bound for `D_+ T + D_- T^T` with diagonal coefficient samplings, where
/// the accuracy is rescaled by `norm_a / (norm_t * norm_dmax)`. Returns 3
/// when the rescaled accuracy is 1 or larger.
pub fn qsrank_bound_fd_scaled(n: usize, eps: f64, norm_a: f64, norm_t: f64, norm_dmax: f64) -> Result<usize> {
    check_eps(eps)?;
    if n < 2 {
        return Err(Error::Domain(format!("size must be at least 2, got {n}")));
    }
    if !(norm_a > 0.0 && norm_t > 0.0 && norm_dmax > 0.0) {
        return Err(Error::Domain("norms must be positive".into()));
    }
    let eps_hat = eps * norm_a / (norm_t * norm_dmax);
    if eps_hat >= 1.0 {
        return Ok(3);
    }
    Ok(3 + 2 * ceil_guarded(log_term(n, 32.0 / eps_hat)) as usize)
}

/// `2 ceil(log2(b / a)) (1 + ceil(log2(alpha 4^alpha / eps)))`.
pub fn k_eps_bound(a: f64, b: f64, alpha: f64, eps: f64) -> Result<usize> {
    check_interval(a, b, alpha)?;
    check_eps(eps)?;
    let k = ceil_guarded((b / a).log2());
    let inner = ceil_guarded((alpha * 4f64.powf(alpha) / eps).log2());
    Ok((2.0 * k * (1.0 + inner)) as usize)
}

fn check_interval(a: f64, b: f64, alpha: f64) -> Result<()> {
    if !(a > 0.0 && b > a) {
        return Err(Error::Domain(format!("need 0 < a < b, got [{a}, {b}]")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Smallest eigenvalue of the Hankel matrix `h_ij = g_{i+j}` (1-based).
pub fn hankel_psd_min_eig(alpha: f64, n: usize) -> Result<f64> {
    if n > 500 {
        return Err(Error::Resource {
            what: "Hankel matrix",
            size: n,
            cap: 500,
        });
    }
    let g = GlCoefficients::new(alpha, 2 * n)?;
    let h = Mat::from_fn(n, n, |i, j| g.values()[i + j + 2]);
    Ok(sym_eigenvalues(h.as_ref())?.first().copied().unwrap_or(0.0))
}

fn cauchy_nodes(alpha: f64, n: usize, p: f64) -> Result<Vec<f64>> {
    let x: Vec<f64> = (1..=n).map(|i| i as f64 + (p - alpha) / 2.0).collect();
    if x.first().is_some_and(|&x0| x0 <= 0.0) {
        return Err(Error::Domain("Cauchy nodes must be positive".into()));
    }
    Ok(x)
}

/// Pivots of the `L D L^T` factorization of the Cauchy matrix
/// `1 / (x_i + x_j)` with `x_i = i + (p - alpha) / 2`, `i = 1..n`, from the
/// closed form `d_k = 1 / (2 x_k) prod_{j<k} ((x_k - x_j) / (x_k + x_j))^2`.
/// The matrix is positive definite exactly when all of them are positive.
pub fn cauchy_pivots(alpha: f64, n: usize, p: f64) -> Result<Vec<f64>> {
    let x = cauchy_nodes(alpha, n, p)?;
    Ok((0..n)
        .map(|k| {
            let prod: f64 = (0..k).map(|j| ((x[k] - x[j]) / (x[k] + x[j])).powi(2)).product();
            prod / (2.0 * x[k])
        })
        .collect())
}

/// Smallest eigenvalue of the same Cauchy matrix, as the reciprocal of the
/// largest eigenvalue of its explicit inverse
/// `P_i P_j / (x_i + x_j)`, `P_i = prod_k (x_i + x_k) / prod_{k != i} (x_i - x_k)`.
/// Working with the inverse keeps full relative accuracy where a direct
/// eigensolver only resolves eigenvalues down to `||C|| * eps`.
pub fn cauchy_min_eig(alpha: f64, n: usize, p: f64) -> Result<f64> {
    let x = cauchy_nodes(alpha, n, p)?;
    if n == 0 {
        return Ok(0.0);
    }
    // log |P_i| and its sign
    let logs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let mut l = 0.0;
            for k in 0..n {
                l += (x[i] + x[k]).ln();
                if k != i {
                    l -= (x[i] - x[k]).abs().ln();
                }
            }
            let sign = if (n - 1 - i) % 2 == 0 { 1.0 } else { -1.0 };
            (l, sign)
        })
        .collect();
    let inv = Mat::from_fn(n, n, |i, j| {
        logs[i].1 * logs[j].1 * (logs[i].0 + logs[j].0).exp() / (x[i] + x[j])
    });
    let top = sym_eigenvalues(inv.as_ref())?.last().copied().unwrap_or(0.0);
    Ok(1.0 / top)
}

/// Which variable a group of Taylor terms expands in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expansion {
    X,
    Y,
}

/// Taylor terms attached to one piece of the partition of `[a, b]^2`.
///
/// An `X` group covers `x` in interval `index` and `y` in the same or any
/// interval closer to `a`; a `Y` group covers `y` in interval `index` and
/// `x` strictly closer to `a`.
#[derive(Clone, Debug)]
pub struct TermGroup {
    pub expansion: Expansion,
    pub index: usize,
    pub center: f64,
}

/// Piecewise separable approximation of `g(x, y) = (x + y)^(-alpha)` on
/// `[a, b]^2` with pointwise relative error at most `eps`.
///
/// The interval is split dyadically towards `a`; the two pieces closest to
/// `a` are merged, which keeps every expansion ratio below `1/3` and uses
/// `2K - 1` groups of `taylor_order + 1` terms.
#[derive(Clone, Debug)]
pub struct SeparableApprox {
    alpha: f64,
    a: f64,
    b: f64,
    eps: f64,
    levels: usize,
    taylor_order: usize,
    /// Left endpoints of the intervals, from `b` towards `a`.
    lefts: Vec<f64>,
    rights: Vec<f64>,
    /// `(-1)^j Gamma(alpha + j) / (j! Gamma(alpha))`, `j = 0..=taylor_order`.
    coeffs: Vec<f64>,
    groups: Vec<TermGroup>,
}

pub fn separable_approx(alpha: f64, a: f64, b: f64, eps: f64) -> Result<SeparableApprox> {
    check_interval(a, b, alpha)?;
    check_eps(eps)?;
    let levels = (ceil_guarded((b / a).log2()) as usize).max(1);
    let delta = b - a;

    // the last interval is [a, a + 2^{1-K} delta]
    let pieces = levels;
    let mut lefts = Vec::with_capacity(pieces);
    let mut rights = Vec::with_capacity(pieces);
    for j in 0..pieces - 1 {
        lefts.push(a + delta * 0.5f64.powi(j as i32 + 1));
        rights.push(a + delta * 0.5f64.powi(j as i32));
    }
    lefts.push(a);
    rights.push(a + delta * 0.5f64.powi(pieces as i32 - 1));

    let fl = alpha.floor();
    let factorial: f64 = (1..=fl as u64).map(|k| k as f64).product();
    let constant = (4.0f64 / 3.0).powf(alpha) * 3f64.powf(fl) * factorial / gamma(alpha);
    let mut taylor_order = 0;
    while constant * 0.5f64.powi(taylor_order as i32) > eps {
        taylor_order += 1;
    }

    let mut coeffs = vec![1.0];
    for j in 0..taylor_order {
        let c = coeffs[j] * -(alpha + j as f64) / (j as f64 + 1.0);
        coeffs.push(c);
    }

    let mut groups = Vec::new();
    for i in 0..pieces {
        let center = 0.5 * (lefts[i] + rights[i]);
        groups.push(TermGroup {
            expansion: Expansion::X,
            index: i,
            center,
        });
        if i + 1 < pieces {
            groups.push(TermGroup {
                expansion: Expansion::Y,
                index: i,
                center,
            });
        }
    }

    Ok(SeparableApprox {
        alpha,
        a,
        b,
        eps,
        levels,
        taylor_order,
        lefts,
        rights,
        coeffs,
        groups,
    })
}

impl SeparableApprox {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `K = ceil(log2(b / a))`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn taylor_order(&self) -> usize {
        self.taylor_order
    }

    pub fn groups(&self) -> &[TermGroup] {
        &self.groups
    }

    /// Intervals of the partition of `[a, b]`, from `b` towards `a`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lefts.iter().copied().zip(self.rights.iter().copied())
    }

    pub fn term_count(&self) -> usize {
        self.groups.len() * (self.taylor_order + 1)
    }

    /// Index of the interval containing `x`; shared endpoints go to the
    /// interval farther from `a`.
    fn piece(&self, x: f64) -> usize {
        let last = self.lefts.len() - 1;
        self.lefts[..last].iter().position(|&l| x >= l).unwrap_or(last)
    }

    fn series(&self, center: f64, t: f64, s: f64) -> f64 {
        // sum_j c_j ((t - center) / (center + s))^j (center + s)^(-alpha)
        let base = center + s;
        let r = (t - center) / base;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc * base.powf(-self.alpha)
    }

    /// Value of the approximation; `x` and `y` must lie in `[a, b]`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (ix, iy) = (self.piece(x), self.piece(y));
        if iy >= ix {
            self.series(0.5 * (self.lefts[ix] + self.rights[ix]), x, y)
        } else {
            self.series(0.5 * (self.lefts[iy] + self.rights[iy]), y, x)
        }
    }

    /// The approximation sampled at `xs x ys` as a factor with one column
    /// per separable term.
    pub fn sample_factor(&self, xs: &[f64], ys: &[f64]) -> Result<LowRankFactor> {
        let slack = 1e-12 * self.b;
        for &t in xs.iter().chain(ys) {
            if t < self.a - slack || t > self.b + slack {
                return Err(Error::Domain(format!("sample {t} outside [{}, {}]", self.a, self.b)));
            }
        }
        let px: Vec<usize> = xs.iter().map(|&x| self.piece(x)).collect();
        let py: Vec<usize> = ys.iter().map(|&y| self.piece(y)).collect();
        let terms = self.taylor_order + 1;
        let k = self.term_count();
        let mut u = Mat::zeros(xs.len(), k);
        let mut v = Mat::zeros(ys.len(), k);
        for (g, group) in self.groups.iter().enumerate() {
            let c = group.center;
            let i = group.index;
            // the expanded variable carries the polynomial part
            let (poly_pts, poly_piece, other_pts, other_piece, poly_is_x) = match group.expansion {
                Expansion::X => (xs, &px, ys, &py, true),
                Expansion::Y => (ys, &py, xs, &px, false),
            };
            for j in 0..terms {
                let col = g * terms + j;
                let poly = |p: usize| {
                    if poly_piece[p] == i {
                        self.coeffs[j] * (poly_pts[p] - c).powi(j as i32)
                    } else {
                        0.0
                    }
                };
                let other = |q: usize| {
                    let inside = if poly_is_x { other_piece[q] >= i } else { other_piece[q] > i };
                    if inside {
                        (c + other_pts[q]).powf(-self.alpha - j as f64)
                    } else {
                        0.0
                    }
                };
                if poly_is_x {
                    for p in 0..xs.len() {
                        u[(p, col)] = poly(p);
                    }
                    for q in 0..ys.len() {
                        v[(q, col)] = other(q);
                    }
                } else {
                    for p in 0..xs.len() {
                        u[(p, col)] = other(p);
                    }
                    for q in 0..ys.len() {
                        v[(q, col)] = poly(q);
                    }
                }
            }
        }
        LowRankFactor::new(u, v)
    }
}
