//! One-dimensional space-fractional diffusion: finite-difference assembly in
//! HODLR form, implicit Euler with LU reuse, and the preconditioned GMRES
//! baseline.

mod gmres;
mod precond;

#[cfg(test)]
mod tests;

use std::time::Instant;

use statrs::function::gamma::gamma;

use crate::dense::norm;
use crate::error::{check_len, Error, Result};
use crate::gl::{fractional_descriptor, Grid1D, TimeGrid};
use crate::hodlr::{
    hodlr_add, hodlr_diag_scale, hodlr_from_toeplitz, hodlr_lu, hodlr_shift, HodlrLu, HodlrMatrix,
    HodlrOptions,
};
use crate::toeplitz::ToeplitzOperator;

pub use gmres::{pgmres_solve, GmresOutcome};
pub use precond::{build_preconditioner, PrecondKind, TridiagPreconditioner};

pub type SpaceTimeFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Iterative refinement sweeps applied after each HODLR solve.
pub const MAX_REFINEMENTS: usize = 3;

/// `du/dt = d+ D_+^alpha u + d- D_-^alpha u + f` on an interval with
/// homogeneous Dirichlet data.
pub struct Fde1dProblem {
    pub alpha: f64,
    pub grid: Grid1D,
    pub time: TimeGrid,
    pub d_plus: SpaceTimeFn,
    pub d_minus: SpaceTimeFn,
    pub source: SpaceTimeFn,
    pub u0: SpaceFn,
    /// Diffusion coefficients do not depend on `t`, so one LU serves all steps.
    pub time_invariant_coeffs: bool,
}

impl std::fmt::Debug for Fde1dProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fde1dProblem")
            .field("alpha", &self.alpha)
            .field("grid", &self.grid)
            .field("time", &self.time)
            .field("time_invariant_coeffs", &self.time_invariant_coeffs)
            .finish_non_exhaustive()
    }
}

impl Fde1dProblem {
    /// Problem with unit diffusion on both sides, no source and zero initial
    /// data; customize with the `with_*` methods.
    pub fn new(alpha: f64, grid: Grid1D, time: TimeGrid) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("fractional order {alpha} outside (1, 2]")));
        }
        Ok(Self {
            alpha,
            grid,
            time,
            d_plus: Box::new(|_, _| 1.0),
            d_minus: Box::new(|_, _| 1.0),
            source: Box::new(|_, _| 0.0),
            u0: Box::new(|_| 0.0),
            time_invariant_coeffs: true,
        })
    }

    pub fn with_diffusion(
        mut self,
        d_plus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d_minus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        time_invariant: bool,
    ) -> Self {
        self.d_plus = Box::new(d_plus);
        self.d_minus = Box::new(d_minus);
        self.time_invariant_coeffs = time_invariant;
        self
    }

    pub fn with_source(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Box::new(f);
        self
    }

    pub fn with_initial(mut self, u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.u0 = Box::new(u0);
        self
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    /// `(d+, d-)` sampled on the interior nodes at `t_m`.
    pub fn coefficients_at(&self, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.time.time(m);
        let dp = self.grid.sample(|x| (self.d_plus)(x, t));
        let dm = self.grid.sample(|x| (self.d_minus)(x, t));
        if let Some(v) = dp.iter().chain(&dm).find(|v| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("diffusion coefficient {v} at t = {t} is not nonnegative")));
        }
        Ok((dp, dm))
    }

    pub fn source_at(&self, m: usize) -> Vec<f64> {
        let t = self.time.time(m);
        self.grid.sample(|x| (self.source)(x, t))
    }

    pub fn initial(&self) -> Vec<f64> {
        self.grid.sample(&self.u0)
    }

    /// `u^{(m-1)} + dt f^{(m)}`.
    pub fn step_rhs(&self, m: usize, u_prev: &[f64]) -> Vec<f64> {
        let dt = self.time.dt();
        u_prev
            .iter()
            .zip(self.source_at(m))
            .map(|(u, f)| u + dt * f)
            .collect()
    }
}

/// Exact solution `4 e^{-t} x^2 (2 - x)^2` of [`manufactured_problem`].
pub fn manufactured_solution(x: f64, t: f64) -> f64 {
    4.0 * (-t).exp() * x * x * (2.0 - x) * (2.0 - x)
}

/// Problem on `[0, 2]` with `d+ = Gamma(3 - alpha) x^alpha`,
/// `d- = Gamma(3 - alpha) (2 - x)^alpha`, `dt = dx` and a source chosen so
/// that the continuous solution is [`manufactured_solution`].
pub fn manufactured_problem(alpha: f64, n: usize, steps: usize) -> Result<Fde1dProblem> {
    let grid = Grid1D::new(0.0, 2.0, n)?;
    let time = TimeGrid::from_step(grid.dx(), steps)?;
    let g = gamma(3.0 - alpha);
    let problem = Fde1dProblem::new(alpha, grid, time)?
        .with_diffusion(
            move |x, _| g * x.powf(alpha),
            move |x, _| g * (2.0 - x).powf(alpha),
            true,
        )
        .with_source(move |x, t| manufactured_source(alpha, x, t))
        .with_initial(|x| manufactured_solution(x, 0.0));
    Ok(problem)
}

fn manufactured_source(alpha: f64, x: f64, t: f64) -> f64 {
    let y = 2.0 - x;
    let e = (-t).exp();
    let bracket = x * x + y * y - 3.0 * (x.powi(3) + y.powi(3)) / (3.0 - alpha)
        + 3.0 * (x.powi(4) + y.powi(4)) / ((4.0 - alpha) * (3.0 - alpha));
    -4.0 * e * x * x * y * y - 32.0 * e * bracket
}

/// Caches the HODLR form of `T_{alpha,N}` and its transpose so that
/// `F = -dx^{-alpha} (D+ T + D- T^T)` can be re-assembled cheaply for new
/// coefficient samples.
#[derive(Clone, Debug)]
pub struct SpatialAssembler {
    alpha: f64,
    dx: f64,
    opts: HodlrOptions,
    op: ToeplitzOperator,
    t: HodlrMatrix,
    tt: HodlrMatrix,
    converged: bool,
}

impl SpatialAssembler {
    pub fn new(alpha: f64, grid: &Grid1D, opts: HodlrOptions) -> Result<Self> {
        let op = ToeplitzOperator::new(fractional_descriptor(alpha, grid.len())?);
        let build = hodlr_from_toeplitz(&op, opts.trunc_tol, opts.leaf_size)?;
        let tt = build.matrix.transpose();
        Ok(Self {
            alpha,
            dx: grid.dx(),
            opts,
            op,
            t: build.matrix,
            tt,
            converged: build.converged,
        })
    }

    pub fn toeplitz(&self) -> &ToeplitzOperator {
        &self.op
    }

    pub fn toeplitz_hodlr(&self) -> &HodlrMatrix {
        &self.t
    }

    /// Whether the Lanczos compressions of `T` converged.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn assemble(&self, d_plus: &[f64], d_minus: &[f64]) -> Result<HodlrMatrix> {
        let n = self.t.size();
        check_len(n, d_plus.len())?;
        check_len(n, d_minus.len())?;
        let s = -self.dx.powf(-self.alpha);
        let lp: Vec<f64> = d_plus.iter().map(|d| s * d).collect();
        let lm: Vec<f64> = d_minus.iter().map(|d| s * d).collect();
        let a = hodlr_diag_scale(&self.t, &lp, None)?;
        let b = hodlr_diag_scale(&self.tt, &lm, None)?;
        hodlr_add(&a, &b, self.opts.trunc_tol)
    }

    /// Matrix-free `I + (dt / dx^alpha)(D+ T + D- T^T)` for the given samples.
    pub fn operator<'a>(&'a self, dt: f64, d_plus: &'a [f64], d_minus: &'a [f64]) -> FdOperator<'a> {
        FdOperator {
            op: &self.op,
            c: dt / self.dx.powf(self.alpha),
            d_plus,
            d_minus,
        }
    }
}

/// `F = -dx^{-alpha} (D+ T + D- T^T)` in HODLR form.
pub fn assemble_spatial_operator(
    alpha: f64,
    grid: &Grid1D,
    d_plus: &[f64],
    d_minus: &[f64],
    opts: HodlrOptions,
) -> Result<HodlrMatrix> {
    SpatialAssembler::new(alpha, grid, opts)?.assemble(d_plus, d_minus)
}

/// `I - dt F`.
pub fn fd_matrix_from_spatial(f: &HodlrMatrix, dt: f64) -> Result<HodlrMatrix> {
    let scaled = hodlr_diag_scale(f, &vec![-dt; f.size()], None)?;
    Ok(hodlr_shift(&scaled, 1.0))
}

/// Implicit-Euler matrix `I + (dt / dx^alpha)(D+ T + D- T^T)` at time `t_m`.
pub fn assemble_fd_matrix(problem: &Fde1dProblem, m: usize, opts: HodlrOptions) -> Result<HodlrMatrix> {
    if m > problem.time.steps() {
        return Err(Error::Domain(format!(
            "time index {m} beyond the last step {}",
            problem.time.steps()
        )));
    }
    let (dp, dm) = problem.coefficients_at(m)?;
    let f = assemble_spatial_operator(problem.alpha, &problem.grid, &dp, &dm, opts)?;
    fd_matrix_from_spatial(&f, problem.time.dt())
}

/// FFT-based matrix-free form of the implicit-Euler matrix.
#[derive(Clone, Copy, Debug)]
pub struct FdOperator<'a> {
    op: &'a ToeplitzOperator,
    c: f64,
    d_plus: &'a [f64],
    d_minus: &'a [f64],
}

impl FdOperator<'_> {
    pub fn size(&self) -> usize {
        self.d_plus.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let tx = self.op.apply(x, false);
        let ttx = self.op.apply(x, true);
        (0..x.len())
            .map(|i| x[i] + self.c * (self.d_plus[i] * tx[i] + self.d_minus[i] * ttx[i]))
            .collect()
    }

    /// `b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.apply(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub time: f64,
    pub solution_norm: f64,
    /// `||b - A u|| / ||b||` with `A` applied matrix-free.
    pub residual: f64,
    /// `||b - A u|| / ||u||`.
    pub residual_by_solution: f64,
    pub refinements: usize,
    pub factorized: bool,
    pub max_rank: usize,
    pub assemble_secs: f64,
    pub factor_secs: f64,
    pub solve_secs: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory1d {
    /// `u^{(0)}, u^{(1)}, ...` on the interior nodes.
    pub states: Vec<Vec<f64>>,
    pub stats: Vec<StepStats>,
}

impl Trajectory1d {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Solves `A^{(m)} u^{(m)} = u^{(m-1)} + dt f^{(m)}` for every step with a
/// HODLR LU, followed by up to [`MAX_REFINEMENTS`] refinement sweeps until
/// the matrix-free residual is at most `solve_tol ||b||`. With time-invariant
/// coefficients the LU is computed once.
pub fn implicit_euler_1d(problem: &Fde1dProblem, opts: HodlrOptions, solve_tol: f64) -> Result<Trajectory1d> {
    let dt = problem.time.dt();
    let t0 = Instant::now();
    let asm = SpatialAssembler::new(problem.alpha, &problem.grid, opts)?;
    let mut setup_secs = t0.elapsed().as_secs_f64();

    let mut u = problem.initial();
    let mut states = vec![u.clone()];
    let mut stats = Vec::with_capacity(problem.time.steps());
    let mut current: Option<(Vec<f64>, Vec<f64>, HodlrLu)> = None;

    for m in 1..=problem.time.steps() {
        let refactor = current.is_none() || !problem.time_invariant_coeffs;
        let (mut assemble_secs, mut factor_secs) = (0.0, 0.0);
        if refactor {
            let t = Instant::now();
            let (dp, dm) = problem.coefficients_at(m).map_err(|e| e.at_step(m))?;
            let a = asm
                .assemble(&dp, &dm)
                .and_then(|f| fd_matrix_from_spatial(&f, dt))
                .map_err(|e| e.at_step(m))?;
            assemble_secs = t.elapsed().as_secs_f64() + setup_secs;
            setup_secs = 0.0;
            let t = Instant::now();
            let lu = hodlr_lu(&a).map_err(|e| e.at_step(m))?;
            factor_secs = t.elapsed().as_secs_f64();
            current = Some((dp, dm, lu));
        }
        let (dp, dm, lu) = current.as_ref().expect("factorization present");

        let t = Instant::now();
        let b = problem.step_rhs(m, &u);
        let a = asm.operator(dt, dp, dm);
        let mut x = lu.solve(&b).map_err(|e| e.at_step(m))?;
        let mut r = a.residual(&x, &b);
        let bn = norm(&b);
        let mut refinements = 0;
        while refinements < MAX_REFINEMENTS && norm(&r) > solve_tol * bn {
            let dx = lu.solve(&r).map_err(|e| e.at_step(m))?;
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            r = a.residual(&x, &b);
            refinements += 1;
        }
        let solve_secs = t.elapsed().as_secs_f64();

        let rn = norm(&r);
        let xn = norm(&x);
        stats.push(StepStats {
            step: m,
            time: problem.time.time(m),
            solution_norm: xn,
            residual: if bn > 0.0 { rn / bn } else { rn },
            residual_by_solution: if xn > 0.0 { rn / xn } else { rn },
            refinements,
            factorized: refactor,
            max_rank: lu.max_rank(),
            assemble_secs,
            factor_secs,
            solve_secs,
        });
        u = x;
        states.push(u.clone());
    }
    Ok(Trajectory1d { states, stats })
}

/// Result of one implicit-Euler step solved by GMRES.
#[derive(Clone, Debug)]
pub struct GmresStep {
    pub outcome: GmresOutcome,
    /// True relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
    /// `||b - A x|| / ||x||`.
    pub residual_by_solution: f64,
    pub secs: f64,
}

/// Solves the first implicit-Euler step of `problem` by GMRES with matrix-free
/// FFT products, optionally preconditioned by `kind`.
pub fn gmres_first_step(
    problem: &Fde1dProblem,
    kind: Option<PrecondKind>,
    tol: f64,
    max_iter: usize,
) -> Result<GmresStep> {
    let start = Instant::now();
    let op = ToeplitzOperator::new(fractional_descriptor(problem.alpha, problem.size())?);
    let (dp, dm) = problem.coefficients_at(1)?;
    let dt = problem.time.dt();
    let a = FdOperator {
        op: &op,
        c: dt / problem.grid.dx().powf(problem.alpha),
        d_plus: &dp,
        d_minus: &dm,
    };
    let b = problem.step_rhs(1, &problem.initial());
    let pre = match kind {
        Some(k) => Some(build_preconditioner(k, problem.alpha, &problem.grid, dt, &dp, &dm)?),
        None => None,
    };
    let outcome = pgmres_solve(
        |x| a.apply(x),
        |r| match &pre {
            Some(p) => p.apply(r),
            None => r.to_vec(),
        },
        &b,
        tol,
        max_iter,
    );
    let rn = norm(&a.residual(&outcome.x, &b));
    let residual = rn / norm(&b).max(f64::MIN_POSITIVE);
    let residual_by_solution = rn / norm(&outcome.x).max(f64::MIN_POSITIVE);
    Ok(GmresStep {
        outcome,
        residual,
        residual_by_solution,
        secs: start.elapsed().as_secs_f64(),
    })
}
