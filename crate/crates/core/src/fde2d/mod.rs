//! Two-dimensional space-fractional diffusion with separable coefficients:
//! each implicit-Euler step is a Sylvester equation with HODLR coefficients
//! and a low-rank right-hand side.

mod fe;


use std::time::Instant;

use statrs::function::gamma::gamma;

use crate::error::{check_len, Error, Result};
use crate::fde1d::{SpaceTimeFn, SpatialAssembler};
use crate::gl::{Grid1D, TimeGrid};
use crate::hodlr::{hodlr_diag_scale, hodlr_lu, hodlr_shift, HodlrLu, HodlrMatrix, HodlrOptions};
use crate::lowrank::{compress_sum, svd_truncate, LowRankFactor};
use crate::sylvester::{ek_sylvester, EkOptions, EkStop, HodlrOperator, SylvesterSolution, Transposed};

pub use fe::{step_2d_fe, FeStep, GeneralizedOperator, ILL_CONDITIONED};

/// `gx(x, t) * gy(y, t)`.
pub struct SeparableTerm {
    pub gx: SpaceTimeFn,
    pub gy: SpaceTimeFn,
}

impl SeparableTerm {
    pub fn new(
        gx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gy: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            gx: Box::new(gx),
            gy: Box::new(gy),
        }
    }
}

/// `u_t = d1+ D_x+ u + d1- D_x- u + d2+ D_y+ u + d2- D_y- u + f` on a
/// rectangle, with the unknown stored as a matrix indexed by `(x_i, y_j)`.
pub struct Fde2dProblem {
    pub alpha1: f64,
    pub alpha2: f64,
    pub grid_x: Grid1D,
    pub grid_y: Grid1D,
    pub time: TimeGrid,
    /// `d1±(x, t)`.
    pub d1_plus: SpaceTimeFn,
    pub d1_minus: SpaceTimeFn,
    /// `d2±(y, t)`.
    pub d2_plus: SpaceTimeFn,
    pub d2_minus: SpaceTimeFn,
    pub source: Vec<SeparableTerm>,
    /// Time-independent source contributions given on the grid.
    pub sampled_source: Vec<LowRankFactor>,
    pub u0: LowRankFactor,
    pub time_invariant_coeffs: bool,
}

impl std::fmt::Debug for Fde2dProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fde2dProblem")
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .field("grid_x", &self.grid_x)
            .field("grid_y", &self.grid_y)
            .field("time", &self.time)
            .field("source_terms", &self.source.len())
            .field("time_invariant_coeffs", &self.time_invariant_coeffs)
            .finish_non_exhaustive()
    }
}

impl Fde2dProblem {
    /// Unit diffusion, no source, zero initial data.
    pub fn new(alpha1: f64, alpha2: f64, grid_x: Grid1D, grid_y: Grid1D, time: TimeGrid) -> Result<Self> {
        for a in [alpha1, alpha2] {
            if !(a > 1.0 && a <= 2.0) {
                return Err(Error::Domain(format!("fractional order {a} outside (1, 2]")));
            }
        }
        let u0 = LowRankFactor::zeros(grid_x.len(), grid_y.len());
        Ok(Self {
            alpha1,
            alpha2,
            grid_x,
            grid_y,
            time,
            d1_plus: Box::new(|_, _| 1.0),
            d1_minus: Box::new(|_, _| 1.0),
            d2_plus: Box::new(|_, _| 1.0),
            d2_minus: Box::new(|_, _| 1.0),
            source: Vec::new(),
            sampled_source: Vec::new(),
            u0,
            time_invariant_coeffs: true,
        })
    }

    pub fn with_x_diffusion(
        mut self,
        plus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        minus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d1_plus = Box::new(plus);
        self.d1_minus = Box::new(minus);
        self
    }

    pub fn with_y_diffusion(
        mut self,
        plus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        minus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d2_plus = Box::new(plus);
        self.d2_minus = Box::new(minus);
        self
    }

    pub fn time_invariant(mut self, flag: bool) -> Self {
        self.time_invariant_coeffs = flag;
        self
    }

    pub fn with_source_term(
        mut self,
        gx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gy: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.source.push(SeparableTerm::new(gx, gy));
        self
    }

    pub fn with_sampled_source(mut self, f: LowRankFactor) -> Result<Self> {
        check_len(self.grid_x.len(), f.nrows())?;
        check_len(self.grid_y.len(), f.ncols())?;
        self.sampled_source.push(f);
        Ok(self)
    }

    pub fn with_initial(mut self, u0: LowRankFactor) -> Result<Self> {
        check_len(self.grid_x.len(), u0.nrows())?;
        check_len(self.grid_y.len(), u0.ncols())?;
        self.u0 = u0;
        Ok(self)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_x.len(), self.grid_y.len())
    }

    /// `(d1+, d1-, d2+, d2-)` sampled at `t_m`.
    fn coefficients_at(&self, m: usize) -> Result<[Vec<f64>; 4]> {
        let t = self.time.time(m);
        let out = [
            self.grid_x.sample(|x| (self.d1_plus)(x, t)),
            self.grid_x.sample(|x| (self.d1_minus)(x, t)),
            self.grid_y.sample(|y| (self.d2_plus)(y, t)),
            self.grid_y.sample(|y| (self.d2_minus)(y, t)),
        ];
        if let Some(v) = out.iter().flatten().find(|v| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("diffusion coefficient {v} at t = {t} is not nonnegative")));
        }
        Ok(out)
    }
}

/// Source and initial data of the two-dimensional benchmark on `[0, 1]^2`
/// (`dt = 1`, 8 steps, zero initial state):
/// `f = 100 (sin(10 pi x) cos(pi y) + sin(10 t) sin(pi x) y (1 - y))`.
/// With `variable` the diffusion coefficients are
/// `Gamma(1.2) (1 + s)^alpha` and `Gamma(1.2) (2 - s)^alpha` in each
/// direction, otherwise all equal to 1.
pub fn bss_problem(alpha1: f64, alpha2: f64, n: usize, variable: bool) -> Result<Fde2dProblem> {
    let grid = Grid1D::new(0.0, 1.0, n)?;
    let time = TimeGrid::from_step(1.0, 8)?;
    use std::f64::consts::PI;
    let mut p = Fde2dProblem::new(alpha1, alpha2, grid, grid, time)?
        .with_source_term(|x, _| 100.0 * (10.0 * PI * x).sin(), |y, _| (PI * y).cos())
        .with_source_term(|x, t| 100.0 * (10.0 * t).sin() * (PI * x).sin(), |y, _| y * (1.0 - y));
    if variable {
        let g = gamma(1.2);
        p = p
            .with_x_diffusion(
                move |x, _| g * (1.0 + x).powf(alpha1),
                move |x, _| g * (2.0 - x).powf(alpha1),
            )
            .with_y_diffusion(
                move |y, _| g * (1.0 + y).powf(alpha2),
                move |y, _| g * (2.0 - y).powf(alpha2),
            );
    }
    Ok(p)
}

/// Drops singular values below `rel` times the largest one.
pub fn recompress(factors: &[&LowRankFactor], rel: f64) -> Result<LowRankFactor> {
    let exact = compress_sum(factors, 0.0)?;
    if exact.rank() == 0 {
        return Ok(exact);
    }
    // compress_sum returns U = Q S with orthonormal V
    let s1 = exact.u().col(0).norm_l2();
    svd_truncate(&exact, rel * s1, None)
}

/// Samples of the source at `t` as a low-rank factor, one column pair per
/// separable term, recompressed at `trunc_tol`.
pub fn sample_rhs_lowrank(problem: &Fde2dProblem, t: f64, trunc_tol: f64) -> Result<LowRankFactor> {
    let (m, n) = problem.shape();
    let mut terms: Vec<LowRankFactor> = problem
        .source
        .iter()
        .map(|term| {
            let x = problem.grid_x.sample(|x| (term.gx)(x, t));
            let y = problem.grid_y.sample(|y| (term.gy)(y, t));
            LowRankFactor::outer(&x, &y)
        })
        .collect();
    terms.extend(problem.sampled_source.iter().cloned());
    if terms.is_empty() {
        return Ok(LowRankFactor::zeros(m, n));
    }
    let refs: Vec<&LowRankFactor> = terms.iter().collect();
    recompress(&refs, trunc_tol)
}

/// `A1 = s1 I - dt F1` and `A2 = s2 I - dt F2` with their LU factorizations.
#[derive(Clone, Debug)]
pub struct Step2dOperators {
    pub a1: HodlrMatrix,
    pub lu1: HodlrLu,
    pub a2: HodlrMatrix,
    pub lu2: HodlrLu,
}

impl Step2dOperators {
    pub fn from_spatial(f1: &HodlrMatrix, f2: &HodlrMatrix, dt: f64, split: (f64, f64)) -> Result<Self> {
        let shifted = |f: &HodlrMatrix, s: f64| -> Result<HodlrMatrix> {
            Ok(hodlr_shift(&hodlr_diag_scale(f, &vec![-dt; f.size()], None)?, s))
        };
        let a1 = shifted(f1, split.0)?;
        let a2 = shifted(f2, split.1)?;
        let lu1 = hodlr_lu(&a1)?;
        let lu2 = hodlr_lu(&a2)?;
        Ok(Self { a1, lu1, a2, lu2 })
    }

    pub fn max_rank(&self) -> usize {
        self.a1.max_rank().max(self.a2.max_rank())
    }
}

/// One-dimensional fractional operators in both directions, cached across
/// steps.
#[derive(Clone, Debug)]
pub struct Step2dAssembler {
    x: SpatialAssembler,
    y: SpatialAssembler,
    split: (f64, f64),
}

impl Step2dAssembler {
    pub fn new(problem: &Fde2dProblem, opts: HodlrOptions) -> Result<Self> {
        Self::with_split(problem, opts, (0.5, 0.5))
    }

    /// `split` distributes the identity between the two coefficients.
    pub fn with_split(problem: &Fde2dProblem, opts: HodlrOptions, split: (f64, f64)) -> Result<Self> {
        if (split.0 + split.1 - 1.0).abs() > 1e-14 {
            return Err(Error::Domain(format!("identity split {split:?} does not sum to 1")));
        }
        Ok(Self {
            x: SpatialAssembler::new(problem.alpha1, &problem.grid_x, opts)?,
            y: SpatialAssembler::new(problem.alpha2, &problem.grid_y, opts)?,
            split,
        })
    }

    pub fn operators(&self, problem: &Fde2dProblem, m: usize) -> Result<Step2dOperators> {
        let [d1p, d1m, d2p, d2m] = problem.coefficients_at(m)?;
        let f1 = self.x.assemble(&d1p, &d1m)?;
        let f2 = self.y.assemble(&d2p, &d2m)?;
        Step2dOperators::from_spatial(&f1, &f2, problem.time.dt(), self.split)
    }
}

/// Solves `A1 X + X A2^T = F + U_prev` by the extended Krylov method.
/// `f` must already carry the time-step factor.
pub fn step_2d(
    u_prev: &LowRankFactor,
    ops: &Step2dOperators,
    f: &LowRankFactor,
    trunc_tol: f64,
    ek: EkOptions,
) -> Result<SylvesterSolution> {
    check_len(ops.a1.size(), u_prev.nrows())?;
    check_len(ops.a2.size(), u_prev.ncols())?;
    let rhs = recompress(&[f, u_prev], trunc_tol)?;
    let a = HodlrOperator::new(&ops.a1, &ops.lu1)?;
    let b = Transposed(HodlrOperator::new(&ops.a2, &ops.lu2)?);
    ek_sylvester(&a, &b, &rhs, ek)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step2dStats {
    pub step: usize,
    pub time: f64,
    pub rank: usize,
    pub iterations: usize,
    pub residual: f64,
    pub basis_size: usize,
    pub assemble_secs: f64,
    pub solve_secs: f64,
}

#[derive(Clone, Debug)]
pub struct Run2d {
    /// `U^{(0)}, U^{(1)}, ...`.
    pub states: Vec<LowRankFactor>,
    pub stats: Vec<Step2dStats>,
}

impl Run2d {
    pub fn last(&self) -> &LowRankFactor {
        self.states.last().expect("initial state present")
    }
}

/// Runs every implicit-Euler step. Operators are assembled once when the
/// coefficients are time-invariant, otherwise at every step. A step whose
/// Sylvester solve misses `ek.tol` aborts the run.
pub fn run_2d(problem: &Fde2dProblem, opts: HodlrOptions, ek: EkOptions) -> Result<Run2d> {
    run_2d_split(problem, opts, ek, (0.5, 0.5))
}

pub fn run_2d_split(problem: &Fde2dProblem, opts: HodlrOptions, ek: EkOptions, split: (f64, f64)) -> Result<Run2d> {
    let t0 = Instant::now();
    let asm = Step2dAssembler::with_split(problem, opts, split)?;
    let mut carry_secs = t0.elapsed().as_secs_f64();
    let dt = problem.time.dt();
    let mut states = vec![problem.u0.clone()];
    let mut stats = Vec::with_capacity(problem.time.steps());
    let mut ops: Option<Step2dOperators> = None;

    for m in 1..=problem.time.steps() {
        let mut assemble_secs = 0.0;
        if ops.is_none() || !problem.time_invariant_coeffs {
            let t = Instant::now();
            ops = Some(asm.operators(problem, m).map_err(|e| e.at_step(m))?);
            assemble_secs = t.elapsed().as_secs_f64() + carry_secs;
            carry_secs = 0.0;
        }
        let current = ops.as_ref().expect("operators assembled");

        let t = Instant::now();
        let time = problem.time.time(m);
        let mut f = sample_rhs_lowrank(problem, time, opts.trunc_tol).map_err(|e| e.at_step(m))?;
        f.scale(Some(&vec![dt; f.nrows()]), None);
        let prev = states.last().expect("initial state present");
        let sol = step_2d(prev, current, &f, opts.trunc_tol, ek).map_err(|e| e.at_step(m))?;
        if !sol.converged {
            return Err(Error::Numerical(format!(
                "extended Krylov stopped ({:?}) at residual {:e} after {} iterations",
                sol.stop, sol.residual, sol.iterations
            ))
            .at_step(m));
        }
        debug_assert_eq!(sol.stop, EkStop::Converged);
        stats.push(Step2dStats {
            step: m,
            time,
            rank: sol.factor.rank(),
            iterations: sol.iterations,
            residual: sol.residual,
            basis_size: sol.history.last().map_or(0, |h| h.basis_u.max(h.basis_v)),
            assemble_secs,
            solve_secs: t.elapsed().as_secs_f64(),
        });
        states.push(sol.factor);
    }
    Ok(Run2d { states, stats })
}
