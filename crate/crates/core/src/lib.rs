//! Fast solvers for space-fractional diffusion equations built on
//! hierarchically low-rank (HODLR) representations of Grünwald–Letnikov
//! discretizations.

pub mod bounds;
pub mod dense;
pub mod dump;
pub mod error;
pub mod fde1d;
pub mod fde2d;
pub mod gl;
pub mod hodlr;
pub mod lowrank;
pub mod sylvester;
pub mod toeplitz;

pub use error::{Error, Result};
pub use gl::{
    assemble_t_descriptor, fractional_descriptor, gl_coeffs, GlCoefficients, Grid1D, TimeGrid,
    ToeplitzDescriptor,
};
pub use toeplitz::{toeplitz_to_dense, ToeplitzOperator};
pub use lowrank::{
    compress_sum, lanczos_lowrank, lanczos_lowrank_with, svd_truncate, LanczosOutcome, LanczosStart,
    LowRankFactor,
};
pub use hodlr::{
    hodlr_add, hodlr_diag_scale, hodlr_from_dense, hodlr_from_toeplitz, hodlr_lu, hodlr_lu_with,
    hodlr_shift, hodlr_solve, qsrank_measure, HodlrBuild, HodlrLu, HodlrMatrix, HodlrOptions, LuOptions,
};
pub use fde1d::{
    assemble_fd_matrix, assemble_spatial_operator, build_preconditioner, implicit_euler_1d, pgmres_solve,
    Fde1dProblem, PrecondKind, TridiagPreconditioner,
};
pub use fde2d::{
    bss_problem, run_2d, sample_rhs_lowrank, step_2d, step_2d_fe, Fde2dProblem, Step2dOperators,
};
pub use sylvester::{
    dense_sylvester, ek_sylvester, kron_sylvester, sylvester_residual, EkOptions, HodlrOperator, SylvesterOperator,
    SylvesterSolution,
};
pub use bounds::{
    bound_b, cauchy_min_eig, cauchy_pivots, hankel_psd_min_eig, k_eps_bound, qsrank_bound_fd, qsrank_bound_fd_scaled,
    separable_approx, SeparableApprox,
};
