//! Sylvester equations `A X + X B = C`: dense oracles and the extended
//! Krylov solver for HODLR coefficients with low-rank right-hand sides.

mod dense;
pub(crate) mod ek;


pub use dense::{dense_sylvester, dense_sylvester_capped, kron_sum, kron_sylvester, DEFAULT_SYLVESTER_CAP, KRON_CAP};
pub use ek::{
    ek_sylvester, sylvester_residual, EkIteration, EkOptions, EkStop, HodlrOperator, SylvesterOperator,
    SylvesterSolution, Transposed, DEFLATION_TOL,
};
