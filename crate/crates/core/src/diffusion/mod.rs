//! Variable-coefficient diffusion: the five-point operator, CG, and the
//! linear and semilinear solvers.

mod operator;
mod solve;

pub use operator::{pcg, CgReport, EllipticOperator};
pub use solve::{
    solve_linear_diffusion, solve_semilinear_diffusion, solve_with_operator, BallCheck,
    DiffusionOptions, DiffusionPicardOptions, DiffusionSolution, DiffusionSolveReport,
};
