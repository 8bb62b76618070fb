pub mod bvp;
pub mod coefficients;
pub mod expr;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod regularization;
pub mod serde_ext;
pub mod wave_speed;

pub use coefficients::{Model, ModelError, PiecewiseFn, ReducedProblem};
pub use expr::Expr;
