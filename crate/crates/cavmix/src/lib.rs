//! Mixed finite element solver for multi-cavity growth in incompressible
//! nonlinear elasticity: assembly, Newton, continuation, analysis and IO.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod continuation;
pub mod driver;
pub mod error;
pub mod io;
pub mod linear;
pub mod newton;
pub mod sparse;

pub use assembly::{Problem, Residual, SaddleSystem};
pub use error::{Error, Result};
pub use linear::LinearSolver;
pub use newton::{newton_solve, NewtonConfig, SolveTrace};
