//! Jet Riemann-Lagrange geometry of first-order autonomous ODE systems.
pub mod expr;
pub mod geometry;
pub mod levelset;
pub mod models;
pub mod system;
pub mod variational;
pub mod verify;

pub use expr::{Bindings, DomainBox, Equivalence, Expr};
pub use system::{ExprMatrix, OdeSystem, SystemError};
pub use verify::Check;
