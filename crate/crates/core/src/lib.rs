//! Minimizing-movement flows of orthogonal-matrix-valued maps on two-phase
//! domains with a reflection coupling across the interface.

pub mod descent;
pub mod error;
pub mod flow;
pub mod functional;
pub mod grid;
pub mod matcore;
pub mod motion;
pub mod rng;
pub mod scalar;
pub mod sphere;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases used by the higher-level modules.
pub type Mat = matcore::SquareMatrix<f64>;
pub type Orth = matcore::OrthogonalMatrix<f64>;
pub type Field = grid::PairedField<f64>;
