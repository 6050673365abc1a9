//! Small dense matrices and the algebra of O(n), reflections and the
//! V1..V5 splitting of 𝕄ₙ relative to an axis.

mod eigen;
mod expm;
mod matrix;
mod orthogonal;
mod sample;
mod vsplit;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use expm::expm;
pub use matrix::{canonical_sign, normalize, vec_dot, vec_norm, SquareMatrix};
pub use orthogonal::{
    exp_antisym, minimal_pair_residual, nearest_orthogonal, tangent_project, OrthogonalMatrix,
    ReflectionMatrix,
};
pub(crate) use orthogonal::{check_unit, pair_residual_raw};
pub use vsplit::{
    complete_frame, project_v4_complement, projector_trace, v4_component, v_basis, v_decompose,
    v_dimensions, VSplit,
};
pub use sample::{
    random_antisym, random_matrix, random_orthogonal, random_rotation_near_identity, random_symmetric,
    random_unit,
};
