//! Dense arrays, the Cholesky solver, pointwise ops and the seeded generator.

pub mod array;
pub mod linalg;
pub mod ops;
pub mod rng;

pub use array::{dot, Array, Real};
pub use linalg::{cholesky, matmul, solve_spd, transpose, SpdFactor};
pub use ops::{argmax, binary, sigmoid, softmax, unary, Binary, Unary};
pub use rng::SeededRng;
