//! Deterministic data-parallel primitives.
//!
//! All kernels are pure functions of their inputs. Work is split over
//! disjoint output partitions (rows for products, index blocks for maps) and
//! every reduction uses a fixed association tree, so serial and parallel
//! backends agree bit for bit.

mod backend;
mod elementwise;
mod matmul;
mod matrix;
mod reduce;

pub use backend::{Backend, BackendMode};
pub use elementwise::{map, try_zip_with, zip3_with, zip_with};
pub use matmul::{matmul, matvec, tree_dot, INNER_LEAF};
pub use matrix::DenseMatrix;
pub use reduce::{tree_reduce_sum, tree_sum_rows};
