//! Collocation grids, norms, weights and dense linear-algebra helpers.

pub mod grid;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod random;

pub use grid::{apply, build_grid, HalfLineGrid, Mapping};
pub use norms::{
    check_interpolation, gevrey_norm, japanese, norm, GevreyNormParams, GevreyVariant, NormKind, NormRecord,
    WeightKind, WeightSpec,
};
