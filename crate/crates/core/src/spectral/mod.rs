//! Periodic grid, Fourier fields, transforms and the constitutive symbols.

pub mod constitutive;
pub mod field;
pub mod grid;
pub mod ops;
pub mod transform;

pub use constitutive::{
    apply_constitutive, apply_q_inverse_drive, apply_r, symbol_d, symbol_mb, symbol_mb_factor, symbol_mu, PhysParams,
    SymbolTable,
};
pub use field::{SpectralScalar, SpectralVector, VOLUME};
pub use grid::{Grid, Wavevector};
pub use ops::{advect, advect_vector, leray_project, norm, vector_norm, NormKind};
pub use transform::Transform;
