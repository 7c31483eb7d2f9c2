//! Truncated Carleman linearization of semi-explicit DAE systems.
//!
//! A model `ẋ = g(x, z)`, `0 = h(x, z)` is expanded to third order around a
//! stable equilibrium, lifted onto Kronecker monomials, squared up with
//! auxiliary products of the constraint, and Kron-reduced to a lifted linear
//! ODE on `[Δx, Δx⊗Δx, Δx⊗Δx⊗Δx]`.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod carleman_dae;
pub mod carleman_ode;
pub mod error;
pub mod expm;
pub mod expr;
pub mod fixtures;
pub mod io;
pub mod kron;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod spectral;
pub mod taylor;

pub use carleman_dae::{
    assemble, build_g_blocks, build_h_blocks, det_product_check, kron_reduce,
    validate_against_ode, CarlemanDaeSystem, DetReport, LiftedBlocks, ReducedOde,
};
pub use carleman_ode::{build_extended_ode, CarlemanOdeSystem};
pub use error::{Error, Result};
pub use expr::{differentiate, parse_expr, Expr};
pub use kron::{
    axis_permutation, carleman_block, condense, kron_power_vec, kron_product, AxisPermutation,
    CondensedMatrix, MonomialBasis, VarKind,
};
pub use matrix::Mat;
pub use model::{parse_model, ModelSpec};
pub use scalar::Scalar;
pub use sim::{compare, simulate_dae, simulate_linear, Comparison, Trajectory};
pub use spectral::{
    combination_spectrum, eigenvalues, match_spectra, mode_report, MatchReport, SpectrumReport,
};
pub use taylor::{coefficient_matrices, fd_oracle, find_equilibrium, CoefficientSet, Equilibrium};

pub use num_complex::Complex;

pub type Matrix = Mat<f64>;
pub type Coefficients = CoefficientSet<f64>;
pub type DaeSystem = CarlemanDaeSystem<f64>;
pub type OdeSystem = CarlemanOdeSystem<f64>;
pub type Reduced = ReducedOde<f64>;
pub type Equilibrium64 = Equilibrium<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Complex64 = Complex<f64>;
