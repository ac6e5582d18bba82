//! Diffeomorphic multigrid toolkit for 2D elliptic PDEs.
//!
//! The solver maps a problem posed on an unstructured triangular mesh to a
//! structured grid on (-1,1)^2 through a diffeomorphism, runs robust
//! structured geometric multigrid there, and transfers corrections back
//! through an L2-optimal cross-mesh projection. When no analytic map is
//! available, the map is learned as a neural ODE trained to behave like a
//! harmonic extension of the boundary correspondence.
//!
//! Module map:
//! - [`mesh`]: triangular meshes, structured grids, generators, file I/O
//! - [`quadrature`]: triangle and tensor-product quadrature rules
//! - [`assembly`]: P1/Q1 finite-element assembly, effective diffusion
//! - [`maps`]: analytic and FEM-harmonic domain maps
//! - [`node`]: neural-ODE maps and adjoint Jacobian/Hessian integration
//! - [`train`]: distance-image loss, reverse-mode engine, map training
//! - [`transfer`]: coupled mass matrix, prolongation/restriction
//! - [`stencil`] / [`boxmg`]: 9-point stencil operators and structured MG
//! - [`solver`]: the composite two-grid solver, scaling factor, metrics
//! - [`problems`]: the benchmark problem catalog
//! - [`config`]: flat key=value run configuration

pub mod assembly;
pub mod boxmg;
pub mod config;
pub mod dense;
pub mod maps;
pub mod mesh;
pub mod node;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod stencil;
pub mod train;
pub mod transfer;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
