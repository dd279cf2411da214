//! Numerical laboratory for degenerate Monge-Ampère Dirichlet problems
//! `det D²u = f`, `f ~ d^{-α}` near the boundary of a convex domain.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] – convex model domains, distance, normals, lattice grids.
//! * [`masolve`] – monotone wide-stencil discretisation, damped Newton solver,
//!   and the closed-form one-dimensional oracle.
//! * [`sections`] – boundary and interior sections of discrete solutions,
//!   John ellipsoids, `b_u(h)`, sliding and diagonal normalisations.
//! * [`barriers`] – closed-form barrier catalog and certificates.
//! * [`verify`] – power-law fits and the theorem-level experiments.
//! * [`cli`] – run-config parsing and report writing for the `dmalab` binary.

pub mod barriers;
pub mod cli;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod masolve;
pub mod par;
pub mod sections;
pub mod verify;

pub use error::{Error, Result};
