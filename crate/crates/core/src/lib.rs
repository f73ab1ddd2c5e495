//! Time-dependent Bogoliubov transformations of a confined Klein-Gordon field
//! in a synchronous-gauge spacetime.
//!
//! The pipeline is: a [`geometry::SyncSpacetime`] gives instantaneous eigenbases
//! ([`spectral`]), whose time dependence yields coupling matrices ([`coupling`]),
//! which drive the Bogoliubov matrix ODE ([`evolution`]). [`perturbation`] covers
//! the first-order regime and [`scenarios`] packages the two reference setups.

pub mod coupling;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod ode;
pub mod perturbation;
pub mod quadrature;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result, Warning};
pub use num_complex::Complex64;

/// Dense complex matrix used for coupling and Bogoliubov blocks.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/modes.md")]
pub mod modes_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/couplings.md")]
pub mod couplings_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/perturbation.md")]
pub mod perturbation_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cosmology.md")]
pub mod cosmology_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cavity.md")]
pub mod cavity_chapter {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli_chapter {}
