//! Numerical machinery for the polynomial-partitioning approach to the
//! endpoint multilinear Kakeya inequality.
//!
//! The crate is organised bottom-up:
//!
//! * [`polyspace`]: dense multivariate polynomials on the coefficient sphere.
//! * [`geomcore`]: lattice cubes, tubes, wedge volumes and incidences.
//! * [`surfcalc`]: zero-set extraction and every surface integral built on it.
//! * [`convexvis`]: the visibility body `K(Z)`, John ellipsoids, Banach–Mazur
//!   distance and coloured ellipsoid nets.
//! * [`oddzero`]: zero finding for odd maps on the coefficient sphere and the
//!   bisecting-polynomial construction.
//! * [`kakeya`]: tube families, cube weights, the reduction checks, the
//!   multilinear Kakeya ratio and the visibility-class machinery.

pub mod convexvis;
pub mod error;
pub mod geomcore;
pub mod kakeya;
pub mod oddzero;
pub mod polyspace;
pub mod surfcalc;
pub mod util;

pub use error::{Error, Result};
