//! Numerical toolkit for gerbes, spin structures, and index experiments on
//! chart covers of low-dimensional manifolds.

pub mod clifford;
pub mod cech;
pub mod calculus;
pub mod cover;
pub mod gerbe;
pub mod index;
pub mod linalg;
pub mod sections;
