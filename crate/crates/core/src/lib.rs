//! Zero-angular-momentum three-body dynamics in distance, squared-distance,
//! geometrical and volume variables, with a Cartesian oracle and reference
//! closed-form solutions.
//!
//! Kinetic energies follow `H = p^T G(q) p + V(q)` with no factor of one half,
//! so the configuration velocity is `2 G p`.

pub mod batch;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod hamiltonians;
pub mod metrics;
pub mod oracle;
pub mod potentials;
pub mod reference;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{GeoPoint, MassTriple, ModifiedVolumePoint, RhoPoint};
pub use hamiltonians::{HamiltonianSpec, PhaseState, Representation};
pub use potentials::PotentialSpec;
