use thiserror::Error;

use crate::hamiltonians::Representation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("masses must be strictly positive and finite, got ({0}, {1}, {2})")]
    InvalidMass(f64, f64, f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no physical squared-distance triple maps to (P, S, T) = ({p}, {s}, {t})")]
    NoPhysicalPreimage { p: f64, s: f64, t: f64 },

    #[error("binary collision: side length {index} vanishes")]
    BinaryCollision { index: usize },

    #[error("collision singularity in potential at rho = {0:?}")]
    CollisionSingularity([f64; 3]),

    #[error("degenerate metric: determinant {det:e} below tolerance {tol:e}")]
    DegenerateMetric { det: f64, tol: f64 },

    #[error("singular coordinate jacobian ({0})")]
    SingularJacobian(String),

    #[error("degenerate quartic: T must be positive, got {0}")]
    DegenerateQuartic(f64),

    #[error("degenerate modulus: {0}")]
    DegenerateModulus(String),

    #[error("state representation {found:?} does not match spec representation {expected:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },

    #[error("p_Omega must vanish for representation {0:?}")]
    AngularMomentumNotAllowed(Representation),

    #[error("potential does not depend only on the variables of {0:?}")]
    UnsupportedPotential(Representation),

    #[error("no canonical transform from {from:?} to {to:?}")]
    UnsupportedTransform {
        from: Representation,
        to: Representation,
    },

    #[error("state is not on the invariant manifold: {0}")]
    NotOnInvariantManifold(String),

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("infeasible initial condition: {0}")]
    Infeasible(String),

    #[error("custom scale functions cannot be serialized")]
    NotSerializable,
}

pub type Result<T> = std::result::Result<T, Error>;
