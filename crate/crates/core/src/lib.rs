pub mod appell;
pub mod carleman;
pub mod error;
pub mod expr;
pub mod field;
pub mod linalg;
pub mod operators;
pub mod propagator;
pub mod weights;

pub use error::{Error, Result};
pub use field::{Field, Grid, SpectralField, WeightProfile};
pub use operators::{MatrixPotential, TimePotential};
pub use propagator::{EvolutionCoefficients, EvolutionPlan, Method, Trajectory};
