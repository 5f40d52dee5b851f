pub mod battery;
pub mod error;
pub mod grid;
pub mod operator;
pub mod propagator;
pub mod semilinear;
pub mod symbols;
pub mod tfa;
pub mod wavefront;
pub mod weyl;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, Spectrum, WeightSide, WeightSpec};
pub use operator::OperatorMatrix;
pub use symbols::{Symbol, SymbolClass, SymbolClassReport};
pub use tfa::{ModulationNormSpec, PhaseLattice, PhasePoint, PhaseSpaceField};
pub use num_complex::Complex64;
