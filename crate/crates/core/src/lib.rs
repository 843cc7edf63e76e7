//! Exact, mean-field and semiclassical dynamics of Bose-Hubbard lattices.
//!
//! Numerical types are generic over the scalar (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, the precision used by the harness.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod meanfield;
pub mod ode;
pub mod otoc;
pub mod scalar;
pub mod spectral;
pub mod twa;

pub use error::{Error, Result};

pub type Complex64 = scalar::Complex<f64>;
pub type Params = hamiltonian::BoseHubbardParams<f64>;
pub type Hamiltonian = hamiltonian::SparseHamiltonian<f64>;
pub type State = fock::StateVector<f64>;
pub type Symbol = hamiltonian::ClassicalSymbol<f64>;
pub type Flow = meanfield::MeanField<f64>;
pub type Mode = meanfield::PeriodicMode<f64>;
pub type Otoc = otoc::OtocSeries<f64>;
pub type Twa = twa::TwaSeries<f64>;
