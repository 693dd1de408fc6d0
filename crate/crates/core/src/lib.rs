//! Environment-mediated entanglement dynamics of two qubits coupled to a
//! central spin through anisotropic Heisenberg exchange.
//!
//! The crate is organised bottom-up:
//!
//! * [`densemat`]: dense complex matrices, Jacobi eigensolver, spectral exponentials.
//! * [`hilbert`]: spin operators, the fixed `C (x) A (x) B` tensor layout,
//!   partial trace and partial transpose.
//! * [`model`]: spin-star and direct-exchange Hamiltonians plus closed-form
//!   immediate concurrence for direct exchange.
//! * [`states`]: product states, the Bell family, switch-parameter weightings,
//!   mixed and purified initial states.
//! * [`monotones`]: characteristic negative eigenvalue, negativity, concurrence.
//! * [`dynamics`]: exact, truncated-series and Runge-Kutta evolution and trajectory sampling.
//! * [`analysis`]: transition detection, short-time fits, closed-form
//!   comparators and the symmetry suite.

pub mod analysis;
pub mod densemat;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod monotones;
pub mod states;

pub use densemat::{ComplexMatrix, HermitianSpectrum, C64};
pub use error::{Error, Result};
pub use hilbert::{DensityOperator, Ket, SpinMagnitude, SystemDims};
pub use model::ExchangeCoupling;
