//! Steering sharing with sequential unsharp measurements on a three-qubit
//! register.
//!
//! Pairs of observers `A_i B_i` measure the `AB` part of a GHZ state one
//! after another, each with unsharp two-outcome measurements, while Charlie
//! holds the third qubit. The crate simulates the averaged Lüders updates,
//! scores every pair with the linear steering functional, and computes
//! steering ellipsoids of the compressed two-qubit state.
//!
//! - [`linalg`]: small dense complex matrices, Jacobi eigensolver, PSD roots.
//! - [`state`]: density matrices, GHZ, compression, Bloch decomposition.
//! - [`measurement`]: unsharp settings, instruments, sequential updates.
//! - [`steering`]: steering functional, classical bound, closed forms, ellipsoids.
//! - [`scenario`]: configs, runs, scans, sweeps and CSV output.

pub mod error;
pub mod linalg;
pub mod measurement;
pub mod scenario;
pub mod state;
pub mod steering;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Pauli};
pub use state::{BlochForm, CompressionBasis, DensityMatrix};
pub use steering::{SteeredParty, SteeringEllipsoid, StrengthHistory};
