//! Topology, spectra and Hamiltonian fixed points on weighted projective
//! spaces `CP^n(q)` and their real loci `RP^n(q)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`weights`] and [`geometry`]: weight vectors, the weighted `C*`/`S^1`
//!   actions, the moment map `K_q` and orbit geometry on the weighted sphere.
//! * [`cohomology`]: the exact integer ring of `CP^n(q)` and the real profile
//!   of `RP^n(q)`.
//! * [`spectrum`]: eigenvalues `2πk/q_j` of the constrained linear problem,
//!   minimax brackets and the counting certificate.
//! * [`hamiltonian`]: invariant polynomial Hamiltonians and their degree-two
//!   homogeneous lift.
//! * [`flow`]: lifted Hamiltonian flow, time-one maps and fixed points.
//! * [`variational`]: Fourier–Galerkin critical point solver for closed loops
//!   and real-boundary chords.

pub mod cohomology;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod hamiltonian;
mod linalg;
pub mod quadrature;
pub mod spectrum;
pub mod variational;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{AmbientPoint, SpherePoint, C64};
pub use hamiltonian::{InvariantMonomial, LiftedHamiltonian, QuadraticHamiltonian, TimeMode};
pub use weights::WeightVector;
