//! Exact finite-scale laboratory for the automorphism group of a probability
//! space and its Markov-operator compactification.
//!
//! The measure space is modelled by `N` atoms of mass `1/N`. Automorphisms are
//! permutations of atoms, Markov operators are doubly stochastic matrices, and
//! every measure or matrix entry is an exact [`Q`] rational unless a routine
//! explicitly works in floating point (spectral and Cesàro checks).
//!
//! Modules:
//!
//! * [`space`]: atoms, partitions, automorphisms, Koopman and joint matrices.
//! * [`markov`]: doubly stochastic matrices, products, compression to a partition.
//! * [`uniformity`]: the `U`, `W` and two-sided entourage systems and a finite net.
//! * [`factorization`]: both inclusions between the entourage systems, executable.
//! * [`density`]: exact realization of couplings and Birkhoff decomposition.
//! * [`wap`]: matrix coefficients, Gram PSD checks, uniform-continuity modulus.
//! * [`semigroup`]: idempotents, their order, Cesàro limits, conjugation invariance.
//! * [`experiment`]: seeded suites, JSON/CSV reports (driven by the `roelcke` binary).

pub mod density;
pub mod error;
pub mod experiment;
pub mod factorization;
pub mod markov;
pub mod rational;
pub mod sampling;
pub mod semigroup;
pub mod space;
pub mod uniformity;
pub mod wap;

pub use error::{Error, Result};
pub use markov::{CouplingMatrix, MarkovMatrix, RatMatrix};
pub use rational::Q;
pub use space::{AtomSpace, Automorphism, Partition};
