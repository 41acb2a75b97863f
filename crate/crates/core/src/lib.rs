//! Discrete-time loop measures for complex edge weights on finite state spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`] - weight matrices, acceptability, Laplacian and Green's functions.
//! * [`loops`] - rooted and unrooted loops, brute-force enumeration and the
//!   loop-measure identities `F(A) = 1/det(I - Q)`.
//! * [`lerw`] - chronological loop erasure, the loop-erased measure, Wilson's
//!   algorithm and the matrix-tree count.
//! * [`soup`] - complex Poisson semigroups, exact loop-soup sampling and
//!   occupation fields together with their Laplace transforms.
//! * [`gff`] - real and complex Gaussian free fields and the isomorphism with
//!   the occupation field at time one half.
//!
//! Everything is dense and double precision; state spaces are expected to be
//! small (a few hundred sites at most, a handful for the enumeration oracles).

pub mod error;
pub mod gff;
pub mod io;
pub mod lerw;
pub mod loops;
pub mod matrix;
pub mod rng;
pub mod soup;
pub mod stats;

pub use error::{Error, Result};
pub use gff::{ComplexGffModel, GffModel};
pub use lerw::{BoundaryProblem, SimpleGraph, SpanningTree};
pub use loops::{RootedLoop, UnrootedLoop};
pub use matrix::{AcceptabilityCertificate, GreensFunction, StateSpace, WeightMatrix};
pub use soup::{ComplexPoissonLaw, LoopSoupSample, OccupationField, TransformReport};

pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
