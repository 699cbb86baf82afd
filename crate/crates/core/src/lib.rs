//! Finite-truncation numerics for unitary representations of countable
//! discrete groups.
//!
//! The crate computes with the regular representation `λ_G` on `l²(G)`,
//! trivial and finite-dimensional representations, and their direct sums.
//! On top of exact group arithmetic ([`group`]) and exact sparse vectors
//! ([`vector`], [`rep`]) it provides
//!
//! * [`containment`]: Gram data, `(ε, F)`-containment discrepancies and
//!   witness search, Følner witnesses and witness transfer into fresh
//!   regular copies;
//! * [`amenability`]: return probabilities of simple random walks, the
//!   minimal averaged defect of vectors supported on a Cayley ball and a
//!   two-sided bound on the spectral radius;
//! * [`stability`]: truncated orbit closures, orthogonal projections,
//!   projection-based independence, canonical bases and the finite
//!   approximation procedure for superstability;
//! * [`amalgam`]: amalgamation of two finite-dimensional extensions of a
//!   common subrepresentation.
//!
//! The `book/` directory of the repository explains the concepts; its code
//! listings are compiled as doctests of this crate.

pub mod amalgam;
pub mod amenability;
pub mod config;
pub mod containment;
pub mod eigen;
pub mod error;
pub mod gram;
pub mod group;
pub mod rep;
pub mod stability;
pub mod subspace;
pub mod vector;

pub use error::{Error, Result};
pub use group::{ball, Ball, GroupElement, GroupOracle};
pub use rep::{Multiplicity, Representation};
pub use subspace::Subspace;
pub use vector::{Key, Site, SparseVector};

pub use num_complex::Complex64;

/// Resource caps shared by all computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct Caps {
    /// Maximum number of elements in an enumerated Cayley ball.
    pub ball: usize,
    /// Maximum dimension of a closure or greedy subspace.
    pub closure_dim: usize,
    /// Maximum support size of a random-walk distribution.
    pub support: usize,
    /// Maximum number of copies in a finite multiple, and of fresh copies handed out.
    pub copies: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            ball: 100_000,
            closure_dim: 100_000,
            support: 100_000,
            copies: 100_000,
        }
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/representations.md")]
    mod representations {}
    #[doc = include_str!("../../../book/src/containment.md")]
    mod containment {}
    #[doc = include_str!("../../../book/src/amenability.md")]
    mod amenability {}
    #[doc = include_str!("../../../book/src/independence.md")]
    mod independence {}
    #[doc = include_str!("../../../book/src/amalgamation.md")]
    mod amalgamation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
