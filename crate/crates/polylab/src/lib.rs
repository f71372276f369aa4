//! polylab: a desk-scale laboratory for self-interacting lattice polymers
//! under a pulling force.
//!
//! The model: nearest-neighbor paths γ on Z^d weighted by
//! e^{−Φ(γ) + ⟨F, γ(n)⟩}, where Φ(γ) = Σ_x φ(ℓ_x(γ)) is built from local
//! times and a potential φ from the catalog in [`potential`]. The crate
//! provides exact enumeration with certified tails, correlation-length and
//! Wulff-shape estimation, Metropolis sampling with phase detection, the
//! irreducible (Ornstein–Zernike) decomposition with its renewal identities,
//! an exact solver for the 1d discrete sausage, and a quenched-disorder
//! engine for the semi-directed polymer.
//!
//! Start with the guide in `book/` — its code snippets double as doc-tests —
//! or with the `polylab` binary (`enumerate`, `wulff`, `sample`, `decompose`,
//! `sausage1d`, `quenched`, `sweep`, `plotdata`).

pub mod enumerate;
pub mod error;
pub mod freewalk;
pub mod lattice;
pub mod logspace;
pub mod potential;

mod book;
pub mod sausage1d;
pub mod wulff;
