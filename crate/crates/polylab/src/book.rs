//! Doc-test hooks for the guide chapters in `book/src/`.
//!
//! mdBook cannot run Rust snippets as tests by itself, so each chapter is
//! included here as a doc comment; `cargo test --doc` then executes every
//! ```rust block exactly as printed in the book.
#![cfg(doctest)]

#[doc = include_str!("../../../book/src/ch01-lattice-polymers.md")]
pub struct Ch01LatticePolymers;

#[doc = include_str!("../../../book/src/ch02-enumeration.md")]
pub struct Ch02Enumeration;

#[doc = include_str!("../../../book/src/ch03-correlation-wulff.md")]
pub struct Ch03CorrelationWulff;

#[doc = include_str!("../../../book/src/ch04-sampling.md")]
pub struct Ch04Sampling;

#[doc = include_str!("../../../book/src/ch05-decomposition.md")]
pub struct Ch05Decomposition;

#[doc = include_str!("../../../book/src/ch06-sausage.md")]
pub struct Ch06Sausage;

#[doc = include_str!("../../../book/src/ch07-quenched.md")]
pub struct Ch07Quenched;

#[doc = include_str!("../../../book/src/ch08-cli.md")]
pub struct Ch08Cli;
