//! Aggregates per-example input-salience maps into fixed-length vectors and
//! runs clustering, neighbor search, t-SNE and term-sensitivity analyses over
//! them. Everything here is `no_std` with `alloc`; file formats, the HTTP
//! service and the CLI live in the `salience` crate.
//!
//! ```
//! use salience_core::corpus::{Corpus, Example, Vocabulary};
//! use salience_core::represent::build_s1_vocab;
//!
//! let ex = Example::annotated("e0", &["a", "b", "a"], 0, vec![1.0, 0.0], vec![0.3, -0.4, -0.6]);
//! let corpus = Corpus::new("demo", vec![ex]).unwrap();
//! let vocab = Vocabulary::from_corpus::<&str>(&corpus, &[], &[]).unwrap();
//! let rep = build_s1_vocab(&corpus, &vocab, 1).unwrap();
//! assert_eq!(rep.rows[0].to_dense(2), vec![-1.0, 0.0]);
//! ```
#![no_std]

extern crate alloc;

pub mod analyze;
pub mod corpus;
pub mod numeric;
pub mod represent;
pub mod rng;
pub mod sensitivity;
pub mod synthetic;
