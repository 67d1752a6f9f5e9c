//! Multi-user sparse-regression LDPC codes.
//!
//! This crate implements the full pipeline for coordinated multi-user
//! communication with concatenated codes: a non-binary LDPC outer code over
//! GF(2^p), a sparse-regression inner code with per-user Gaussian sensing
//! matrices, joint AMP-BP decoding by coded demixing over the Gaussian
//! multiple access channel (single-cell and cell-free topologies), and a
//! seeded Monte-Carlo harness for BER sweeps.
//!
//! Module map:
//! - [`galois`]: GF(2^p) tables and arithmetic
//! - [`nbldpc`]: non-binary LDPC construction, encoding, and the BP engine
//! - [`sparc`]: one-hot indexing, sensing matrices, hard-decision readout
//! - [`channel`]: GMAC / cell-free AWGN models, Eb/N0 and rate bookkeeping
//! - [`amp`]: the AMP-BP joint decoder with Onsager correction and optimal
//!   per-AP combining
//! - [`harness`]: experiment configuration, trials, sweeps, and emission

pub mod amp;
pub mod channel;
pub mod galois;
pub mod harness;
pub mod nbldpc;
pub mod sectional;
pub mod seeding;
pub mod sparc;

pub use galois::FieldTable;
pub use nbldpc::LdpcCode;
pub use sectional::SectionalVector;
pub use sparc::SensingMatrix;
