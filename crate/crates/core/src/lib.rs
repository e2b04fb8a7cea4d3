//! Truncated and sketched Krylov methods for approximating the action of a
//! matrix function, `f(A)b`, on large sparse nonsymmetric matrices.
//!
//! The crate is organized in layers:
//!
//! * [`sparse`] — CSR storage, matrix-vector products, test-matrix generators
//!   and Matrix Market I/O.
//! * [`dense`] — dense kernels for the small reduced matrices: QR with column
//!   updates, a Hessenberg eigensolver, real Schur form, the matrix
//!   exponential, divided differences and the field-of-values boundary.
//! * [`sketch`] — oblivious subspace embeddings (Gaussian, sparse sign,
//!   subsampled randomized DCT) and empirical distortion measurement.
//! * [`krylov`] — the truncated Arnoldi process, the sketched Arnoldi
//!   relation with incrementally maintained QR factors of the sketched basis,
//!   and comparison quantities against a fully orthonormal basis.
//! * [`matfun`] — the f(A)b approximants (full, truncated and sketched FOM in
//!   its several formulations) and rank-one-update diagnostics relating them.

pub mod dense;
pub mod error;
pub mod func;
pub mod krylov;
pub mod matfun;
pub mod sketch;
pub mod sparse;

pub use error::{Error, Result};
