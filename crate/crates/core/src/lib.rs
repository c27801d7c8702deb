//! Numerical calculus of weight sequences and weight functions, and the
//! holomorphic-approximation division pipeline built on top of it.
//!
//! The crate is organised around a handful of domain objects:
//!
//! * [`seqcore`] — weight sequences `M`, their log-domain views `m`, `μ`,
//!   regularity certificates, the associated decay function `h_m` with its
//!   counting functions, moderate-growth constants and pairwise relations.
//! * [`wfun`] — sampled weight functions `ω`, Young conjugates, associated
//!   weight matrices `Ω^x`, and the `ω̃` interpolation construction.
//! * [`construct`] — constructive sequence lemmas: the `L ◁ M` reduction,
//!   intersectability tests, the `Q` families, `N′`, derivative-bound
//!   sequences and Frobenius coverings.
//! * [`cplane`] — ellipse domains `Ω_ε`, grid functions, the Wirtinger
//!   `∂̄` operator and the Cauchy-transform `∂̄` solver.
//! * [`approx`] — almost analytic extension, forward holomorphic
//!   approximation, the three-lines shrink and the inverse (Cauchy
//!   estimate) direction.
//! * [`divide`] — the division engine recovering `f` from holomorphic
//!   approximations of `f^j` and `f^{j+1}`, with per-ε measured bounds.
//!
//! All sequence arithmetic is carried out in the log domain; every
//! asymptotic verdict is a finite-truncation verdict whose extrapolation
//! rule is documented on the operation that produces it.

pub mod approx;
pub mod builtins;
pub mod check;
pub mod construct;
pub mod cplane;
pub mod divide;
pub mod logdom;
pub mod seqcore;
pub mod tol;
pub mod wfun;

mod error;
mod pool;

pub use error::Error;
pub use pool::worker_pool;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
