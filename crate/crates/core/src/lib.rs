//! Random walks on concrete word-hyperbolic groups: Green functions,
//! harmonic measure, pressure curves and multifractal spectra.
//!
//! The crate computes, for finitely supported admissible step distributions
//! on free groups and free products of finite cyclic groups (plus generic
//! rewriting models):
//!
//! - first-passage probabilities and Green functions, exactly on tree-like
//!   models and by truncated solves / Monte Carlo elsewhere ([`green`]);
//! - drift, entropy (Green-speed and convolution estimators) and the
//!   fundamental-inequality verdict h <= l v ([`walk`]);
//! - the pressure curve beta(theta) of Green-weighted sphere sums, both
//!   directly and as the leading eigenvalue of a weighted transfer operator
//!   on a strongly Markov automatic structure, together with its Legendre
//!   transform, the Hausdorff spectrum of the harmonic measure ([`thermo`],
//!   [`automaton`]);
//! - Gibbs-property and stationarity diagnostics for boundary measures
//!   ([`boundary`]);
//! - finitary hitting and confinement experiments ([`experiment`]).

pub mod automaton;
pub mod boundary;
pub mod error;
pub mod experiment;
pub mod green;
pub mod group;
pub mod rng;
pub mod thermo;
pub mod walk;

pub use error::{Error, Result};
pub use group::{Element, GroupModel, ModelKind, ShadowSpec};
pub use rng::Rng;
