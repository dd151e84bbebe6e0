//! Markov (exponential) random graph distributions on small host graphs,
//! their multiaffine generating polynomials, and tests for negative
//! dependence: strongly Rayleigh / real stability and the Lorentzian
//! property. Also includes Glauber-dynamics sampling and moment-matching
//! parameter fits for observed networks.

pub mod datasets;
pub mod error;
pub mod genpoly;
pub mod graph;
pub mod inference;
pub mod lorentzian;
pub mod model;
pub mod stability;

pub use error::{Error, Result};
pub use genpoly::{generating_polynomial, homog_partial, homogenize, HomogPoly, MultiAffinePoly};
pub use graph::{Density, EdgeSubset, Graph, Motif, SubgraphStats};
pub use model::{
    bernoulli_distribution, markov_distribution, BernoulliParams, Distribution, MarkovParams, StarBound,
};
