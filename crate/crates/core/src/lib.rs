pub mod artifact;
pub mod bench;
pub mod cli;
pub mod compare;
pub mod error;
pub mod inla;
pub mod lincomb;
pub mod mcmc;
pub mod model;
pub mod precision;
pub mod rng;
pub mod sampler;
pub mod sgc;
pub mod skewnormal;
pub mod special;

pub use error::{Error, Result};
