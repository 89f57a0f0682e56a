pub mod cli;
pub mod driver;
pub mod evaluation;
pub mod metrics;
pub mod moea;
pub mod rng;
pub mod space;
pub mod surrogates;
