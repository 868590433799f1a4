//! Multi-objective, credit-guided evolutionary search over residual dense
//! block networks for image super-resolution.
//!
//! * [`genome`]: block search space, chromosome validation and encodings.
//! * [`cost_model`]: exact parameter / FLOPs accounting.
//! * [`credit`]: block credit matrix and guided-mutation probabilities.
//! * [`objectives`]: Pareto and constrained ranking.
//! * [`evaluator`]: fitness contract, surrogate and external backends.
//! * [`evolution`]: the generational search loop.
//! * [`persistence`]: configs, checkpoints and report files.

pub mod cost_model;
pub mod credit;
pub mod evaluator;
pub mod evolution;
pub mod genome;
pub mod objectives;
pub mod persistence;
