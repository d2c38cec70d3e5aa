//! Automatic parameter configuration for command-line programs.
//!
//! A [`paramspace::ParameterSpace`] declares the tunable flags of a target
//! program. The [`runner`] executes the target under a CPU-time cutoff,
//! [`objective`] turns runs into penalized average runtime (PAR-k) scores,
//! and [`configure`] searches the space with random search or a
//! random-forest guided optimizer. [`refine`] hardens a draft space from crash
//! scans, [`ablation`] explains an optimized configuration, and [`report`]
//! runs multi-seed campaigns and validation.

pub mod ablation;
pub mod configure;
pub mod history;
pub mod objective;
pub mod paramspace;
pub mod refine;
pub mod report;
pub mod runner;
