//! Sequence analytics for coded student-AI programming dialogues.
//!
//! The crate covers the whole quantitative path from coded messages to
//! group comparisons:
//!
//! - [`corpus`]: coded-turn and grade ingestion, quartile stratification
//! - [`codes`]: element-to-type aggregation rules and Cohen's kappa
//! - [`htna`]: heterogeneous first-order transition networks
//! - [`stats`]: permutation tests, Pearson residuals, n-gram pattern tests
//! - [`regress`]: per-student feature proportions, OLS and VIF filtering

pub mod codes;
pub mod corpus;
pub mod htna;
pub mod regress;
pub mod stats;
