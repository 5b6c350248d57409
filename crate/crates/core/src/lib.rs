//! Twisted products of Finsler metrics.
//!
//! A twisted product glues two Finsler manifolds `(M1, F1)` and `(M2, F2)`
//! through a positive function `f(x, u)` into
//! `F = sqrt(F1^2 + f^2 F2^2)`. This crate evaluates the closed-form
//! expressions of its geometric objects ([`twisted`]) and checks each of
//! them against a general finite-difference engine ([`finsler`]) applied
//! to the assembled metric. All arithmetic runs in double-double precision
//! ([`Real`]) so that nested numerical derivatives stay accurate.

pub mod classify;
pub mod diffkit;
pub mod error;
pub mod finsler;
pub mod metrics;
pub mod real;
pub mod sampling;
pub mod tensor;
pub mod twisted;
pub mod verify;

pub use classify::{ClassificationReport, ClassifyOptions, Verdict};
pub use diffkit::DiffConfig;
pub use error::{Error, Result};
pub use finsler::{FinslerPoint, MetricEvaluator, NumericPlan, TangentSample};
pub use metrics::{catalog, catalog_entry, MetricSpec, ProductSpec, TwistSpec};
pub use real::Real;
pub use sampling::ChartBox;
pub use tensor::Tensor;
pub use twisted::{BlockTensor, Slot, TwistFunction, TwistedPoint, TwistedProduct};
pub use verify::{VerificationReport, VerifyOptions, SCHEMA_VERSION};
