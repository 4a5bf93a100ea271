//! Two-sided localization of the log-likelihood of latent-ordering models.
//!
//! Any-order autoregressive models (AO-ARMs) and masked diffusion models
//! (MDMs) define `p(x) = E_π[p(x | π)]` over a latent generation ordering
//! `π`, so their log-likelihood is intractable beyond toy scales. This crate
//! pairs the multi-sample lower bound `ELBO_K` with the tangent upper bound
//! `TUBE_ψ(x) = log ψ(x) + (p(x) − ψ(x)) / ψ(x)`, whose Monte Carlo estimator
//! is unbiased at every sample size, and compares it against CUBO_β, TVO_U and
//! IS-VG-B. Everything runs on tabular conditional models small enough to be
//! checked against exact enumeration.
//!
//! Module map:
//!
//! - [`seqspace`]: sequence spaces, single and grouped orderings, block layouts.
//! - [`models`]: tabular conditional models, ground-truth joints, exact likelihoods.
//! - [`estimators`]: ELBO, ELBO_K, TUBE, CUBO, TVO_U, IS-VG-B and their population values.
//! - [`experiments`]: comparison tables, CUBO sweeps, surrogate ablations, replicate studies.
//! - [`cli`]: configuration, file formats and the commands behind the `tube` binary.

// `!(x >= 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod logspace;
pub mod models;
pub mod rng;
pub mod seqspace;
pub mod toy;

pub use error::{Error, Result};
