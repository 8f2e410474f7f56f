//! AC optimal power flow on mesh networks through a tightened second-order
//! cone relaxation and a penalty convex-concave recovery loop.
//!
//! The pipeline is:
//!
//! 1. [`case::parse_case`] reads a MATPOWER case into a per-unit [`case::NetworkCase`].
//! 2. [`relaxation::build_socpt`] assembles the tightened SOCP relaxation
//!    (cone, trigonometric envelopes, McCormick envelopes) as a
//!    [`conic::ConicProgram`].
//! 3. [`acp::run_acp`] starts from the relaxation optimum and repeatedly
//!    solves a slacked convex restriction of the difference-of-convex
//!    formulation until the slacks vanish.
//! 4. [`verify`] checks the recovered point against the original nonconvex
//!    constraints and with a Newton-Raphson power flow.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acp;
pub mod case;
pub mod conic;
pub mod par;
pub mod pipeline;
pub mod relaxation;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Case(#[from] case::CaseError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error(transparent)]
    Acp(#[from] acp::AcpError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error("cannot read {}: {error}", path.display())]
    Io { path: std::path::PathBuf, error: std::io::Error },
    #[error("invalid run specification: {0}")]
    Spec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
