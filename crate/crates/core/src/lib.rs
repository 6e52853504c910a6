//! Evidential multi-view learning with Hölder-divergence regularisation.
//!
//! Each view gets a network whose non-negative outputs are the evidence of a
//! Dirichlet over class probabilities. Per-view Dirichlets become
//! subjective-logic opinions, are fused with the reduced Dempster-Shafer
//! rule, and the whole model is trained against an expected cross-entropy
//! plus a divergence that pulls misleading evidence towards the uniform
//! prior. A scalar Kalman filter can smooth the fused confidence stream at
//! inference time.

pub mod dirichlet;
pub mod divergence;
pub mod error;
pub mod evidence;
pub mod kalman;
pub mod model;
pub mod special;

pub use dirichlet::{log_normalizer, DirichletParams, NaturalParams};
pub use divergence::{kl_dirichlet, phd_closed, phd_mc_oracle, phd_symmetric, HolderConfig, McEstimate};
pub use error::{Error, Result};
pub use evidence::{Bpa, EvidenceVector, Opinion};
pub use kalman::{KalmanConfig, KalmanState};
