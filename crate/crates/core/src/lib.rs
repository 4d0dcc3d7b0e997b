//! Simulation and verification tools for a degenerate wave equation on
//! `(0, 1)` with a time-varying delay in the boundary feedback at `x = 1`:
//!
//! `u_tt - (a(x) u_x)_x = 0`,
//! `mu1 u_t(t, 1) + mu2 u_t(t - tau(t), 1) + u_x(t, 1) + beta u(t, 1) = 0`.

// `!(x <= y)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod delay_channel;
pub mod error;
pub mod mesh;
pub mod model;
pub mod operator_checks;
pub mod stepper;
pub mod tridiag;

pub use analysis::{
    choose_epsilon, decay_certificate_for, dissipation_audit, m_tilde, DecayCertificate, DissipationAudit,
    EllipticReport, LyapunovParams,
};
pub use config::{RunConfig, Setup, SCENARIOS};
pub use delay_channel::{channel_crosscheck, init_channel, HistoryBuffer, TransportChannel};
pub use error::{Error, Result};
pub use mesh::{assemble_operators, build_mesh, weighted_norms, DiscreteOperators, Mesh, WeightedNorms};
pub use model::{
    coefficient_constants, degeneracy_mu_a, feedback_margins, make_coefficient, make_delay, BcKind, CoefficientKind,
    CoefficientSpec, DelayKind, DelaySpec, FeedbackMargins, GainSet, StructuralConstants,
};
pub use stepper::{init_state, run, run_config, EnergySample, SimState, Snapshot, Stepper, Trajectory};
