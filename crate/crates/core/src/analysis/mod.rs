//! Energy functionals, stability constants, trajectory audits and the
//! auxiliary elliptic problem.

pub mod certificate;
pub mod elliptic;
pub mod functionals;

pub use certificate::{
    decay_certificate, decay_certificate_for, dissipation_audit, DecayCertificate, DissipationAudit,
};
pub use elliptic::{elliptic_gamma, power_law_solution, solve_auxiliary_elliptic, EllipticReport};
pub use functionals::{
    c7, choose_epsilon, energy, energy_of, lyapunov, lyapunov_params_or_sandwich, lyapunov_perturbation, m_tilde,
    LyapunovParams,
};
