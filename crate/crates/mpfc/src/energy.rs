//! Discrete free energy of the phase field crystal functional, the pseudo
//! energy of its damped-wave (MPFC) flow, and the exact per-step dissipation
//! identity the time stepper is held to.
//!
//! The free energy of a field `phi` is
//!
//! ```text
//! F(phi) = 1/4 |phi|_4^4 + alpha/2 |phi|_2^2 - |grad phi|_2^2 + 1/2 |lap phi|_2^2
//! ```
//!
//! The damped-wave flow additionally carries the kinetic term
//! `beta/2 * |psi|_{-1}^2` for the velocity `psi = phi_t` (pseudo energy),
//! and the two-step scheme controls the extrapolation lag through
//! `1/2 |grad(phi_k - phi_km1)|_2^2` (modified pseudo energy). Each accepted
//! step obeys
//!
//! ```text
//! modified(k+1) + s |psi_half|_{-1}^2 + 1/2 |grad(phi_next - 2 phi_k + phi_km1)|_2^2
//!   = modified(k)
//! ```
//!
//! exactly in exact arithmetic; [`dissipation_identity_residual`] evaluates
//! the left minus right side so runs can be audited step by step.

use crate::error::Error;
use crate::grid::{GridFunction, Params};
use crate::norms::{self, MeanZeroField, PoissonSolver};
use crate::ops;

/// Every term of the modified pseudo energy, evaluated on one scheme state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `1/4 |phi|_4^4`.
    pub quartic: f64,
    /// `alpha/2 |phi|_2^2`.
    pub quadratic: f64,
    /// `-|grad phi|_2^2` (the concave contribution, stored signed).
    pub gradient: f64,
    /// `1/2 |lap phi|_2^2`.
    pub biharmonic: f64,
    /// Free energy: sum of the four terms above.
    pub f: f64,
    /// `beta/2 |psi|_{-1}^2`.
    pub kinetic: f64,
    /// `1/2 |grad(phi - phi_prev)|_2^2`.
    pub lag: f64,
    /// `f + kinetic`.
    pub pseudo: f64,
    /// `pseudo + lag`.
    pub modified: f64,
}

/// Free energy `F(phi)`.
pub fn discrete_energy(phi: &GridFunction, params: &Params) -> f64 {
    let (quartic, quadratic, gradient, biharmonic) = free_energy_parts(phi, params);
    quartic + quadratic + gradient + biharmonic
}

fn free_energy_parts(phi: &GridFunction, params: &Params) -> (f64, f64, f64, f64) {
    let n4 = norms::norm4(phi);
    let n2sq = phi.dot(phi);
    let grad_sq = ops::gradient(phi).norm2_sq();
    let lap = ops::laplacian(phi);
    (
        0.25 * n4 * n4 * n4 * n4,
        0.5 * params.alpha * n2sq,
        -grad_sq,
        0.5 * lap.dot(&lap),
    )
}

/// Pseudo energy `F(phi) + beta/2 |psi|_{-1}^2`.
pub fn pseudo_energy(
    phi: &GridFunction,
    psi: &MeanZeroField,
    params: &Params,
    poisson: &PoissonSolver,
) -> Result<f64, Error> {
    Ok(discrete_energy(phi, params) + kinetic_term(psi, params, poisson)?)
}

fn kinetic_term(psi: &MeanZeroField, params: &Params, poisson: &PoissonSolver) -> Result<f64, Error> {
    if params.beta == 0.0 {
        return Ok(0.0);
    }
    let nm1 = poisson.norm_minus1(psi)?;
    Ok(0.5 * params.beta * nm1 * nm1)
}

/// Lag penalty `1/2 |grad(phi - phi_prev)|_2^2` of the two-step history.
pub fn lag_term(phi: &GridFunction, phi_prev: &GridFunction) -> f64 {
    0.5 * ops::gradient(&GridFunction::lin_comb(1.0, phi, -1.0, phi_prev)).norm2_sq()
}

/// Modified pseudo energy: pseudo energy plus the lag penalty.
pub fn modified_pseudo_energy(
    phi: &GridFunction,
    phi_prev: &GridFunction,
    psi: &MeanZeroField,
    params: &Params,
    poisson: &PoissonSolver,
) -> Result<f64, Error> {
    Ok(pseudo_energy(phi, psi, params, poisson)? + lag_term(phi, phi_prev))
}

/// Full termwise evaluation on the state `(phi, phi_prev, psi)`.
pub fn breakdown(
    phi: &GridFunction,
    phi_prev: &GridFunction,
    psi: &MeanZeroField,
    params: &Params,
    poisson: &PoissonSolver,
) -> Result<EnergyBreakdown, Error> {
    let (quartic, quadratic, gradient, biharmonic) = free_energy_parts(phi, params);
    let f = quartic + quadratic + gradient + biharmonic;
    let kinetic = kinetic_term(psi, params, poisson)?;
    let lag = lag_term(phi, phi_prev);
    Ok(EnergyBreakdown {
        quartic,
        quadratic,
        gradient,
        biharmonic,
        f,
        kinetic,
        lag,
        pseudo: f + kinetic,
        modified: f + kinetic + lag,
    })
}

/// Left minus right side of the per-step dissipation identity for the
/// transition `(phi_k, phi_km1, psi_k) -> (phi_next, phi_k, psi_next)`.
///
/// Zero in exact arithmetic for fields produced by the scheme; in practice
/// bounded by the nonlinear solve tolerance and roundoff.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_identity_residual(
    phi_next: &GridFunction,
    phi_k: &GridFunction,
    phi_km1: &GridFunction,
    psi_next: &MeanZeroField,
    psi_k: &MeanZeroField,
    params: &Params,
    poisson: &PoissonSolver,
) -> Result<f64, Error> {
    let modified_next = modified_pseudo_energy(phi_next, phi_k, psi_next, params, poisson)?;
    let modified_prev = modified_pseudo_energy(phi_k, phi_km1, psi_k, params, poisson)?;
    let (dissip_minus1, dissip_lag) = dissipation_terms(
        phi_next, phi_k, phi_km1, psi_next, psi_k, params, poisson,
    )?;
    Ok(modified_next + dissip_minus1 + dissip_lag - modified_prev)
}

/// The two nonnegative dissipation terms of the identity:
/// `s |psi_half|_{-1}^2` and `1/2 |grad(phi_next - 2 phi_k + phi_km1)|_2^2`.
pub fn dissipation_terms(
    phi_next: &GridFunction,
    phi_k: &GridFunction,
    phi_km1: &GridFunction,
    psi_next: &MeanZeroField,
    psi_k: &MeanZeroField,
    params: &Params,
    poisson: &PoissonSolver,
) -> Result<(f64, f64), Error> {
    let psi_half = GridFunction::lin_comb(0.5, psi_next.get(), 0.5, psi_k.get());
    let psi_half_mz = MeanZeroField::new(&psi_half)?;
    let nm1 = poisson.norm_minus1(&psi_half_mz)?;
    let second_diff = phi_next
        .zip_map(phi_k, |a, b| a - 2.0 * b)
        .zip_map(phi_km1, |a, c| a + c);
    let lag4 = 0.5 * ops::gradient(&second_diff).norm2_sq();
    Ok((params.s * nm1 * nm1, lag4))
}
