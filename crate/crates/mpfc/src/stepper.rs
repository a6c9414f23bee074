//! Second-order convex-splitting time stepper for the damped-wave phase
//! field crystal flow.
//!
//! With `phi` the density, `psi` its time rate, step size `s`, and
//! `gamma = 1 + 2 beta / s`, each step solves the single implicit equation
//!
//! ```text
//! gamma * phi_next - s * lap(mu_half(phi_next)) = gamma * phi_k + 2 beta * psi_k
//! ```
//!
//! where the midpoint chemical potential combines a secant treatment of the
//! quartic term, trapezoidal treatments of the stabilizing linear terms, and
//! an explicit two-step extrapolation of the destabilizing one:
//!
//! ```text
//! mu_half = chi(phi_next, phi_k) + alpha * mid + 2 lap(extrap) + lap^2(mid)
//! mid     = (phi_next + phi_k) / 2
//! extrap  = (3 phi_k - phi_km1) / 2
//! chi(u, v) = ((u^2 + v^2)/2) * ((u + v)/2)        (chi(u, u) = u^3)
//! ```
//!
//! The rate then updates by `psi_next = (2/s)(phi_next - phi_k) - psi_k`,
//! which makes `phi_next - phi_k = s * (psi_next + psi_k)/2` hold exactly and
//! reproduces the coupled two-equation form of the scheme to solver
//! tolerance. The step conserves the mean of `phi` and dissipates the
//! modified pseudo energy unconditionally; see [`crate::energy`] for the
//! identity each step is audited against.
//!
//! The nonlinear equation is solved by Newton iteration with a restarted
//! GMRES linear solver. The Jacobian
//!
//! ```text
//! J(u) v = gamma v - s lap( (dchi/du + alpha/2) v + 1/2 lap^2 v )
//! ```
//!
//! is preconditioned by freezing the pointwise factor `dchi/du >= 0` at its
//! spatial mean `cbar`, which turns the operator into a pure Fourier symbol
//!
//! ```text
//! P(k, l) = gamma + s lam (cbar + alpha/2) + (s/2) lam^3,   lam = lam(k, l) >= 0,
//! ```
//!
//! strictly positive, inverted by two FFTs per application.

use crate::energy::{self, EnergyBreakdown};
use crate::error::Error;
use crate::grid::{GridFunction, Params};
use crate::krylov::{gmres, GmresOptions};
use crate::norms::{self, MeanZeroField, PoissonSolver};
use crate::ops;
use crate::spectral::{neg_laplacian_symbol, Fft2};

/// Two-step history of the scheme at time `step * s`.
#[derive(Debug, Clone)]
pub struct SchemeState {
    /// Current density `phi^k`.
    pub phi: GridFunction,
    /// Previous density `phi^{k-1}` (equal to `phi` at initialization).
    pub phi_prev: GridFunction,
    /// Current rate `psi^k`, mean-zero (zero at initialization).
    pub psi: GridFunction,
    /// Step index `k`.
    pub step: usize,
    /// Simulation time `k * s`.
    pub time: f64,
}

/// Outcome of the nonlinear solve inside one step.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    /// Newton iterations taken.
    pub newton_iters: usize,
    /// Final residual in the `h`-weighted 2-norm.
    pub residual: f64,
    /// Residual target `tol_rel * |rhs|_2 + tol_abs`.
    pub target: f64,
    /// Total preconditioned Krylov iterations across all Newton steps.
    pub gmres_iters: usize,
}

/// Diagnostics for one accepted step (describing the new state).
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    /// Index of the new state.
    pub step: usize,
    /// Time of the new state.
    pub time: f64,
    /// Conserved mass `h^2 sum(phi)` of the new state.
    pub mass: f64,
    /// Energy terms of the new state.
    pub energy: EnergyBreakdown,
    /// Left minus right side of the per-step dissipation identity.
    pub dissipation_residual: f64,
    /// Dissipation channel `s |psi_half|_{-1}^2` of this step.
    pub dissipation_minus1: f64,
    /// Dissipation channel `1/2 |grad(phi_next - 2 phi_k + phi_km1)|_2^2`.
    pub dissipation_lag: f64,
    /// Nonlinear solver outcome (all zero for the initial-state report).
    pub solve: SolveReport,
}

impl StepReport {
    /// Column names of the energy-trace CSV.
    pub fn csv_header() -> &'static str {
        "step,time,mass,quartic,quadratic,gradient,biharmonic,F,kinetic,lag,pseudo,modified,dissipation_residual,newton_iters,newton_residual"
    }

    /// One CSV row with floats at full 17-significant-digit precision.
    pub fn to_csv_row(&self) -> String {
        let e = &self.energy;
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            self.step,
            self.time,
            self.mass,
            e.quartic,
            e.quadratic,
            e.gradient,
            e.biharmonic,
            e.f,
            e.kinetic,
            e.lag,
            e.pseudo,
            e.modified,
            self.dissipation_residual,
            self.solve.newton_iters,
            self.solve.residual,
        )
    }
}

/// Secant form of the quartic term's derivative between two states:
/// `chi(u, v) = ((u^2 + v^2)/2) * ((u + v)/2)`, so `chi(u, u) = u^3`.
pub fn chi(u: &GridFunction, v: &GridFunction) -> GridFunction {
    u.zip_map(v, chi_scalar)
}

#[inline]
fn chi_scalar(a: f64, b: f64) -> f64 {
    0.25 * (a * a + b * b) * (a + b)
}

/// Pointwise derivative of `chi` in its first argument:
/// `(3u^2 + 2uv + v^2) / 4`, nonnegative for all real `u, v`.
#[inline]
fn chi_du_scalar(u: f64, v: f64) -> f64 {
    0.25 * (3.0 * u * u + 2.0 * u * v + v * v)
}

/// Two-step extrapolant `(3 phi_k - phi_km1) / 2`, second-order accurate at
/// the midpoint of the coming step.
pub fn extrapolant(phi_k: &GridFunction, phi_km1: &GridFunction) -> GridFunction {
    GridFunction::lin_comb(1.5, phi_k, -0.5, phi_km1)
}

/// Midpoint chemical potential of the scheme for a candidate new state.
pub fn chemical_potential_half(
    phi_next: &GridFunction,
    phi_k: &GridFunction,
    phi_km1: &GridFunction,
    params: &Params,
) -> GridFunction {
    let mid = GridFunction::lin_comb(0.5, phi_next, 0.5, phi_k);
    let nonlinear = chi(phi_next, phi_k);
    let lap_extrap = ops::laplacian(&extrapolant(phi_k, phi_km1));
    let bilap_mid = ops::bilaplacian(&mid);
    let alpha = params.alpha;
    let mut out = nonlinear;
    for idx in 0..out.values().len() {
        let v = alpha * mid.values()[idx] + 2.0 * lap_extrap.values()[idx] + bilap_mid.values()[idx];
        out.values_mut()[idx] += v;
    }
    out
}

/// Residual of the implicit step equation at a candidate `phi_next`.
pub fn step_system_residual(
    candidate: &GridFunction,
    state: &SchemeState,
    params: &Params,
) -> GridFunction {
    let mu = chemical_potential_half(candidate, &state.phi, &state.phi_prev, params);
    let lap_mu = ops::laplacian(&mu);
    let gamma = 1.0 + 2.0 * params.beta / params.s;
    let s = params.s;
    let beta = params.beta;
    let mut out = GridFunction::zeros(candidate.m(), candidate.n(), candidate.h());
    for idx in 0..out.values().len() {
        out.values_mut()[idx] = gamma * (candidate.values()[idx] - state.phi.values()[idx])
            - s * lap_mu.values()[idx]
            - 2.0 * beta * state.psi.values()[idx];
    }
    out
}

/// The time stepper: owns the FFT plans for the preconditioner and the
/// Poisson solver used in energy audits. Immutable after construction.
pub struct Stepper {
    params: Params,
    poisson: PoissonSolver,
    fft: Fft2,
    /// Symbol of the negated 5-point Laplacian.
    lambda: Vec<f64>,
}

impl Stepper {
    pub fn new(params: Params) -> Result<Self, Error> {
        params.validate()?;
        let (m, n, h) = (params.m, params.n, params.h);
        Ok(Stepper {
            poisson: PoissonSolver::new(m, n, h),
            fft: Fft2::new(m, n),
            lambda: neg_laplacian_symbol(m, n, h),
            params,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// The FFT Poisson solver on this grid, for external energy audits.
    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// Initial state: duplicated history and zero rate, so the modified
    /// pseudo energy of the initial state equals the free energy of `phi0`.
    pub fn init(&self, phi0: GridFunction) -> Result<SchemeState, Error> {
        if phi0.m() != self.params.m || phi0.n() != self.params.n {
            return Err(Error::ShapeMismatch {
                expected_m: self.params.m,
                expected_n: self.params.n,
                got_m: phi0.m(),
                got_n: phi0.n(),
            });
        }
        let psi = GridFunction::zeros(phi0.m(), phi0.n(), phi0.h());
        Ok(SchemeState {
            phi_prev: phi0.clone(),
            phi: phi0,
            psi,
            step: 0,
            time: 0.0,
        })
    }

    /// Diagnostics row for an unstepped state (solver fields zero).
    pub fn initial_report(&self, state: &SchemeState) -> Result<StepReport, Error> {
        let psi = MeanZeroField::new(&state.psi)?;
        let energy = energy::breakdown(&state.phi, &state.phi_prev, &psi, &self.params, &self.poisson)?;
        Ok(StepReport {
            step: state.step,
            time: state.time,
            mass: state.phi.mass(),
            energy,
            dissipation_residual: 0.0,
            dissipation_minus1: 0.0,
            dissipation_lag: 0.0,
            solve: SolveReport {
                newton_iters: 0,
                residual: 0.0,
                target: 0.0,
                gmres_iters: 0,
            },
        })
    }

    /// Solve the implicit equation for `phi_next` from `state`.
    ///
    /// Newton iteration from the extrapolated initial guess
    /// `2 phi_k - phi_km1` (mean-pinned to the conserved mass); each linear
    /// system is solved by right-preconditioned restarted GMRES with the
    /// frozen-coefficient symbol above. Accepts when the `h`-weighted
    /// residual drops below `tol_rel * |rhs|_2 + tol_abs`.
    pub fn solve_step(&self, state: &SchemeState) -> Result<(GridFunction, SolveReport), Error> {
        self.solve_step_from(state, None)
    }

    /// [`Stepper::solve_step`] with an explicit initial guess (used by the
    /// solver-contract checks; `None` selects the extrapolated guess).
    pub fn solve_step_from(
        &self,
        state: &SchemeState,
        guess: Option<&GridFunction>,
    ) -> Result<(GridFunction, SolveReport), Error> {
        let p = &self.params;
        let (m, n) = (p.m, p.n);
        let dim = m * n;
        let gamma = 1.0 + 2.0 * p.beta / p.s;
        let target_mass_mean = state.phi.mean();

        // rhs of the fixed-point form, for the tolerance scale.
        let mut rhs = GridFunction::zeros(m, n, p.h);
        for idx in 0..dim {
            rhs.values_mut()[idx] =
                gamma * state.phi.values()[idx] + 2.0 * p.beta * state.psi.values()[idx];
        }
        let target = p.tol_rel * norms::norm2(&rhs) + p.tol_abs;

        let mut u = match guess {
            Some(g) => {
                state.phi.assert_same_grid(g);
                g.clone()
            }
            None => GridFunction::lin_comb(2.0, &state.phi, -1.0, &state.phi_prev),
        };
        // Pin the guess onto the mass shell; Newton updates stay mean-zero,
        // so the conserved mean survives the whole solve.
        u.shift(target_mass_mean - u.mean());

        let mut residual = step_system_residual(&u, state, p);
        let mut rn = norms::norm2(&residual);
        let mut total_gmres = 0usize;

        let mut work1 = vec![0.0; dim];
        let mut work2 = vec![0.0; dim];
        let mut work3 = vec![0.0; dim];
        let mut spec = Vec::new();
        let mut symbol = vec![0.0; dim];

        for newton in 0..=p.max_newton {
            if rn <= target {
                return Ok((
                    u,
                    SolveReport {
                        newton_iters: newton,
                        residual: rn,
                        target,
                        gmres_iters: total_gmres,
                    },
                ));
            }
            if newton == p.max_newton {
                break;
            }

            // Pointwise Jacobian coefficient and its frozen mean.
            let coeff: Vec<f64> = u
                .values()
                .iter()
                .zip(state.phi.values())
                .map(|(&a, &b)| chi_du_scalar(a, b))
                .collect();
            let cbar = coeff.iter().sum::<f64>() / dim as f64;
            for idx in 0..dim {
                let lam = self.lambda[idx];
                symbol[idx] = gamma + p.s * lam * (cbar + 0.5 * p.alpha) + 0.5 * p.s * lam * lam * lam;
            }

            let half_alpha = 0.5 * p.alpha;
            let s = p.s;
            let apply_j = |v: &[f64], out: &mut [f64]| {
                ops::laplacian_flat(m, n, p.h, v, &mut work1);
                ops::laplacian_flat(m, n, p.h, &work1, &mut work2);
                for idx in 0..dim {
                    work3[idx] = (coeff[idx] + half_alpha) * v[idx] + 0.5 * work2[idx];
                }
                ops::laplacian_flat(m, n, p.h, &work3, &mut work1);
                for idx in 0..dim {
                    out[idx] = gamma * v[idx] - s * work1[idx];
                }
            };
            let apply_precond = |v: &[f64], out: &mut [f64]| {
                self.fft.forward(v, &mut spec);
                for (c, &sym) in spec.iter_mut().zip(&symbol) {
                    *c /= sym;
                }
                self.fft.inverse_real(&mut spec, out);
            };

            // Absolute linear accuracy pegged below the Newton target keeps
            // the final iterate from stalling above it.
            let lin_tol = (0.3 * target / rn).clamp(1e-12, 1e-2);
            let mut delta = vec![0.0; dim];
            let outcome = gmres(
                apply_j,
                apply_precond,
                residual.values(),
                &mut delta,
                &GmresOptions {
                    restart: 50,
                    max_iters: 400,
                    rel_tol: lin_tol,
                },
            );
            total_gmres += outcome.iters;
            if !outcome.converged && !outcome.rel_residual.is_finite() {
                // A non-finite linear residual means the iterate already
                // carries NaN or Inf; backtracking cannot recover from that.
                return Err(Error::SolverDiverged {
                    iters: newton,
                    residual: rn,
                    target,
                });
            }

            // Project the update onto the mean-zero shell (the exact Newton
            // step lies there; inexact linear solves leave roundoff-scale
            // mean components that would otherwise leak into the mass).
            let dmean = delta.iter().sum::<f64>() / dim as f64;
            for d in &mut delta {
                *d -= dmean;
            }

            // Damped acceptance: full step first, halved until the residual
            // decreases (the system is strictly monotone, so this terminates
            // away from pathological states).
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let mut trial = u.clone();
                for idx in 0..dim {
                    trial.values_mut()[idx] -= scale * delta[idx];
                }
                let trial_residual = step_system_residual(&trial, state, p);
                let trial_rn = norms::norm2(&trial_residual);
                if trial_rn <= target || trial_rn < rn * (1.0 - 1e-4 * scale) {
                    u = trial;
                    residual = trial_residual;
                    rn = trial_rn;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(Error::SolverDiverged {
                    iters: newton,
                    residual: rn,
                    target,
                });
            }
        }
        Err(Error::SolverDiverged {
            iters: self.params.max_newton,
            residual: rn,
            target,
        })
    }

    /// Advance one step without the energy audit (refinement studies step
    /// many thousands of times and compare fields only).
    pub fn advance_unaudited(&self, state: &SchemeState) -> Result<(SchemeState, SolveReport), Error> {
        let (phi_next, psi_next, solve) = self.advance_fields(state)?;
        let step = state.step + 1;
        Ok((
            SchemeState {
                phi_prev: state.phi.clone(),
                phi: phi_next,
                psi: psi_next,
                step,
                time: step as f64 * self.params.s,
            },
            solve,
        ))
    }

    fn advance_fields(
        &self,
        state: &SchemeState,
    ) -> Result<(GridFunction, GridFunction, SolveReport), Error> {
        let p = &self.params;
        let (mut phi_next, solve) = self.solve_step(state)?;
        // Re-pin the conserved mean (Newton leaves roundoff-scale drift).
        phi_next.shift(state.phi.mean() - phi_next.mean());

        // psi update consistent with the coupled two-equation form; its mean
        // is analytically zero, so strip the roundoff component.
        let two_over_s = 2.0 / p.s;
        let mut psi_next = GridFunction::zeros(p.m, p.n, p.h);
        for idx in 0..p.m * p.n {
            psi_next.values_mut()[idx] = two_over_s
                * (phi_next.values()[idx] - state.phi.values()[idx])
                - state.psi.values()[idx];
        }
        psi_next.shift(-psi_next.mean());
        Ok((phi_next, psi_next, solve))
    }

    /// Advance one step, returning the new state and its diagnostics.
    pub fn advance(&self, state: &SchemeState) -> Result<(SchemeState, StepReport), Error> {
        let p = &self.params;
        let (phi_next, psi_next, solve) = self.advance_fields(state)?;
        let psi_next_mz = MeanZeroField::new(&psi_next)?;
        let psi_k_mz = MeanZeroField::new(&state.psi)?;
        let energy_next = energy::breakdown(&phi_next, &state.phi, &psi_next_mz, p, &self.poisson)?;
        let (dissip_minus1, dissip_lag) = energy::dissipation_terms(
            &phi_next,
            &state.phi,
            &state.phi_prev,
            &psi_next_mz,
            &psi_k_mz,
            p,
            &self.poisson,
        )?;
        let modified_prev =
            energy::modified_pseudo_energy(&state.phi, &state.phi_prev, &psi_k_mz, p, &self.poisson)?;
        let dissipation_residual =
            energy_next.modified + dissip_minus1 + dissip_lag - modified_prev;

        let step = state.step + 1;
        let time = step as f64 * p.s;
        let report = StepReport {
            step,
            time,
            mass: phi_next.mass(),
            energy: energy_next,
            dissipation_residual,
            dissipation_minus1: dissip_minus1,
            dissipation_lag: dissip_lag,
            solve,
        };
        let next = SchemeState {
            phi_prev: state.phi.clone(),
            phi: phi_next,
            psi: psi_next,
            step,
            time,
        };
        Ok((next, report))
    }

    /// `h`-weighted residual norms of the coupled two-equation form of the
    /// scheme across the transition `state -> next`:
    ///
    /// ```text
    /// eq_rate:    beta (psi_next - psi_k) - s lap(mu_half) + s psi_half
    /// eq_density: phi_next - phi_k - s psi_half
    /// ```
    ///
    /// Both vanish for exact solves; the first carries the nonlinear solver
    /// tolerance, the second only roundoff.
    pub fn coupled_residuals(&self, state: &SchemeState, next: &SchemeState) -> (f64, f64) {
        let p = &self.params;
        let mu = chemical_potential_half(&next.phi, &state.phi, &state.phi_prev, p);
        let lap_mu = ops::laplacian(&mu);
        let dim = p.m * p.n;
        let mut eq_rate = GridFunction::zeros(p.m, p.n, p.h);
        let mut eq_density = GridFunction::zeros(p.m, p.n, p.h);
        for idx in 0..dim {
            let psi_half = 0.5 * (next.psi.values()[idx] + state.psi.values()[idx]);
            eq_rate.values_mut()[idx] = p.beta
                * (next.psi.values()[idx] - state.psi.values()[idx])
                - p.s * lap_mu.values()[idx]
                + p.s * psi_half;
            eq_density.values_mut()[idx] =
                next.phi.values()[idx] - state.phi.values()[idx] - p.s * psi_half;
        }
        (norms::norm2(&eq_rate), norms::norm2(&eq_density))
    }
}
