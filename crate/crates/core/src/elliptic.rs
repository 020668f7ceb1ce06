//! The discrete elliptic operator and its inverse.
//!
//! `A u = -eps^2 lap u + c u` with the second-order central-difference
//! Laplacian. The stencil is an M-matrix: off-diagonal entries are
//! nonpositive and the diagonal dominates, which gives a discrete maximum
//! principle — inverting a nonnegative right-hand side produces a nonnegative
//! solution up to solver tolerance. That pointwise positivity is the
//! structural property the cone-invariance of the flow rests on, and the
//! reason the Laplacian is a difference stencil rather than a spectral
//! derivative here.
//!
//! The solve is plain conjugate gradients on the symmetric positive-definite
//! operator; coefficients are constant on flat tori, so diagonal
//! preconditioning would only rescale the iteration.

use crate::error::{Error, Result};
use crate::field::{laplace, EpsParams, Field};

/// Hard cap on conjugate-gradient iterations before reporting failure.
pub const MAX_CG_ITERATIONS: usize = 20_000;

/// Outcome bookkeeping of one linear solve.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// Final operator-equation residual in the eps-weighted 2-norm, relative
    /// to the right-hand side.
    pub final_residual: f64,
    pub converged: bool,
}

/// Applies `A u = -eps^2 lap u + c u`.
pub fn apply_operator(u: &Field, params: &EpsParams) -> Field {
    let lap = laplace(u);
    let eps2 = params.eps() * params.eps();
    let c = params.coeff();
    let values = u
        .values()
        .iter()
        .zip(lap.values())
        .map(|(&ui, &li)| -eps2 * li + c * ui)
        .collect();
    Field::from_parts(u.manifold().clone(), values)
}

/// Solves `A u = phi` to relative residual `tol`, starting from zero.
///
/// The map `phi -> u` is the discrete solution operator; composing it with
/// the nonlinearity `phi = |u|^{p-2} u` gives `K(u)`, see [`k_eps`].
pub fn solve_k(phi: &Field, params: &EpsParams, tol: f64) -> Result<(Field, LinearSolveReport)> {
    solve_k_with_guess(phi, params, tol, None)
}

/// Same as [`solve_k`], warm-started from `guess` when provided. Useful in
/// flow loops where consecutive right-hand sides differ little.
pub fn solve_k_with_guess(
    phi: &Field,
    params: &EpsParams,
    tol: f64,
    guess: Option<&Field>,
) -> Result<(Field, LinearSolveReport)> {
    assert!(tol > 0.0, "solver tolerance must be positive");
    let b_norm2: f64 = phi.values().iter().map(|&v| v * v).sum();
    if b_norm2 == 0.0 {
        return Ok((
            Field::zeros(phi.manifold().clone()),
            LinearSolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }
    let b_norm = b_norm2.sqrt();

    let mut x = match guess {
        Some(g) => g.clone(),
        None => Field::zeros(phi.manifold().clone()),
    };
    let mut r = if guess.is_some() {
        let ax = apply_operator(&x, params);
        phi - &ax
    } else {
        phi.clone()
    };
    let mut p = r.clone();
    let mut rs: f64 = r.values().iter().map(|&v| v * v).sum();

    let mut iterations = 0;
    let mut restarts = 0;
    let mut last_fresh = f64::INFINITY;
    while iterations < MAX_CG_ITERATIONS {
        if rs.sqrt() <= tol * b_norm {
            // The recurrence residual can drift from the true one; accept
            // only on a fresh residual, restarting otherwise.
            let ax = apply_operator(&x, params);
            let fresh = phi - &ax;
            let fresh_rs: f64 = fresh.values().iter().map(|&v| v * v).sum();
            if fresh_rs.sqrt() <= tol * b_norm {
                return Ok((
                    x,
                    LinearSolveReport {
                        iterations,
                        final_residual: fresh_rs.sqrt() / b_norm,
                        converged: true,
                    },
                ));
            }
            // Repeated restarts with no progress mean the requested tolerance
            // sits below the round-off floor of this conditioning.
            restarts += 1;
            if restarts > 5 && fresh_rs >= 0.81 * last_fresh {
                return Err(Error::NoConvergence {
                    max_iterations: iterations,
                    residual: fresh_rs.sqrt() / b_norm,
                });
            }
            last_fresh = fresh_rs;
            r = fresh;
            p = r.clone();
            rs = fresh_rs;
        }
        let ap = apply_operator(&p, params);
        let p_ap: f64 = p.values().iter().zip(ap.values()).map(|(a, b)| a * b).sum();
        if p_ap <= 0.0 {
            // SPD operator: can only happen through round-off breakdown.
            break;
        }
        let alpha = rs / p_ap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new: f64 = r.values().iter().map(|&v| v * v).sum();
        let beta = rs_new / rs;
        let mut p_next = r.clone();
        p_next.axpy(beta, &p);
        p = p_next;
        rs = rs_new;
        iterations += 1;
    }
    Err(Error::NoConvergence {
        max_iterations: iterations,
        residual: rs.sqrt() / b_norm,
    })
}

/// `K(u)`: the solution of `A v = |u|^{p-2} u`.
pub fn k_eps(u: &Field, params: &EpsParams, tol: f64) -> Result<(Field, LinearSolveReport)> {
    let rhs = u.odd_power(params.p() - 1.0);
    solve_k(&rhs, params, tol)
}
