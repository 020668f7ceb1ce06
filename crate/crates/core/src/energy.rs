//! The energy functional and its Nehari structure.
//!
//! For a field `u` the functional splits as
//!
//! ```text
//! J(u) = 1/2 L(u,u) - 1/p |u|_{p,eps}^p ,
//! ```
//!
//! its gradient representative with respect to the `L` inner product is
//! `J'(u) = u - K(u)` where `K(u)` solves `A v = |u|^{p-2} u`, and the Nehari
//! scaling `t(u) = (L(u,u) / |u|_{p,eps}^p)^{1/(p-2)}` places any nonzero
//! field on the natural constraint `L(u,u) = |u|_{p,eps}^p`. On that
//! constraint the energy collapses to `J = (p-2)/(2p) L(u,u)`, which is how
//! the ground-state level and the tube radius are computed from a minimizer.

use serde::{Deserialize, Serialize};

use crate::elliptic::solve_k;
use crate::error::{Error, Result};
use crate::field::{bilinear_unchecked, l_energy, lp_power, BilinearMode, EpsParams, Field};

/// Default relative tolerance for the linear solves behind `K`.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

/// All scalar diagnostics of one energy evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `1/2 L(u,u)`.
    pub quadratic: f64,
    /// `1/p |u|_{p,eps}^p`.
    pub potential: f64,
    /// `J(u) = quadratic - potential`, exactly as stored.
    pub total: f64,
    /// `L(u,u) - |u|_{p,eps}^p`; zero on the discrete Nehari set.
    pub nehari_residual: f64,
    /// `L(J'(u), J'(u))^{1/2}`.
    pub grad_norm: f64,
}

pub(crate) fn quad_parts(u: &Field, params: &EpsParams) -> (f64, f64) {
    (l_energy(u, params), lp_power(u, params.p(), params))
}

/// Energy total without the gradient norm; no linear solve involved.
pub fn j_value(u: &Field, params: &EpsParams) -> f64 {
    let (l_uu, lp_p) = quad_parts(u, params);
    0.5 * l_uu - lp_p / params.p()
}

/// Full energy breakdown; the gradient norm costs one linear solve.
pub fn j_eps(u: &Field, params: &EpsParams) -> Result<EnergyBreakdown> {
    let rhs = u.odd_power(params.p() - 1.0);
    let (k, _) = solve_k(&rhs, params, DEFAULT_SOLVER_TOL)?;
    Ok(breakdown_with_k(u, &k, params))
}

/// Breakdown when `K(u)` is already available (flow loops compute it anyway).
pub fn breakdown_with_k(u: &Field, k: &Field, params: &EpsParams) -> EnergyBreakdown {
    let (l_uu, lp_p) = quad_parts(u, params);
    let grad = u - k;
    let grad_norm = l_energy(&grad, params).max(0.0).sqrt();
    let quadratic = 0.5 * l_uu;
    let potential = lp_p / params.p();
    EnergyBreakdown {
        quadratic,
        potential,
        total: quadratic - potential,
        nehari_residual: l_uu - lp_p,
        grad_norm,
    }
}

/// The gradient representative `J'(u) = u - K(u)`.
///
/// Satisfies the weak identity `dJ(u)(v) = L(J'(u), v)` up to solver
/// tolerance.
pub fn grad_residual(u: &Field, params: &EpsParams, tol: f64) -> Result<Field> {
    let rhs = u.odd_power(params.p() - 1.0);
    let (k, _) = solve_k(&rhs, params, tol)?;
    Ok(u - &k)
}

/// Result of projecting a field onto the discrete Nehari set.
#[derive(Clone, Debug)]
pub struct NehariProjection {
    /// The scaling `t(u)`; equals 1 when `u` is already on the set.
    pub t: f64,
    /// `t(u) u`.
    pub projected: Field,
    /// Nehari residual of the projected field, reported for audit; zero up
    /// to round-off by construction.
    pub residual: f64,
}

/// Nehari scaling `t(u) = (L(u,u)/|u|_{p,eps}^p)^{1/(p-2)}`.
pub fn nehari(u: &Field, params: &EpsParams) -> Result<NehariProjection> {
    let (l_uu, lp_p) = quad_parts(u, params);
    if lp_p <= 0.0 || l_uu <= 0.0 {
        return Err(Error::ZeroField);
    }
    let t = (l_uu / lp_p).powf(1.0 / (params.p() - 2.0));
    let projected = u * t;
    let (l_proj, lp_proj) = quad_parts(&projected, params);
    Ok(NehariProjection {
        t,
        projected,
        residual: l_proj - lp_proj,
    })
}

/// Scalar constants read off a positive minimizer.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroundConstants {
    /// Rayleigh quotient `L(u,u) / |u|_{p,eps}^2` at the given field; an
    /// upper estimate of the infimum, exact when the field minimizes.
    pub s_eps: f64,
    /// `(p-2)/(2p) * s_eps^{p/(p-2)}`, the Nehari ground level.
    pub m_eps: f64,
    /// Tube radius `1/2 * s_eps^{p/(2(p-2))}`.
    pub alpha: f64,
}

/// Evaluates `S`, the ground level `m` and the tube radius `alpha` at a
/// positive field, intended to be the computed ground state.
pub fn constants(u_ground: &Field, params: &EpsParams) -> Result<GroundConstants> {
    let (l_uu, lp_p) = quad_parts(u_ground, params);
    if lp_p <= 0.0 || l_uu <= 0.0 {
        return Err(Error::ZeroField);
    }
    let p = params.p();
    let s_eps = l_uu / lp_p.powf(2.0 / p);
    let m_eps = (p - 2.0) / (2.0 * p) * s_eps.powf(p / (p - 2.0));
    let alpha = 0.5 * s_eps.powf(p / (2.0 * (p - 2.0)));
    Ok(GroundConstants { s_eps, m_eps, alpha })
}

/// `L_eps(u, v)` with the manifold check, as a free helper for callers
/// outside this module.
pub fn l_form(u: &Field, v: &Field, params: &EpsParams) -> Result<f64> {
    u.check_same_manifold(v)?;
    Ok(bilinear_unchecked(u, v, params, BilinearMode::Curved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{norm_eps, sign_split};
    use crate::manifold::TorusManifold;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    const TAU: f64 = 2.0 * PI;

    fn smooth_random(m: &Arc<TorusManifold>, rng: &mut ChaCha8Rng) -> Field {
        let n_modes = 4;
        let dim = m.dim();
        let mut terms = Vec::new();
        for _ in 0..n_modes {
            let k: Vec<f64> = (0..dim).map(|_| rng.random_range(-3..4) as f64).collect();
            let amp: f64 = rng.random_range(-1.0..1.0);
            let phase: f64 = rng.random_range(0.0..TAU);
            terms.push((k, amp, phase));
        }
        let lengths = m.lengths().to_vec();
        Field::from_fn(m.clone(), move |x| {
            terms
                .iter()
                .map(|(k, amp, phase)| {
                    let arg: f64 = x
                        .iter()
                        .zip(k)
                        .zip(&lengths)
                        .map(|((xi, ki), li)| TAU * ki * xi / li)
                        .sum();
                    amp * (arg + phase).cos()
                })
                .sum()
        })
    }

    #[test]
    fn zero_field_breakdown() {
        let m = TorusManifold::circle(TAU, 64).unwrap();
        let params = EpsParams::new(1, 3, 0.5).unwrap();
        let z = Field::zeros(m);
        let b = j_eps(&z, &params).unwrap();
        assert_eq!(b.total, 0.0);
        assert_eq!(b.nehari_residual, 0.0);
        assert_eq!(b.grad_norm, 0.0);
    }

    #[test]
    fn nehari_identity_for_energy() {
        // On the Nehari set J = (p-2)/(2p) L(u,u), as an identity of the
        // breakdown fields.
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let u = smooth_random(&m, &mut rng);
            let proj = nehari(&u, &params).unwrap();
            let b = j_eps(&proj.projected, &params).unwrap();
            let p = params.p();
            let l_uu = 2.0 * b.quadratic;
            assert_relative_eq!(
                b.total,
                (p - 2.0) / (2.0 * p) * l_uu,
                max_relative = 1e-10
            );
            assert!(proj.residual.abs() <= 1e-10 * l_uu);
            // Coercivity on the Nehari set.
            let n = norm_eps(&proj.projected, &params);
            assert!(b.total >= (p - 2.0) / (2.0 * p) * params.c_lo().powi(2) * n * n - 1e-12);
        }
    }

    #[test]
    fn nehari_fixed_point_and_homogeneity() {
        let m = TorusManifold::circle(TAU, 128).unwrap();
        let params = EpsParams::new(1, 3, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = smooth_random(&m, &mut rng);
        let proj = nehari(&u, &params).unwrap();
        // Already projected: t = 1.
        let again = nehari(&proj.projected, &params).unwrap();
        assert_relative_eq!(again.t, 1.0, max_relative = 1e-12);
        // t(lambda u) = t(u)/lambda, so the projection is scale-invariant.
        for lam in [0.5, 2.0, 7.0] {
            let scaled = &u * lam;
            let proj2 = nehari(&scaled, &params).unwrap();
            assert_relative_eq!(proj2.t, proj.t / lam, max_relative = 1e-12);
            for i in (0..u.len()).step_by(17) {
                assert_relative_eq!(
                    proj2.projected[i],
                    proj.projected[i],
                    max_relative = 1e-10,
                    epsilon = 1e-12
                );
            }
        }
        let z = Field::zeros(m);
        assert!(matches!(nehari(&z, &params), Err(Error::ZeroField)));
    }

    #[test]
    fn nehari_scaling_is_stationary_for_energy() {
        // lambda -> J(lambda u) has a critical point at lambda = t(u),
        // checked by central finite differences.
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let u = smooth_random(&m, &mut rng);
            let t = nehari(&u, &params).unwrap().t;
            let dt = 1e-5 * t;
            let j_plus = j_value(&(&u * (t + dt)), &params);
            let j_minus = j_value(&(&u * (t - dt)), &params);
            let deriv = (j_plus - j_minus) / (2.0 * dt);
            let scale = j_value(&(&u * t), &params).abs().max(1.0);
            assert!(
                (deriv / scale).abs() <= 1e-6,
                "stationarity violated: {deriv}"
            );
        }
    }

    #[test]
    fn gradient_matches_directional_derivative() {
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let u = smooth_random(&m, &mut rng);
            let v = smooth_random(&m, &mut rng);
            let grad = grad_residual(&u, &params, 1e-12).unwrap();
            let weak = l_form(&grad, &v, &params).unwrap();
            let t = 1e-5;
            let mut up = u.clone();
            up.axpy(t, &v);
            let mut um = u.clone();
            um.axpy(-t, &v);
            let fd = (j_value(&up, &params) - j_value(&um, &params)) / (2.0 * t);
            // O(t^2) finite-difference bias plus solver tolerance, against an
            // O(1) energy scale.
            let scale = weak.abs().max(fd.abs()).max(1.0);
            assert!(
                (weak - fd).abs() <= 1e-6 * scale,
                "weak {weak} vs fd {fd}"
            );
        }
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let m = TorusManifold::circle(TAU, 64).unwrap();
        let params = EpsParams::new(1, 3, 0.5).unwrap();
        let z = Field::zeros(m);
        let g = grad_residual(&z, &params, 1e-10).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn constants_arithmetic() {
        let m = TorusManifold::circle(TAU, 128).unwrap();
        let params = EpsParams::new(1, 3, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = smooth_random(&m, &mut rng);
        let p = params.p();
        let c = constants(&u, &params).unwrap();
        assert_relative_eq!(
            c.m_eps,
            (p - 2.0) / (2.0 * p) * c.s_eps.powf(p / (p - 2.0)),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            c.alpha,
            0.5 * c.s_eps.powf(p / (2.0 * (p - 2.0))),
            max_relative = 1e-14
        );
        // The Rayleigh quotient is scale invariant.
        let c2 = constants(&(&u * 3.7), &params).unwrap();
        assert_relative_eq!(c2.s_eps, c.s_eps, max_relative = 1e-12);
        // S = 1, p = 4: m = 1/4 and alpha = 1/2.
        let s: f64 = 1.0;
        assert_relative_eq!((p - 2.0) / (2.0 * p) * s.powf(p / (p - 2.0)), 0.25);
        assert_relative_eq!(0.5 * s.powf(p / (2.0 * (p - 2.0))), 0.5);
    }

    #[test]
    fn constants_agree_with_projected_energy() {
        // m computed from S equals J at the Nehari projection of the same
        // field: two algebraic routes to the same number.
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u = smooth_random(&m, &mut rng);
            let c = constants(&u, &params).unwrap();
            let proj = nehari(&u, &params).unwrap();
            let j_proj = j_value(&proj.projected, &params);
            assert_relative_eq!(c.m_eps, j_proj, max_relative = 1e-8);
        }
    }

    #[test]
    fn breakdown_total_is_exact_difference() {
        let m = TorusManifold::circle(TAU, 128).unwrap();
        let params = EpsParams::new(1, 3, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = smooth_random(&m, &mut rng);
        let b = j_eps(&u, &params).unwrap();
        assert_eq!(b.total, b.quadratic - b.potential);
        let split = sign_split(&u, &params);
        assert!(split.gap_plus > 0.0 && split.gap_minus > 0.0);
    }
}
