//! Two-bubble nodal seeds.
//!
//! A seed is the difference of two Nehari-projected bubbles with disjoint
//! supports,
//!
//! ```text
//! seed(x, y) = t(u_x) u_x - t(u_y) u_y ,
//! ```
//!
//! where `u_x` is the rescaled ground-state bubble cut off at radius `r_cut`
//! around `x`. Disjointness is enforced through the cutoff radius,
//! `dist(x,y) >= 2 r_cut`, because the additivity of the energy across the
//! two signed parts needs genuinely disjoint supports; the admissibility
//! thresholds `2 eps R_0` (diameter based) and `2 eps r_0` (injectivity
//! based) are recorded as separate flags, not enforced.

use std::sync::Arc;

use crate::energy::nehari;
use crate::error::{Error, Result};
use crate::field::{EpsParams, Field};
use crate::groundstate::{sample_bubble, RadialProfile};
use crate::manifold::{Point, TorusManifold};

/// Relative Nehari residual both signed parts of a seed must satisfy.
pub const PART_RESIDUAL_TOL: f64 = 1e-8;

/// A two-bubble seed with its audit data.
#[derive(Clone, Debug)]
pub struct SeedPair {
    pub x: Point,
    pub y: Point,
    pub eps: f64,
    /// The sign-changing seed field.
    pub field: Field,
    /// Relative Nehari residuals of the positive and negative part.
    pub part_residuals: [f64; 2],
    /// `dist(x, y) >= 2 eps R_0`, the diameter-based admissibility flag.
    pub admissible: bool,
    /// `dist(x, y) >= 2 eps r_0`, the injectivity-based variant.
    pub admissible_inj: bool,
}

/// Default cutoff radius: the injectivity radius capped by a quarter of the
/// shortest period.
pub fn default_r_cut(manifold: &TorusManifold) -> f64 {
    let min_len = manifold
        .lengths()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    manifold.injectivity_radius().min(0.25 * min_len)
}

/// Builds the seed `nehari(bubble at x) - nehari(bubble at y)`.
///
/// Requires `dist(x, y) >= 2 r_cut`; the open cutoff balls are then disjoint
/// (the cutoff vanishes at its radius), which the constructor re-checks
/// pointwise.
pub fn seed_pair(
    x: &Point,
    y: &Point,
    eps: f64,
    profile: &RadialProfile,
    manifold: &Arc<TorusManifold>,
    params: &EpsParams,
    r_cut: f64,
) -> Result<SeedPair> {
    let dist = manifold.dist(x, y)?;
    if dist < 2.0 * r_cut {
        return Err(Error::OverlappingSupports {
            dist,
            min: 2.0 * r_cut,
        });
    }
    let bubble_x = sample_bubble(profile, eps, manifold, x, r_cut)?;
    let bubble_y = sample_bubble(profile, eps, manifold, y, r_cut)?;
    let proj_x = nehari(&bubble_x, params)?;
    let proj_y = nehari(&bubble_y, params)?;
    // The cutoff vanishes at its radius; no node may carry both parts.
    if proj_x
        .projected
        .values()
        .iter()
        .zip(proj_y.projected.values())
        .any(|(&a, &b)| a != 0.0 && b != 0.0)
    {
        return Err(Error::OverlappingSupports {
            dist,
            min: 2.0 * r_cut,
        });
    }
    let field = &proj_x.projected - &proj_y.projected;
    let rel = |proj: &crate::energy::NehariProjection, f: &Field| {
        let l = crate::field::l_energy(f, params) * proj.t * proj.t;
        if l > 0.0 {
            proj.residual.abs() / l
        } else {
            f64::INFINITY
        }
    };
    let part_residuals = [rel(&proj_x, &bubble_x), rel(&proj_y, &bubble_y)];
    Ok(SeedPair {
        x: x.clone(),
        y: y.clone(),
        eps,
        field,
        part_residuals,
        admissible: dist >= 2.0 * eps * manifold.diameter(),
        admissible_inj: dist >= 2.0 * eps * manifold.injectivity_radius(),
    })
}
