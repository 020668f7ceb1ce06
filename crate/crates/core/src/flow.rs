//! The negative gradient flow and its region bookkeeping.
//!
//! The descent step is the convex combination
//!
//! ```text
//! u  ->  (1 - h) u + h K(u) ,        h in (0, 1],
//! ```
//!
//! i.e. `u - h J'(u)`. For `h` in this range the step stays inside any convex
//! set that `K` maps into itself; combined with the maximum principle of the
//! discrete operator this is exactly why the tubes around the positive and
//! negative cones are invariant, and the property tests assert that
//! mechanism directly rather than an abstract ODE limit.
//!
//! Region bookkeeping tracks, per iterate, the cone gaps, the energy and the
//! instantaneous region tag: inside a tube, in the nonpositive-energy
//! sublevel, or a candidate for the sign-changing region. A trajectory that
//! starts outside the tubes and falls into one (or, in plain mode, drops to
//! nonpositive energy) is aborted and tagged, since it can no longer reach a
//! sign-changing solution; trajectories that start inside a tube are left
//! alone so positive ground states can be computed by the same engine.
//!
//! Plain mode is the unconstrained flow with backtracking line search (the
//! recorded energy is strictly decreasing across accepted steps). The
//! Nehari-projected mode rescales each signed part onto the Nehari set after
//! every accepted step, which prevents the amplitude collapse an
//! unconstrained minimizing flow is prone to; runs that seek nodal solutions
//! use the projected mode and then polish with the plain flow from the
//! converged state.

use serde::{Deserialize, Serialize};

use crate::energy::{breakdown_with_k, j_value, nehari, EnergyBreakdown, DEFAULT_SOLVER_TOL};
use crate::error::{Error, Result};
use crate::field::{l_energy, lp_power, sign_split, EpsParams, Field};

/// Relative Nehari residual defining membership in the discrete
/// sign-changing constraint set (both parts on the Nehari set).
pub const E_EPS_REL_TOL: f64 = 1e-8;

/// Smallest backtracking step before giving up.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowMode {
    /// Unconstrained descent.
    Plain,
    /// Sign-part-wise Nehari projection after each accepted step.
    NehariProjected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Instantaneous region of a field relative to the tube radius `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    TubePlus,
    TubeMinus,
    SublevelZero,
    Zcandidate,
}

/// How a flow run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowOutcome {
    /// Gradient norm reached `sqrt(stop_delta)`.
    Converged,
    /// Trajectory entered a cone tube it did not start in.
    EnteredTube(Sign),
    /// Energy dropped to zero or below (plain mode only).
    EnergyNonpositive,
    MaxSteps,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Nominal step `h` in `(0, 1]`; restored after each accepted step.
    pub step: f64,
    pub max_steps: usize,
    /// Stop when `L(J'(u), J'(u)) <= stop_delta`, i.e. grad norm at
    /// `sqrt(stop_delta)`.
    pub stop_delta: f64,
    pub mode: FlowMode,
    /// Tube radius, from the ground constants at this eps.
    pub alpha: f64,
    pub solver_tol: f64,
}

impl FlowConfig {
    pub fn new(mode: FlowMode, alpha: f64) -> Self {
        FlowConfig {
            step: 0.5,
            max_steps: 20_000,
            stop_delta: 1e-12,
            mode,
            alpha,
            solver_tol: DEFAULT_SOLVER_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "flow step must lie in (0, 1], got {}",
                self.step
            )));
        }
        if !(self.stop_delta > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::InvalidParams(
                "stop_delta and alpha must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded iterate of a flow trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub energy: EnergyBreakdown,
    pub gap_plus: f64,
    pub gap_minus: f64,
    pub region: RegionTag,
    /// Both signed parts nonzero and on the Nehari set within
    /// [`E_EPS_REL_TOL`].
    pub in_e_eps: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: FlowOutcome,
    pub accepted_steps: usize,
}

/// One explicit flow step `(1-h) u + h K(u)`; `h = 1` is exactly `K(u)`.
pub fn flow_step(u: &Field, h: f64, params: &EpsParams) -> Result<Field> {
    assert!(h > 0.0 && h <= 1.0, "step must lie in (0, 1]");
    let (k, _) = crate::elliptic::k_eps(u, params, DEFAULT_SOLVER_TOL)?;
    let mut out = u * (1.0 - h);
    out.axpy(h, &k);
    Ok(out)
}

/// Tube membership precedes the sublevel check, so the zero field lands in
/// the positive tube.
pub fn classify_region(u: &Field, alpha: f64, params: &EpsParams) -> RegionTag {
    assert!(alpha > 0.0);
    let split = sign_split(u, params);
    classify_from_gaps(split.gap_plus, split.gap_minus, j_value(u, params), alpha)
}

fn classify_from_gaps(gap_plus: f64, gap_minus: f64, total: f64, alpha: f64) -> RegionTag {
    if gap_plus <= alpha {
        RegionTag::TubePlus
    } else if gap_minus <= alpha {
        RegionTag::TubeMinus
    } else if total <= 0.0 {
        RegionTag::SublevelZero
    } else {
        RegionTag::Zcandidate
    }
}

/// Relative Nehari residual of one signed part; infinite for the zero part.
fn part_rel_residual(part: &Field, params: &EpsParams) -> f64 {
    let l = l_energy(part, params);
    if l <= 0.0 {
        return f64::INFINITY;
    }
    (l - lp_power(part, params.p(), params)).abs() / l
}

/// Runs the flow from `u0` until convergence, a region exit, or the step
/// budget runs out.
pub fn flow_run(u0: &Field, config: &FlowConfig, params: &EpsParams) -> Result<(Field, FlowTrace)> {
    config.validate()?;
    let grad_tol = config.stop_delta.sqrt();
    let mut trace = FlowTrace {
        steps: Vec::new(),
        outcome: FlowOutcome::MaxSteps,
        accepted_steps: 0,
    };

    let mut u = u0.clone();
    let mut k_prev: Option<Field> = None;
    let mut started_in_tube: Option<bool> = None;

    for step in 0..=config.max_steps {
        let rhs = u.odd_power(params.p() - 1.0);
        let (k, _) =
            crate::elliptic::solve_k_with_guess(&rhs, params, config.solver_tol, k_prev.as_ref())?;
        let breakdown = breakdown_with_k(&u, &k, params);
        let split = sign_split(&u, params);
        let region = classify_from_gaps(
            split.gap_plus,
            split.gap_minus,
            breakdown.total,
            config.alpha,
        );
        let in_e_eps = part_rel_residual(&split.plus, params) <= E_EPS_REL_TOL
            && part_rel_residual(&split.minus, params) <= E_EPS_REL_TOL;
        trace.steps.push(TraceStep {
            step,
            energy: breakdown,
            gap_plus: split.gap_plus,
            gap_minus: split.gap_minus,
            region,
            in_e_eps,
        });

        let in_tube = matches!(region, RegionTag::TubePlus | RegionTag::TubeMinus);
        let started = *started_in_tube.get_or_insert(in_tube);

        if breakdown.grad_norm <= grad_tol {
            trace.outcome = FlowOutcome::Converged;
            return Ok((u, trace));
        }
        if in_tube && !started {
            trace.outcome = FlowOutcome::EnteredTube(match region {
                RegionTag::TubePlus => Sign::Plus,
                _ => Sign::Minus,
            });
            return Ok((u, trace));
        }
        if config.mode == FlowMode::Plain && breakdown.total <= 0.0 {
            trace.outcome = FlowOutcome::EnergyNonpositive;
            return Ok((u, trace));
        }
        if step == config.max_steps {
            break;
        }

        // Backtracking line search on the accepted-iterate energy.
        let j_current = breakdown.total;
        let mut h = config.step;
        let next = loop {
            let mut candidate = &u * (1.0 - h);
            candidate.axpy(h, &k);
            let projected = match config.mode {
                FlowMode::Plain => Some(candidate),
                FlowMode::NehariProjected => project_parts(&candidate, params),
            };
            if let Some(cand) = projected {
                if j_value(&cand, params) < j_current {
                    break cand;
                }
            }
            h *= 0.5;
            if h < MIN_STEP {
                return Err(Error::StepCollapse {
                    steps: trace.accepted_steps,
                    min_step: MIN_STEP,
                });
            }
        };
        u = next;
        k_prev = Some(k);
        trace.accepted_steps += 1;
    }
    Ok((u, trace))
}

/// Sign-part-wise Nehari projection: both parts projected when both are
/// nonzero, otherwise the whole field is projected; `None` if the field is
/// too degenerate to project at all.
///
/// "Nonzero" carries a noise floor relative to the whole field: the Nehari
/// scaling of a part is 0-homogeneous, so projecting a part that is pure
/// solver round-off would blow it up to unit scale. One-signed trajectories
/// in particular acquire opposite-signed noise at the linear-solve tolerance
/// every step and must keep taking the whole-field branch.
fn project_parts(u: &Field, params: &EpsParams) -> Option<Field> {
    let split = sign_split(u, params);
    let scale = l_energy(u, params).max(0.0).sqrt();
    // gap_minus = L(u^+)^{1/2}, gap_plus = L(u^-)^{1/2}.
    let plus_ok = split.gap_minus > 1e-8 * scale;
    let minus_ok = split.gap_plus > 1e-8 * scale;
    if plus_ok && minus_ok {
        match (nehari(&split.plus, params), nehari(&split.minus, params)) {
            (Ok(p), Ok(m)) => Some(&p.projected - &m.projected),
            _ => None,
        }
    } else {
        nehari(u, params).ok().map(|p| p.projected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::seed_pair;
    use crate::energy::{constants, j_eps, nehari};
    use crate::field::norm_eps;
    use crate::groundstate::{sample_bubble, shoot};
    use crate::manifold::{Point, TorusManifold};
    use std::f64::consts::PI;
    use std::sync::Arc;

    const TAU: f64 = 2.0 * PI;

    fn setup(
        nodes: usize,
        eps: f64,
    ) -> (
        Arc<TorusManifold>,
        EpsParams,
        crate::groundstate::RadialProfile,
    ) {
        let m = TorusManifold::circle(TAU, nodes).unwrap();
        let params = EpsParams::new(1, 3, eps).unwrap();
        let profile = shoot(1, params.p(), 1e-12).unwrap();
        (m, params, profile)
    }

    #[test]
    fn flow_step_endpoints_and_zero() {
        let (m, params, profile) = setup(256, 0.2);
        let bubble = sample_bubble(&profile, 0.2, &m, &Point(vec![PI]), PI / 2.0).unwrap();
        let u = nehari(&bubble, &params).unwrap().projected;
        // h = 1 is exactly K(u).
        let stepped = flow_step(&u, 1.0, &params).unwrap();
        let (k, _) = crate::elliptic::k_eps(&u, &params, 1e-10).unwrap();
        for i in (0..u.len()).step_by(13) {
            assert!((stepped[i] - k[i]).abs() <= 1e-12 * k.max_abs());
        }
        let z = Field::zeros(m);
        let sz = flow_step(&z, 0.5, &params).unwrap();
        assert_eq!(sz.max_abs(), 0.0);
    }

    #[test]
    fn positive_bubble_flows_to_positive_solution() {
        let (m, params, profile) = setup(512, 0.2);
        let bubble = sample_bubble(&profile, 0.2, &m, &Point(vec![PI]), PI / 2.0).unwrap();
        let u0 = nehari(&bubble, &params).unwrap().projected;
        let alpha = constants(&u0, &params).unwrap().alpha;
        let config = FlowConfig::new(FlowMode::NehariProjected, alpha);
        let (u, trace) = flow_run(&u0, &config, &params).unwrap();
        assert_eq!(trace.outcome, FlowOutcome::Converged);
        // Stays in the positive tube the whole way.
        for row in &trace.steps {
            assert!(row.gap_plus <= alpha);
            assert_eq!(row.region, RegionTag::TubePlus);
        }
        // Fixed point: another step barely moves it.
        let stepped = flow_step(&u, 0.5, &params).unwrap();
        let diff = &stepped - &u;
        assert!(norm_eps(&diff, &params) <= 2.0 * config.stop_delta.sqrt());
        // Energy close to the ground level m(E) = 4/3 at this scale.
        let j = j_eps(&u, &params).unwrap().total;
        assert!((j - 4.0 / 3.0).abs() / (4.0 / 3.0) < 0.02, "J = {j}");
    }

    #[test]
    fn plain_mode_energies_decrease_monotonically() {
        let (m, params, profile) = setup(512, 0.2);
        let bubble = sample_bubble(&profile, 0.2, &m, &Point(vec![PI]), PI / 2.0).unwrap();
        let u0 = nehari(&bubble, &params).unwrap().projected;
        let alpha = constants(&u0, &params).unwrap().alpha;
        let mut config = FlowConfig::new(FlowMode::Plain, alpha);
        config.max_steps = 60;
        let (_, trace) = flow_run(&u0, &config, &params).unwrap();
        for w in trace.steps.windows(2) {
            assert!(w[1].energy.total < w[0].energy.total);
        }
    }

    #[test]
    fn nodal_seed_converges_to_sign_changing_solution() {
        let (m, params, profile) = setup(1024, 0.1);
        let x = Point(vec![PI / 2.0]);
        let y = Point(vec![3.0 * PI / 2.0]);
        let seed = seed_pair(&x, &y, 0.1, &profile, &m, &params, PI / 2.0).unwrap();
        let pos_bubble = sample_bubble(&profile, 0.1, &m, &x, PI / 2.0).unwrap();
        let alpha = constants(&nehari(&pos_bubble, &params).unwrap().projected, &params)
            .unwrap()
            .alpha;
        let config = FlowConfig::new(FlowMode::NehariProjected, alpha);
        let (u, trace) = flow_run(&seed.field, &config, &params).unwrap();
        assert_eq!(trace.outcome, FlowOutcome::Converged);
        // Polish with the plain flow: already at a critical point, so it
        // converges immediately and confirms the fixed point.
        let plain = FlowConfig::new(FlowMode::Plain, alpha);
        let (u2, trace2) = flow_run(&u, &plain, &params).unwrap();
        assert_eq!(trace2.outcome, FlowOutcome::Converged);
        assert_eq!(classify_region(&u2, alpha, &params), RegionTag::Zcandidate);
        // Sign-changing with both parts on the Nehari set.
        assert!(trace2.steps[0].in_e_eps);
        // Energy near the two-bubble level.
        let j = j_eps(&u2, &params).unwrap().total;
        assert!((j - 8.0 / 3.0).abs() / (8.0 / 3.0) < 0.03, "J = {j}");
    }

    #[test]
    fn small_constant_seed_degenerates() {
        let (m, params, _) = setup(256, 0.2);
        let u0 = Field::constant(m, 0.01);
        let config = FlowConfig::new(FlowMode::Plain, 0.5);
        let (u, trace) = flow_run(&u0, &config, &params).unwrap();
        // A tiny constant sits inside the positive tube and collapses; any
        // of these degenerate outcomes is acceptable, but never a nodal one.
        match trace.outcome {
            FlowOutcome::Converged => {
                let split = sign_split(&u, &params);
                assert_eq!(split.gap_plus, 0.0, "converged limit must be one-signed");
            }
            FlowOutcome::EnteredTube(_) | FlowOutcome::EnergyNonpositive | FlowOutcome::MaxSteps => {}
        }
    }

    #[test]
    fn zero_field_is_a_fixed_point() {
        let (m, params, _) = setup(256, 0.2);
        let z = Field::zeros(m);
        let config = FlowConfig::new(FlowMode::Plain, 0.5);
        let (_, trace) = flow_run(&z, &config, &params).unwrap();
        assert_eq!(trace.outcome, FlowOutcome::Converged);
        assert_eq!(trace.steps[0].region, RegionTag::TubePlus);
    }

    #[test]
    fn classify_region_cases() {
        let (m, params, _) = setup(256, 0.2);
        let nonneg = Field::from_fn(m.clone(), |x| x[0].cos() + 1.2);
        assert_eq!(classify_region(&nonneg, 0.3, &params), RegionTag::TubePlus);
        let zero = Field::zeros(m.clone());
        assert_eq!(classify_region(&zero, 0.3, &params), RegionTag::TubePlus);
        let nonpos = Field::from_fn(m.clone(), |x| -x[0].cos().abs() - 0.1);
        assert_eq!(classify_region(&nonpos, 0.3, &params), RegionTag::TubeMinus);
        // Large-amplitude oscillation: sign changing with negative energy.
        let wild = Field::from_fn(m, |x| 40.0 * x[0].cos());
        assert_eq!(
            classify_region(&wild, 1e-3, &params),
            RegionTag::SublevelZero
        );
    }

    #[test]
    fn solution_map_contracts_the_positive_tube() {
        // The invariance mechanism, step by step: for u within alpha of the
        // positive cone, K(u) lands within alpha / 2^{p-2} of it, and every
        // convex combination (1-h) u + h K(u) stays inside the tube.
        let (m, params, profile) = setup(512, 0.2);
        let big = sample_bubble(&profile, 0.2, &m, &Point(vec![PI / 2.0]), PI / 2.0).unwrap();
        let small = sample_bubble(&profile, 0.2, &m, &Point(vec![3.0 * PI / 2.0]), PI / 2.0)
            .unwrap();
        let pos = nehari(&big, &params).unwrap().projected;
        let alpha = constants(&pos, &params).unwrap().alpha;
        let neg = nehari(&small, &params).unwrap().projected;
        // Perturbation with gap 0.3 * 2 alpha = 0.6 alpha: inside the tube.
        let mut u = pos.clone();
        u.axpy(-0.3, &neg);
        let gap_u = sign_split(&u, &params).gap_plus;
        assert!(gap_u > 0.1 * alpha && gap_u <= alpha);

        let (k, _) = crate::elliptic::k_eps(&u, &params, 1e-11).unwrap();
        let gap_k = sign_split(&k, &params).gap_plus;
        let p = params.p();
        let contraction = alpha / 2f64.powf(p - 2.0);
        assert!(
            gap_k <= contraction * 1.05,
            "gap(K) = {gap_k} vs alpha/2^(p-2) = {contraction}"
        );
        for h in [0.25, 0.5, 0.75, 1.0] {
            let mut comb = &u * (1.0 - h);
            comb.axpy(h, &k);
            assert!(sign_split(&comb, &params).gap_plus <= alpha);
        }
    }

    #[test]
    fn tube_exit_detected_for_nodal_start() {
        // A lopsided sign-changing field whose negative part is tiny: beyond
        // alpha it counts as a Z-candidate, but the flow quickly wipes the
        // minus part and must report the tube entry.
        let (m, params, profile) = setup(512, 0.2);
        let big = sample_bubble(&profile, 0.2, &m, &Point(vec![PI / 2.0]), PI / 2.0).unwrap();
        let small = sample_bubble(&profile, 0.2, &m, &Point(vec![3.0 * PI / 2.0]), PI / 2.0)
            .unwrap();
        let pos = nehari(&big, &params).unwrap().projected;
        let alpha = constants(&pos, &params).unwrap().alpha;
        let mut u0 = pos.clone();
        // A Nehari-scale part has gap 2 alpha, so scaling by 0.7 leaves the
        // minus part below its Nehari scale but still outside the tube.
        let tiny = nehari(&small, &params).unwrap().projected;
        u0.axpy(-0.7, &tiny);
        assert_eq!(classify_region(&u0, alpha, &params), RegionTag::Zcandidate);
        let config = FlowConfig::new(FlowMode::Plain, alpha);
        let (_, trace) = flow_run(&u0, &config, &params).unwrap();
        assert!(
            matches!(trace.outcome, FlowOutcome::EnteredTube(Sign::Plus))
                || trace.outcome == FlowOutcome::Converged,
            "outcome {:?}",
            trace.outcome
        );
        if let FlowOutcome::EnteredTube(_) = trace.outcome {
            let last = trace.steps.last().unwrap();
            assert!(last.gap_plus <= alpha);
        }
    }
}
