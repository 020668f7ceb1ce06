//! Experiment orchestration: sweeps, seed generation, diagnostics.
//!
//! Every run shares the same skeleton. A radial ground-state profile is
//! computed once; per eps, a positive bubble seed is flowed (projected, then
//! polished by the plain flow) to measure the ground level and the tube
//! radius; nodal runs then flow two-bubble seeds the same way in parallel.
//! Failed seeds are recorded with their error, never silently dropped, and
//! every converged record re-verifies the equation residual with a fresh
//! tight solve independent of the flow's own bookkeeping.
//!
//! Determinism: seed generation derives one ChaCha stream per eps from the
//! configured seed, parallel results are collected in seed order, and all
//! serialization is order-stable, so identical configs reproduce identical
//! archives bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bubble::{default_r_cut, seed_pair};
use crate::concentration::cm_pair;
use crate::energy::{constants, j_eps, nehari, GroundConstants};
use crate::error::{Error, Result};
use crate::field::{l_energy, sign_split, EpsParams, Field};
use crate::flow::{flow_run, FlowConfig, FlowMode, FlowOutcome, FlowTrace, RegionTag};
use crate::groundstate::{sample_bubble, shoot, RadialProfile};
use crate::lab::archive::{
    EpsConstants, ExperimentKind, FailureRecord, SeedProvenance, SolutionArchive, SolutionRecord,
};
use crate::lab::cluster::cluster_solutions;
use crate::lab::config::{ExperimentConfig, SeedStrategy};
use crate::manifold::{Point, TorusManifold};
use std::sync::Arc;

/// Bracket tolerance for the radial shooting stage.
const SHOOT_TOL: f64 = 1e-12;
/// Minimum cutoff width in units of eps a seed pair must leave each bubble.
const MIN_CUT_WIDTHS: f64 = 5.0;

/// Runs one experiment and returns the populated archive.
pub fn run_experiment(config: &ExperimentConfig, kind: ExperimentKind) -> Result<SolutionArchive> {
    config.validate()?;
    match kind {
        ExperimentKind::Ground => ground(config),
        ExperimentKind::SweepM => sweep(config, ExperimentKind::SweepM),
        ExperimentKind::SweepD => sweep(config, ExperimentKind::SweepD),
        ExperimentKind::Multiplicity => multiplicity(config),
        ExperimentKind::Diagnose => diagnose(config),
    }
}

fn ground_profile(config: &ExperimentConfig) -> Result<RadialProfile> {
    let n = config.manifold.dimension;
    let q = config.eps_params(config.params.eps[0])?.p();
    shoot(n, q, SHOOT_TOL)
}

fn ground(config: &ExperimentConfig) -> Result<SolutionArchive> {
    let mut archive = SolutionArchive::new(ExperimentKind::Ground, config.clone());
    let profile = ground_profile(config)?;
    archive.m_e = Some(profile.m_e);
    archive.profile = Some(profile);
    Ok(archive)
}

/// Node-aligned midpoint of the fundamental domain.
fn canonical_center(m: &Arc<TorusManifold>) -> Point {
    let mid = Point(m.lengths().iter().map(|&l| l / 2.0).collect());
    let idx = m.nearest_node(&mid).expect("midpoint lies on the manifold");
    m.node_point(idx)
}

/// The midpoint node paired with its half-period translate: the maximally
/// separated pair on the torus (distance = diameter), lattice-aligned on
/// even grids.
pub fn canonical_pair(m: &Arc<TorusManifold>) -> (Point, Point) {
    let x = canonical_center(m);
    let shift: Vec<f64> = m.lengths().iter().map(|&l| l / 2.0).collect();
    let y = m.exp_map(&x, &shift).expect("dimensions match");
    (x, y)
}

struct PositiveStage {
    constants: GroundConstants,
    record_field: Option<(SolutionRecord, Field, Option<FlowTrace>)>,
    failure: Option<FailureRecord>,
}

/// Flows a positive bubble to the ground state at this eps; always yields a
/// tube radius (from the seed if the flow failed).
fn positive_stage(
    m: &Arc<TorusManifold>,
    profile: &RadialProfile,
    eps: f64,
    params: &EpsParams,
    config: &ExperimentConfig,
) -> Result<PositiveStage> {
    let center = canonical_center(m);
    let r_cut = config.seeds.r_cut.unwrap_or_else(|| default_r_cut(m));
    let bubble = sample_bubble(profile, eps, m, &center, r_cut)?;
    let u0 = nehari(&bubble, params)?.projected;
    let seed_constants = constants(&u0, params)?;
    let provenance = SeedProvenance::PositiveBubble {
        center: center.clone(),
    };

    match run_flow_stages(&u0, params, seed_constants.alpha, config) {
        Ok((u, trace, outcome, steps)) => {
            let final_constants = constants(&u, params).unwrap_or(seed_constants);
            let (record, field) =
                build_record(&u, eps, provenance, outcome, steps, params, config)?;
            Ok(PositiveStage {
                constants: final_constants,
                record_field: Some((record, field, trace)),
                failure: None,
            })
        }
        Err(e) => Ok(PositiveStage {
            constants: seed_constants,
            record_field: None,
            failure: Some(FailureRecord {
                eps,
                seed: provenance,
                error: e.to_string(),
            }),
        }),
    }
}

/// Projected descent followed by a plain polish when it converged; the
/// polish confirms the state is a fixed point of the unconstrained flow.
fn run_flow_stages(
    u0: &Field,
    params: &EpsParams,
    alpha: f64,
    config: &ExperimentConfig,
) -> Result<(Field, Option<FlowTrace>, FlowOutcome, usize)> {
    let mut cfg = FlowConfig::new(FlowMode::NehariProjected, alpha);
    cfg.step = config.flow.step;
    cfg.stop_delta = config.flow.stop_delta;
    cfg.max_steps = config.flow.max_steps;
    cfg.solver_tol = config.tolerances.solver;
    let (u1, trace1) = flow_run(u0, &cfg, params)?;
    let mut steps = trace1.accepted_steps;
    let kept = config.output.keep_traces.then_some(trace1.clone());
    if trace1.outcome != FlowOutcome::Converged {
        return Ok((u1, kept, trace1.outcome, steps));
    }
    let mut plain = cfg.clone();
    plain.mode = FlowMode::Plain;
    let (u2, trace2) = flow_run(&u1, &plain, params)?;
    steps += trace2.accepted_steps;
    Ok((u2, kept, trace2.outcome, steps))
}

/// Assembles a record with fresh diagnostics for the final field.
fn build_record(
    u: &Field,
    eps: f64,
    seed: SeedProvenance,
    outcome: FlowOutcome,
    steps: usize,
    params: &EpsParams,
    config: &ExperimentConfig,
) -> Result<(SolutionRecord, Field)> {
    let energy = j_eps(u, params)?;
    let split = sign_split(u, params);
    let alpha = alpha_hint(u, params);
    let region = crate::flow::classify_region(u, alpha, params);
    let in_e_eps = part_residual_ok(&split.plus, params) && part_residual_ok(&split.minus, params);
    let nodal =
        outcome == FlowOutcome::Converged && in_e_eps && region == RegionTag::Zcandidate;
    // Independent residual check: fresh tight solve, no warm start.
    let tight = (config.tolerances.solver * 1e-2).max(1e-13);
    let grad = crate::energy::grad_residual(u, params, tight)?;
    let pde_residual = l_energy(&grad, params).max(0.0).sqrt();
    let cm = if nodal {
        cm_pair(u, config.tolerances.conc_factor, config.tolerances.eta, params).ok()
    } else {
        None
    };
    let record = SolutionRecord {
        eps,
        seed,
        outcome,
        steps,
        snapshot: usize::MAX, // set on push
        energy,
        gap_plus: split.gap_plus,
        gap_minus: split.gap_minus,
        region,
        pde_residual,
        nodal,
        cm,
        cluster: None,
    };
    Ok((record, u.clone()))
}

fn part_residual_ok(part: &Field, params: &EpsParams) -> bool {
    let l = l_energy(part, params);
    if l <= 0.0 {
        return false;
    }
    let lp = crate::field::lp_power(part, params.p(), params);
    (l - lp).abs() / l <= crate::flow::E_EPS_REL_TOL
}

/// Tube radius for the record's region tag, derived from the field's own
/// Rayleigh quotient so diagnose can reproduce it without sweep state. For a
/// field in the sign-changing constraint set the gaps exceed this by a fixed
/// sqrt(2) factor, so the tag is stable.
fn alpha_hint(u: &Field, params: &EpsParams) -> f64 {
    match constants(u, params) {
        Ok(c) => c.alpha,
        Err(_) => 0.5,
    }
}

/// Candidate seed pairs for one eps, deterministic in config order.
fn generate_pairs(
    config: &ExperimentConfig,
    m: &Arc<TorusManifold>,
    eps: f64,
    count: usize,
) -> Vec<(Point, Point)> {
    let r_cut_cfg = config.seeds.r_cut.unwrap_or_else(|| default_r_cut(m));
    let admissible_floor = 2.0 * eps * m.diameter();
    let quality_floor = 2.0 * MIN_CUT_WIDTHS * eps;
    let usable = |x: &Point, y: &Point| -> bool {
        let d = m.dist(x, y).expect("same dimension");
        d >= admissible_floor && r_cut_cfg.min(d / 2.0) >= MIN_CUT_WIDTHS * eps && d >= quality_floor
    };
    match config.seeds.strategy {
        SeedStrategy::Explicit => config
            .seeds
            .pairs
            .iter()
            .map(|(x, y)| (Point(x.clone()), Point(y.clone())))
            .collect(),
        SeedStrategy::Net => {
            let mut out = Vec::new();
            let (cx, cy) = canonical_pair(m);
            if usable(&cx, &cy) {
                out.push((cx, cy));
            }
            let net = m.separated_net(eps);
            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for (a, &i) in net.iter().enumerate() {
                for &j in net.iter().skip(a + 1) {
                    let x = m.node_point(i);
                    let y = m.node_point(j);
                    if usable(&x, &y) {
                        candidates.push((m.dist_nodes(i, j), i, j));
                    }
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for (_, i, j) in candidates {
                if out.len() >= count {
                    break;
                }
                let pair = (m.node_point(i), m.node_point(j));
                if !out.contains(&pair) {
                    out.push(pair);
                }
            }
            out.truncate(count.max(1));
            out
        }
        SeedStrategy::Random => {
            let eps_index = config
                .params
                .eps
                .iter()
                .position(|&e| e == eps)
                .unwrap_or(0) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.random_seed);
            rng.set_stream(eps_index);
            let mut out = Vec::new();
            let mut attempts = 0usize;
            while out.len() < count && attempts < 10_000 * count.max(1) {
                attempts += 1;
                let sample = |rng: &mut ChaCha8Rng| {
                    Point(
                        m.lengths()
                            .iter()
                            .map(|&l| rng.random_range(0.0..l))
                            .collect(),
                    )
                };
                let x = sample(&mut rng);
                let y = sample(&mut rng);
                if usable(&x, &y) {
                    out.push((x, y));
                }
            }
            out
        }
    }
}

type SeedResult = std::result::Result<(SolutionRecord, Field, Option<FlowTrace>), String>;

/// Flows all nodal seeds for one eps in parallel, in deterministic order.
fn nodal_stage(
    m: &Arc<TorusManifold>,
    profile: &RadialProfile,
    eps: f64,
    params: &EpsParams,
    alpha: f64,
    config: &ExperimentConfig,
    pairs: &[(Point, Point)],
) -> Vec<(SeedProvenance, SeedResult)> {
    let r_cut_cfg = config.seeds.r_cut.unwrap_or_else(|| default_r_cut(m));
    pairs
        .par_iter()
        .map(|(x, y)| {
            let dist = m.dist(x, y).expect("same dimension");
            let r_cut = r_cut_cfg.min(dist / 2.0);
            let result = (|| -> Result<(SolutionRecord, Field, Option<FlowTrace>)> {
                let seed = seed_pair(x, y, eps, profile, m, params, r_cut)?;
                let provenance = SeedProvenance::BubblePair {
                    x: x.clone(),
                    y: y.clone(),
                    admissible: seed.admissible,
                };
                let (u, trace, outcome, steps) =
                    run_flow_stages(&seed.field, params, alpha, config)?;
                let (record, field) =
                    build_record(&u, eps, provenance, outcome, steps, params, config)?;
                Ok((record, field, trace))
            })();
            let provenance = SeedProvenance::BubblePair {
                x: x.clone(),
                y: y.clone(),
                admissible: dist >= 2.0 * eps * m.diameter(),
            };
            (provenance, result.map_err(|e| e.to_string()))
        })
        .collect()
}

fn sweep(config: &ExperimentConfig, kind: ExperimentKind) -> Result<SolutionArchive> {
    let mut archive = SolutionArchive::new(kind, config.clone());
    let m = config.build_manifold()?;
    let profile = ground_profile(config)?;
    archive.m_e = Some(profile.m_e);

    for &eps in &config.params.eps {
        let params = config.eps_params(eps)?;
        let stage = positive_stage(&m, &profile, eps, &params, config)?;
        archive.constants.push(EpsConstants {
            eps,
            s_eps: stage.constants.s_eps,
            alpha: stage.constants.alpha,
        });
        if let Some((record, field, trace)) = stage.record_field {
            archive.push_record(record, &field, trace);
        }
        if let Some(failure) = stage.failure {
            archive.failures.push(failure);
        }

        if kind == ExperimentKind::SweepD {
            let pairs = generate_pairs(config, &m, eps, config.seeds.count);
            let results =
                nodal_stage(&m, &profile, eps, &params, stage.constants.alpha, config, &pairs);
            for (provenance, result) in results {
                match result {
                    Ok((record, field, trace)) => {
                        archive.push_record(record, &field, trace);
                    }
                    Err(error) => archive.failures.push(FailureRecord {
                        eps,
                        seed: provenance,
                        error,
                    }),
                }
            }
        }
    }
    archive.profile = Some(profile);
    Ok(archive)
}

fn multiplicity(config: &ExperimentConfig) -> Result<SolutionArchive> {
    if config.params.eps.len() != 1 {
        return Err(Error::InvalidConfig(
            "multiplicity runs use a single eps".into(),
        ));
    }
    let mut archive = sweep(config, ExperimentKind::SweepD)?;
    archive.kind = ExperimentKind::Multiplicity;
    cluster_solutions(
        &mut archive,
        config.tolerances.cluster_energy,
        config.tolerances.cluster_shape,
    )?;
    Ok(archive)
}

/// Recomputes all diagnostics for a stored archive; an absent or empty
/// archive yields an empty summary rather than an error.
fn diagnose(config: &ExperimentConfig) -> Result<SolutionArchive> {
    let Some(dir) = config.output.dir.clone() else {
        return Ok(SolutionArchive::new(ExperimentKind::Diagnose, config.clone()));
    };
    if !dir.join("archive.json").exists() {
        return Ok(SolutionArchive::new(ExperimentKind::Diagnose, config.clone()));
    }
    let mut archive = SolutionArchive::load(&dir)?;
    let m = archive.config.build_manifold()?;
    for i in 0..archive.records.len() {
        let record = archive.records[i].clone();
        let params = archive.config.eps_params(record.eps)?;
        let u = archive.snapshot_field(record.snapshot, &m)?;
        let (mut fresh, _) = build_record(
            &u,
            record.eps,
            record.seed.clone(),
            record.outcome,
            record.steps,
            &params,
            &archive.config,
        )?;
        fresh.snapshot = record.snapshot;
        fresh.cluster = record.cluster;
        archive.records[i] = fresh;
    }
    Ok(archive)
}
