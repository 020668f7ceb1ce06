//! Solution records, the append-only archive, and its on-disk layout.
//!
//! An archive directory contains
//!
//! * `archive.json` — metadata: schema version, experiment kind, the config
//!   echo, the limit level `m(E)`, the radial profile, per-eps constants and
//!   failure records;
//! * `records.jsonl` — one [`SolutionRecord`] per line;
//! * `traces.jsonl` — one flow trace (or `null`) per record, written only
//!   when trace keeping is enabled;
//! * `snapshots/NNNNNN.f64` — raw little-endian 64-bit floats, one per grid
//!   node, with a JSON sidecar (`shape`, `lengths`, `eps`, `schema_version`);
//! * `summary.csv` — one row per eps.
//!
//! Snapshots are lossless, so a save/load round trip reproduces summaries
//! bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::flow::{FlowOutcome, FlowTrace, RegionTag};
use crate::groundstate::RadialProfile;
use crate::lab::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::manifold::{Point, TorusManifold};

/// Converged positive levels below this are treated as collapse to zero, not
/// ground states.
pub const MIN_POSITIVE_LEVEL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Ground,
    SweepM,
    SweepD,
    Multiplicity,
    Diagnose,
}

/// Where a seed came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SeedProvenance {
    PositiveBubble { center: Point },
    BubblePair { x: Point, y: Point, admissible: bool },
    NonnegativeRandom { seed_index: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub eps: f64,
    pub seed: SeedProvenance,
    pub outcome: FlowOutcome,
    /// Accepted flow steps across all stages.
    pub steps: usize,
    /// Index of the field snapshot in the archive.
    pub snapshot: usize,
    pub energy: EnergyBreakdown,
    pub gap_plus: f64,
    pub gap_minus: f64,
    pub region: RegionTag,
    /// Independent residual `L(u - K(u), .)^{1/2}` from a fresh tight solve.
    pub pde_residual: f64,
    /// Converged, sign changing, both parts on the Nehari set, outside the
    /// tubes.
    pub nodal: bool,
    pub cm: Option<crate::concentration::CmPair>,
    pub cluster: Option<usize>,
}

/// A seed that produced no field (constructor or solver failure), kept for
/// audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureRecord {
    pub eps: f64,
    pub seed: SeedProvenance,
    pub error: String,
}

/// Ground constants measured at one eps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpsConstants {
    pub eps: f64,
    pub s_eps: f64,
    pub alpha: f64,
}

/// One summary row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub m_hat: Option<f64>,
    pub d_hat: Option<f64>,
    pub m_e: Option<f64>,
    pub m_ratio: Option<f64>,
    pub d_ratio: Option<f64>,
    /// `d_hat >= 2 m_hat - 1e-6`.
    pub d_ge_2m: Option<bool>,
    pub records: usize,
    pub nodal: usize,
    pub failures: usize,
    pub clusters: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveMeta {
    schema_version: u32,
    kind: ExperimentKind,
    config: ExperimentConfig,
    m_e: Option<f64>,
    profile: Option<RadialProfile>,
    constants: Vec<EpsConstants>,
    failures: Vec<FailureRecord>,
    cluster_count: Option<usize>,
    snapshot_count: usize,
    has_traces: bool,
}

#[derive(Serialize, Deserialize)]
struct SnapshotMeta {
    schema_version: u32,
    shape: Vec<usize>,
    lengths: Vec<f64>,
    eps: f64,
    dtype: String,
}

/// Append-only collection of solution records plus experiment metadata.
#[derive(Clone, Debug)]
pub struct SolutionArchive {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub m_e: Option<f64>,
    pub profile: Option<RadialProfile>,
    pub constants: Vec<EpsConstants>,
    pub records: Vec<SolutionRecord>,
    pub failures: Vec<FailureRecord>,
    /// Aligned with `records`; populated when trace keeping is enabled.
    pub traces: Vec<Option<FlowTrace>>,
    pub cluster_count: Option<usize>,
    snapshots: Vec<Vec<f64>>,
}

impl SolutionArchive {
    pub fn new(kind: ExperimentKind, config: ExperimentConfig) -> Self {
        SolutionArchive {
            kind,
            config,
            m_e: None,
            profile: None,
            constants: Vec::new(),
            records: Vec::new(),
            failures: Vec::new(),
            traces: Vec::new(),
            cluster_count: None,
            snapshots: Vec::new(),
        }
    }

    /// Stores a record together with its field snapshot; returns the record
    /// index.
    pub fn push_record(
        &mut self,
        mut record: SolutionRecord,
        field: &Field,
        trace: Option<FlowTrace>,
    ) -> usize {
        record.snapshot = self.snapshots.len();
        self.snapshots.push(field.values().to_vec());
        self.records.push(record);
        self.traces.push(trace);
        self.records.len() - 1
    }

    pub fn snapshot_values(&self, idx: usize) -> &[f64] {
        &self.snapshots[idx]
    }

    pub fn snapshot_field(&self, idx: usize, manifold: &Arc<TorusManifold>) -> Result<Field> {
        Field::from_values(manifold.clone(), self.snapshots[idx].clone())
    }

    pub fn constants_for(&self, eps: f64) -> Option<&EpsConstants> {
        self.constants.iter().find(|c| c.eps == eps)
    }

    /// Derives the per-eps summary rows, in config eps order.
    pub fn summary(&self) -> Vec<EpsSummary> {
        self.config
            .params
            .eps
            .iter()
            .map(|&eps| {
                let recs: Vec<&SolutionRecord> =
                    self.records.iter().filter(|r| r.eps == eps).collect();
                let m_hat = recs
                    .iter()
                    .filter(|r| {
                        r.outcome == FlowOutcome::Converged
                            && !r.nodal
                            && one_signed(r)
                            && r.energy.total > MIN_POSITIVE_LEVEL
                    })
                    .map(|r| r.energy.total)
                    .fold(None, fold_min);
                let d_hat = recs
                    .iter()
                    .filter(|r| r.nodal)
                    .map(|r| r.energy.total)
                    .fold(None, fold_min);
                let failures = self.failures.iter().filter(|f| f.eps == eps).count();
                EpsSummary {
                    eps,
                    m_hat,
                    d_hat,
                    m_e: self.m_e,
                    m_ratio: m_hat.and_then(|m| self.m_e.map(|me| m / me)),
                    d_ratio: d_hat.and_then(|d| self.m_e.map(|me| d / (2.0 * me))),
                    d_ge_2m: m_hat.and_then(|m| d_hat.map(|d| d >= 2.0 * m - 1e-6)),
                    records: recs.len(),
                    nodal: recs.iter().filter(|r| r.nodal).count(),
                    failures,
                    clusters: self.cluster_count,
                }
            })
            .collect()
    }

    /// Renders `summary.csv`: one row per eps.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "eps,m_hat,d_hat,m_e,m_ratio,d_ratio,d_ge_2m,records,nodal,failures,clusters\n",
        );
        for row in self.summary() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let optu = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            let optb = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.eps,
                opt(row.m_hat),
                opt(row.d_hat),
                opt(row.m_e),
                opt(row.m_ratio),
                opt(row.d_ratio),
                optb(row.d_ge_2m),
                row.records,
                row.nodal,
                row.failures,
                optu(row.clusters),
            )
            .expect("string write");
        }
        out
    }

    /// Writes the archive directory; see the module docs for the layout.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("snapshots"))?;
        let meta = ArchiveMeta {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            config: self.config.clone(),
            m_e: self.m_e,
            profile: self.profile.clone(),
            constants: self.constants.clone(),
            failures: self.failures.clone(),
            cluster_count: self.cluster_count,
            snapshot_count: self.snapshots.len(),
            has_traces: self.traces.iter().any(|t| t.is_some()),
        };
        std::fs::write(
            dir.join("archive.json"),
            serde_json::to_vec_pretty(&meta).expect("meta serializes"),
        )?;

        let mut records = String::new();
        for record in &self.records {
            records.push_str(&serde_json::to_string(record).expect("record serializes"));
            records.push('\n');
        }
        std::fs::write(dir.join("records.jsonl"), records)?;

        if meta.has_traces {
            let mut traces = String::new();
            for trace in &self.traces {
                traces.push_str(&serde_json::to_string(trace).expect("trace serializes"));
                traces.push('\n');
            }
            std::fs::write(dir.join("traces.jsonl"), traces)?;
        }

        for (idx, values) in self.snapshots.iter().enumerate() {
            let mut bytes = Vec::with_capacity(values.len() * 8);
            for v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            std::fs::write(dir.join(format!("snapshots/{idx:06}.f64")), bytes)?;
            let eps = self
                .records
                .iter()
                .find(|r| r.snapshot == idx)
                .map(|r| r.eps)
                .unwrap_or(f64::NAN);
            let side = SnapshotMeta {
                schema_version: SCHEMA_VERSION,
                shape: self.config.manifold.grid_sizes.clone(),
                lengths: self.config.manifold.lengths.clone(),
                eps,
                dtype: "f64le".into(),
            };
            std::fs::write(
                dir.join(format!("snapshots/{idx:06}.json")),
                serde_json::to_vec_pretty(&side).expect("sidecar serializes"),
            )?;
        }

        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }

    /// Loads an archive directory written by [`SolutionArchive::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_text = std::fs::read_to_string(dir.join("archive.json"))?;
        let raw: serde_json::Value = serde_json::from_str(&meta_text)
            .map_err(|e| Error::CorruptArchive(format!("archive.json: {e}")))?;
        let found = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptArchive("archive.json has no schema_version".into()))?
            as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let meta: ArchiveMeta = serde_json::from_value(raw)
            .map_err(|e| Error::CorruptArchive(format!("archive.json: {e}")))?;

        let records_text = std::fs::read_to_string(dir.join("records.jsonl"))?;
        let mut records = Vec::new();
        for (lineno, line) in records_text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: SolutionRecord = serde_json::from_str(line)
                .map_err(|e| Error::CorruptArchive(format!("records.jsonl:{lineno}: {e}")))?;
            records.push(record);
        }

        let traces = if meta.has_traces {
            let text = std::fs::read_to_string(dir.join("traces.jsonl"))?;
            let mut traces = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let trace: Option<FlowTrace> = serde_json::from_str(line)
                    .map_err(|e| Error::CorruptArchive(format!("traces.jsonl:{lineno}: {e}")))?;
                traces.push(trace);
            }
            traces
        } else {
            vec![None; records.len()]
        };

        let node_count: usize = meta.config.manifold.grid_sizes.iter().product();
        let mut snapshots = Vec::with_capacity(meta.snapshot_count);
        for idx in 0..meta.snapshot_count {
            let bytes = std::fs::read(dir.join(format!("snapshots/{idx:06}.f64")))?;
            if bytes.len() != node_count * 8 {
                return Err(Error::CorruptArchive(format!(
                    "snapshot {idx}: {} bytes, expected {}",
                    bytes.len(),
                    node_count * 8
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            snapshots.push(values);
        }

        Ok(SolutionArchive {
            kind: meta.kind,
            config: meta.config,
            m_e: meta.m_e,
            profile: meta.profile,
            constants: meta.constants,
            records,
            failures: meta.failures,
            traces,
            cluster_count: meta.cluster_count,
            snapshots,
        })
    }
}

fn fold_min(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(match acc {
        Some(a) => a.min(v),
        None => v,
    })
}

/// One cone gap at the solver-noise floor relative to the field scale:
/// converged positive states carry round-off-sized opposite-signed values.
fn one_signed(r: &SolutionRecord) -> bool {
    let scale = (2.0 * r.energy.quadratic).max(0.0).sqrt();
    r.gap_plus.min(r.gap_minus) <= 1e-6 * scale
}
