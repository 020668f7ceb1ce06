//! Command-line experiment driver.
//!
//! ```text
//! nodalflow ground       --config circle.toml --out runs/ground
//! nodalflow sweep-m      --config circle.toml --out runs/m   --eps 0.2,0.1,0.05
//! nodalflow sweep-d      --config circle.toml --out runs/d   --seeds 4 --jobs 8
//! nodalflow multiplicity --config torus.toml  --out runs/t2  --seeds 200
//! nodalflow diagnose     --out runs/d
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nodalflow::lab::{run_experiment, ExperimentConfig, ExperimentKind, SolutionArchive};

#[derive(Parser)]
#[command(
    name = "nodalflow",
    about = "Ground and nodal levels of a singularly perturbed elliptic equation on flat tori",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Optional for `diagnose`, which can read the
    /// config echoed into the archive.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the archive (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the eps list, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Override the seed-pair count per eps.
    #[arg(long)]
    seeds: Option<usize>,
    /// Rayon worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress the summary printout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the radial ground state and its energy level.
    Ground(Common),
    /// Per eps: flow a positive bubble and record the ground level.
    SweepM(Common),
    /// Per eps: flow two-bubble seeds and record the nodal level.
    SweepD(Common),
    /// Many seeds at one eps, clustered modulo translations and sign.
    Multiplicity(Common),
    /// Recompute all diagnostics for a stored archive.
    Diagnose(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Ground(c) => (ExperimentKind::Ground, c),
        Command::SweepM(c) => (ExperimentKind::SweepM, c),
        Command::SweepD(c) => (ExperimentKind::SweepD, c),
        Command::Multiplicity(c) => (ExperimentKind::Multiplicity, c),
        Command::Diagnose(c) => (ExperimentKind::Diagnose, c),
    };
    match run(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(kind: ExperimentKind, common: &Common) -> nodalflow::Result<()> {
    let mut config = load_config(kind, common)?;
    if !common.eps.is_empty() {
        config.params.eps = common.eps.clone();
    }
    if let Some(count) = common.seeds {
        config.seeds.count = count;
    }
    if let Some(out) = &common.out {
        config.output.dir = Some(out.clone());
    }
    config.validate()?;

    let archive = match common.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| nodalflow::Error::InvalidConfig(e.to_string()))?;
            pool.install(|| run_experiment(&config, kind))?
        }
        None => run_experiment(&config, kind)?,
    };

    if let Some(dir) = &config.output.dir {
        archive.save(dir)?;
        if !common.quiet {
            println!("archive written to {}", dir.display());
        }
    }
    if !common.quiet {
        print_summary(&archive);
    }
    Ok(())
}

fn load_config(kind: ExperimentKind, common: &Common) -> nodalflow::Result<ExperimentConfig> {
    if let Some(path) = &common.config {
        return ExperimentConfig::load(path);
    }
    // Diagnose can bootstrap from the archive's embedded config.
    if kind == ExperimentKind::Diagnose {
        if let Some(out) = &common.out {
            if out.join("archive.json").exists() {
                let archive = SolutionArchive::load(out)?;
                let mut config = archive.config;
                config.output.dir = Some(out.clone());
                return Ok(config);
            }
            // Nothing stored yet: an empty diagnose run is still a success.
            let mut config = minimal_config();
            config.output.dir = Some(out.clone());
            return Ok(config);
        }
    }
    Err(nodalflow::Error::InvalidConfig(
        "--config is required (diagnose may use --out with a stored archive)".into(),
    ))
}

/// Fallback config for diagnosing an empty directory.
fn minimal_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        r#"
        schema_version = 1
        [manifold]
        dimension = 1
        lengths = [6.283185307179586]
        grid_sizes = [256]
        [params]
        fiber_dim = 3
        eps = [0.2]
    "#,
    )
    .expect("static config parses")
}

fn print_summary(archive: &SolutionArchive) {
    if let Some(m_e) = archive.m_e {
        println!("m(E) = {m_e:.8}");
    }
    let summary = archive.summary();
    if summary.iter().all(|row| row.records == 0) && archive.records.is_empty() {
        println!("no records");
        return;
    }
    println!("eps        m_hat        d_hat        m_ratio   d_ratio   d>=2m  records nodal failed");
    for row in summary {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{:<10} {:<12} {:<12} {:<9} {:<9} {:<6} {:<7} {:<5} {:<6}",
            row.eps,
            fmt(row.m_hat),
            fmt(row.d_hat),
            row.m_ratio.map_or("-".into(), |x| format!("{x:.4}")),
            row.d_ratio.map_or("-".into(), |x| format!("{x:.4}")),
            row.d_ge_2m.map_or("-".into(), |b| b.to_string()),
            row.records,
            row.nodal,
            row.failures,
        );
    }
    if let Some(clusters) = archive.cluster_count {
        println!("distinct nodal clusters (modulo torus translations and u -> -u): {clusters}");
    }
    if !archive.failures.is_empty() {
        println!("failed seeds:");
        for f in &archive.failures {
            println!("  eps {}: {}", f.eps, f.error);
        }
    }
}
