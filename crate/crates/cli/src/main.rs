use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use displab::par;
use displab_cli::config::{Experiment, ExperimentConfig, Overrides};
use displab_cli::run::{check_dir_writable, run, write_failure, write_outputs};
use displab_cli::suite::{load_members, run_suite};

#[derive(Parser)]
#[command(name = "displab", version, about = "Ground-state energies of displaced single-site potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E0 along one axis, from the center to the largest displacement.
    Sweep(Common),
    /// E0 on the full tensor grid of displacements.
    FullSweep(Common),
    /// Decide which alternative the potential falls into.
    Classify(Common),
    /// Reflection-extension check for grid-aligned shifts.
    ReflectCheck(Common),
    /// Fiber energies of the cluster configuration over quasimomenta.
    Bloch(Common),
    /// Period-cell energy of the cluster configuration vs the corner energy.
    Minimizer(Common),
    /// Torus energies against the Neumann lower bound.
    Torus(Common),
    /// Seeded ensemble of random configurations.
    Ensemble(Common),
    /// Coupling-constant derivatives and the second-order mode sum.
    Perturb(Common),
    /// Leading-mode corner heuristic on the unit square.
    Corner(Common),
    /// Radial sweep on the disk.
    Disk(Common),
    /// Laplacian identity terms on the disk at the center.
    DiskIdentity(Common),
    /// Dirichlet hole sweep.
    Hole(Common),
    /// Run every config listed in a manifest.
    Suite(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML); a suite manifest for `suite`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Solver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Command {
    fn split(self) -> (Option<Experiment>, Common) {
        use Command::*;
        match self {
            Sweep(c) => (Some(Experiment::Sweep), c),
            FullSweep(c) => (Some(Experiment::FullSweep), c),
            Classify(c) => (Some(Experiment::Classify), c),
            ReflectCheck(c) => (Some(Experiment::ReflectCheck), c),
            Bloch(c) => (Some(Experiment::Bloch), c),
            Minimizer(c) => (Some(Experiment::Minimizer), c),
            Torus(c) => (Some(Experiment::Torus), c),
            Ensemble(c) => (Some(Experiment::Ensemble), c),
            Perturb(c) => (Some(Experiment::Perturb), c),
            Corner(c) => (Some(Experiment::Corner), c),
            Disk(c) => (Some(Experiment::Disk), c),
            DiskIdentity(c) => (Some(Experiment::DiskIdentity), c),
            Hole(c) => (Some(Experiment::Hole), c),
            Suite(c) => (None, c),
        }
    }
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn single(exp: Experiment, c: &Common, ov: &Overrides) -> Result<ExitCode> {
    let raw = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::parse("")?,
    };
    let cfg = match raw.effective(&Overrides { experiment: Some(exp), ..ov.clone() }) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    let dir = cfg.output_dir.clone().expect("effective");
    check_dir_writable(&dir)?;
    match run(&cfg) {
        Ok(rep) => {
            write_outputs(&cfg, &rep, &dir)?;
            print!("{}", rep.verdict_text());
            Ok(if rep.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            write_failure(&cfg, &e, &dir)?;
            Ok(ExitCode::from(EXIT_FAIL))
        }
    }
}

fn suite(c: &Common, ov: &Overrides) -> Result<ExitCode> {
    let manifest = c.config.as_ref().context("`suite` needs --config MANIFEST")?;
    let members = match load_members(manifest, ov) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out").join("suite"));
    let rows = run_suite(members, &out)?;
    for r in &rows {
        println!("{:<28} {:<14} {:<6} {:<24} {:.3e}", r.name, r.experiment, r.status, r.worst, r.margin);
    }
    let ok = rows.iter().all(|r| r.status == "pass");
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common) = cli.command.split();
    if let Some(n) = common.threads {
        par::init_threads(n.max(1));
    }
    let ov = Overrides { experiment: None, out: common.out.clone(), seed: common.seed, tol: common.tol };
    let result = match exp {
        Some(e) => single(e, &common, &ov),
        None => suite(&common, &Overrides { out: None, ..ov }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_USAGE)
    })
}
