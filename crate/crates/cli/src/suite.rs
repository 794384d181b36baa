//! Manifest-driven batches of experiments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use displab::par;

use crate::config::{ExperimentConfig, Manifest, Overrides};
use crate::run::{run, write_failure, write_outputs};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub experiment: String,
    pub status: &'static str,
    pub worst: String,
    pub margin: f64,
}

/// Parse every member first; a manifest with any bad config runs nothing.
pub fn load_members(manifest: &Path, ov: &Overrides) -> Result<Vec<(String, ExperimentConfig)>> {
    let (m, base) = Manifest::load(manifest)?;
    let mut seen = BTreeSet::new();
    let mut members = Vec::new();
    for rel in &m.configs {
        let path: PathBuf = base.join(rel);
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("bad config path {}", path.display()))?
            .to_string();
        if !seen.insert(name.clone()) {
            bail!("duplicate config name `{name}` in manifest");
        }
        let cfg = ExperimentConfig::load(&path)?.effective(ov).with_context(|| format!("in {}", path.display()))?;
        members.push((name, cfg));
    }
    Ok(members)
}

/// Run all members in parallel, writing each into `out/<name>`.
pub fn run_suite(members: Vec<(String, ExperimentConfig)>, out: &Path) -> Result<Vec<SummaryRow>> {
    let members: Vec<(String, ExperimentConfig)> = members
        .into_iter()
        .map(|(name, mut cfg)| {
            cfg.output_dir = Some(out.join(&name));
            (name, cfg)
        })
        .collect();
    let rows = par::map_slice(&members, |(name, cfg)| -> Result<SummaryRow> {
        let dir = cfg.output_dir.clone().expect("set above");
        let experiment = cfg.experiment().name().to_string();
        match run(cfg) {
            Ok(rep) => {
                write_outputs(cfg, &rep, &dir)?;
                let (worst, margin) = rep.worst().map_or(("none".to_string(), f64::INFINITY), |v| (v.name.clone(), v.margin));
                let status = if rep.passed() { "pass" } else { "fail" };
                Ok(SummaryRow { name: name.clone(), experiment, status, worst, margin })
            }
            Err(e) => {
                eprintln!("{name}: {e:#}");
                write_failure(cfg, &e, &dir)?;
                Ok(SummaryRow { name: name.clone(), experiment, status: "error", worst: "run".into(), margin: f64::NAN })
            }
        }
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("summary.csv"), summary_csv(&rows))?;
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("name,experiment,status,worst_verdict,worst_margin\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{:.6e}", r.name, r.experiment, r.status, r.worst, r.margin);
    }
    s
}
