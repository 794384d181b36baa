//! Experiment runners. Each produces named output files plus verdicts; nothing
//! touches the filesystem until the whole experiment has succeeded.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use displab::disk::{max_offset, radial_sweep, strong_min_check, MinVerdict};
use displab::displacement::{
    classify_alternative, ground_state, hole_sweep_full, linspace, outside_support_variation, reflection_identity_check,
    sweep_axis, sweep_full, Alternative, SweepTable,
};
use displab::lattice::{
    bloch_sweep, bracketing_check, member_rng, minimizer_check, period_grid, random_config, sample_random_configs,
    LatticeConfig,
};
use displab::perturbation::{corner_heuristic_2d, fh_derivative_check, laplacian_identity_diagnostic, second_order_check};
use displab::{lowest_eigenpairs_with, Displacement};

use crate::config::{Case, Experiment, ExperimentConfig};

/// Relative spread allowed between the corner energies of a sweep.
pub const CORNER_RTOL: f64 = 1e-8;
/// Bound on `|E_0|` for potentials whose energy vanishes identically.
pub const FLAT_TOL: f64 = 1e-7;
/// Bound on the relative variance of the ground state outside the support.
pub const FLAT_VARIANCE: f64 = 1e-8;
pub const BRACKET_SLACK: f64 = 1e-9;
pub const FH_TOL: f64 = 1e-4;
pub const MODE_SUM_RTOL: f64 = 0.05;
pub const REFLECTION_TOL: f64 = 1e-10;

/// One asserted invariant. `margin >= 0` exactly when it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub margin: f64,
}

impl Verdict {
    fn new(name: &str, margin: f64) -> Self {
        // + 0.0 turns a negative zero into a positive one
        Self { name: name.to_string(), margin: margin + 0.0 }
    }

    /// A yes/no check reported with the quantity that decided it.
    fn flag(name: &str, ok: bool, value: f64) -> Self {
        let margin = if ok { value.abs() } else { -value.abs().max(f64::MIN_POSITIVE) };
        Self::new(name, margin)
    }

    pub fn pass(&self) -> bool {
        self.margin >= 0.0
    }

    pub fn line(&self) -> String {
        format!("{} {} {:.6e}", self.name, if self.pass() { "pass" } else { "fail" }, self.margin)
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, Vec<u8>)>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::pass)
    }

    /// The smallest margin, i.e. the verdict closest to failing.
    pub fn worst(&self) -> Option<&Verdict> {
        self.verdicts.iter().min_by(|a, b| a.margin.total_cmp(&b.margin))
    }

    pub fn verdict_text(&self) -> String {
        self.verdicts.iter().map(|v| v.line() + "\n").collect()
    }
}

fn sweep_files(rep: &mut Report, stem: &str, t: &SweepTable) -> Result<()> {
    let mut csv = Vec::new();
    t.write_csv(&mut csv)?;
    rep.file(&format!("{stem}.csv"), csv);
    let mut dat = Vec::new();
    t.write_plot_data(&mut dat)?;
    rep.file(&format!("{stem}.dat"), dat);
    Ok(())
}

fn is_corner(a: &Displacement, edge: f64) -> bool {
    a.0.iter().all(|v| (v.abs() - edge).abs() < 1e-12)
}

/// Verdicts for a full tensor sweep whose pattern is strict.
fn extremal_verdicts(rep: &mut Report, t: &SweepTable, tol: f64, monotone: bool) {
    let edge = t.records.iter().map(|r| r.a.0[0].abs()).fold(0.0, f64::max);
    let centre = t.records.iter().find(|r| r.a.0.iter().all(|&v| v == 0.0));
    let others = t.records.iter().filter(|r| r.a.0.iter().any(|&v| v != 0.0));
    let max_other = others.map(|r| r.e0).fold(f64::NEG_INFINITY, f64::max);
    rep.verdict(Verdict::new("argmax-center", centre.map_or(f64::NEG_INFINITY, |c| c.e0 - max_other)));

    let corner_e: Vec<f64> = t.records.iter().filter(|r| is_corner(&r.a, edge)).map(|r| r.e0).collect();
    let hi = corner_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = corner_e.iter().copied().fold(f64::INFINITY, f64::min);
    let min_other = t.records.iter().filter(|r| !is_corner(&r.a, edge)).map(|r| r.e0).fold(f64::INFINITY, f64::min);
    rep.verdict(Verdict::new("argmin-corners", min_other - hi));
    rep.verdict(Verdict::new("corner-spread", CORNER_RTOL - (hi - lo) / lo.abs().max(1.0)));
    if monotone {
        let step = (0..t.dim()).map(|ax| t.monotone_margin(ax)).fold(f64::NEG_INFINITY, f64::max);
        rep.verdict(Verdict::new("monotone", -step - 10.0 * tol));
    }
}

fn flat_verdict(rep: &mut Report, t: &SweepTable) {
    let max_e = t.energies().iter().fold(0.0f64, |m, e| m.max(e.abs()));
    rep.verdict(Verdict::new("flat", FLAT_TOL - max_e));
}

fn residual_verdict(rep: &mut Report, t: &SweepTable, tol: f64) {
    rep.verdict(Verdict::new("residual", tol - t.max_residual()));
}

fn csv_line(out: &mut String, cols: &[String]) {
    out.push_str(&cols.join(","));
    out.push('\n');
}

fn e(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let q = cfg.potential.build()?;
    let opts = cfg.solve_options();
    let tol = opts.tol;
    let flat = cfg.potential.expects_flat();
    let mut rep = Report::default();
    match cfg.experiment() {
        Experiment::Sweep => {
            let p = cfg.sweep.as_ref().expect("effective");
            let grid = cfg.grid_spec()?;
            let axis = p.axis.expect("effective");
            let samples = linspace(0.0, q.d_max(), p.samples.expect("effective"));
            let t = sweep_axis(&q, axis, p.fixed.as_deref().unwrap_or_default(), &samples, &grid, &opts)?;
            sweep_files(&mut rep, "sweep", &t)?;
            if flat {
                flat_verdict(&mut rep, &t);
            } else {
                rep.verdict(Verdict::new("monotone", -t.monotone_margin(axis) - 10.0 * tol));
            }
            residual_verdict(&mut rep, &t, tol);
        }
        Experiment::FullSweep => {
            let grid = cfg.grid_spec()?;
            let per_axis = cfg.full_sweep.as_ref().and_then(|p| p.per_axis).expect("effective");
            let t = sweep_full(&q, per_axis, &grid, &opts)?;
            sweep_files(&mut rep, "full_sweep", &t)?;
            if flat {
                flat_verdict(&mut rep, &t);
                let mut worst = 0.0f64;
                for r in &t.records {
                    let gs = ground_state(&q, &r.a, &grid, &opts)?;
                    worst = worst.max(outside_support_variation(&q, &r.a, &grid, &gs.vector));
                }
                rep.verdict(Verdict::new("outside-variance", FLAT_VARIANCE - worst));
            } else {
                extremal_verdicts(&mut rep, &t, tol, true);
            }
            rep.verdict(Verdict::new("symmetry", 2.0 * tol - t.symmetry_defect()));
            residual_verdict(&mut rep, &t, tol);
        }
        Experiment::Classify => {
            let grid = cfg.grid_spec()?;
            let report = classify_alternative(&q, &grid, &opts)?;
            let mut out = String::from("case,support_energy,tol_class,warning\n");
            let case = match report.case {
                Alternative::I => "i",
                Alternative::II => "ii",
            };
            let warning = report.warning.clone().unwrap_or_default().replace(',', ";");
            csv_line(&mut out, &[case.into(), e(report.support_ground_energy), e(report.tol_class), warning]);
            rep.file("classify.csv", out.into_bytes());

            let op = displab::displacement::neumann_operator(&q, &Displacement::zero(q.dim), &grid)?;
            let k = cfg.solver.k.expect("effective");
            let spec = lowest_eigenpairs_with(&op, &opts.eigen(k))?;
            let mut csv = Vec::new();
            spec.write_csv(&mut csv)?;
            rep.file("spectrum.csv", csv);
            let mut field = Vec::new();
            spec.write_vector(0, &grid, &mut field)?;
            rep.file("ground.field", field);

            let distance = (report.support_ground_energy.abs() - report.tol_class).abs();
            if let Some(expect) = cfg.classify.as_ref().and_then(|c| c.expect) {
                let want = match expect {
                    Case::I => Alternative::I,
                    Case::Ii => Alternative::II,
                };
                rep.verdict(Verdict::flag("alternative", report.case == want, distance));
            }
            rep.verdict(Verdict::new("residual", tol - spec.residuals.iter().copied().fold(0.0, f64::max)));
        }
        Experiment::ReflectCheck => {
            let grid = cfg.grid_spec()?;
            let shifts = cfg.reflect_check.as_ref().and_then(|p| p.shifts.clone()).expect("effective");
            let mut out = String::from("shift_cells,e0_zero,e0_shifted,quotient_periodic,quotient_neumann,residual\n");
            let (mut worst_res, mut worst_gap) = (0.0f64, f64::INFINITY);
            for s in shifts {
                let mut a = vec![0.0; q.dim];
                a[0] = s as f64 * grid.h[0];
                let r = reflection_identity_check(&q, &Displacement(a), &grid, &opts)?;
                csv_line(
                    &mut out,
                    &[
                        r.shift_cells.to_string(),
                        e(r.e0_zero),
                        e(r.e0_shifted),
                        e(r.quotient_periodic),
                        e(r.quotient_neumann),
                        format!("{:.6e}", r.residual),
                    ],
                );
                worst_res = worst_res.max(r.residual);
                worst_gap = worst_gap.min(r.quotient_neumann - r.e0_shifted);
            }
            rep.file("reflect_check.csv", out.into_bytes());
            rep.verdict(Verdict::new("quotient-residual", REFLECTION_TOL - worst_res));
            rep.verdict(Verdict::new("quotient-bound", worst_gap + tol));
        }
        Experiment::Bloch => {
            let cell = cfg.grid_spec()?;
            let thetas = cfg.bloch.as_ref().and_then(|p| p.thetas.clone()).expect("effective");
            ensure!(thetas.iter().all(|t| t.len() == q.dim), "every theta needs {} components", q.dim);
            let energies = bloch_sweep(&q, &thetas, &period_grid(&cell)?, &opts)?;
            let mut out = String::new();
            let mut header: Vec<String> = (1..=q.dim).map(|i| format!("theta_{i}")).collect();
            header.push("E0".into());
            csv_line(&mut out, &header);
            for (t, en) in thetas.iter().zip(&energies) {
                let mut row: Vec<String> = t.iter().map(|&v| e(v)).collect();
                row.push(e(*en));
                csv_line(&mut out, &row);
            }
            rep.file("bloch.csv", out.into_bytes());
            let zero = thetas.iter().position(|t| t.iter().all(|v| (v / (2.0 * PI)).fract() == 0.0));
            if let Some(z) = zero {
                let lowest = energies.iter().copied().fold(f64::INFINITY, f64::min);
                rep.verdict(Verdict::new("theta0-lowest", lowest - energies[z] + tol));
            }
        }
        Experiment::Minimizer => {
            let cell = cfg.grid_spec()?;
            let r = minimizer_check(&q, &cell, &period_grid(&cell)?, &opts)?;
            let max_diff = cfg.minimizer.as_ref().and_then(|p| p.max_diff).expect("effective");
            let mut out = String::from("e_periodic,e_neumann,difference\n");
            csv_line(&mut out, &[e(r.e_periodic), e(r.e_neumann), format!("{:.6e}", r.difference)]);
            rep.file("minimizer.csv", out.into_bytes());
            rep.verdict(Verdict::new("periodic-equals-corner", max_diff - r.difference));
        }
        Experiment::Torus => {
            let cell = cfg.grid_spec()?;
            let p = cfg.torus.as_ref().expect("effective");
            let l = p.l.expect("effective");
            let configs = match &p.omega {
                Some(rows) => {
                    let omega = rows.iter().map(|r| Displacement(r.clone())).collect();
                    vec![LatticeConfig::new(q.dim, l, omega)?]
                }
                None => (0..p.configs.expect("effective") as u64)
                    .map(|m| random_config(&q, l, &mut member_rng(opts.seed, m)))
                    .collect::<displab::Result<Vec<_>>>()?,
            };
            let mut out = String::from("index,torus,min_site,margin\n");
            let mut worst = f64::INFINITY;
            for (i, c) in configs.iter().enumerate() {
                let r = bracketing_check(&q, c, &cell, &opts)?;
                csv_line(&mut out, &[i.to_string(), e(r.torus), e(r.min_site), format!("{:.6e}", r.margin)]);
                worst = worst.min(r.margin);
            }
            rep.file("torus.csv", out.into_bytes());
            rep.verdict(Verdict::new("bracketing", worst + BRACKET_SLACK));
        }
        Experiment::Ensemble => {
            let cell = cfg.grid_spec()?;
            let p = cfg.ensemble.as_ref().expect("effective");
            let stats =
                sample_random_configs(&q, p.count.expect("effective"), opts.seed, p.l.expect("effective"), &cell, &opts)?;
            let mut csv = Vec::new();
            stats.write_csv(&mut csv)?;
            rep.file("ensemble.csv", csv);
            rep.file("ensemble_summary.json", (stats.summary_json() + "\n").into_bytes());
            rep.verdict(Verdict::new("ensemble-bound", stats.margin() + BRACKET_SLACK));
        }
        Experiment::Perturb => {
            let grid = cfg.grid_spec()?;
            let p = cfg.perturb.as_ref().expect("effective");
            let lambdas = p.lambdas.clone().expect("effective");
            let fh = fh_derivative_check(&q, &lambdas, &grid, p.delta.expect("effective"), &opts)?;
            let so = second_order_check(&q, p.modes.expect("effective"), &grid, &opts)?;
            let mut csv = Vec::new();
            fh.write_csv(&mut csv)?;
            rep.file("perturb.csv", csv);
            let mut csv = Vec::new();
            so.write_csv(&mut csv)?;
            rep.file("second_order.csv", csv);
            rep.file("perturb_summary.txt", format!("{}\n{}\n", fh.summary(), so.summary()).into_bytes());

            rep.verdict(Verdict::new("feynman-hellmann", FH_TOL - fh.max_first_discrepancy()));
            let fd2_max = fh.fd_second.iter().chain(&so.fd_second).copied().fold(f64::NEG_INFINITY, f64::max);
            rep.verdict(Verdict::new("concave", -fd2_max));
            let (fd2, sum) = (so.fd_second[0], so.sum_second[0]);
            rep.verdict(Verdict::new("mode-sum", MODE_SUM_RTOL - (fd2 - sum).abs() / sum.abs().max(f64::MIN_POSITIVE)));
            let (d1, d2) = so.doubling_deltas;
            rep.verdict(Verdict::new("mode-sum-converging", d1 - d2));
        }
        Experiment::Corner => {
            let grid = cfg.grid_spec()?;
            ensure!(q.dim == 2, "the corner heuristic is two-dimensional");
            let samples = cfg.corner.as_ref().and_then(|p| p.samples).expect("effective");
            let neg = q.negated()?;
            let axis = linspace(-q.d_max(), q.d_max(), samples);
            let mut out = String::from("a_1,a_2,value\n");
            let (mut centre, mut worst_neg, mut max_abs, mut corner_max, mut asym) =
                (f64::NAN, f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64);
            for &x in &axis {
                for &y in &axis {
                    let (a, _) = Displacement(vec![x, y]).snapped(&grid, q.d_max());
                    let v = corner_heuristic_2d(&q, &a, &grid)?;
                    asym = asym.max((v - corner_heuristic_2d(&neg, &a, &grid)?).abs());
                    csv_line(&mut out, &[e(a.0[0]), e(a.0[1]), e(v)]);
                    if x == 0.0 && y == 0.0 {
                        centre = v;
                        continue;
                    }
                    worst_neg = worst_neg.max(v);
                    max_abs = max_abs.max(v.abs());
                    if x.abs() == q.d_max() && y.abs() == q.d_max() {
                        corner_max = corner_max.max(v.abs());
                    }
                }
            }
            rep.file("corner.csv", out.into_bytes());
            rep.verdict(Verdict::new("zero-at-center", 1e-12 - centre.abs()));
            rep.verdict(Verdict::new("negative-elsewhere", -worst_neg));
            rep.verdict(Verdict::new("max-at-corners", corner_max - max_abs));
            rep.verdict(Verdict::new("sign-invariant", -asym));
        }
        Experiment::Disk => {
            let dg = cfg.disk_grid_spec()?;
            let p = cfg.disk.as_ref().expect("effective");
            let reach = max_offset(&q, &dg, p.margin.expect("effective"));
            ensure!(reach > 0.0, "the potential does not fit inside the disk with the requested margin");
            let t = radial_sweep(&q, &linspace(0.0, reach, p.samples.expect("effective")), &dg, &opts)?;
            sweep_files(&mut rep, "disk_sweep", &t)?;
            let (verdict, margin) = strong_min_check(&t, 10.0 * tol)?;
            let want = if flat { MinVerdict::IdenticallyZero } else { MinVerdict::NoInteriorMin };
            rep.file("disk_verdict.txt", format!("{}\n", verdict.as_str()).into_bytes());
            let name = want.as_str();
            match want {
                MinVerdict::IdenticallyZero => {
                    rep.verdict(Verdict::new(name, if verdict == want { 10.0 * tol - margin } else { -margin.abs() }))
                }
                _ => rep.verdict(Verdict::new(name, if verdict == want { margin } else { -margin.abs() })),
            }
            if !flat {
                let e = t.energies();
                let step = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                rep.verdict(Verdict::new("monotone", -step));
            }
            residual_verdict(&mut rep, &t, tol);
        }
        Experiment::DiskIdentity => {
            let dg = cfg.disk_grid_spec()?;
            let p = cfg.disk_identity.as_ref().expect("effective");
            let r = laplacian_identity_diagnostic(&q, p.modes.expect("effective"), &dg, p.step.expect("effective"), &opts)?;
            let mut out = String::from("term,value\n");
            for (name, v) in [
                ("lhs", r.lhs),
                ("curvature", r.curvature_term),
                ("mode_sum", r.mode_sum),
                ("rhs", r.rhs()),
                ("tail_estimate", r.tail_estimate),
                ("e0", r.e0),
            ] {
                csv_line(&mut out, &[name.into(), e(v)]);
            }
            csv_line(&mut out, &["modes_used".into(), r.modes_used.to_string()]);
            rep.file("disk_identity.csv", out.into_bytes());
            if q.is_zero() {
                let worst = r.lhs.abs().max(r.curvature_term.abs()).max(r.mode_sum.abs());
                rep.verdict(Verdict::new("terms-vanish", 1e-12 - worst));
            } else {
                rep.verdict(Verdict::new("sign-agreement", -r.lhs.max(r.rhs())));
            }
        }
        Experiment::Hole => {
            let grid = cfg.grid_spec()?;
            let hole = cfg.hole_shape().context("hole shape")?;
            let per_axis = cfg.hole.as_ref().and_then(|h| h.per_axis).expect("effective");
            let t = hole_sweep_full(hole, per_axis, &grid, &opts)?;
            sweep_files(&mut rep, "hole_sweep", &t)?;
            extremal_verdicts(&mut rep, &t, tol, false);
            let min_e = t.energies().iter().copied().fold(f64::INFINITY, f64::min);
            rep.verdict(Verdict::new("positive", min_e));
            residual_verdict(&mut rep, &t, tol);
        }
    }
    Ok(rep)
}

/// Write the effective config, the experiment files and the verdict file.
pub fn write_outputs(cfg: &ExperimentConfig, rep: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("effective.toml"), cfg.to_toml())?;
    for (name, bytes) in &rep.files {
        fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
    }
    fs::write(dir.join("verdict.txt"), rep.verdict_text())?;
    Ok(())
}

/// Verdict file for a run whose solve failed.
pub fn write_failure(cfg: &ExperimentConfig, err: &anyhow::Error, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("effective.toml"), cfg.to_toml())?;
    let mut text = String::new();
    writeln!(text, "run fail nan")?;
    writeln!(text, "# {}", format!("{err:#}").replace('\n', " "))?;
    fs::write(dir.join("verdict.txt"), text)?;
    Ok(())
}

pub fn check_dir_writable(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("{} exists and is not a directory", dir.display());
    }
    Ok(())
}
