//! Experiment configuration files (TOML).
//!
//! Parsing is strict: unknown keys, and sections that belong to a different
//! experiment, are rejected. [`ExperimentConfig::effective`] fills in every
//! default so the echoed file reproduces the run on its own.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use displab::disk::DiskGrid;
use displab::displacement::{linspace, HoleShape, SolveOptions};
use displab::potential::{default_case2, Table};
use displab::{GridSpec, PotentialSpec, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sweep,
    FullSweep,
    Classify,
    ReflectCheck,
    Bloch,
    Minimizer,
    Torus,
    Ensemble,
    Perturb,
    Corner,
    Disk,
    DiskIdentity,
    Hole,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::FullSweep => "full-sweep",
            Experiment::Classify => "classify",
            Experiment::ReflectCheck => "reflect-check",
            Experiment::Bloch => "bloch",
            Experiment::Minimizer => "minimizer",
            Experiment::Torus => "torus",
            Experiment::Ensemble => "ensemble",
            Experiment::Perturb => "perturb",
            Experiment::Corner => "corner",
            Experiment::Disk => "disk",
            Experiment::DiskIdentity => "disk-identity",
            Experiment::Hole => "hole",
        }
    }

    fn on_disk(self) -> bool {
        matches!(self, Experiment::Disk | Experiment::DiskIdentity)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Well,
    Bump,
    Indefinite,
    Case2,
    Zero,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCfg {
    pub n: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialCfg {
    #[serde(default = "default_kind")]
    pub kind: Kind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableCfg>,
}

fn default_kind() -> Kind {
    Kind::Well
}
fn default_dim() -> usize {
    2
}
fn default_r() -> f64 {
    0.3
}

impl Default for PotentialCfg {
    fn default() -> Self {
        Self { kind: default_kind(), dim: default_dim(), depth: None, r: default_r(), shape: None, table: None }
    }
}

impl PotentialCfg {
    pub fn build(&self) -> Result<PotentialSpec> {
        let depth = self.depth.unwrap_or(0.0);
        let shape = self.shape.unwrap_or_default();
        let spec = match self.kind {
            Kind::Well => PotentialSpec::well(self.dim, depth, self.r)?,
            Kind::Bump => PotentialSpec::bump(self.dim, depth, self.r)?,
            Kind::Indefinite => PotentialSpec::indefinite(self.dim, depth, self.r)?,
            Kind::Zero => PotentialSpec::zero(self.dim, self.r)?,
            Kind::Case2 => return Ok(default_case2(self.dim, self.r, shape)?),
            Kind::Tabulated => {
                let t = self.table.as_ref().context("a tabulated potential needs [potential.table]")?;
                PotentialSpec::tabulated(self.dim, self.r, Table { n: t.n, values: t.values.clone() })?
            }
        };
        Ok(spec.with_shape(shape))
    }

    /// Whether `E_0` is expected to vanish identically.
    pub fn expects_flat(&self) -> bool {
        matches!(self.kind, Kind::Case2 | Kind::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    /// Cells per axis on the unit cube.
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    64
}

impl Default for GridCfg {
    fn default() -> Self {
        Self { n: default_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskGridCfg {
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_nr")]
    pub nr: usize,
    #[serde(default = "default_nphi")]
    pub nphi: usize,
}

fn one() -> f64 {
    1.0
}
fn default_nr() -> usize {
    96
}
fn default_nphi() -> usize {
    256
}

impl Default for DiskGridCfg {
    fn default() -> Self {
        Self { radius: 1.0, nr: default_nr(), nphi: default_nphi() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Eigenpairs exported by `classify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub axis: Option<usize>,
    pub fixed: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullSweepParams {
    pub per_axis: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    I,
    Ii,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    pub expect: Option<Case>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectParams {
    /// Shifts along axis 0, in cells.
    pub shifts: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochParams {
    pub thetas: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizerParams {
    pub max_diff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusParams {
    pub l: Option<usize>,
    /// Number of seeded random configurations, ignored when `omega` is set.
    pub configs: Option<usize>,
    /// Explicit displacement table, one row per site in row-major site order.
    pub omega: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub count: Option<usize>,
    pub l: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbParams {
    pub lambdas: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerParams {
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskParams {
    pub samples: Option<usize>,
    /// Distance kept between the displaced support and the boundary.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskIdentityParams {
    pub modes: Option<usize>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoleKind {
    Square,
    Round,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleParams {
    pub shape: Option<HoleKind>,
    /// Half-width of a square hole or radius of a round one.
    pub size: Option<f64>,
    pub per_axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub potential: PotentialCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_grid: Option<DiskGridCfg>,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_sweep: Option<FullSweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflect_check: Option<ReflectParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<BlochParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<MinimizerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner: Option<CornerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk: Option<DiskParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_identity: Option<DiskIdentityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole: Option<HoleParams>,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

/// Command-line overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("effective config has an experiment")
    }

    fn present_sections(&self) -> Vec<(Experiment, bool)> {
        vec![
            (Experiment::Sweep, self.sweep.is_some()),
            (Experiment::FullSweep, self.full_sweep.is_some()),
            (Experiment::Classify, self.classify.is_some()),
            (Experiment::ReflectCheck, self.reflect_check.is_some()),
            (Experiment::Bloch, self.bloch.is_some()),
            (Experiment::Minimizer, self.minimizer.is_some()),
            (Experiment::Torus, self.torus.is_some()),
            (Experiment::Ensemble, self.ensemble.is_some()),
            (Experiment::Perturb, self.perturb.is_some()),
            (Experiment::Corner, self.corner.is_some()),
            (Experiment::Disk, self.disk.is_some()),
            (Experiment::DiskIdentity, self.disk_identity.is_some()),
            (Experiment::Hole, self.hole.is_some()),
        ]
    }

    /// Apply overrides, check consistency, and materialize every default.
    pub fn effective(mut self, ov: &Overrides) -> Result<Self> {
        let exp = match (self.experiment, ov.experiment) {
            (Some(a), Some(b)) if a != b => bail!("config declares experiment `{a}` but `{b}` was requested"),
            (a, b) => b.or(a).context("no experiment given (set `experiment` or use a subcommand)")?,
        };
        self.experiment = Some(exp);
        for (e, present) in self.present_sections() {
            if present && e != exp {
                bail!("section [{e}] does not apply to experiment `{exp}`");
            }
        }
        if exp.on_disk() {
            if self.grid.is_some() {
                bail!("[grid] does not apply to disk experiments, use [disk-grid]");
            }
            self.disk_grid.get_or_insert_with(DiskGridCfg::default);
        } else {
            if self.disk_grid.is_some() {
                bail!("[disk-grid] only applies to disk experiments");
            }
            self.grid.get_or_insert_with(GridCfg::default);
        }
        if let Some(seed) = ov.seed {
            self.seed = Some(seed);
        }
        self.seed.get_or_insert(DEFAULT_SEED);
        if let Some(out) = &ov.out {
            self.output_dir = Some(out.clone());
        }
        self.output_dir.get_or_insert_with(|| PathBuf::from("out").join(exp.name()));

        let p = &mut self.potential;
        match p.kind {
            Kind::Well => {
                p.depth.get_or_insert(-10.0);
            }
            Kind::Bump | Kind::Indefinite => {
                p.depth.get_or_insert(10.0);
            }
            Kind::Case2 | Kind::Zero | Kind::Tabulated => {
                if p.depth.is_some() {
                    bail!("potential kind {:?} takes no depth", p.kind);
                }
            }
        }
        if p.kind != Kind::Tabulated && p.table.is_some() {
            bail!("[potential.table] only applies to kind = \"tabulated\"");
        }
        p.shape.get_or_insert(if exp.on_disk() { Shape::Radial } else { Shape::Product });

        if let Some(t) = ov.tol {
            self.solver.tol = Some(t);
        }
        self.solver.tol.get_or_insert(if exp.on_disk() { 1e-8 } else { 1e-10 });
        self.solver.max_iter.get_or_insert(1000);
        self.solver.k.get_or_insert(4);

        let d = self.potential.dim;
        self.potential.build()?;
        match exp {
            Experiment::Sweep => {
                let s = self.sweep.get_or_insert_with(Default::default);
                s.axis.get_or_insert(0);
                s.fixed.get_or_insert_with(|| vec![0.0; d.saturating_sub(1)]);
                s.samples.get_or_insert(9);
            }
            Experiment::FullSweep => {
                self.full_sweep.get_or_insert_with(Default::default).per_axis.get_or_insert(9);
            }
            Experiment::Classify => {
                self.classify.get_or_insert_with(Default::default);
            }
            Experiment::ReflectCheck => {
                self.reflect_check.get_or_insert_with(Default::default).shifts.get_or_insert_with(|| vec![0, 4, 8, 12]);
            }
            Experiment::Bloch => {
                self.bloch.get_or_insert_with(Default::default).thetas.get_or_insert_with(|| {
                    linspace(0.0, PI, 5).into_iter().map(|t| vec![t; d]).collect()
                });
            }
            Experiment::Minimizer => {
                self.minimizer.get_or_insert_with(Default::default).max_diff.get_or_insert(2e-10);
            }
            Experiment::Torus => {
                let t = self.torus.get_or_insert_with(Default::default);
                t.l.get_or_insert(2);
                if t.omega.is_none() {
                    t.configs.get_or_insert(20);
                } else if t.configs.is_some() {
                    bail!("[torus] takes either `omega` or `configs`, not both");
                }
            }
            Experiment::Ensemble => {
                let e = self.ensemble.get_or_insert_with(Default::default);
                e.count.get_or_insert(50);
                e.l.get_or_insert(8);
            }
            Experiment::Perturb => {
                let p = self.perturb.get_or_insert_with(Default::default);
                p.lambdas.get_or_insert_with(|| linspace(-0.1, 0.1, 5));
                p.delta.get_or_insert(1e-3);
                p.modes.get_or_insert(200);
            }
            Experiment::Corner => {
                self.corner.get_or_insert_with(Default::default).samples.get_or_insert(9);
            }
            Experiment::Disk => {
                let p = self.disk.get_or_insert_with(Default::default);
                p.samples.get_or_insert(7);
                p.margin.get_or_insert(0.02);
            }
            Experiment::DiskIdentity => {
                let p = self.disk_identity.get_or_insert_with(Default::default);
                p.modes.get_or_insert(40);
                p.step.get_or_insert(0.05);
            }
            Experiment::Hole => {
                let h = self.hole.get_or_insert_with(Default::default);
                h.shape.get_or_insert(HoleKind::Square);
                h.size.get_or_insert(0.15);
                h.per_axis.get_or_insert(5);
            }
        }
        Ok(self)
    }

    /// The echoed effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.solver.tol.expect("effective"),
            max_iter: self.solver.max_iter.expect("effective"),
            seed: self.seed.expect("effective"),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = self.grid.as_ref().context("experiment has no [grid]")?;
        Ok(GridSpec::unit_cube(self.potential.dim, g.n)?)
    }

    pub fn disk_grid_spec(&self) -> Result<DiskGrid> {
        let g = self.disk_grid.as_ref().context("experiment has no [disk-grid]")?;
        Ok(DiskGrid::new(g.radius, g.nr, g.nphi)?)
    }

    pub fn hole_shape(&self) -> Option<HoleShape> {
        let h = self.hole.as_ref()?;
        let size = h.size?;
        Some(match h.shape? {
            HoleKind::Square => HoleShape::Square { half_width: size },
            HoleKind::Round => HoleShape::Round { radius: size },
        })
    }
}

/// A suite manifest: config paths relative to the manifest's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub configs: Vec<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, base))
    }
}
