//! End-to-end runs: fine reference, decomposition, local bases, coarse
//! solve and error measurement, plus sweeps and the enrichment ablation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use crate::coarse::{
    assemble_coarse_spaces, compute_errors, estimate_infsup, mass_balance_defect, solve_gfem,
    FineSolution, FineSystem, GfemSolution, RelativeErrors, SpaceFlags, INFSUP_MAX_COLUMNS,
};
use crate::coefficient::{generate_highcontrast, load_raster, Pattern, RasterField, SourceField};
use crate::decomposition::{build_decomposition_with_overlap, Decomposition, DEFAULT_OVERLAP};
use crate::fem::CoefficientField;
use crate::local_basis::{build_local_bases, LocalBasis, ParticularBc};
use crate::mesh::{build_cartesian_mesh, FineMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Uniform(f64),
    File(PathBuf),
    Generated { pattern: Pattern, contrast: f64 },
}

impl FromStr for CoefficientSpec {
    type Err = Error;
    /// `uniform:<v>`, `file:<path>` or `<pattern>:<contrast>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| {
            a.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {a:?} in coefficient spec {s:?}")))
        };
        match kind {
            "uniform" => Ok(CoefficientSpec::Uniform(if arg.is_empty() { 1.0 } else { num(arg)? })),
            "file" if !arg.is_empty() => Ok(CoefficientSpec::File(PathBuf::from(arg))),
            _ => Ok(CoefficientSpec::Generated { pattern: kind.parse()?, contrast: num(arg)? }),
        }
    }
}

impl fmt::Display for CoefficientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientSpec::Uniform(v) => write!(f, "uniform:{v}"),
            CoefficientSpec::File(p) => write!(f, "file:{}", p.display()),
            CoefficientSpec::Generated { pattern, contrast } => write!(f, "{pattern}:{contrast}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Example1,
    Wells,
    Zero,
    File(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(SourceSpec::Example1),
            "wells" => Ok(SourceSpec::Wells),
            "zero" => Ok(SourceSpec::Zero),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(SourceSpec::File(PathBuf::from(p))),
                _ => Err(Error::InvalidInput(format!("unknown source {s:?}"))),
            },
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Example1 => f.write_str("example1"),
            SourceSpec::Wells => f.write_str("wells"),
            SourceSpec::Zero => f.write_str("zero"),
            SourceSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Number of local modes per subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalCount {
    Fixed(usize),
    /// Every local mode with a finite eigenvalue.
    Full,
}

impl LocalCount {
    fn as_option(self) -> Option<usize> {
        match self {
            LocalCount::Fixed(n) => Some(n),
            LocalCount::Full => None,
        }
    }
}

impl FromStr for LocalCount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(LocalCount::Full);
        }
        s.parse().map(LocalCount::Fixed).map_err(|_| Error::InvalidInput(format!("bad n_loc {s:?}")))
    }
}

impl fmt::Display for LocalCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalCount::Fixed(n) => write!(f, "{n}"),
            LocalCount::Full => f.write_str("full"),
        }
    }
}

fn bc_name(bc: ParticularBc) -> &'static str {
    match bc {
        ParticularBc::DirichletPressure => "dirichlet",
        ParticularBc::ConstantFlux => "constant_flux",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub m: usize,
    pub overlap: usize,
    pub ell: usize,
    pub n_loc: LocalCount,
    pub gamma: f64,
    pub bc: ParticularBc,
    pub coefficient: CoefficientSpec,
    pub source: SourceSpec,
    pub with_enrichment: bool,
    pub with_coarse_rt: bool,
    pub tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Also compute the coarse inf-sup constant.
    pub infsup: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 32,
            m: 4,
            overlap: DEFAULT_OVERLAP,
            ell: 4,
            n_loc: LocalCount::Fixed(6),
            gamma: 1.0,
            bc: ParticularBc::DirichletPressure,
            coefficient: CoefficientSpec::Uniform(1.0),
            source: SourceSpec::Example1,
            with_enrichment: true,
            with_coarse_rt: true,
            tol: 1e-8,
            output_dir: PathBuf::from("out"),
            seed: 0,
            infsup: false,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidInput(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidInput(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    pub const KEYS: [&'static str; 15] = [
        "n",
        "m",
        "overlap",
        "ell",
        "n_loc",
        "gamma",
        "bc",
        "coefficient",
        "source",
        "with_enrichment",
        "with_coarse_rt",
        "tol",
        "output_dir",
        "seed",
        "infsup",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "n" => self.n = parse_num(key, v)?,
            "m" => self.m = parse_num(key, v)?,
            "overlap" => self.overlap = parse_num(key, v)?,
            "ell" => self.ell = parse_num(key, v)?,
            "n_loc" => self.n_loc = v.parse()?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "bc" => {
                self.bc = match v {
                    "dirichlet" => ParticularBc::DirichletPressure,
                    "constant_flux" => ParticularBc::ConstantFlux,
                    _ => return Err(Error::InvalidInput(format!("bc: unknown variant {v:?}"))),
                }
            }
            "coefficient" => self.coefficient = v.parse()?,
            "source" => self.source = v.parse()?,
            "with_enrichment" => self.with_enrichment = parse_bool(key, v)?,
            "with_coarse_rt" => self.with_coarse_rt = parse_bool(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = parse_num(key, v)?,
            "infsup" => self.infsup = parse_bool(key, v)?,
            _ => return Err(Error::InvalidInput(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: k + 1, msg: format!("expected key = value, got {line:?}") })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.m == 0 || self.n % self.m != 0 {
            return bad(format!("m = {} must divide n = {}", self.m, self.n));
        }
        if self.ell == 0 {
            return bad("ell must be at least 1".into());
        }
        if self.overlap == 0 {
            return bad("overlap must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if let CoefficientSpec::Uniform(v) = self.coefficient {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("uniform coefficient must be positive, got {v}"));
            }
        }
        if let CoefficientSpec::Generated { contrast, .. } = self.coefficient {
            if !(contrast >= 1.0 && contrast.is_finite()) {
                return bad(format!("contrast must be at least 1, got {contrast}"));
            }
        }
        Ok(())
    }

    /// Every field as `key = value` lines, readable by `apply_config_text`.
    pub fn to_config_text(&self) -> String {
        self.values().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("overlap", self.overlap.to_string()),
            ("ell", self.ell.to_string()),
            ("n_loc", self.n_loc.to_string()),
            ("gamma", format!("{:?}", self.gamma)),
            ("bc", bc_name(self.bc).to_string()),
            ("coefficient", self.coefficient.to_string()),
            ("source", self.source.to_string()),
            ("with_enrichment", self.with_enrichment.to_string()),
            ("with_coarse_rt", self.with_coarse_rt.to_string()),
            ("tol", format!("{:?}", self.tol)),
            ("output_dir", self.output_dir.display().to_string()),
            ("seed", self.seed.to_string()),
            ("infsup", self.infsup.to_string()),
        ]
    }

    pub fn flags(&self) -> SpaceFlags {
        SpaceFlags { with_enrichment: self.with_enrichment, with_coarse_rt: self.with_coarse_rt }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config: RunConfig,
    pub error_v: f64,
    pub error_p: f64,
    pub error_div: f64,
    pub dofs_fine: usize,
    pub dofs_coarse: usize,
    pub beta: Option<f64>,
    /// Largest per-block mass balance defect of the coarse velocity.
    pub mass_defect: f64,
    pub wall_ms_fine: f64,
    pub wall_ms_local: f64,
    pub wall_ms_coarse: f64,
    /// `ok`, or the reason the coarse solve failed.
    pub status: String,
}

/// Columns whose values depend on the clock.
pub const TIMING_COLUMNS: [&str; 3] = ["wall_ms_fine", "wall_ms_local", "wall_ms_coarse"];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultRow {
    pub fn csv_header() -> String {
        let mut cols: Vec<&str> = RunConfig::KEYS.to_vec();
        cols.extend([
            "error_v",
            "error_p",
            "error_div",
            "dofs_fine",
            "dofs_coarse",
            "beta",
            "mass_defect",
            "status",
        ]);
        cols.extend(TIMING_COLUMNS);
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut cells: Vec<String> = self.config.values().into_iter().map(|(_, v)| csv_field(&v)).collect();
        cells.extend([
            format!("{:e}", self.error_v),
            format!("{:e}", self.error_p),
            format!("{:e}", self.error_div),
            self.dofs_fine.to_string(),
            self.dofs_coarse.to_string(),
            self.beta.map(|b| format!("{b:e}")).unwrap_or_default(),
            format!("{:e}", self.mass_defect),
            csv_field(&self.status),
            format!("{:.3}", self.wall_ms_fine),
            format!("{:.3}", self.wall_ms_local),
            format!("{:.3}", self.wall_ms_coarse),
        ]);
        cells.join(",")
    }
}

/// Fine-scale data shared by every run on the same mesh and coefficient.
pub struct Prepared {
    pub mesh: FineMesh,
    pub coeff: CoefficientField,
    pub f: Vec<f64>,
    pub fine: FineSystem,
    pub reference: FineSolution,
    pub wall_ms_fine: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn build_coefficient(config: &RunConfig, mesh: &FineMesh) -> Result<CoefficientField> {
    match &config.coefficient {
        CoefficientSpec::Uniform(v) => CoefficientField::uniform(mesh, *v),
        CoefficientSpec::File(path) => load_raster(path)?.to_coefficient(mesh),
        CoefficientSpec::Generated { pattern, contrast } => {
            generate_highcontrast(mesh.n_x(), mesh.n_y(), *pattern, *contrast, config.seed)?.to_coefficient(mesh)
        }
    }
}

pub fn build_source(config: &RunConfig, mesh: &FineMesh) -> Result<Vec<f64>> {
    let field = match &config.source {
        SourceSpec::Example1 => SourceField::Example1,
        SourceSpec::Wells => SourceField::Wells,
        SourceSpec::Zero => SourceField::Zero,
        SourceSpec::File(path) => SourceField::Raster(RasterField::parse(&std::fs::read_to_string(path)?)?),
    };
    field.cell_values(mesh)
}

/// Mesh, coefficient, source and the fine reference solution.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate().map_err(|e| e.in_phase("config"))?;
    let mesh = build_cartesian_mesh(config.n, config.n).map_err(|e| e.in_phase("mesh"))?;
    let coeff = build_coefficient(config, &mesh).map_err(|e| e.in_phase("coefficient"))?;
    let f = build_source(config, &mesh).map_err(|e| e.in_phase("source"))?;
    let t = Instant::now();
    let fine = FineSystem::new(&mesh, &coeff, f.clone(), config.gamma).map_err(|e| e.in_phase("fine assembly"))?;
    let reference = fine.solve(config.tol.min(1e-10)).map_err(|e| e.in_phase("fine solve"))?;
    Ok(Prepared { mesh, coeff, f, fine, reference, wall_ms_fine: ms_since(t) })
}

impl Prepared {
    /// Re-solves the reference for another augmentation parameter.
    pub fn with_gamma(&self, gamma: f64, tol: f64) -> Result<Prepared> {
        let t = Instant::now();
        let fine = self.fine.with_gamma(gamma).map_err(|e| e.in_phase("fine assembly"))?;
        let reference = fine.solve(tol.min(1e-10)).map_err(|e| e.in_phase("fine solve"))?;
        Ok(Prepared {
            mesh: self.mesh.clone(),
            coeff: self.coeff.clone(),
            f: self.f.clone(),
            fine,
            reference,
            wall_ms_fine: ms_since(t),
        })
    }
}

/// Decomposition and local bases, independent of gamma and of the coarse
/// space flags.
pub struct LocalStage {
    pub decomp: Decomposition,
    pub locals: Vec<LocalBasis>,
    pub wall_ms: f64,
}

impl LocalStage {
    /// Eigenvalues of every subdomain's local problem.
    pub fn eigenvalues(&self) -> Vec<Vec<f64>> {
        self.locals.iter().map(|l| l.velocity.eigenvalues.clone()).collect()
    }
}

pub fn build_local_stage(prep: &Prepared, config: &RunConfig, n_loc: LocalCount) -> Result<LocalStage> {
    let t = Instant::now();
    let decomp = build_decomposition_with_overlap(&prep.mesh, config.m, config.overlap, config.ell)
        .map_err(|e| e.in_phase("decomposition"))?;
    let locals = build_local_bases(
        &prep.mesh,
        &prep.coeff,
        &prep.f,
        &decomp,
        n_loc.as_option(),
        config.bc,
        config.tol.min(1e-10),
    )
    .map_err(|e| e.in_phase("local bases"))?;
    Ok(LocalStage { decomp, locals, wall_ms: ms_since(t) })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub solution: Option<GfemSolution>,
    pub errors: Option<RelativeErrors>,
}

/// Coarse assembly, solve and errors for an already built local stage,
/// using its first `n_loc` modes (all of them for `Full`).
pub fn finish_run(prep: &Prepared, stage: &LocalStage, config: &RunConfig) -> Result<RunOutcome> {
    let t = Instant::now();
    let locals: Vec<LocalBasis> = match config.n_loc {
        LocalCount::Fixed(n) => stage
            .locals
            .iter()
            .map(|l| l.truncated(n))
            .collect::<Result<_>>()
            .map_err(|e| e.in_phase("local bases"))?,
        LocalCount::Full => stage.locals.clone(),
    };
    let spaces = assemble_coarse_spaces(&prep.fine, &locals, &stage.decomp, config.flags())
        .map_err(|e| e.in_phase("coarse assembly"))?;
    let beta = if config.infsup && spaces.dof_count() <= INFSUP_MAX_COLUMNS {
        Some(estimate_infsup(&prep.fine, &spaces).map_err(|e| e.in_phase("inf-sup"))?)
    } else {
        None
    };
    let mut row = ResultRow {
        config: config.clone(),
        error_v: f64::NAN,
        error_p: f64::NAN,
        error_div: f64::NAN,
        dofs_fine: prep.mesh.mixed_dof_count(),
        dofs_coarse: spaces.dof_count(),
        beta,
        mass_defect: f64::NAN,
        wall_ms_fine: prep.wall_ms_fine,
        wall_ms_local: stage.wall_ms,
        wall_ms_coarse: 0.0,
        status: "ok".into(),
    };
    let solution = match solve_gfem(&prep.fine, &spaces, config.tol) {
        Ok(s) => s,
        Err(e @ Error::Singular(_)) => {
            row.status = e.to_string();
            row.wall_ms_coarse = ms_since(t);
            return Ok(RunOutcome { row, solution: None, errors: None });
        }
        Err(e) => return Err(e.in_phase("coarse solve")),
    };
    let errors = compute_errors(
        &prep.fine,
        (&prep.reference.u, &prep.reference.p),
        (&solution.u, &solution.p),
    )
    .map_err(|e| e.in_phase("errors"))?;
    row.error_v = errors.velocity;
    row.error_p = errors.pressure;
    row.error_div = errors.divergence;
    row.mass_defect = mass_balance_defect(&prep.fine, &stage.decomp, &solution.u);
    row.wall_ms_coarse = ms_since(t);
    Ok(RunOutcome { row, solution: Some(solution), errors: Some(errors) })
}

/// A single run from scratch.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let prep = prepare(config)?;
    let stage = build_local_stage(&prep, config, config.n_loc)?;
    finish_run(&prep, &stage, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NLoc,
    Ell,
    Gamma,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_loc" => Ok(SweepAxis::NLoc),
            "ell" => Ok(SweepAxis::Ell),
            "gamma" => Ok(SweepAxis::Gamma),
            _ => Err(Error::InvalidInput(format!("unknown sweep axis {s:?}"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::NLoc => "n_loc",
            SweepAxis::Ell => "ell",
            SweepAxis::Gamma => "gamma",
        })
    }
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidInput(format!("{axis} values must be nonnegative integers, got {v}")))
    }
}

/// One run per value along `axis`. The fine solve is shared unless gamma
/// changes; local bases are shared unless ell changes, and an n_loc sweep
/// builds them once at the largest count.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<RunOutcome>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()).in_phase("config"));
    }
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = config.clone();
        match axis {
            SweepAxis::NLoc => c.n_loc = LocalCount::Fixed(as_count(axis, v).map_err(|e| e.in_phase("config"))?),
            SweepAxis::Ell => c.ell = as_count(axis, v).map_err(|e| e.in_phase("config"))?,
            SweepAxis::Gamma => c.gamma = v,
        }
        c.validate().map_err(|e| e.in_phase("config"))?;
        configs.push(c);
    }
    let prep = prepare(config)?;
    let mut out = Vec::with_capacity(values.len());
    match axis {
        SweepAxis::NLoc => {
            let max = configs
                .iter()
                .map(|c| match c.n_loc {
                    LocalCount::Fixed(n) => n,
                    LocalCount::Full => 0,
                })
                .max()
                .unwrap_or(0);
            let stage = build_local_stage(&prep, config, LocalCount::Fixed(max))?;
            for c in &configs {
                out.push(finish_run(&prep, &stage, c)?);
            }
        }
        SweepAxis::Ell => {
            for c in &configs {
                let stage = build_local_stage(&prep, c, c.n_loc)?;
                out.push(finish_run(&prep, &stage, c)?);
            }
        }
        SweepAxis::Gamma => {
            let stage = build_local_stage(&prep, config, config.n_loc)?;
            for c in &configs {
                let p = prep.with_gamma(c.gamma, c.tol)?;
                out.push(finish_run(&p, &stage, c)?);
            }
        }
    }
    Ok(out)
}

/// The same configuration with and without enrichment, both with inf-sup
/// estimates.
pub fn ablate(config: &RunConfig) -> Result<[RunOutcome; 2]> {
    let mut with = config.clone();
    with.with_enrichment = true;
    with.infsup = true;
    let mut without = with.clone();
    without.with_enrichment = false;
    let prep = prepare(&with)?;
    let stage = build_local_stage(&prep, &with, with.n_loc)?;
    Ok([finish_run(&prep, &stage, &with)?, finish_run(&prep, &stage, &without)?])
}
