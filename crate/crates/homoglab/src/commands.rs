//! Command implementations. Each returns the bytes to emit and whether
//! the run counts as a pass.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use homoglab_core::cell::{tensor_at, tensor_theta_deviation, CELL_TOLERANCE};
use homoglab_core::check::{run_check, CheckReport, Suite};
use homoglab_core::evolution::{
    homogenise, solve_heterogeneous, solve_homogenised, wellposedness_ratio, BoxGrid, EquationKind, EquationSpec,
    SourceSpec, BOX_TOLERANCE,
};
use homoglab_core::exec::Executor;
use homoglab_core::fibre::{dyadic_thetas, fibre_error_sweep, FibreEquation, FibreSweep};
use homoglab_core::norms::norm_l2nu;
use homoglab_core::small::Mat;
use homoglab_core::study::{default_a, default_b, default_gamma, default_source, run_study, ConvergenceReport, SlopeFit, StudyConfig};
use homoglab_core::torus::{ellipticity_check, CellGrid, CoefficientCell, CoefficientKind, SpectralField, TermSpec};
use homoglab_core::{c64, Complex64};
use serde::{Deserialize, Serialize};

use crate::files::{self, ThetaGrid};
use crate::report::{self, Format};
use crate::CliError;

pub struct Outcome {
    pub bytes: Vec<u8>,
    pub output: Option<PathBuf>,
    pub pass: bool,
    /// Human-readable lines for stderr.
    pub log: Vec<String>,
}

fn mat_json(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.dim).map(|i| (0..m.dim).map(|j| [m.m[i][j].re, m.m[i][j].im]).collect()).collect()
}

fn apply_config<T: Serialize + for<'de> Deserialize<'de>>(args: T, config: &Option<PathBuf>) -> Result<T, CliError> {
    match config {
        Some(p) => files::merge(&args, files::load_config(p)?),
        None => Ok(args),
    }
}

fn coefficient_terms(path: &Option<PathBuf>, kind: CoefficientKind, fallback: Vec<TermSpec>) -> Result<(CoefficientKind, Vec<TermSpec>), CliError> {
    match path {
        Some(p) => files::load_coefficient(p, kind),
        None => Ok((kind, fallback)),
    }
}

// ---------------------------------------------------------------- cell

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellArgs {
    /// Coefficient file (defaults to 2 + sin 2πy₁).
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Quasimomenta, `;`-separated, components `,`-separated.
    #[arg(long, default_value = "0")]
    pub theta: String,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct DeviationOut {
    pub theta_norms: Vec<f64>,
    pub tensor: Vec<f64>,
    pub corrector: Vec<f64>,
    pub tensor_slope: SlopeFit,
    pub corrector_slope: SlopeFit,
    pub constant: f64,
}

#[derive(Debug, Serialize)]
pub struct CellOut {
    pub dim: usize,
    pub n: usize,
    pub kappa: f64,
    pub theta: Vec<Vec<f64>>,
    pub a_theta: Vec<Vec<Vec<[f64; 2]>>>,
    /// `‖N_θ^j‖_{H¹}` per θ and direction.
    pub corrector_norms: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Against θ = 0, over the nonzero θ.
    pub deviations: Option<DeviationOut>,
    pub tolerance: f64,
}

pub fn cell(args: CellArgs) -> Result<Outcome, CliError> {
    let config = args.config.clone();
    let args = apply_config(args, &config)?;
    let grid = CellGrid::new(args.dim, args.n)?;
    let (kind, terms) = coefficient_terms(&args.coeff, CoefficientKind::Matrix, default_a(args.dim))?;
    let c = CoefficientCell::from_spec(kind, &terms, &grid)?;
    let kappa = ellipticity_check(&c)?;
    let thetas = files::parse_thetas(&args.theta, args.dim)?;
    let mut out = CellOut {
        dim: args.dim,
        n: args.n,
        kappa,
        theta: thetas.clone(),
        a_theta: Vec::new(),
        corrector_norms: Vec::new(),
        residuals: Vec::new(),
        deviations: None,
        tolerance: CELL_TOLERANCE,
    };
    for th in &thetas {
        let (cor, t) = tensor_at(&c, th)?;
        out.a_theta.push(mat_json(&t.matrix));
        out.corrector_norms.push((0..args.dim).map(|j| cor.h1_norm(j)).collect());
        out.residuals.push(cor.residual());
    }
    let nonzero: Vec<Vec<f64>> = thetas.iter().filter(|t| t.iter().any(|x| *x != 0.0)).cloned().collect();
    if nonzero.len() >= 2 {
        let d = tensor_theta_deviation(&c, &nonzero)?;
        out.deviations = Some(DeviationOut {
            theta_norms: d.theta_norms,
            tensor: d.tensor,
            corrector: d.corrector,
            tensor_slope: d.tensor_slope,
            corrector_slope: d.corrector_slope,
            constant: d.constant,
        });
    }
    let log = vec![format!("kappa = {kappa}, {} quasimomenta", thetas.len())];
    Ok(Outcome { bytes: report::to_json(&out)?, output: args.out, pass: true, log })
}

// ---------------------------------------------------------------- fibre

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FibreEq {
    Wave,
    Heat,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibreArgs {
    #[arg(long, value_enum)]
    pub eq: FibreEq,
    /// Coefficient file (defaults to 2 + sin 2πy₁ for wave, 2 + cos 2πy₁ for heat).
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value = "1/8,1/16,1/32")]
    pub eps: String,
    #[arg(long, default_value_t = 8)]
    pub kmax: i64,
    /// `dyadic:J` (±π2^{-j}, j ≤ J) or an explicit θ list.
    #[arg(long, default_value = "dyadic:4")]
    pub theta_grid: String,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// The fibre source `1 + ½cos 2πy₁ + ¼ i sin 4πy₁`.
pub fn default_fibre_source(grid: &CellGrid) -> SpectralField {
    use std::f64::consts::PI;
    SpectralField::scalar_from_fn(grid, |y| c64(1.0 + 0.5 * (2.0 * PI * y[0]).cos(), 0.25 * (4.0 * PI * y[0]).sin()))
}

pub fn fibre_sweep<E: Executor>(args: &FibreArgs, exec: &E) -> Result<FibreSweep, CliError> {
    let grid = CellGrid::new(args.dim, args.n)?;
    let (eq, fallback) = match args.eq {
        FibreEq::Wave => (FibreEquation::Wave, default_a(args.dim)),
        FibreEq::Heat => (FibreEquation::Heat, default_b(args.dim)),
    };
    let (kind, terms) = coefficient_terms(&args.coeff, CoefficientKind::Matrix, fallback)?;
    let c = CoefficientCell::from_spec(kind, &terms, &grid)?;
    ellipticity_check(&c)?;
    let eps = files::parse_list(&args.eps)?;
    if args.kmax < 0 {
        return Err(CliError::config("kmax must be nonnegative"));
    }
    let ks: Vec<f64> = (-args.kmax..=args.kmax).map(|k| k as f64).collect();
    let thetas = match files::parse_theta_grid(&args.theta_grid, args.dim)? {
        ThetaGrid::Dyadic(j) => dyadic_thetas(args.dim, j),
        ThetaGrid::Explicit(list) => list
            .into_iter()
            .map(|t| {
                let mut v = [0.0; 2];
                v[..t.len()].copy_from_slice(&t);
                v
            })
            .collect(),
    };
    let (cor0, t0) = tensor_at(&c, &vec![0.0; args.dim])?;
    let f = default_fibre_source(&grid);
    Ok(fibre_error_sweep(eq, &c, &cor0, &t0, &eps, args.nu, &ks, &thetas, &f, exec)?)
}

pub fn fibre<E: Executor>(args: FibreArgs, exec: &E) -> Result<Outcome, CliError> {
    let config = args.config.clone();
    let args = apply_config(args, &config)?;
    let sweep = fibre_sweep(&args, exec)?;
    let mut log: Vec<String> =
        sweep.sup_per_eps.iter().map(|(e, s)| format!("eps = {e}: sup ratio {s:.6}")).collect();
    log.push(format!("variation across eps: {:.4}", sweep.variation));
    Ok(Outcome { bytes: report::fibre_csv(&sweep, args.dim)?, output: args.out, pass: true, log })
}

// ---------------------------------------------------------------- evolve

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EqArg {
    Wave,
    Heat,
    Thermoelastic,
}

impl From<EqArg> for EquationKind {
    fn from(e: EqArg) -> Self {
        match e {
            EqArg::Wave => EquationKind::Wave,
            EqArg::Heat => EquationKind::Heat,
            EqArg::Thermoelastic => EquationKind::Thermoelastic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveArgs {
    #[arg(long, value_enum)]
    pub eq: EqArg,
    /// Principal coefficient (a, or b for heat).
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    /// Diffusion coefficient of the thermoelastic system.
    #[arg(long)]
    pub coeff_b: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    /// Period, `1/M`.
    #[arg(long, default_value = "1/8")]
    pub eps: String,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub source_g: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 64)]
    pub half_window: usize,
    /// Summary JSON destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Field dump destination (JSON, frequency-domain slices).
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct EvolveOut {
    pub equation: String,
    pub eps: f64,
    pub box_points: usize,
    pub time_points: usize,
    pub source_norm: f64,
    pub u_eps_norm: f64,
    pub u0_norm: f64,
    pub u_error: f64,
    pub v_error: Option<f64>,
    pub het_residual: f64,
    pub hom_residual: f64,
    pub wellposedness_ratio: Option<f64>,
    pub a0: Option<Vec<Vec<[f64; 2]>>>,
    pub b0: Option<Vec<Vec<[f64; 2]>>>,
    pub box_tolerance: f64,
}

#[derive(Debug, Serialize)]
struct FieldDump {
    lambdas: Vec<[f64; 2]>,
    /// Per time-frequency slot: box Fourier coefficients `[re, im]`.
    u_eps: Vec<Vec<[f64; 2]>>,
    u0: Vec<Vec<[f64; 2]>>,
}

fn slices_json(u: &homoglab_core::evolution::SpaceTimeField) -> Vec<Vec<[f64; 2]>> {
    u.slices().iter().map(|s| s.component(0).iter().map(|z: &Complex64| [z.re, z.im]).collect()).collect()
}

pub fn evolve<E: Executor>(args: EvolveArgs, exec: &E) -> Result<Outcome, CliError> {
    let config = args.config.clone();
    let args = apply_config(args, &config)?;
    let kind: EquationKind = args.eq.into();
    let mut cfg = StudyConfig::new(kind, Vec::new());
    cfg.dim = args.dim;
    cfg.n = args.n;
    cfg.nu = args.nu;
    cfg.half_window = args.half_window;
    let cell = CellGrid::new(args.dim, args.n)?;
    let time = cfg.time_grid()?;
    let eps = files::parse_number(&args.eps)?;
    let bx = BoxGrid::from_eps(&cell, eps)?;
    let load = |p: &Option<PathBuf>, k: CoefficientKind, fb: Vec<TermSpec>| -> Result<CoefficientCell, CliError> {
        let (k, t) = coefficient_terms(p, k, fb)?;
        Ok(CoefficientCell::from_spec(k, &t, &cell)?)
    };
    let (a, b, gamma) = match kind {
        EquationKind::Wave => (Some(load(&args.coeff, CoefficientKind::Matrix, default_a(args.dim))?), None, None),
        EquationKind::Heat => (None, Some(load(&args.coeff, CoefficientKind::Matrix, default_b(args.dim))?), None),
        EquationKind::Thermoelastic => (
            Some(load(&args.coeff, CoefficientKind::Matrix, default_a(args.dim))?),
            Some(load(&args.coeff_b, CoefficientKind::Matrix, default_b(args.dim))?),
            Some(load(&args.gamma, CoefficientKind::Scalar, default_gamma(args.dim))?),
        ),
    };
    let source = |p: &Option<PathBuf>, fb: SourceSpec| -> Result<SourceSpec, CliError> {
        p.as_ref().map_or(Ok(fb), |p| files::load_source(p))
    };
    let f = source(&args.source, default_source(kind, args.dim))?.build(bx.grid(), &time)?;
    let g = match kind {
        EquationKind::Thermoelastic => {
            Some(source(&args.source_g, default_source(EquationKind::Wave, args.dim))?.build(bx.grid(), &time)?)
        }
        _ => None,
    };
    let spec = EquationSpec { kind, a, b, gamma, bx: bx.clone(), time: time.clone(), f, g };
    spec.validate()?;
    let started = Instant::now();
    let het = solve_heterogeneous(&spec, exec)?;
    let hom_data = homogenise(&spec)?;
    let hom = solve_homogenised(&spec, &hom_data)?;
    let u_error = norm_l2nu(&het.u.sub(&hom.u)?);
    let v_error = match (&het.v, &hom.v) {
        (Some(a), Some(b)) => Some(norm_l2nu(&a.sub(b)?)),
        _ => None,
    };
    let out = EvolveOut {
        equation: kind.name().to_string(),
        eps,
        box_points: bx.grid().len(),
        time_points: time.len(),
        source_norm: norm_l2nu(&spec.f),
        u_eps_norm: norm_l2nu(&het.u),
        u0_norm: norm_l2nu(&hom.u),
        u_error,
        v_error,
        het_residual: het.residual,
        hom_residual: hom.residual,
        wellposedness_ratio: match kind {
            EquationKind::Thermoelastic => Some(wellposedness_ratio(&spec, &het)?),
            _ => None,
        },
        a0: hom_data.a0.as_ref().map(|t| mat_json(&t.matrix)),
        b0: hom_data.b0.as_ref().map(|t| mat_json(&t.matrix)),
        box_tolerance: BOX_TOLERANCE,
    };
    if let Some(p) = &args.dump {
        let dump = FieldDump {
            lambdas: time.lambdas().iter().map(|l| [l.re, l.im]).collect(),
            u_eps: slices_json(&het.u),
            u0: slices_json(&hom.u),
        };
        report::write_output(Some(p), &report::to_json(&dump)?)?;
    }
    let log = vec![format!("solved in {:.2?}; ||u_eps - u_0|| = {u_error:e}", started.elapsed())];
    Ok(Outcome { bytes: report::to_json(&out)?, output: args.out, pass: true, log })
}

// ---------------------------------------------------------------- study

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, default_value = "wave")]
    pub eq: EqArg,
    #[arg(long, default_value = "1/4,1/8,1/16,1/32")]
    pub eps: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Comma-separated metric names; an empty string selects none.
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    #[arg(long)]
    pub coeff_b: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub source_g: Option<PathBuf>,
    #[arg(long)]
    pub random_sources: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rate every metric must reach for a zero exit code.
    #[arg(long, default_value_t = 0.9)]
    pub min_slope: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` or `json`; taken from the output extension when absent.
    #[arg(long)]
    pub format: Option<String>,
    /// Study configuration JSON; its keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flags plus config, resolved into a study configuration and output choice.
pub fn study_config(args: &StudyArgs) -> Result<(StudyConfig, Option<PathBuf>, Format), CliError> {
    let kind: EquationKind = args.eq.into();
    let mut cfg = StudyConfig::new(kind, files::parse_list(&args.eps)?);
    cfg.dim = args.dim;
    cfg.n = args.n;
    cfg.nu = args.nu;
    if let Some(m) = &args.metrics {
        cfg.metrics = Some(m.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect());
    }
    let term_file = |p: &Option<PathBuf>, k| -> Result<Option<Vec<TermSpec>>, CliError> {
        p.as_ref().map(|p| files::load_coefficient(p, k).map(|x| x.1)).transpose()
    };
    cfg.a = term_file(&args.coeff, CoefficientKind::Matrix)?;
    if kind == EquationKind::Heat {
        cfg.b = cfg.a.take();
    }
    if let Some(b) = term_file(&args.coeff_b, CoefficientKind::Matrix)? {
        cfg.b = Some(b);
    }
    cfg.gamma = term_file(&args.gamma, CoefficientKind::Scalar)?;
    cfg.source = args.source.as_ref().map(|p| files::load_source(p)).transpose()?;
    cfg.source_g = args.source_g.as_ref().map(|p| files::load_source(p)).transpose()?;
    if let Some(r) = args.random_sources {
        cfg.random_sources = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let mut out = args.out.clone();
    let mut format = args.format.clone();
    if let Some(p) = &args.config {
        let mut map = files::load_config(p)?;
        if let Some(v) = map.remove("output") {
            out = Some(PathBuf::from(v.as_str().ok_or_else(|| CliError::config("'output' must be a string"))?));
        }
        if let Some(v) = map.remove("format") {
            format = Some(v.as_str().ok_or_else(|| CliError::config("'format' must be a string"))?.to_string());
        }
        cfg = files::merge(&cfg, map)?;
    }
    let fmt = Format::resolve(format.as_deref(), out.as_deref())?;
    cfg.validate()?;
    Ok((cfg, out, fmt))
}

pub fn study<E: Executor>(args: StudyArgs, exec: &E) -> Result<Outcome, CliError> {
    let (cfg, out, fmt) = study_config(&args)?;
    let started = Instant::now();
    let rep: ConvergenceReport = run_study(&cfg, exec)?;
    let mut pass = true;
    let mut log = vec![format!("{} study finished in {:.2?}", cfg.equation.name(), started.elapsed())];
    for s in &rep.summaries {
        let ok = s.slope.at_least(args.min_slope);
        pass &= ok;
        log.push(format!(
            "{} {:<20} slope {:>8}  C {:.4e}",
            if ok { "PASS" } else { "FAIL" },
            s.metric,
            report::slope_cell(&s.slope).chars().take(8).collect::<String>(),
            s.constant
        ));
    }
    let bytes = match fmt {
        Format::Csv => report::study_csv(&rep)?,
        Format::Json => report::to_json(&rep)?,
    };
    Ok(Outcome { bytes, output: out, pass, log })
}

// ---------------------------------------------------------------- check

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckArgs {
    /// cell, fibre, evolution, norms or all.
    #[arg(default_value = "all")]
    pub suite: String,
    /// Replaces the default coefficient in the cell invariants.
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// JSON report destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn check_report<E: Executor>(args: &CheckArgs, exec: &E) -> Result<CheckReport, CliError> {
    let suite: Suite = args.suite.parse()?;
    let coefficient = match &args.coeff {
        Some(p) => {
            let (kind, terms) = files::load_coefficient(p, CoefficientKind::Matrix)?;
            Some(CoefficientCell::from_spec(kind, &terms, &CellGrid::new(args.dim, args.n)?)?)
        }
        None => None,
    };
    Ok(run_check(suite, coefficient.as_ref(), exec))
}

pub fn check<E: Executor>(args: CheckArgs, exec: &E) -> Result<Outcome, CliError> {
    let config = args.config.clone();
    let args = apply_config(args, &config)?;
    let started = Instant::now();
    let rep = check_report(&args, exec)?;
    let mut lines: Vec<String> = rep
        .results
        .iter()
        .map(|r| {
            format!(
                "{} {}/{} value={:e} ({})",
                if r.pass { "PASS" } else { "FAIL" },
                r.suite,
                r.name,
                r.value,
                r.detail
            )
        })
        .collect();
    let failed = rep.failures().count();
    lines.push(format!(
        "{} of {} invariants passed in {:.2?}",
        rep.results.len() - failed,
        rep.results.len(),
        started.elapsed()
    ));
    let (bytes, output, log) = match args.out {
        Some(p) => (report::to_json(&rep)?, Some(p), lines),
        None => {
            let mut text = lines.join("\n");
            text.push('\n');
            (text.into_bytes(), None, Vec::new())
        }
    };
    Ok(Outcome { bytes, output, pass: rep.passed(), log })
}
