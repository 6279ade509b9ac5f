//! Convergence studies in ε: metric registry, per-ε evaluation, rate fits
//! and the report structure.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    corrector_field, gradient, homogenise, reciprocal, solve_heterogeneous, solve_homogenised, BoxGrid,
    CorrectorFields, EquationKind, EquationSpec, Homogenised, Solution, SourceSpec, SpaceTimeField, TemporalProfile,
    BOX_TOLERANCE,
};
use crate::exec::Executor;
use crate::norms::{dt_multiplier, norm_l2nu, norm_l2nu_h1, norm_l2nu_hminus1, TimeGrid};
use crate::torus::{CellGrid, CoefficientCell, CoefficientKind, TermSpec};

/// Result of a log-log least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeFit {
    Fitted { slope: f64, intercept: f64 },
    /// Every value is exactly zero; nothing to fit.
    Exact,
}

impl SlopeFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted { slope, .. } => Some(*slope),
            SlopeFit::Exact => None,
        }
    }

    /// Passes a minimum-rate threshold (the exact case always passes).
    pub fn at_least(&self, threshold: f64) -> bool {
        self.slope().map_or(true, |s| s >= threshold)
    }
}

/// Least squares on `(log x, log y)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidConfig(format!("a slope needs at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || y < 0.0 || !y.is_finite()) {
        return Err(Error::InvalidConfig("slope fit needs positive abscissae and nonnegative values".into()));
    }
    if points.iter().all(|&(_, y)| y == 0.0) {
        return Ok(SlopeFit::Exact);
    }
    if points.iter().any(|&(_, y)| y == 0.0) {
        return Err(Error::InvalidConfig("slope fit mixes zero and nonzero values".into()));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (libm::log(x), libm::log(y));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return Err(Error::InvalidConfig("slope fit needs distinct abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / den;
    let intercept = (sy - slope * sx) / n;
    Ok(SlopeFit::Fitted { slope, intercept })
}

/// Which norm of the data a metric is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsNorm {
    /// `‖∂_t² f‖`.
    Dt2F,
    /// `‖∂_t f‖`.
    DtF,
    /// `‖f‖`.
    F,
    /// `‖∂_t^{-1/2} f‖`.
    DtMinusHalfF,
    /// `‖∂_t² f‖ + ‖∂_t g‖`.
    Dt2FDtG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    DtU,
    DtHalfU,
    DtHalfV,
    CorrectorFlux,
    CorrectorFluxA,
    CorrectorFluxB,
    FluxHminus1,
    FluxHminus1A,
    FluxHminus1B,
    U,
    FirstOrderH1,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDef {
    pub id: MetricId,
    pub equation: EquationKind,
    pub name: &'static str,
    /// Left-hand side in words.
    pub lhs: &'static str,
    pub rhs: RhsNorm,
}

const fn def(id: MetricId, equation: EquationKind, name: &'static str, lhs: &'static str, rhs: RhsNorm) -> MetricDef {
    MetricDef { id, equation, name, lhs, rhs }
}

/// Every error quantity of the homogenisation theorems and their corollaries.
pub const REGISTRY: &[MetricDef] = &[
    def(MetricId::DtU, EquationKind::Wave, "dt_u", "|dt u_eps - dt u_0|", RhsNorm::Dt2F),
    def(MetricId::CorrectorFlux, EquationKind::Wave, "corrector_flux", "|a grad u_eps - a grad(u_0 + eps N_0 . grad u_0)|", RhsNorm::Dt2F),
    def(MetricId::FluxHminus1, EquationKind::Wave, "flux_hminus1", "|a grad u_eps - a_0 grad u_0|_{H^-1}", RhsNorm::Dt2F),
    def(MetricId::U, EquationKind::Wave, "u", "|u_eps - u_0|", RhsNorm::DtF),
    def(MetricId::FirstOrderH1, EquationKind::Wave, "first_order_h1", "|u_eps - (u_0 + eps N_0 . grad u_0)|_{H^1}", RhsNorm::Dt2F),
    def(MetricId::System, EquationKind::Wave, "system", "(|U1_eps - U1_0|^2 + |U2_eps - U2_0|_{H^-1}^2)^{1/2}", RhsNorm::Dt2F),
    def(MetricId::DtHalfU, EquationKind::Heat, "dt_half_u", "|dt^{1/2} u_eps - dt^{1/2} u_0|", RhsNorm::F),
    def(MetricId::CorrectorFlux, EquationKind::Heat, "corrector_flux", "|b grad u_eps - b grad(u_0 + eps N_0 . grad u_0)|", RhsNorm::F),
    def(MetricId::FluxHminus1, EquationKind::Heat, "flux_hminus1", "|b grad u_eps - b_0 grad u_0|_{H^-1}", RhsNorm::F),
    def(MetricId::U, EquationKind::Heat, "u", "|u_eps - u_0|", RhsNorm::DtMinusHalfF),
    def(MetricId::FirstOrderH1, EquationKind::Heat, "first_order_h1", "|u_eps - (u_0 + eps N_0 . grad u_0)|_{H^1}", RhsNorm::F),
    def(MetricId::System, EquationKind::Heat, "system", "(|U1_eps - U1_0|^2 + |U2_eps - U2_0|_{H^-1}^2)^{1/2}", RhsNorm::F),
    def(MetricId::DtU, EquationKind::Thermoelastic, "dt_u", "|dt u_eps - dt u_0|", RhsNorm::Dt2FDtG),
    def(MetricId::DtHalfV, EquationKind::Thermoelastic, "dt_half_v", "|dt^{1/2} v_eps - dt^{1/2} v_0|", RhsNorm::Dt2FDtG),
    def(MetricId::CorrectorFluxA, EquationKind::Thermoelastic, "corrector_flux_a", "|a grad u_eps - a grad(u_0 + eps N_0^a . grad u_0)|", RhsNorm::Dt2FDtG),
    def(MetricId::CorrectorFluxB, EquationKind::Thermoelastic, "corrector_flux_b", "|b grad v_eps - b grad(v_0 + eps N_0^b . grad v_0)|", RhsNorm::Dt2FDtG),
    def(MetricId::FluxHminus1A, EquationKind::Thermoelastic, "flux_hminus1_a", "|a grad u_eps - a_0 grad u_0|_{H^-1}", RhsNorm::Dt2FDtG),
    def(MetricId::FluxHminus1B, EquationKind::Thermoelastic, "flux_hminus1_b", "|b grad v_eps - b_0 grad v_0|_{H^-1}", RhsNorm::Dt2FDtG),
];

/// Registered metrics of one equation, in registry order.
pub fn metrics_for(kind: EquationKind) -> Vec<&'static MetricDef> {
    REGISTRY.iter().filter(|m| m.equation == kind).collect()
}

pub fn lookup_metric(kind: EquationKind, name: &str) -> Result<&'static MetricDef> {
    REGISTRY
        .iter()
        .find(|m| m.equation == kind && m.name == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown metric '{name}' for the {} equation", kind.name())))
}

fn default_n() -> usize {
    32
}
fn default_nu() -> f64 {
    1.0
}
fn default_half_window() -> usize {
    64
}
fn default_random() -> usize {
    4
}
fn default_seed() -> u64 {
    20_240_601
}
fn default_qmax() -> i64 {
    1
}
fn default_dim() -> usize {
    1
}

/// Everything that defines a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub equation: EquationKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Cell resolution (points per axis).
    #[serde(default = "default_n")]
    pub n: usize,
    pub eps: Vec<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Time horizon; `16/ν` when absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_half_window")]
    pub half_window: usize,
    /// Coefficient terms; defaults per equation when absent.
    #[serde(default)]
    pub a: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub b: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub gamma: Option<Vec<TermSpec>>,
    /// Declared source of the first equation.
    #[serde(default)]
    pub source: Option<SourceSpec>,
    /// Declared source `g` (thermoelastic only).
    #[serde(default)]
    pub source_g: Option<SourceSpec>,
    #[serde(default = "default_random")]
    pub random_sources: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Spatial band of the randomised sources.
    #[serde(default = "default_qmax")]
    pub random_qmax: i64,
    /// Metric names; every registered metric when absent.
    #[serde(default)]
    pub metrics: Option<Vec<String>>,
}

impl StudyConfig {
    pub fn new(equation: EquationKind, eps: Vec<f64>) -> Self {
        Self {
            equation,
            dim: default_dim(),
            n: default_n(),
            eps,
            nu: default_nu(),
            horizon: None,
            half_window: default_half_window(),
            a: None,
            b: None,
            gamma: None,
            source: None,
            source_g: None,
            random_sources: default_random(),
            seed: default_seed(),
            random_qmax: default_qmax(),
            metrics: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.len() < 3 {
            return Err(Error::InvalidConfig(format!("a study needs at least 3 values of eps, got {}", self.eps.len())));
        }
        let mut ms = Vec::new();
        for &e in &self.eps {
            let m = reciprocal(e)?;
            if ms.contains(&m) {
                return Err(Error::InvalidConfig(format!("eps = {e} is listed twice")));
            }
            ms.push(m);
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidConfig(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidConfig(format!("nu = {} must be positive", self.nu)));
        }
        if let Some(names) = &self.metrics {
            for n in names {
                lookup_metric(self.equation, n)?;
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.nu, self.horizon.unwrap_or(16.0 / self.nu), self.half_window)
    }

    pub fn selected_metrics(&self) -> Result<Vec<&'static MetricDef>> {
        match &self.metrics {
            None => Ok(metrics_for(self.equation)),
            Some(names) => names.iter().map(|n| lookup_metric(self.equation, n)).collect(),
        }
    }

    fn coefficient(&self, spec: &Option<Vec<TermSpec>>, fallback: Vec<TermSpec>, kind: CoefficientKind, grid: &CellGrid) -> Result<CoefficientCell> {
        let terms = spec.clone().unwrap_or(fallback);
        CoefficientCell::from_spec(kind, &terms, grid)
    }

    /// Coefficients `(a, b, γ)` needed by the equation, on the cell grid.
    pub fn coefficients(&self, grid: &CellGrid) -> Result<(Option<CoefficientCell>, Option<CoefficientCell>, Option<CoefficientCell>)> {
        let d = self.dim;
        let a = match self.equation {
            EquationKind::Heat => None,
            _ => Some(self.coefficient(&self.a, default_a(d), CoefficientKind::Matrix, grid)?),
        };
        let b = match self.equation {
            EquationKind::Wave => None,
            _ => Some(self.coefficient(&self.b, default_b(d), CoefficientKind::Matrix, grid)?),
        };
        let gamma = match self.equation {
            EquationKind::Thermoelastic => Some(self.coefficient(&self.gamma, default_gamma(d), CoefficientKind::Scalar, grid)?),
            _ => None,
        };
        Ok((a, b, gamma))
    }

    /// The declared source (or the per-equation default).
    pub fn declared_source(&self) -> SourceSpec {
        self.source.clone().unwrap_or_else(|| default_source(self.equation, self.dim))
    }

    pub fn declared_source_g(&self) -> SourceSpec {
        self.source_g.clone().unwrap_or_else(|| default_source(EquationKind::Wave, self.dim))
    }
}

fn unit_freq(d: usize, k: i64) -> Vec<i64> {
    let mut f = vec![0; d];
    f[0] = k;
    f
}

/// `2 + sin 2πy₁`.
pub fn default_a(d: usize) -> Vec<TermSpec> {
    vec![
        TermSpec::scalar(&unit_freq(d, 0), 2.0, 0.0),
        TermSpec::scalar(&unit_freq(d, 1), 0.0, -0.5),
        TermSpec::scalar(&unit_freq(d, -1), 0.0, 0.5),
    ]
}

/// `2 + cos 2πy₁`.
pub fn default_b(d: usize) -> Vec<TermSpec> {
    vec![
        TermSpec::scalar(&unit_freq(d, 0), 2.0, 0.0),
        TermSpec::scalar(&unit_freq(d, 1), 0.5, 0.0),
        TermSpec::scalar(&unit_freq(d, -1), 0.5, 0.0),
    ]
}

/// `1 + ½cos 2πy₁`.
pub fn default_gamma(d: usize) -> Vec<TermSpec> {
    vec![
        TermSpec::scalar(&unit_freq(d, 0), 1.0, 0.0),
        TermSpec::scalar(&unit_freq(d, 1), 0.25, 0.0),
        TermSpec::scalar(&unit_freq(d, -1), 0.25, 0.0),
    ]
}

/// Smooth-in-time sources for wave and thermoelastic, a rough one for heat.
pub fn default_source(kind: EquationKind, dim: usize) -> SourceSpec {
    let temporal = match kind {
        EquationKind::Heat => TemporalProfile::Rough,
        _ => TemporalProfile::Smooth { jmax: 8 },
    };
    SourceSpec::plane_waves(temporal, dim, 1)
}

/// One report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub equation: String,
    pub metric: String,
    pub eps: f64,
    pub lhs: f64,
    pub rhs_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub slope: SlopeFit,
    /// `max_ε ratio/ε`.
    pub constant: f64,
}

/// Grids, tolerances and sources a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub dim: usize,
    pub cell_points: usize,
    pub box_points: Vec<usize>,
    pub eps: Vec<f64>,
    pub nu: f64,
    pub horizon: f64,
    pub half_window: usize,
    pub cell_tolerance: f64,
    pub box_tolerance: f64,
    pub declared_source: String,
    pub random_sources: usize,
    pub seed: u64,
    pub a0: Option<Vec<Vec<[f64; 2]>>>,
    pub b0: Option<Vec<Vec<[f64; 2]>>>,
    pub gamma_mean: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub equation: String,
    pub rows: Vec<ReportRow>,
    pub summaries: Vec<MetricSummary>,
    pub environment: Environment,
}

impl ConvergenceReport {
    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.summaries.iter().find(|s| s.metric == metric)
    }

    pub fn rows_for<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }
}

/// Every field a metric may need for one source at one ε.
pub struct StudyFields<'a> {
    pub spec: &'a EquationSpec,
    pub het: &'a Solution,
    pub hom: &'a Solution,
    /// Corrector reconstruction for `u` (coefficient `a`, or `b` for heat).
    pub rec_u: &'a CorrectorFields,
    /// Reconstruction for `v` (thermoelastic).
    pub rec_v: Option<&'a CorrectorFields>,
}

fn diff_norm(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    Ok(norm_l2nu(&a.sub(b)?))
}

/// `(LHS, RHS)` of one metric.
pub fn evaluate_metric(m: &MetricDef, x: &StudyFields<'_>) -> Result<(f64, f64)> {
    let du = x.het.u.sub(&x.hom.u)?;
    let lhs = match m.id {
        MetricId::DtU => norm_l2nu(&dt_multiplier(1.0, &du)),
        MetricId::DtHalfU => norm_l2nu(&dt_multiplier(0.5, &du)),
        MetricId::DtHalfV => {
            let v_e = x.het.v.as_ref().ok_or_else(|| Error::InvalidConfig("v missing".into()))?;
            let v_0 = x.hom.v.as_ref().ok_or_else(|| Error::InvalidConfig("v missing".into()))?;
            norm_l2nu(&dt_multiplier(0.5, &v_e.sub(v_0)?))
        }
        MetricId::CorrectorFlux | MetricId::CorrectorFluxA => diff_norm(&x.het.flux_u, &x.rec_u.first_order_flux)?,
        MetricId::CorrectorFluxB => {
            let rec = x.rec_v.ok_or_else(|| Error::InvalidConfig("v reconstruction missing".into()))?;
            diff_norm(x.het.flux_v.as_ref().expect("thermoelastic"), &rec.first_order_flux)?
        }
        MetricId::FluxHminus1 | MetricId::FluxHminus1A => norm_l2nu_hminus1(&x.het.flux_u.sub(&x.hom.flux_u)?),
        MetricId::FluxHminus1B => norm_l2nu_hminus1(
            &x.het.flux_v.as_ref().expect("thermoelastic").sub(x.hom.flux_v.as_ref().expect("thermoelastic"))?,
        ),
        MetricId::U => norm_l2nu(&du),
        MetricId::FirstOrderH1 => {
            let e = norm_l2nu(&x.het.u.sub(&x.rec_u.first_order)?);
            let g = norm_l2nu(&gradient(&x.het.u).sub(&x.rec_u.first_order_grad)?);
            libm::sqrt(e * e + g * g)
        }
        MetricId::System => {
            let first = match x.spec.kind {
                EquationKind::Heat => norm_l2nu(&du),
                _ => norm_l2nu(&dt_multiplier(1.0, &du)),
            };
            let second = norm_l2nu_hminus1(&x.het.flux_u.sub(&x.hom.flux_u)?);
            libm::sqrt(first * first + second * second)
        }
    };
    Ok((lhs, rhs_norm(m.rhs, x.spec)?))
}

pub fn rhs_norm(r: RhsNorm, spec: &EquationSpec) -> Result<f64> {
    let f = &spec.f;
    Ok(match r {
        RhsNorm::Dt2F => norm_l2nu(&dt_multiplier(2.0, f)),
        RhsNorm::DtF => norm_l2nu(&dt_multiplier(1.0, f)),
        RhsNorm::F => norm_l2nu(f),
        RhsNorm::DtMinusHalfF => norm_l2nu(&dt_multiplier(-0.5, f)),
        RhsNorm::Dt2FDtG => {
            let g = spec.g.as_ref().ok_or_else(|| Error::InvalidConfig("source g is required".into()))?;
            norm_l2nu(&dt_multiplier(2.0, f)) + norm_l2nu(&dt_multiplier(1.0, g))
        }
    })
}

/// Weighted space-time `H¹` norm, re-exported for the CLI summaries.
pub fn h1_norm(u: &SpaceTimeField) -> f64 {
    norm_l2nu_h1(u)
}

/// Per-source results at one ε: `(lhs, rhs)` per selected metric.
type SourceValues = Vec<(f64, f64)>;

/// The declared source followed by the randomised ones.
pub fn study_sources(cfg: &StudyConfig, time: &TimeGrid) -> Vec<(SourceSpec, Option<SourceSpec>)> {
    let f = cfg.declared_source();
    let g = (cfg.equation == EquationKind::Thermoelastic).then(|| cfg.declared_source_g());
    let mut out = vec![(f.clone(), g.clone())];
    for r in 0..cfg.random_sources as u64 {
        let rf = f.randomised(time, cfg.dim, cfg.random_qmax, cfg.seed, 2 * r);
        let rg = g.as_ref().map(|g| g.randomised(time, cfg.dim, cfg.random_qmax, cfg.seed, 2 * r + 1));
        out.push((rf, rg));
    }
    out
}

/// Evaluates the selected metrics for every source at one ε.
pub fn study_at_eps<E: Executor>(
    cfg: &StudyConfig,
    eps: f64,
    cell: &CellGrid,
    coeffs: &(Option<CoefficientCell>, Option<CoefficientCell>, Option<CoefficientCell>),
    hom: &Homogenised,
    metrics: &[&'static MetricDef],
    exec: &E,
) -> Result<Vec<SourceValues>> {
    let time = cfg.time_grid()?;
    let bx = BoxGrid::from_eps(cell, eps)?;
    let mut out = Vec::new();
    for (fs, gs) in study_sources(cfg, &time) {
        let f = fs.build(bx.grid(), &time)?;
        let g = gs.map(|g| g.build(bx.grid(), &time)).transpose()?;
        let spec = EquationSpec {
            kind: cfg.equation,
            a: coeffs.0.clone(),
            b: coeffs.1.clone(),
            gamma: coeffs.2.clone(),
            bx: bx.clone(),
            time: time.clone(),
            f,
            g,
        };
        let het = solve_heterogeneous(&spec, exec)?;
        let hom_sol = solve_homogenised(&spec, hom)?;
        let (_, cor_u) = hom.principal(cfg.equation);
        let c_u = spec.principal()?;
        let rec_u = corrector_field(&hom_sol.u, cor_u, c_u, &bx)?;
        let rec_v = match cfg.equation {
            EquationKind::Thermoelastic => Some(corrector_field(
                hom_sol.v.as_ref().expect("thermoelastic"),
                hom.corrector_b.as_ref().expect("b corrector"),
                spec.b.as_ref().expect("b"),
                &bx,
            )?),
            _ => None,
        };
        let fields = StudyFields { spec: &spec, het: &het, hom: &hom_sol, rec_u: &rec_u, rec_v: rec_v.as_ref() };
        let vals = metrics.iter().map(|m| evaluate_metric(m, &fields)).collect::<Result<Vec<_>>>()?;
        out.push(vals);
    }
    Ok(out)
}

fn mat_rows(m: &crate::small::Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.dim).map(|i| (0..m.dim).map(|j| [m.m[i][j].re, m.m[i][j].im]).collect()).collect()
}

/// Runs a full study: every ε, every source, every selected metric.
pub fn run_study<E: Executor>(cfg: &StudyConfig, exec: &E) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let cell = CellGrid::new(cfg.dim, cfg.n)?;
    let coeffs = cfg.coefficients(&cell)?;
    let time = cfg.time_grid()?;
    let metrics = cfg.selected_metrics()?;
    let probe = EquationSpec {
        kind: cfg.equation,
        a: coeffs.0.clone(),
        b: coeffs.1.clone(),
        gamma: coeffs.2.clone(),
        bx: BoxGrid::new(&cell, 1)?,
        time: time.clone(),
        f: SpaceTimeField::zeros(&time, &CellGrid::new(cfg.dim, cfg.n)?, 1),
        g: (cfg.equation == EquationKind::Thermoelastic).then(|| SpaceTimeField::zeros(&time, &cell, 1)),
    };
    probe.validate()?;
    let hom = homogenise(&probe)?;

    let per_eps = if metrics.is_empty() {
        Vec::new()
    } else {
        exec.map(cfg.eps.len(), |i| study_at_eps(cfg, cfg.eps[i], &cell, &coeffs, &hom, &metrics, exec))
    };

    let mut rows = Vec::new();
    let mut maxima: Vec<Vec<(f64, f64)>> = vec![Vec::new(); metrics.len()];
    for (i, res) in per_eps.into_iter().enumerate() {
        let eps = cfg.eps[i];
        let values = res.map_err(|e| Error::Study { eps, metric: String::from("solve"), source: alloc::boxed::Box::new(e) })?;
        for (mi, m) in metrics.iter().enumerate() {
            let mut best = (0.0, 0.0, 0.0);
            for src in &values {
                let (lhs, rhs) = src[mi];
                if !(rhs > 0.0) || !lhs.is_finite() {
                    return Err(Error::Study {
                        eps,
                        metric: m.name.to_string(),
                        source: alloc::boxed::Box::new(Error::InvalidConfig("degenerate right-hand side norm".into())),
                    });
                }
                let ratio = lhs / rhs;
                if ratio >= best.2 {
                    best = (lhs, rhs, ratio);
                }
            }
            maxima[mi].push((eps, best.2));
            rows.push(ReportRow {
                equation: cfg.equation.name().to_string(),
                metric: m.name.to_string(),
                eps,
                lhs: best.0,
                rhs_norm: best.1,
                ratio: best.2,
            });
        }
    }
    let mut summaries = Vec::new();
    for (mi, m) in metrics.iter().enumerate() {
        let slope = fit_slope(&maxima[mi]).map_err(|e| Error::Study {
            eps: f64::NAN,
            metric: m.name.to_string(),
            source: alloc::boxed::Box::new(e),
        })?;
        let constant = maxima[mi].iter().map(|&(e, r)| r / e).fold(0.0, f64::max);
        summaries.push(MetricSummary { metric: m.name.to_string(), slope, constant });
    }
    rows.sort_by(|a, b| {
        let ia = metrics.iter().position(|m| m.name == a.metric);
        let ib = metrics.iter().position(|m| m.name == b.metric);
        ia.cmp(&ib).then(b.eps.total_cmp(&a.eps))
    });
    let environment = Environment {
        dim: cfg.dim,
        cell_points: cfg.n,
        box_points: cfg.eps.iter().map(|&e| reciprocal(e).map(|m| m * cfg.n)).collect::<Result<_>>()?,
        eps: cfg.eps.clone(),
        nu: cfg.nu,
        horizon: time.horizon(),
        half_window: cfg.half_window,
        cell_tolerance: crate::cell::CELL_TOLERANCE,
        box_tolerance: BOX_TOLERANCE,
        declared_source: crate::evolution::describe_profile(&cfg.declared_source().temporal),
        random_sources: cfg.random_sources,
        seed: cfg.seed,
        a0: hom.a0.as_ref().map(|t| mat_rows(&t.matrix)),
        b0: hom.b0.as_ref().map(|t| mat_rows(&t.matrix)),
        gamma_mean: [hom.gamma_mean.re, hom.gamma_mean.im],
    };
    Ok(ConvergenceReport { equation: cfg.equation.name().to_string(), rows, summaries, environment })
}

/// `C64` helper for tests and the CLI.
pub fn complex(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
