//! Space-time solves on the unit periodic box `[-1/2, 1/2)^d` with period
//! `ε = 1/M`, carried out slice by slice in the Laplace-frequency domain.
//!
//! The box grid has `M·n` points per axis, so every cell node is a box node
//! and `a(x/ε)` is sampled exactly by replication.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::cell::{homogenised_tensor, solve_corrector, Corrector, HomogenisedTensor};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::krylov::{gmres, norm, KrylovConfig};
use crate::norms::{lambda_pow, norm_l2nu, TimeGrid};
use crate::operator::{DivergenceForm, Multiplier};
use crate::small::{invert_small, Mat};
use crate::torus::{ellipticity_check, CellGrid, CoefficientCell, CoefficientKind, Domain, SpectralField};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative residual target of the per-frequency box solves.
pub const BOX_TOLERANCE: f64 = 1e-12;

/// The periodic box with `M` cells of side `ε = 1/M` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    cell: CellGrid,
    grid: CellGrid,
    m: usize,
}

impl BoxGrid {
    pub fn new(cell: &CellGrid, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidEpsilon(f64::INFINITY));
        }
        let grid = CellGrid::new(cell.dim(), m * cell.n())?;
        Ok(Self { cell: cell.clone(), grid, m })
    }

    /// Rejects ε that is not the reciprocal of a positive integer.
    pub fn from_eps(cell: &CellGrid, eps: f64) -> Result<Self> {
        Self::new(cell, reciprocal(eps)?)
    }

    pub fn cell(&self) -> &CellGrid {
        &self.cell
    }

    /// The box grid itself (wavevectors `2πq`).
    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Cell node that box node `idx` maps to under `x ↦ x/ε mod 1`.
    pub fn cell_index(&self, idx: usize) -> usize {
        let n = self.cell.n() as i64;
        let shift = (n / 2) * (1 - self.m as i64);
        let ij = self.grid.node_index(idx);
        let wrap = |i: usize| (i as i64 + shift).rem_euclid(n) as usize;
        self.cell.node_from_index([wrap(ij[0]), wrap(ij[1])])
    }

    /// Periodic replication of cell-node values onto the box nodes.
    pub fn replicate(&self, cell_values: &[C64]) -> Vec<C64> {
        (0..self.grid.len()).map(|i| cell_values[self.cell_index(i)]).collect()
    }

    /// Mode `k` lies in `ε^{-1}□* = [−π/ε, π/ε)^d`.
    pub fn in_window(&self, k: usize) -> bool {
        let q = self.grid.mode(k);
        let m = self.m as i64;
        (0..self.dim()).all(|a| 2 * q[a] >= -m && 2 * q[a] < m)
    }
}

/// `M` with `ε = 1/M`.
pub fn reciprocal(eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEpsilon(eps));
    }
    let m = libm::round(1.0 / eps);
    if m < 1.0 || (1.0 / eps - m).abs() > 1e-9 * m {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(m as usize)
}

/// A box field per Laplace frequency: slice `j` holds the spatial Fourier
/// coefficients of `(𝓛_ν f)(k_j)`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    time: TimeGrid,
    slices: Vec<SpectralField>,
}

impl SpaceTimeField {
    pub fn zeros(time: &TimeGrid, grid: &CellGrid, ncomp: usize) -> Self {
        let slice = SpectralField::zeros(grid, ncomp, Domain::Frequency);
        Self { time: time.clone(), slices: vec![slice; time.len()] }
    }

    pub fn from_slices(time: &TimeGrid, slices: Vec<SpectralField>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::ComponentMismatch { expected: time.len(), found: slices.len() });
        }
        let slices = slices.into_iter().map(|s| s.in_domain(Domain::Frequency)).collect();
        Ok(Self { time: time.clone(), slices })
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn slices(&self) -> &[SpectralField] {
        &self.slices
    }

    pub fn slice(&self, idx: usize) -> &SpectralField {
        &self.slices[idx]
    }

    pub fn grid(&self) -> &CellGrid {
        self.slices[0].grid()
    }

    pub fn ncomp(&self) -> usize {
        self.slices[0].ncomp()
    }

    pub fn map_slices(&self, f: impl Fn(usize, &SpectralField) -> SpectralField) -> Self {
        Self { time: self.time.clone(), slices: self.slices.iter().enumerate().map(|(i, s)| f(i, s)).collect() }
    }

    pub fn add_scaled(&self, s: C64, other: &Self) -> Result<Self> {
        if self.time != other.time {
            return Err(Error::GridMismatch);
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.add_scaled(s, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time: self.time.clone(), slices })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.map_slices(|_, f| f.scaled(s))
    }

    /// Time samples `f(t_i)` as physical box fields.
    pub fn to_time_samples(&self) -> Result<Vec<SpectralField>> {
        let grid = self.grid().clone();
        let nc = self.ncomp();
        let s = self.time.len();
        let mut out = vec![SpectralField::zeros(&grid, nc, Domain::Frequency); s];
        let mut spectrum = vec![ZERO; s];
        for c in 0..nc {
            for k in 0..grid.len() {
                for (j, sl) in self.slices.iter().enumerate() {
                    spectrum[j] = sl.component(c)[k];
                }
                let signal = crate::norms::laplace_inverse(&self.time, &spectrum)?;
                for (i, v) in signal.into_iter().enumerate() {
                    out[i].component_mut(c)[k] = v;
                }
            }
        }
        Ok(out.into_iter().map(|f| f.in_domain(Domain::Physical)).collect())
    }

    /// Inverse of [`Self::to_time_samples`].
    pub fn from_time_samples(time: &TimeGrid, samples: &[SpectralField]) -> Result<Self> {
        if samples.len() != time.len() {
            return Err(Error::ComponentMismatch { expected: time.len(), found: samples.len() });
        }
        let freq: Vec<SpectralField> = samples.iter().map(|f| f.in_domain(Domain::Frequency)).collect();
        let grid = freq[0].grid().clone();
        let nc = freq[0].ncomp();
        let mut out = Self::zeros(time, &grid, nc);
        let mut signal = vec![ZERO; time.len()];
        for c in 0..nc {
            for k in 0..grid.len() {
                for (i, f) in freq.iter().enumerate() {
                    signal[i] = f.component(c)[k];
                }
                let spectrum = crate::norms::laplace_forward(time, &signal)?;
                for (j, v) in spectrum.into_iter().enumerate() {
                    out.slices[j].component_mut(c)[k] = v;
                }
            }
        }
        Ok(out)
    }

    /// Weighted norm from time samples (quadrature in time and space).
    pub fn norm_time_domain(&self) -> Result<f64> {
        let samples = self.to_time_samples()?;
        let s: f64 = samples
            .iter()
            .enumerate()
            .map(|(i, f)| f.norm_sqr() * libm::exp(-2.0 * self.time.nu() * self.time.time(i)))
            .sum();
        Ok(libm::sqrt(self.time.dt() * s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationKind {
    Wave,
    Heat,
    Thermoelastic,
}

impl EquationKind {
    pub fn name(self) -> &'static str {
        match self {
            EquationKind::Wave => "wave",
            EquationKind::Heat => "heat",
            EquationKind::Thermoelastic => "thermoelastic",
        }
    }
}

/// Temporal factor of a separable source, given on the Laplace side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TemporalProfile {
    /// `cos²(πj / 2(jmax+1))` for `|j| ≤ jmax`, zero beyond.
    Smooth { jmax: usize },
    /// `(1 + |k_j|)^{-1/2}` over the whole window.
    Rough,
    /// Explicit `(j, re, im)` triples.
    Explicit { coefficients: Vec<(i64, f64, f64)> },
}

impl TemporalProfile {
    pub fn coefficient(&self, time: &TimeGrid, idx: usize) -> C64 {
        let j = time.index(idx);
        match self {
            TemporalProfile::Smooth { jmax } => {
                if j.unsigned_abs() as usize > *jmax {
                    ZERO
                } else {
                    let c = libm::cos(PI * j as f64 / (2.0 * (*jmax as f64 + 1.0)));
                    C64::new(c * c, 0.0)
                }
            }
            TemporalProfile::Rough => C64::new(1.0 / libm::sqrt(1.0 + time.frequency(idx).abs()), 0.0),
            TemporalProfile::Explicit { coefficients } => coefficients
                .iter()
                .filter(|(jj, _, _)| *jj == j)
                .map(|&(_, re, im)| C64::new(re, im))
                .sum(),
        }
    }

    fn check(&self, time: &TimeGrid) -> Result<()> {
        match self {
            TemporalProfile::Smooth { jmax } if *jmax >= time.half_window() => Err(Error::NotBandLimited(format!(
                "temporal support |j| <= {jmax} exceeds the window J = {}",
                time.half_window()
            ))),
            TemporalProfile::Explicit { coefficients } => match coefficients.iter().find(|c| time.slot(c.0).is_none()) {
                Some(c) => Err(Error::NotBandLimited(format!("temporal index {} outside the window", c.0))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// One spatial Fourier mode `amp · e^{2πi q·x}` of a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialMode {
    pub q: [i64; 2],
    pub re: f64,
    pub im: f64,
}

/// Separable source `f(t, x) = (temporal profile) × (band-limited spatial field)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub temporal: TemporalProfile,
    pub spatial: Vec<SpatialMode>,
}

impl SourceSpec {
    /// Spatial modes `|q_a| ≤ qmax` with unit amplitude, on the given profile.
    pub fn plane_waves(temporal: TemporalProfile, dim: usize, qmax: i64) -> Self {
        let mut spatial = Vec::new();
        let q1 = if dim > 1 { qmax } else { 0 };
        for a in -qmax..=qmax {
            for b in -q1..=q1 {
                if a == 0 && b == 0 {
                    continue;
                }
                spatial.push(SpatialMode { q: [a, b], re: 1.0, im: 0.0 });
            }
        }
        Self { temporal, spatial }
    }

    /// A randomised source with the same temporal support and `|q_a| ≤ qmax`.
    pub fn randomised(&self, time: &TimeGrid, dim: usize, qmax: i64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        let coefficients = (0..time.len())
            .filter_map(|idx| {
                let env = self.temporal.coefficient(time, idx);
                (env != ZERO).then(|| {
                    let z = env * C64::new(uniform(), uniform());
                    (time.index(idx), z.re, z.im)
                })
            })
            .collect();
        let mut spatial = Vec::new();
        let q1 = if dim > 1 { qmax } else { 0 };
        for a in -qmax..=qmax {
            for b in -q1..=q1 {
                spatial.push(SpatialMode { q: [a, b], re: uniform(), im: uniform() });
            }
        }
        Self { temporal: TemporalProfile::Explicit { coefficients }, spatial }
    }

    /// Assembles the source on a box and time grid.
    pub fn build(&self, grid: &CellGrid, time: &TimeGrid) -> Result<SpaceTimeField> {
        self.temporal.check(time)?;
        let mut spatial = SpectralField::zeros(grid, 1, Domain::Frequency);
        for m in &self.spatial {
            let q = if grid.dim() == 1 { [m.q[0], 0] } else { m.q };
            if grid.dim() == 1 && m.q[1] != 0 {
                return Err(Error::NotBandLimited(format!("mode {:?} in a one-dimensional box", m.q)));
            }
            let idx = grid.mode_index(q).ok_or_else(|| {
                Error::NotBandLimited(format!("spatial mode {q:?} is not resolved with {} points", grid.n()))
            })?;
            spatial.component_mut(0)[idx] += C64::new(m.re, m.im);
        }
        let slices = (0..time.len()).map(|idx| spatial.scaled(self.temporal.coefficient(time, idx))).collect();
        SpaceTimeField::from_slices(time, slices)
    }
}

/// Coefficients, period, grids and sources of one evolution problem.
#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub kind: EquationKind,
    /// Elastic coefficient (wave, thermoelastic).
    pub a: Option<CoefficientCell>,
    /// Diffusion coefficient (heat, thermoelastic).
    pub b: Option<CoefficientCell>,
    /// Thermoelastic coupling (scalar).
    pub gamma: Option<CoefficientCell>,
    pub bx: BoxGrid,
    pub time: TimeGrid,
    /// Source of the first equation (the only one for wave and heat).
    pub f: SpaceTimeField,
    /// Source of the heat equation in the thermoelastic system.
    pub g: Option<SpaceTimeField>,
}

impl EquationSpec {
    fn need<'a>(c: &'a Option<CoefficientCell>, name: &str) -> Result<&'a CoefficientCell> {
        c.as_ref().ok_or_else(|| Error::InvalidConfig(format!("coefficient {name} is required")))
    }

    /// The coefficient of the principal (first) equation.
    pub fn principal(&self) -> Result<&CoefficientCell> {
        match self.kind {
            EquationKind::Heat => Self::need(&self.b, "b"),
            _ => Self::need(&self.a, "a"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cell = self.bx.cell();
        let check = |c: &CoefficientCell, name: &str, hermitian: bool| -> Result<()> {
            if c.grid() != cell {
                return Err(Error::GridMismatch);
            }
            if hermitian && !c.is_hermitian_valued(1e-12) {
                return Err(Error::InvalidCoefficient(format!("{name} must be Hermitian at every node")));
            }
            ellipticity_check(c).map(|_| ())
        };
        match self.kind {
            EquationKind::Wave => check(Self::need(&self.a, "a")?, "a", true)?,
            EquationKind::Heat => check(Self::need(&self.b, "b")?, "b", false)?,
            EquationKind::Thermoelastic => {
                check(Self::need(&self.a, "a")?, "a", true)?;
                check(Self::need(&self.b, "b")?, "b", false)?;
                let g = Self::need(&self.gamma, "gamma")?;
                if g.kind() != CoefficientKind::Scalar || g.grid() != cell {
                    return Err(Error::InvalidCoefficient("gamma must be a scalar coefficient on the cell grid".into()));
                }
                let src = self.g.as_ref().ok_or_else(|| Error::InvalidConfig("source g is required".into()))?;
                self.check_source(src)?;
            }
        }
        self.check_source(&self.f)
    }

    fn check_source(&self, f: &SpaceTimeField) -> Result<()> {
        if f.grid() != self.bx.grid() || f.time() != &self.time || f.ncomp() != 1 {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Solution fields: `u` with flux `c(x/ε)∇u`, and for thermoelasticity `v` with `b(x/ε)∇v`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: SpaceTimeField,
    pub flux_u: SpaceTimeField,
    pub v: Option<SpaceTimeField>,
    pub flux_v: Option<SpaceTimeField>,
    /// Largest relative residual over the solved frequencies.
    pub residual: f64,
}

/// Box samples of `c(x/ε)`.
fn box_samples(c: &CoefficientCell, bx: &BoxGrid) -> Vec<Mat> {
    (0..bx.grid().len()).map(|i| *c.sample(bx.cell_index(i))).collect()
}

/// Gradient (physical, d components) of one box frequency slice.
fn gradient_physical(u: &SpectralField) -> SpectralField {
    let grid = u.grid();
    let d = grid.dim();
    let freq = u.in_domain(Domain::Frequency);
    let mut out = SpectralField::zeros(grid, d, Domain::Frequency);
    for k in 0..grid.len() {
        let kv = grid.wavevector(k, &[0.0; 2]);
        for a in 0..d {
            out.component_mut(a)[k] = C64::new(0.0, kv[a]) * freq.component(0)[k];
        }
    }
    out.to_physical().expect("frequency domain")
}

/// `c(x)·w(x)` at box nodes for a physical d-vector field `w`.
fn apply_samples(samples: &[Mat], scalar: bool, w: &SpectralField) -> SpectralField {
    let grid = w.grid();
    let d = grid.dim();
    let mut out = SpectralField::zeros(grid, d, Domain::Physical);
    for i in 0..grid.len() {
        let mut g = [ZERO; 2];
        for a in 0..d {
            g[a] = w.component(a)[i];
        }
        let a = &samples[i];
        let f = if scalar { [a.m[0][0] * g[0], a.m[0][0] * g[1]] } else { a.apply(&g) };
        for p in 0..d {
            out.component_mut(p)[i] = f[p];
        }
    }
    out
}

fn flux_field(c: &CoefficientCell, bx: &BoxGrid, u: &SpaceTimeField) -> SpaceTimeField {
    let samples = box_samples(c, bx);
    let scalar = c.kind() == CoefficientKind::Scalar;
    u.map_slices(|_, s| {
        if s.norm_sqr() == 0.0 {
            return SpectralField::zeros(s.grid(), s.grid().dim(), Domain::Frequency);
        }
        apply_samples(&samples, scalar, &gradient_physical(s)).in_domain(Domain::Frequency)
    })
}

fn box_config(len: usize) -> KrylovConfig {
    KrylovConfig { tol: BOX_TOLERANCE, max_iter: (10 * len).max(400), restart: 80 }
}

/// Scalar per-frequency solve `(σ − div c∇) x = rhs` with `σ = λ²` or `λ`.
fn solve_scalar_slice(op: &DivergenceForm, sigma: C64, rhs: &[C64]) -> Result<(Vec<C64>, f64)> {
    let cfg = box_config(rhs.len());
    let apply = |x: &[C64], y: &mut [C64]| {
        op.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += sigma * xi;
        }
    };
    let precond = |r: &[C64], z: &mut [C64]| {
        for (k, (zk, rk)) in z.iter_mut().zip(r).enumerate() {
            *zk = rk / (sigma + op.mean() * op.symbol(k));
        }
    };
    let (x, stats) = gmres(apply, precond, rhs, &cfg)?;
    Ok((x, stats.residual))
}

struct ThermoBlocks {
    a: DivergenceForm,
    b: DivergenceForm,
    gamma: Multiplier,
    gamma_bar: Multiplier,
    gamma_mean: C64,
}

/// Coupled per-frequency solve of
/// `λ²u − div a∇u + γv = f`, `λv − div b∇v − γ̄λu = g`.
fn solve_thermo_slice(t: &ThermoBlocks, lambda: C64, f: &[C64], g: &[C64]) -> Result<(Vec<C64>, Vec<C64>, f64)> {
    let n = f.len();
    let cfg = box_config(2 * n);
    let lam2 = lambda * lambda;
    let apply = |x: &[C64], y: &mut [C64]| {
        let (u, v) = x.split_at(n);
        let (yu, yv) = y.split_at_mut(n);
        let mut tmp = vec![ZERO; n];
        t.a.apply(u, yu);
        t.gamma.apply(v, &mut tmp);
        for i in 0..n {
            yu[i] += lam2 * u[i] + tmp[i];
        }
        t.b.apply(v, yv);
        t.gamma_bar.apply(u, &mut tmp);
        for i in 0..n {
            yv[i] += lambda * v[i] - lambda * tmp[i];
        }
    };
    let precond = |r: &[C64], z: &mut [C64]| {
        for k in 0..n {
            let block = [
                lam2 + t.a.mean() * t.a.symbol(k),
                t.gamma_mean,
                -t.gamma_mean.conj() * lambda,
                lambda + t.b.mean() * t.b.symbol(k),
            ];
            let mut inv = [ZERO; 4];
            if invert_small(&block, 2, &mut inv) {
                z[k] = inv[0] * r[k] + inv[1] * r[n + k];
                z[n + k] = inv[2] * r[k] + inv[3] * r[n + k];
            } else {
                z[k] = r[k];
                z[n + k] = r[n + k];
            }
        }
    };
    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend_from_slice(f);
    rhs.extend_from_slice(g);
    let (x, stats) = gmres(apply, precond, &rhs, &cfg)?;
    let (u, v) = x.split_at(n);
    Ok((u.to_vec(), v.to_vec(), stats.residual))
}

/// Solves the heterogeneous problem frequency by frequency.
pub fn solve_heterogeneous<E: Executor>(spec: &EquationSpec, exec: &E) -> Result<Solution> {
    spec.validate()?;
    let time = &spec.time;
    let bx = &spec.bx;
    let grid = bx.grid();
    match spec.kind {
        EquationKind::Wave | EquationKind::Heat => {
            let c = spec.principal()?;
            let op = DivergenceForm::on_box(c, bx)?;
            let results = exec.map(time.len(), |idx| -> Result<(Vec<C64>, f64)> {
                let rhs = spec.f.slice(idx).component(0);
                if norm(rhs) == 0.0 {
                    return Ok((vec![ZERO; rhs.len()], 0.0));
                }
                let lam = time.lambda(idx);
                let sigma = if spec.kind == EquationKind::Wave { lam * lam } else { lam };
                solve_scalar_slice(&op, sigma, rhs)
            });
            let mut slices = Vec::with_capacity(time.len());
            let mut residual = 0.0f64;
            for r in results {
                let (x, res) = r?;
                residual = residual.max(res);
                slices.push(SpectralField::from_components(grid, Domain::Frequency, vec![x])?);
            }
            let u = SpaceTimeField::from_slices(time, slices)?;
            let flux_u = flux_field(c, bx, &u);
            Ok(Solution { u, flux_u, v: None, flux_v: None, residual })
        }
        EquationKind::Thermoelastic => {
            let a = spec.a.as_ref().expect("validated");
            let b = spec.b.as_ref().expect("validated");
            let gamma = spec.gamma.as_ref().expect("validated");
            let g = spec.g.as_ref().expect("validated");
            let blocks = ThermoBlocks {
                a: DivergenceForm::on_box(a, bx)?,
                b: DivergenceForm::on_box(b, bx)?,
                gamma: Multiplier::on_box(gamma, bx, false)?,
                gamma_bar: Multiplier::on_box(gamma, bx, true)?,
                gamma_mean: gamma.mean().m[0][0],
            };
            let results = exec.map(time.len(), |idx| -> Result<(Vec<C64>, Vec<C64>, f64)> {
                let f = spec.f.slice(idx).component(0);
                let gg = g.slice(idx).component(0);
                if norm(f) == 0.0 && norm(gg) == 0.0 {
                    return Ok((vec![ZERO; f.len()], vec![ZERO; f.len()], 0.0));
                }
                solve_thermo_slice(&blocks, time.lambda(idx), f, gg)
            });
            let mut us = Vec::with_capacity(time.len());
            let mut vs = Vec::with_capacity(time.len());
            let mut residual = 0.0f64;
            for r in results {
                let (u, v, res) = r?;
                residual = residual.max(res);
                us.push(SpectralField::from_components(grid, Domain::Frequency, vec![u])?);
                vs.push(SpectralField::from_components(grid, Domain::Frequency, vec![v])?);
            }
            let u = SpaceTimeField::from_slices(time, us)?;
            let v = SpaceTimeField::from_slices(time, vs)?;
            let flux_u = flux_field(a, bx, &u);
            let flux_v = flux_field(b, bx, &v);
            Ok(Solution { u, flux_u, v: Some(v), flux_v: Some(flux_v), residual })
        }
    }
}

/// Homogenised tensors and the θ = 0 correctors they were built from.
#[derive(Debug, Clone)]
pub struct Homogenised {
    pub a0: Option<HomogenisedTensor>,
    pub b0: Option<HomogenisedTensor>,
    pub gamma_mean: C64,
    pub corrector_a: Option<Corrector>,
    pub corrector_b: Option<Corrector>,
}

impl Homogenised {
    pub fn principal(&self, kind: EquationKind) -> (&HomogenisedTensor, &Corrector) {
        match kind {
            EquationKind::Heat => (self.b0.as_ref().expect("b0"), self.corrector_b.as_ref().expect("N_0 for b")),
            _ => (self.a0.as_ref().expect("a0"), self.corrector_a.as_ref().expect("N_0 for a")),
        }
    }
}

pub fn homogenise(spec: &EquationSpec) -> Result<Homogenised> {
    let d = spec.bx.dim();
    let zero = vec![0.0; d];
    let build = |c: &Option<CoefficientCell>| -> Result<(Option<HomogenisedTensor>, Option<Corrector>)> {
        match c {
            Some(c) => {
                let cor = solve_corrector(c, &zero)?;
                let t = homogenised_tensor(c, &cor)?;
                Ok((Some(t), Some(cor)))
            }
            None => Ok((None, None)),
        }
    };
    let (a0, corrector_a) = match spec.kind {
        EquationKind::Heat => (None, None),
        _ => build(&spec.a)?,
    };
    let (b0, corrector_b) = match spec.kind {
        EquationKind::Wave => (None, None),
        _ => build(&spec.b)?,
    };
    let gamma_mean = spec.gamma.as_ref().map(|g| g.mean().m[0][0]).unwrap_or(ZERO);
    Ok(Homogenised { a0, b0, gamma_mean, corrector_a, corrector_b })
}

/// `T∇u` for a constant tensor, exactly in frequency space.
fn constant_flux(t: &HomogenisedTensor, u: &SpaceTimeField) -> SpaceTimeField {
    u.map_slices(|_, s| {
        let grid = s.grid();
        let d = grid.dim();
        let mut out = SpectralField::zeros(grid, d, Domain::Frequency);
        for k in 0..grid.len() {
            let kv = grid.wavevector(k, &[0.0; 2]);
            let g = [C64::new(0.0, kv[0]) * s.component(0)[k], C64::new(0.0, kv[1]) * s.component(0)[k]];
            let f = t.matrix.apply(&g);
            for p in 0..d {
                out.component_mut(p)[k] = f[p];
            }
        }
        out
    })
}

/// Exact per-mode solve of the homogenised problem.
pub fn solve_homogenised(spec: &EquationSpec, hom: &Homogenised) -> Result<Solution> {
    let time = &spec.time;
    let grid = spec.bx.grid();
    let symbol = |t: &HomogenisedTensor, k: usize| -> C64 {
        let kv = grid.wavevector(k, &[0.0; 2]);
        t.quad(&kv)
    };
    match spec.kind {
        EquationKind::Wave | EquationKind::Heat => {
            let (t, _) = hom.principal(spec.kind);
            let u = spec.f.map_slices(|idx, f| {
                let lam = time.lambda(idx);
                let sigma = if spec.kind == EquationKind::Wave { lam * lam } else { lam };
                let mut out = f.clone();
                for (k, z) in out.component_mut(0).iter_mut().enumerate() {
                    *z /= sigma + symbol(t, k);
                }
                out
            });
            let flux_u = constant_flux(t, &u);
            Ok(Solution { u, flux_u, v: None, flux_v: None, residual: 0.0 })
        }
        EquationKind::Thermoelastic => {
            let a0 = hom.a0.as_ref().ok_or_else(|| Error::InvalidConfig("a0 missing".into()))?;
            let b0 = hom.b0.as_ref().ok_or_else(|| Error::InvalidConfig("b0 missing".into()))?;
            let g = spec.g.as_ref().ok_or_else(|| Error::InvalidConfig("source g is required".into()))?;
            let mut us = Vec::with_capacity(time.len());
            let mut vs = Vec::with_capacity(time.len());
            for idx in 0..time.len() {
                let lam = time.lambda(idx);
                let (u, v) = thermo_block_solve(
                    lam,
                    hom.gamma_mean,
                    |k| symbol(a0, k),
                    |k| symbol(b0, k),
                    spec.f.slice(idx).component(0),
                    g.slice(idx).component(0),
                );
                us.push(SpectralField::from_components(grid, Domain::Frequency, vec![u])?);
                vs.push(SpectralField::from_components(grid, Domain::Frequency, vec![v])?);
            }
            let u = SpaceTimeField::from_slices(time, us)?;
            let v = SpaceTimeField::from_slices(time, vs)?;
            let flux_u = constant_flux(a0, &u);
            let flux_v = constant_flux(b0, &v);
            Ok(Solution { u, flux_u, v: Some(v), flux_v: Some(flux_v), residual: 0.0 })
        }
    }
}

/// Per-mode 2×2 solve `[[λ² + A_k, γ], [−γ̄λ, λ + B_k]] (u, v) = (f, g)` by Cramer's rule.
pub fn thermo_block_solve(
    lambda: C64,
    gamma: C64,
    a_sym: impl Fn(usize) -> C64,
    b_sym: impl Fn(usize) -> C64,
    f: &[C64],
    g: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    let mut u = vec![ZERO; f.len()];
    let mut v = vec![ZERO; f.len()];
    for k in 0..f.len() {
        let m00 = lambda * lambda + a_sym(k);
        let m01 = gamma;
        let m10 = -gamma.conj() * lambda;
        let m11 = lambda + b_sym(k);
        let det = m00 * m11 - m01 * m10;
        u[k] = (m11 * f[k] - m01 * g[k]) / det;
        v[k] = (m00 * g[k] - m10 * f[k]) / det;
    }
    (u, v)
}

/// Norms appearing in the regularity estimate for `u_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityNorms {
    /// `‖u_0‖_{L²_ν(H²)}`.
    pub h2: f64,
    /// `‖∂_t² u_0‖_{L²_ν(L²)}`.
    pub dt2: f64,
    /// `‖∇∂_t u_0‖_{L²_ν(H¹)}`.
    pub grad_dt: f64,
}

pub fn regularity_norms(u0: &SpaceTimeField) -> RegularityNorms {
    let time = u0.time();
    let (mut h2, mut dt2, mut gdt) = (0.0, 0.0, 0.0);
    for (idx, s) in u0.slices().iter().enumerate() {
        let lam = time.lambda(idx);
        let grid = s.grid();
        for (k, z) in s.component(0).iter().enumerate() {
            let kv = grid.wavevector(k, &[0.0; 2]);
            let xi2 = kv[0] * kv[0] + kv[1] * kv[1];
            let w = 1.0 + xi2;
            h2 += w * w * z.norm_sqr();
            dt2 += (lam * lam * z).norm_sqr();
            gdt += w * xi2 * (lam * z).norm_sqr();
        }
    }
    let dk = time.dk();
    RegularityNorms { h2: libm::sqrt(dk * h2), dt2: libm::sqrt(dk * dt2), grad_dt: libm::sqrt(dk * gdt) }
}

/// First-order corrector reconstruction and its fluxes.
#[derive(Debug, Clone)]
pub struct CorrectorFields {
    /// `u_0 + εN_0(·/ε)·∇u_0`.
    pub first_order: SpaceTimeField,
    /// `∇(u_0 + εN_0(·/ε)·∇u_0)` by the product rule.
    pub first_order_grad: SpaceTimeField,
    /// `c(·/ε)(I + ∇N_0(·/ε))∇u_0`.
    pub flux: SpaceTimeField,
    /// `c(·/ε)∇(u_0 + εN_0(·/ε)·∇u_0)`.
    pub first_order_flux: SpaceTimeField,
}

/// Builds `u_0 + εN_0(·/ε)·∇u_0` and the associated fluxes on the box.
pub fn corrector_field(u0: &SpaceTimeField, cor0: &Corrector, c: &CoefficientCell, bx: &BoxGrid) -> Result<CorrectorFields> {
    if cor0.theta() != [0.0; 2] {
        return Err(Error::MismatchedTheta);
    }
    if cor0.grid() != bx.cell() || c.grid() != bx.cell() || u0.grid() != bx.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = bx.grid();
    let d = grid.dim();
    let eps = bx.eps();
    // N_0^q and ∇_y N_0^q at box nodes.
    let n_box: Vec<Vec<C64>> = (0..d)
        .map(|q| bx.replicate(cor0.field(q).to_physical().expect("frequency").component(0)))
        .collect();
    let dn_box: Vec<Vec<Vec<C64>>> = (0..d)
        .map(|q| {
            let g = cor0.shifted_gradient(q).to_physical().expect("frequency");
            (0..d).map(|a| bx.replicate(g.component(a))).collect()
        })
        .collect();
    let samples = box_samples(c, bx);
    let scalar = c.kind() == CoefficientKind::Scalar;

    let time = u0.time();
    let mut first = Vec::with_capacity(time.len());
    let mut first_grad = Vec::with_capacity(time.len());
    let mut flux = Vec::with_capacity(time.len());
    let mut first_flux = Vec::with_capacity(time.len());
    for s in u0.slices() {
        let u_phys = s.in_domain(Domain::Physical);
        // ∂_q u_0 and ∂_a ∂_q u_0, physical.
        let mut du = Vec::with_capacity(d);
        let mut ddu = Vec::with_capacity(d);
        for q in 0..d {
            let mut dq = SpectralField::zeros(grid, 1, Domain::Frequency);
            for k in 0..grid.len() {
                let kv = grid.wavevector(k, &[0.0; 2]);
                dq.component_mut(0)[k] = C64::new(0.0, kv[q]) * s.component(0)[k];
            }
            ddu.push(gradient_physical(&dq));
            du.push(dq.to_physical()?);
        }
        let mut fo = u_phys.clone();
        let mut grad = SpectralField::zeros(grid, d, Domain::Physical);
        let mut grad_flux_in = SpectralField::zeros(grid, d, Domain::Physical);
        for i in 0..grid.len() {
            let mut acc = ZERO;
            for q in 0..d {
                acc += n_box[q][i] * du[q].component(0)[i];
            }
            fo.component_mut(0)[i] += eps * acc;
            for a in 0..d {
                let mut lead = du[a].component(0)[i];
                let mut tail = ZERO;
                for q in 0..d {
                    lead += dn_box[q][a][i] * du[q].component(0)[i];
                    tail += n_box[q][i] * ddu[q].component(a)[i];
                }
                grad_flux_in.component_mut(a)[i] = lead;
                grad.component_mut(a)[i] = lead + eps * tail;
            }
        }
        flux.push(apply_samples(&samples, scalar, &grad_flux_in).in_domain(Domain::Frequency));
        first_flux.push(apply_samples(&samples, scalar, &grad).in_domain(Domain::Frequency));
        first.push(fo.in_domain(Domain::Frequency));
        first_grad.push(grad.in_domain(Domain::Frequency));
    }
    Ok(CorrectorFields {
        first_order: SpaceTimeField::from_slices(time, first)?,
        first_order_grad: SpaceTimeField::from_slices(time, first_grad)?,
        flux: SpaceTimeField::from_slices(time, flux)?,
        first_order_flux: SpaceTimeField::from_slices(time, first_flux)?,
    })
}

/// Spatial gradient of every slice, in frequency space.
pub fn gradient(u: &SpaceTimeField) -> SpaceTimeField {
    u.map_slices(|_, s| {
        let grid = s.grid();
        let mut out = SpectralField::zeros(grid, grid.dim(), Domain::Frequency);
        for k in 0..grid.len() {
            let kv = grid.wavevector(k, &[0.0; 2]);
            for a in 0..grid.dim() {
                out.component_mut(a)[k] = C64::new(0.0, kv[a]) * s.component(0)[k];
            }
        }
        out
    })
}

/// `P_ε`: keeps the modes with wavevector in `ε^{-1}□*`.
pub fn smoothing_apply(bx: &BoxGrid, h: &SpectralField) -> Result<SpectralField> {
    if h.grid() != bx.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = h.in_domain(Domain::Frequency);
    for c in 0..out.ncomp() {
        for (k, z) in out.component_mut(c).iter_mut().enumerate() {
            if !bx.in_window(k) {
                *z = ZERO;
            }
        }
    }
    Ok(out.in_domain(h.domain()))
}

/// Mode-by-mode check of `‖h − P_ε h‖ ≤ Cε‖∇h‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingBound {
    /// `max 1/(ε|ξ|)` over the removed modes; at most `1/π`.
    pub mode_constant: f64,
    pub lhs: f64,
    /// `ε‖∇h‖/π`.
    pub rhs: f64,
}

pub fn smoothing_bound(bx: &BoxGrid, h: &SpectralField) -> Result<SmoothingBound> {
    let freq = h.in_domain(Domain::Frequency);
    let eps = bx.eps();
    let grid = bx.grid();
    let mut mode_constant = 0.0f64;
    let (mut lhs, mut grad) = (0.0, 0.0);
    for k in 0..grid.len() {
        let kv = grid.wavevector(k, &[0.0; 2]);
        let xi = libm::sqrt(kv[0] * kv[0] + kv[1] * kv[1]);
        let w: f64 = freq.components().iter().map(|c| c[k].norm_sqr()).sum();
        grad += xi * xi * w;
        if !bx.in_window(k) {
            mode_constant = mode_constant.max(1.0 / (eps * xi));
            lhs += w;
        }
    }
    Ok(SmoothingBound { mode_constant, lhs: libm::sqrt(lhs), rhs: eps * libm::sqrt(grad) / PI })
}

/// `‖P_ε(γ(·/ε)P_ε φ) − ⟨γ⟩P_ε φ‖` with the product formed at box nodes.
pub fn mean_value_check(gamma: &CoefficientCell, bx: &BoxGrid, phi: &SpectralField) -> Result<f64> {
    let g = gamma.resampled(bx.cell())?;
    let pphi = smoothing_apply(bx, phi)?;
    let mut prod = pphi.in_domain(Domain::Physical);
    for (i, z) in prod.component_mut(0).iter_mut().enumerate() {
        *z *= g.sample(bx.cell_index(i)).m[0][0];
    }
    let lhs = smoothing_apply(bx, &prod)?;
    let rhs = pphi.scaled(g.mean().m[0][0]);
    Ok(lhs.sub(&rhs)?.norm_l2())
}

/// Gelfand fibre at `θ = 2πr/M` of a box field, sampled at the cell nodes:
/// `Σ_z h(ε(y + z)) e^{−iθ·(y + z)}` over the `M^d` cells.
pub fn gelfand_fibre(bx: &BoxGrid, h: &SpectralField, r: [i64; 2]) -> Result<Vec<C64>> {
    if h.grid() != bx.grid() {
        return Err(Error::GridMismatch);
    }
    let phys = h.in_domain(Domain::Physical);
    let cell = bx.cell();
    let mut out = vec![ZERO; cell.len()];
    for i in 0..bx.grid().len() {
        // θ·(y + z) with y + z = x/ε and θ = 2πr/M is 2π r·x.
        let x = bx.grid().node(i);
        let phase = -2.0 * PI * (r[0] as f64 * x[0] + r[1] as f64 * x[1]);
        out[bx.cell_index(i)] += phys.component(0)[i] * C64::new(libm::cos(phase), libm::sin(phase));
    }
    Ok(out)
}

/// Largest `|⟨G h(θ_r)⟩_□ − M^d ĥ(r)|` over all `r ∈ [−M/2, M/2)^d`.
pub fn gelfand_fourier_check(bx: &BoxGrid, h: &SpectralField) -> Result<f64> {
    let freq = h.in_domain(Domain::Frequency);
    let d = bx.dim();
    let m = bx.m() as i64;
    let md = libm::pow(bx.m() as f64, d as f64);
    let lo = -(m / 2);
    let hi = lo + m;
    let mut worst = 0.0f64;
    for r0 in lo..hi {
        for r1 in if d > 1 { lo..hi } else { 0..1 } {
            let r = [r0, r1];
            let fibre = gelfand_fibre(bx, h, r)?;
            let mean: C64 = fibre.iter().sum::<C64>() / bx.cell().len() as f64;
            let idx = bx.grid().mode_index(r).expect("window lies inside the box modes");
            worst = worst.max((mean - freq.component(0)[idx] * md).norm());
        }
    }
    Ok(worst)
}

/// Divergence of every slice of a d-vector field.
fn divergence(w: &SpaceTimeField) -> SpaceTimeField {
    w.map_slices(|_, s| {
        let grid = s.grid();
        let mut out = SpectralField::zeros(grid, 1, Domain::Frequency);
        for k in 0..grid.len() {
            let kv = grid.wavevector(k, &[0.0; 2]);
            out.component_mut(0)[k] = (0..grid.dim()).map(|a| C64::new(0.0, kv[a]) * s.component(a)[k]).sum();
        }
        out
    })
}

fn h1_time_norm(u: &SpaceTimeField) -> f64 {
    let a = norm_l2nu(u);
    let b = norm_l2nu(&crate::norms::dt_multiplier(1.0, u));
    libm::sqrt(a * a + b * b)
}

fn hdiv_norm(w: &SpaceTimeField) -> f64 {
    let a = norm_l2nu(w);
    let b = norm_l2nu(&divergence(w));
    libm::sqrt(a * a + b * b)
}

/// Empirical constant of the thermoelastic well-posedness bound: LHS of the
/// energy estimate for `(∂_t u, a∇u, v, b∇v)` over `‖f‖_{H¹_ν} + ‖g‖_{L²_ν}`.
fn sq(x: f64) -> f64 {
    x * x
}

pub fn wellposedness_ratio(spec: &EquationSpec, sol: &Solution) -> Result<f64> {
    let v = sol.v.as_ref().ok_or_else(|| Error::InvalidConfig("thermoelastic solution expected".into()))?;
    let fv = sol.flux_v.as_ref().expect("thermoelastic flux");
    let g = spec.g.as_ref().ok_or_else(|| Error::InvalidConfig("source g is required".into()))?;
    let u1 = crate::norms::dt_multiplier(1.0, &sol.u);
    let u2 = &sol.flux_u;
    let dt_u2 = crate::norms::dt_multiplier(1.0, u2);
    let lhs = h1_time_norm(&u1)
        + libm::sqrt(sq(norm_l2nu(u2)) + sq(norm_l2nu(&dt_u2)) + sq(norm_l2nu(&divergence(u2))))
        + h1_time_norm(v)
        + hdiv_norm(fv);
    let rhs = h1_time_norm(&spec.f) + norm_l2nu(g);
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs / rhs)
}

/// `λ^s` applied to a single slice.
pub fn slice_multiplier(time: &TimeGrid, idx: usize, s: f64) -> C64 {
    lambda_pow(time.lambda(idx), s)
}

/// Short description of a source for report echoes.
pub fn describe_profile(p: &TemporalProfile) -> String {
    match p {
        TemporalProfile::Smooth { jmax } => format!("smooth(jmax={jmax})"),
        TemporalProfile::Rough => String::from("rough"),
        TemporalProfile::Explicit { coefficients } => format!("explicit({} slices)", coefficients.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn sin_coefficient(grid: &CellGrid) -> CoefficientCell {
        CoefficientCell::isotropic(
            &[([0, 0], C64::new(2.0, 0.0)), ([1, 0], C64::new(0.0, -0.5)), ([-1, 0], C64::new(0.0, 0.5))],
            grid,
        )
        .unwrap()
    }

    #[test]
    fn replication_matches_direct_evaluation() {
        let cell = CellGrid::new(1, 8).unwrap();
        let c = sin_coefficient(&cell);
        for m in [1usize, 2, 3, 4] {
            let bx = BoxGrid::new(&cell, m).unwrap();
            for i in 0..bx.grid().len() {
                let x = bx.grid().node(i);
                let direct = c.eval(&[x[0] * m as f64, 0.0]).m[0][0];
                let rep = c.sample(bx.cell_index(i)).m[0][0];
                assert!((direct - rep).norm() < 1e-12, "M={m}, node {i}");
            }
        }
    }

    #[test]
    fn epsilon_must_be_integer_reciprocal() {
        let cell = CellGrid::new(1, 8).unwrap();
        assert!(BoxGrid::from_eps(&cell, 0.25).is_ok());
        assert!(matches!(BoxGrid::from_eps(&cell, 0.3), Err(Error::InvalidEpsilon(_))));
    }

    #[test]
    fn constant_coefficient_matches_symbol_inverse() {
        let cell = CellGrid::new(1, 8).unwrap();
        let bx = BoxGrid::new(&cell, 2).unwrap();
        let time = TimeGrid::new(1.0, 8.0, 4).unwrap();
        let a = CoefficientCell::constant(CoefficientKind::Matrix, Mat::identity(1), &cell).unwrap();
        let src = SourceSpec {
            temporal: TemporalProfile::Explicit { coefficients: vec![(1, 1.0, 0.0)] },
            spatial: vec![SpatialMode { q: [1, 0], re: 1.0, im: 0.0 }],
        };
        let f = src.build(bx.grid(), &time).unwrap();
        let spec = EquationSpec { kind: EquationKind::Wave, a: Some(a), b: None, gamma: None, bx: bx.clone(), time: time.clone(), f, g: None };
        let sol = solve_heterogeneous(&spec, &Sequential).unwrap();
        let idx = time.slot(1).unwrap();
        let lam = time.lambda(idx);
        let k = bx.grid().mode_index([1, 0]).unwrap();
        let expect = C64::new(1.0, 0.0) / (lam * lam + 4.0 * PI * PI);
        assert!((sol.u.slice(idx).component(0)[k] - expect).norm() < 1e-12);
    }

    #[test]
    fn smoothing_window_edges() {
        let cell = CellGrid::new(1, 8).unwrap();
        let bx = BoxGrid::new(&cell, 4).unwrap();
        let inside = SpectralField::mode(bx.grid(), [1, 0], C64::new(1.0, 0.0)).unwrap();
        assert!(smoothing_apply(&bx, &inside).unwrap().sub(&inside).unwrap().norm_l2() == 0.0);
        let outside = SpectralField::mode(bx.grid(), [3, 0], C64::new(1.0, 0.0)).unwrap();
        assert_eq!(smoothing_apply(&bx, &outside).unwrap().norm_l2(), 0.0);
        let edge = SpectralField::mode(bx.grid(), [2, 0], C64::new(1.0, 0.0)).unwrap();
        let b = smoothing_bound(&bx, &edge).unwrap();
        assert!((b.mode_constant - 1.0 / PI).abs() < 1e-15);
        assert!(b.lhs <= b.rhs * (1.0 + 1e-14));
    }

    #[test]
    fn mean_value_example() {
        let cell = CellGrid::new(1, 8).unwrap();
        let bx = BoxGrid::new(&cell, 4).unwrap();
        let gamma = CoefficientCell::scalar(
            &[([0, 0], C64::new(3.0, 0.0)), ([1, 0], C64::new(0.5, 0.0)), ([-1, 0], C64::new(0.5, 0.0))],
            &cell,
        )
        .unwrap();
        let phi = SpectralField::mode(bx.grid(), [1, 0], C64::new(1.0, 0.0)).unwrap();
        assert!(mean_value_check(&gamma, &bx, &phi).unwrap() <= 1e-12);
    }
}
