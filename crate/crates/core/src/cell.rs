//! θ-shifted corrector cell problems and homogenised tensors.
//!
//! The corrector `N_θ^j` is the mean-zero solution of
//! `−(div + iθ·)(a (∇ + iθ) N) = (div + iθ·)(a e_j)`, tested against the
//! mean-zero trigonometric polynomials of the cell grid (exact Galerkin
//! products, see [`crate::operator`]).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::BoxGrid;
use crate::krylov::{gmres, norm, pcg, KrylovConfig};
use crate::operator::DivergenceForm;
use crate::small::Mat;
use crate::study::{fit_slope, SlopeFit};
use crate::torus::{
    check_theta, divergence_modes, ellipticity_check, gradient_modes, CellGrid, CoefficientCell, CoefficientKind,
    Domain, SpectralField, Vec2,
};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative residual target of every cell solve.
pub const CELL_TOLERANCE: f64 = 1e-10;

/// Correctors `N_θ^j`, `j = 1..d`, as frequency coefficients on the cell grid.
#[derive(Debug, Clone)]
pub struct Corrector {
    grid: CellGrid,
    theta: Vec2,
    fields: Vec<Vec<C64>>,
    residual: f64,
    iterations: usize,
}

impl Corrector {
    /// The zero corrector (exact for constant coefficients).
    pub fn zero(grid: &CellGrid, theta: &[f64]) -> Result<Self> {
        let theta = check_theta(theta, grid.dim())?;
        Ok(Self {
            grid: grid.clone(),
            theta,
            fields: vec![vec![ZERO; grid.len()]; grid.dim()],
            residual: 0.0,
            iterations: 0,
        })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn theta(&self) -> Vec2 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Frequency coefficients of `N_θ^j`.
    pub fn coefficients(&self, j: usize) -> &[C64] {
        &self.fields[j]
    }

    /// `N_θ^j` as a frequency-domain field.
    pub fn field(&self, j: usize) -> SpectralField {
        SpectralField::from_components(&self.grid, Domain::Frequency, vec![self.fields[j].clone()])
            .expect("corrector lives on its grid")
    }

    /// `(∇ + iθ) N_θ^j` in the frequency domain.
    pub fn shifted_gradient(&self, j: usize) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid, self.dim(), Domain::Frequency);
        let mut comps = vec![vec![ZERO; self.grid.len()]; self.dim()];
        gradient_modes(&self.grid, &self.theta, 1.0, &self.fields[j], &mut comps);
        for (a, c) in comps.into_iter().enumerate() {
            out.component_mut(a).copy_from_slice(&c);
        }
        out
    }

    /// Largest relative Galerkin residual over the directions.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `‖N_θ^j‖_{H¹(□)}` with the unshifted gradient.
    pub fn h1_norm(&self, j: usize) -> f64 {
        h1_norm_modes(&self.grid, &self.fields[j])
    }
}

pub(crate) fn h1_norm_modes(grid: &CellGrid, coeffs: &[C64]) -> f64 {
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let kv = grid.wavevector(k, &[0.0; 2]);
            (1.0 + kv[0] * kv[0] + kv[1] * kv[1]) * z.norm_sqr()
        })
        .sum();
    libm::sqrt(s)
}

/// The cell operator restricted to mean-zero modes.
struct CellOperator {
    form: DivergenceForm,
}

impl CellOperator {
    fn new(c: &CoefficientCell, theta: Vec2) -> Result<Self> {
        Ok(Self { form: DivergenceForm::on_cell(c, theta)? })
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        self.form.apply(x, out);
        out[0] = ZERO;
    }

    fn precondition(&self, r: &[C64], z: &mut [C64]) {
        for (k, (zk, rk)) in z.iter_mut().zip(r).enumerate() {
            let s = self.form.symbol(k);
            *zk = if k == 0 || s == 0.0 { ZERO } else { rk / (self.form.mean() * s) };
        }
    }
}

/// Right-hand side `P_0 (div + iθ·)(a e_j)` from the coefficient's exact modes.
fn corrector_rhs(c: &CoefficientCell, theta: &Vec2, j: usize) -> Vec<C64> {
    let grid = c.grid();
    let d = grid.dim();
    let mut col = vec![vec![ZERO; grid.len()]; d];
    for t in c.terms() {
        let idx = grid.mode_index(t.freq).expect("coefficient is resolved on its grid");
        for (p, cp) in col.iter_mut().enumerate() {
            cp[idx] += match c.kind() {
                CoefficientKind::Matrix => t.amp.m[p][j],
                CoefficientKind::Scalar if p == j => t.amp.m[0][0],
                CoefficientKind::Scalar => ZERO,
            };
        }
    }
    let mut out = vec![ZERO; grid.len()];
    divergence_modes(grid, theta, 1.0, &col, &mut out);
    out[0] = ZERO;
    out
}

/// Solves the θ-shifted cell problems for every direction.
pub fn solve_corrector(c: &CoefficientCell, theta: &[f64]) -> Result<Corrector> {
    let grid = c.grid();
    let cfg = KrylovConfig { tol: CELL_TOLERANCE, max_iter: 10 * grid.len(), restart: 60 };
    solve_corrector_with(c, theta, &cfg)
}

pub fn solve_corrector_with(c: &CoefficientCell, theta: &[f64], cfg: &KrylovConfig) -> Result<Corrector> {
    ellipticity_check(c)?;
    let grid = c.grid().clone();
    let theta = check_theta(theta, grid.dim())?;
    let op = CellOperator::new(c, theta)?;
    let hermitian = c.kind() == CoefficientKind::Scalar && c.samples().iter().all(|m| m.m[0][0].im.abs() <= 1e-14)
        || c.is_hermitian_valued(1e-14);

    let mut fields = Vec::with_capacity(grid.dim());
    let mut residual = 0.0f64;
    let mut iterations = 0;
    for j in 0..grid.dim() {
        let rhs = corrector_rhs(c, &theta, j);
        let (x, stats) = if hermitian {
            pcg(|x, y| op.apply(x, y), |r, z| op.precondition(r, z), &rhs, cfg)?
        } else {
            gmres(|x, y| op.apply(x, y), |r, z| op.precondition(r, z), &rhs, cfg)?
        };
        residual = residual.max(galerkin_residual_of(&op, &x, &rhs));
        iterations += stats.iterations;
        fields.push(x);
    }
    Ok(Corrector { grid, theta, fields, residual, iterations })
}

fn galerkin_residual_of(op: &CellOperator, x: &[C64], rhs: &[C64]) -> f64 {
    let mut lx = vec![ZERO; x.len()];
    op.apply(x, &mut lx);
    let r: Vec<C64> = lx.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = norm(rhs);
    if scale == 0.0 {
        norm(&r)
    } else {
        norm(&r) / scale
    }
}

/// Largest relative residual of the weak cell problem tested against every
/// retained mean-zero mode.
pub fn galerkin_residual(c: &CoefficientCell, cor: &Corrector) -> Result<f64> {
    if c.grid() != cor.grid() {
        return Err(Error::GridMismatch);
    }
    let op = CellOperator::new(c, cor.theta)?;
    Ok((0..cor.dim())
        .map(|j| galerkin_residual_of(&op, &cor.fields[j], &corrector_rhs(c, &cor.theta, j)))
        .fold(0.0, f64::max))
}

/// Constant effective tensor at one quasimomentum.
///
/// `matrix` maps a direction ξ to the effective flux `⟨a(ξ + Σ_p ξ_p (∇ + iθ)N^p)⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenisedTensor {
    pub theta: Vec2,
    pub matrix: Mat,
}

impl HomogenisedTensor {
    /// `T ξ · ξ` for a real vector ξ.
    pub fn quad(&self, xi: &Vec2) -> C64 {
        let v = self.matrix.apply(&[C64::new(xi[0], 0.0), C64::new(xi[1], 0.0)]);
        v[0] * xi[0] + v[1] * xi[1]
    }
}

/// Physical field `a(y)(ξ + Σ_q ξ_q (∇ + iθ) N^q(y))` on the cell grid (d components).
pub fn corrected_flux(c: &CoefficientCell, cor: &Corrector, xi: &[C64; 2]) -> Result<SpectralField> {
    if c.grid() != cor.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = cor.grid();
    let d = grid.dim();
    let mut grad = SpectralField::zeros(grid, d, Domain::Frequency);
    for q in 0..d {
        if xi[q] == ZERO {
            continue;
        }
        grad = grad.add_scaled(xi[q], &cor.shifted_gradient(q))?;
    }
    let grad = grad.to_physical()?;
    let mut comps = vec![vec![ZERO; grid.len()]; d];
    for i in 0..grid.len() {
        let mut g = [ZERO; 2];
        for a in 0..d {
            g[a] = xi[a] + grad.component(a)[i];
        }
        let f = coefficient_apply(c, i, &g);
        for p in 0..d {
            comps[p][i] = f[p];
        }
    }
    SpectralField::from_components(grid, Domain::Physical, comps)
}

fn coefficient_apply(c: &CoefficientCell, i: usize, v: &[C64; 2]) -> [C64; 2] {
    let a = c.sample(i);
    match c.kind() {
        CoefficientKind::Matrix => a.apply(v),
        CoefficientKind::Scalar => [a.m[0][0] * v[0], a.m[0][0] * v[1]],
    }
}

/// Assembles `a_θ` from cell averages of the corrected flux.
pub fn homogenised_tensor(c: &CoefficientCell, cor: &Corrector) -> Result<HomogenisedTensor> {
    let d = cor.dim();
    let mut matrix = Mat::zeros(d);
    for p in 0..d {
        let mut e = [ZERO; 2];
        e[p] = C64::new(1.0, 0.0);
        let flux = corrected_flux(c, cor, &e)?;
        for q in 0..d {
            matrix.m[q][p] = flux.mean(q);
        }
    }
    Ok(HomogenisedTensor { theta: cor.theta, matrix })
}

/// Checks that a corrector and a tensor were built at the same θ.
pub fn check_same_theta(cor: &Corrector, t: &HomogenisedTensor) -> Result<()> {
    if cor.theta != t.theta {
        return Err(Error::MismatchedTheta);
    }
    Ok(())
}

/// Solves the cell problem and assembles `a_θ` in one go.
pub fn tensor_at(c: &CoefficientCell, theta: &[f64]) -> Result<(Corrector, HomogenisedTensor)> {
    let cor = solve_corrector(c, theta)?;
    let t = homogenised_tensor(c, &cor)?;
    Ok((cor, t))
}

/// `|a_θ − a_0|` and `‖N_θ − N_0‖_{H¹}` along a list of quasimomenta.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDeviation {
    pub theta_norms: Vec<f64>,
    /// Operator-norm deviation of the tensor.
    pub tensor: Vec<f64>,
    /// Largest `‖N_θ^j − N_0^j‖_{H¹(□)}` over the directions.
    pub corrector: Vec<f64>,
    pub tensor_slope: SlopeFit,
    pub corrector_slope: SlopeFit,
    /// `max_θ |a_θ − a_0| / |θ|`.
    pub constant: f64,
}

pub fn tensor_theta_deviation(c: &CoefficientCell, thetas: &[Vec<f64>]) -> Result<ThetaDeviation> {
    if thetas.is_empty() {
        return Err(Error::InvalidConfig("empty theta list".into()));
    }
    let d = c.grid().dim();
    let (cor0, t0) = tensor_at(c, &vec![0.0; d])?;
    let mut out = ThetaDeviation {
        theta_norms: Vec::new(),
        tensor: Vec::new(),
        corrector: Vec::new(),
        tensor_slope: SlopeFit::Exact,
        corrector_slope: SlopeFit::Exact,
        constant: 0.0,
    };
    for theta in thetas {
        let (cor, t) = tensor_at(c, theta)?;
        let tn = libm::sqrt(theta.iter().map(|x| x * x).sum());
        let dev = t.matrix.sub(&t0.matrix).operator_norm();
        let ndev = (0..d)
            .map(|j| {
                let diff: Vec<C64> = cor.fields[j].iter().zip(&cor0.fields[j]).map(|(a, b)| a - b).collect();
                h1_norm_modes(c.grid(), &diff)
            })
            .fold(0.0, f64::max);
        if tn > 0.0 {
            out.constant = out.constant.max(dev / tn);
        }
        out.theta_norms.push(tn);
        out.tensor.push(dev);
        out.corrector.push(ndev);
    }
    let pts = |v: &[f64]| -> Vec<(f64, f64)> { out.theta_norms.iter().copied().zip(v.iter().copied()).collect() };
    // In one dimension a_θ equals the harmonic mean for every θ; deviations
    // at roundoff level are reported as exact rather than fitted.
    let floor = 64.0 * f64::EPSILON * t0.matrix.operator_norm();
    out.tensor_slope = if out.tensor.iter().all(|&x| x <= floor) {
        SlopeFit::Exact
    } else {
        fit_slope(&pts(&out.tensor))?
    };
    out.corrector_slope = fit_slope(&pts(&out.corrector))?;
    Ok(out)
}

/// `∫|g_j(x/ε) φ(x)|² / ∫(|φ|² + w²|∇φ|²)` maximised over `j` and the set.
fn multiplier_ratio(bx: &BoxGrid, cell_fields: &[Vec<C64>], weight: f64, phis: &[SpectralField]) -> Result<f64> {
    let mut worst = 0.0f64;
    let replicated: Vec<Vec<C64>> = cell_fields.iter().map(|g| bx.replicate(g)).collect();
    for phi in phis {
        if phi.grid() != bx.grid() || phi.ncomp() != 1 {
            return Err(Error::GridMismatch);
        }
        let phys = phi.in_domain(Domain::Physical);
        let freq = phi.in_domain(Domain::Frequency);
        let rhs: f64 = freq
            .component(0)
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let kv = bx.grid().wavevector(k, &[0.0; 2]);
                (1.0 + weight * weight * (kv[0] * kv[0] + kv[1] * kv[1])) * z.norm_sqr()
            })
            .sum();
        if rhs == 0.0 {
            continue;
        }
        let len = bx.grid().len() as f64;
        for g in &replicated {
            let lhs: f64 = g.iter().zip(phys.component(0)).map(|(a, b)| (a * b).norm_sqr()).sum::<f64>() / len;
            worst = worst.max(lhs / rhs);
        }
    }
    Ok(worst)
}

/// Empirical constant of the `H¹`-multiplier estimate for `∇N_0(x/ε)`.
pub fn multiplier_check(cor: &Corrector, bx: &BoxGrid, phis: &[SpectralField]) -> Result<f64> {
    if cor.theta != [0.0; 2] {
        return Err(Error::MismatchedTheta);
    }
    if bx.cell() != cor.grid() {
        return Err(Error::GridMismatch);
    }
    let mut gradients = Vec::new();
    for j in 0..cor.dim() {
        let g = cor.shifted_gradient(j).to_physical()?;
        gradients.extend(g.into_components());
    }
    multiplier_ratio(bx, &gradients, bx.eps(), phis)
}

/// Empirical constant of the `H¹`-multiplier estimate for `(∇γ)(x/ε)`.
pub fn gamma_multiplier_check(gamma: &CoefficientCell, bx: &BoxGrid, phis: &[SpectralField]) -> Result<f64> {
    let grid = bx.cell();
    let g = gamma.resampled(grid)?;
    let d = grid.dim();
    let mut gradients = vec![vec![ZERO; grid.len()]; d];
    for i in 0..grid.len() {
        let gi = g.eval_gradient(&grid.node(i));
        for a in 0..d {
            gradients[a][i] = gi[a];
        }
    }
    multiplier_ratio(bx, &gradients, 1.0, phis)
}
