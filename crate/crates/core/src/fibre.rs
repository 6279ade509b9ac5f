//! Single-fibre problems at fixed `(λ, θ, ε)`.
//!
//! A fibre state is a `(1+d)`-component cell field `U = (U₁, U₂)` solving
//!
//! ```text
//! (M_λ + ε⁻¹ A_θ) U = rhs,   A_θ = [[0, −(div + iθ·)], [−(∇ + iθ), 0]]
//! ```
//!
//! with `M_λ = diag(λ, λ a⁻¹)` for the wave fibre and `diag(λ, b⁻¹)` for the
//! heat fibre. The block system is solved as a whole by preconditioned GMRES;
//! the coefficient inverse acts pointwise on the cell nodes.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cell::{check_same_theta, corrected_flux, Corrector, HomogenisedTensor};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::krylov::{gmres, norm, KrylovConfig};
use crate::norms::lambda_pow;
use crate::small::{invert_small, Mat};
use crate::torus::{check_theta, ellipticity_check, CellGrid, CoefficientCell, Domain, SpectralField, Vec2};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Relative residual target of the fibre solves.
pub const FIBRE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FibreEquation {
    Wave,
    Heat,
}

impl FibreEquation {
    pub fn name(self) -> &'static str {
        match self {
            FibreEquation::Wave => "wave",
            FibreEquation::Heat => "heat",
        }
    }
}

/// One fibre `(ε, θ, λ)` with `Re λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibreParams {
    eps: f64,
    theta: Vec2,
    lambda: C64,
}

impl FibreParams {
    pub fn new(eps: f64, theta: &[f64], dim: usize, lambda: C64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidEpsilon(eps));
        }
        if !(lambda.re > 0.0) || !lambda.im.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("Re lambda = {} must be positive", lambda.re)));
        }
        Ok(Self { eps, theta: check_theta(theta, dim)?, lambda })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn theta(&self) -> Vec2 {
        self.theta
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.lambda.re
    }

    /// `ξ = θ/ε`.
    pub fn xi(&self) -> Vec2 {
        [self.theta[0] / self.eps, self.theta[1] / self.eps]
    }
}

/// A fibre field `(U₁, U₂)` in the frequency domain.
#[derive(Debug, Clone)]
pub struct FibreState {
    pub params: FibreParams,
    pub equation: FibreEquation,
    pub u: SpectralField,
    /// Relative residual of the defining equation (zero for closed forms).
    pub residual: f64,
}

impl FibreState {
    pub fn first(&self) -> SpectralField {
        self.u.select(0..1)
    }

    pub fn second(&self) -> SpectralField {
        self.u.select(1..self.u.ncomp())
    }
}

/// Orthogonal splitting `w = P_θ w + P_θ^⊥ w` of a `(1+d)`-component field.
///
/// `E_θ` holds constants in both blocks plus θ-solenoidal fields in the
/// second; its complement holds mean-zero scalars and θ-gradients of
/// mean-zero potentials.
pub fn project_e(theta: &[f64], w: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    let grid = w.grid().clone();
    let d = grid.dim();
    if w.ncomp() != 1 + d {
        return Err(Error::ComponentMismatch { expected: 1 + d, found: w.ncomp() });
    }
    let th = check_theta(theta, d)?;
    let f = w.in_domain(Domain::Frequency);
    let mut e = f.clone();
    let mut perp = SpectralField::zeros(&grid, 1 + d, Domain::Frequency);
    for k in 1..grid.len() {
        perp.component_mut(0)[k] = f.component(0)[k];
        e.component_mut(0)[k] = ZERO;
        let kv = grid.wavevector(k, &th);
        let kk: f64 = kv[..d].iter().map(|x| x * x).sum();
        let dot: C64 = (0..d).map(|a| f.component(1 + a)[k] * kv[a]).sum();
        for a in 0..d {
            let p = dot * (kv[a] / kk);
            perp.component_mut(1 + a)[k] = p;
            e.component_mut(1 + a)[k] = f.component(1 + a)[k] - p;
        }
    }
    Ok((e.in_domain(w.domain()), perp.in_domain(w.domain())))
}

/// Pointwise action of a stored `d × d` (or scalar) sample.
fn sample_apply(m: &Mat, v: &[C64; 2]) -> [C64; 2] {
    if m.dim == 1 {
        [m.m[0][0] * v[0], m.m[0][0] * v[1]]
    } else {
        m.apply(v)
    }
}

fn mat_d(m: &Mat, d: usize) -> Mat {
    if m.dim == d {
        *m
    } else {
        Mat::scalar(d, m.m[0][0])
    }
}

/// The fibre block operator on stacked frequency coefficients.
struct FibreOperator {
    grid: CellGrid,
    theta: Vec2,
    lambda: C64,
    /// Weight of the second block: `λ` (wave) or `1` (heat).
    weight: C64,
    inv_eps: f64,
    inverse: Vec<Mat>,
    /// Per-mode inverse of the constant-coefficient block (row-major, `(1+d)²`).
    blocks: Vec<[C64; 9]>,
}

impl FibreOperator {
    fn new(eq: FibreEquation, c: &CoefficientCell, p: &FibreParams) -> Result<Self> {
        ellipticity_check(c)?;
        let grid = c.grid().clone();
        let d = grid.dim();
        let inverse = c.inverse_samples()?;
        let mut mean = Mat::zeros(d);
        for m in &inverse {
            mean = mean.add(&mat_d(m, d));
        }
        let mean = mean.scale(C64::new(1.0 / grid.len() as f64, 0.0));
        let weight = match eq {
            FibreEquation::Wave => p.lambda,
            FibreEquation::Heat => ONE,
        };
        let inv_eps = 1.0 / p.eps;
        let n = 1 + d;
        let mut blocks = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let kv = grid.wavevector(k, &p.theta);
            let mut a = [ZERO; 9];
            a[0] = p.lambda;
            for r in 0..d {
                a[1 + r] = -I * (kv[r] * inv_eps);
                a[(1 + r) * n] = -I * (kv[r] * inv_eps);
                for s in 0..d {
                    a[(1 + r) * n + 1 + s] = weight * mean.m[r][s];
                }
            }
            let mut inv = [ZERO; 9];
            if !invert_small(&a[..n * n], n, &mut inv[..n * n]) {
                return Err(Error::NonElliptic { kappa: c.kappa() });
            }
            blocks.push(inv);
        }
        Ok(Self { grid, theta: p.theta, lambda: p.lambda, weight, inv_eps, inverse, blocks })
    }

    fn len(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        let len = self.len();
        let d = self.grid.dim();
        let (x1, x2) = x.split_at(len);
        // Pointwise c⁻¹ on the second block.
        let mut phys: Vec<Vec<C64>> = (0..d).map(|a| x2[a * len..(a + 1) * len].to_vec()).collect();
        for comp in phys.iter_mut() {
            self.grid.backward(comp);
        }
        for i in 0..len {
            let v = [phys[0][i], if d > 1 { phys[1][i] } else { ZERO }];
            let w = sample_apply(&self.inverse[i], &v);
            for (a, comp) in phys.iter_mut().enumerate() {
                comp[i] = w[a];
            }
        }
        for comp in phys.iter_mut() {
            self.grid.forward(comp);
        }
        for k in 0..len {
            let kv = self.grid.wavevector(k, &self.theta);
            let mut div = ZERO;
            for a in 0..d {
                div += I * kv[a] * x2[a * len + k];
            }
            out[k] = self.lambda * x1[k] - div * self.inv_eps;
            for a in 0..d {
                out[len + a * len + k] = self.weight * phys[a][k] - I * kv[a] * x1[k] * self.inv_eps;
            }
        }
    }

    fn precondition(&self, r: &[C64], z: &mut [C64]) {
        let len = self.len();
        let n = 1 + self.grid.dim();
        for k in 0..len {
            let b = &self.blocks[k];
            for row in 0..n {
                let mut acc = ZERO;
                for col in 0..n {
                    acc += b[row * n + col] * r[col * len + k];
                }
                z[row * len + k] = acc;
            }
        }
    }
}

fn stacked(f: &SpectralField) -> Vec<C64> {
    f.in_domain(Domain::Frequency).components().iter().flat_map(|c| c.iter().copied()).collect()
}

fn unstack(grid: &CellGrid, x: Vec<C64>, ncomp: usize) -> SpectralField {
    let len = grid.len();
    let comps = (0..ncomp).map(|c| x[c * len..(c + 1) * len].to_vec()).collect();
    SpectralField::from_components(grid, Domain::Frequency, comps).expect("consistent sizes")
}

/// Solves the fibre problem with a general `(1+d)`-component right-hand side.
pub fn solve_fibre_general(
    eq: FibreEquation,
    c: &CoefficientCell,
    p: &FibreParams,
    rhs: &SpectralField,
) -> Result<FibreState> {
    let grid = c.grid();
    let d = grid.dim();
    if rhs.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if rhs.ncomp() != 1 + d {
        return Err(Error::ComponentMismatch { expected: 1 + d, found: rhs.ncomp() });
    }
    let op = FibreOperator::new(eq, c, p)?;
    let b = stacked(rhs);
    let cfg = KrylovConfig { tol: FIBRE_TOLERANCE, max_iter: (10 * b.len()).max(400), restart: 80 };
    let (x, _) = gmres(|x, y| op.apply(x, y), |r, z| op.precondition(r, z), &b, &cfg)?;
    let mut ax = vec![ZERO; x.len()];
    op.apply(&x, &mut ax);
    let rn = norm(&b);
    let res: f64 = norm(&ax.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>());
    let residual = if rn == 0.0 { res } else { res / rn };
    Ok(FibreState { params: *p, equation: eq, u: unstack(grid, x, 1 + d), residual })
}

/// Solves the fibre problem with right-hand side `(F, 0)`.
pub fn solve_fibre(eq: FibreEquation, c: &CoefficientCell, p: &FibreParams, f: &SpectralField) -> Result<FibreState> {
    if f.ncomp() != 1 {
        return Err(Error::ComponentMismatch { expected: 1, found: f.ncomp() });
    }
    let zero = SpectralField::zeros(f.grid(), f.grid().dim(), f.domain());
    solve_fibre_general(eq, c, p, &SpectralField::stack(&[f, &zero])?)
}

/// Residual `(M_λ + ε⁻¹A_θ)U − rhs` of any state on the coefficient's grid.
pub fn fibre_residual(c: &CoefficientCell, state: &FibreState, rhs: &SpectralField) -> Result<SpectralField> {
    let op = FibreOperator::new(state.equation, c, &state.params)?;
    let x = stacked(&state.u);
    let mut ax = vec![ZERO; x.len()];
    op.apply(&x, &mut ax);
    let r: Vec<C64> = ax.iter().zip(stacked(rhs)).map(|(u, v)| u - v).collect();
    Ok(unstack(c.grid(), r, state.u.ncomp()))
}

/// Constant `κ_eff` with `Re⟨M_λ U, U⟩ ≥ κ_eff ‖U‖²`: the energy bound is
/// `‖U‖ ≤ ‖F‖/κ_eff`. Wave: `ν·min(1, κ(a⁻¹))`; heat: `min(ν, κ(b⁻¹))`.
pub fn energy_constant(eq: FibreEquation, c: &CoefficientCell, nu: f64) -> Result<f64> {
    let d = c.dim();
    let kinv = c
        .inverse_samples()?
        .iter()
        .map(|m| mat_d(m, d).min_hermitian_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    Ok(match eq {
        FibreEquation::Wave => nu * kinv.min(1.0),
        FibreEquation::Heat => nu.min(kinv),
    })
}

fn denominator_floor(eq: FibreEquation, nu: f64) -> f64 {
    match eq {
        FibreEquation::Wave => nu * nu,
        FibreEquation::Heat => nu,
    }
}

fn assemble_reference(
    eq: FibreEquation,
    c: &CoefficientCell,
    cor: &Corrector,
    tensor: &HomogenisedTensor,
    p: FibreParams,
    xi: Vec2,
    mean_f: C64,
) -> Result<FibreState> {
    let lambda = p.lambda;
    let first = match eq {
        FibreEquation::Wave => lambda,
        FibreEquation::Heat => ONE,
    };
    let denom = lambda * first + tensor.quad(&xi);
    if denom.norm() < denominator_floor(eq, p.nu()) * (1.0 - 1e-12) {
        return Err(Error::InvalidConfig(alloc::format!("reference denominator {} below its floor", denom.norm())));
    }
    let amp = mean_f / denom;
    let flux = corrected_flux(c, cor, &[I * xi[0], I * xi[1]])?.to_frequency()?;
    let grid = cor.grid();
    let mut one = SpectralField::zeros(grid, 1, Domain::Frequency);
    one.component_mut(0)[0] = first;
    let u = SpectralField::stack(&[&one, &flux])?.scaled(amp);
    Ok(FibreState { params: p, equation: eq, u, residual: 0.0 })
}

/// Closed-form solution `V` of the projected fibre problem, built from the
/// θ-corrector and `a_θ`.
pub fn reference_v(
    eq: FibreEquation,
    c: &CoefficientCell,
    cor: &Corrector,
    tensor: &HomogenisedTensor,
    p: &FibreParams,
    mean_f: C64,
) -> Result<FibreState> {
    check_same_theta(cor, tensor)?;
    if cor.theta() != p.theta {
        return Err(Error::MismatchedTheta);
    }
    if c.grid() != cor.grid() {
        return Err(Error::GridMismatch);
    }
    assemble_reference(eq, c, cor, tensor, *p, p.xi(), mean_f)
}

/// The θ-independent approximation `W_{λ,ξ}` built from `N_0` and `a_0`.
pub fn reference_w(
    eq: FibreEquation,
    c: &CoefficientCell,
    cor0: &Corrector,
    tensor0: &HomogenisedTensor,
    p: &FibreParams,
    xi: Vec2,
    mean_f: C64,
) -> Result<FibreState> {
    check_same_theta(cor0, tensor0)?;
    if cor0.theta() != [0.0; 2] {
        return Err(Error::MismatchedTheta);
    }
    if c.grid() != cor0.grid() {
        return Err(Error::GridMismatch);
    }
    assemble_reference(eq, c, cor0, tensor0, *p, xi, mean_f)
}

/// Normalised fibre error: wave `‖U − W‖/(ε|λ|²‖F‖)`, heat
/// `(‖λ^{1/2}(U − W)₁‖ + ‖(U − W)₂‖)/(ε‖F‖)`. Returns `(ratio, ‖U − W‖)`.
pub fn fibre_error(u: &FibreState, w: &FibreState, f_norm: f64) -> Result<(f64, f64)> {
    let diff = u.u.sub(&w.u)?;
    let raw = diff.norm_l2();
    let p = &u.params;
    let ratio = match u.equation {
        FibreEquation::Wave => raw / (p.eps * p.lambda.norm_sqr() * f_norm),
        FibreEquation::Heat => {
            let e1 = diff.select(0..1).norm_l2() * lambda_pow(p.lambda, 0.5).norm();
            let e2 = diff.select(1..diff.ncomp()).norm_l2();
            (e1 + e2) / (p.eps * f_norm)
        }
    };
    Ok((ratio, raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub theta: Vec2,
    pub k: f64,
    pub ratio: f64,
    pub raw_error: f64,
    /// Fibre solve residual.
    pub residual: f64,
    /// `‖U‖ κ_eff / ‖F‖`; at most one by the energy bound.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibreSweep {
    pub equation: FibreEquation,
    pub entries: Vec<SweepEntry>,
    /// `(ε, sup ratio)` in the order of the ε list.
    pub sup_per_eps: Vec<(f64, f64)>,
    /// `max sup / min sup` across ε (1 when every sup vanishes).
    pub variation: f64,
}

impl FibreSweep {
    /// `(ε, raw error)` at one `(k, θ)` node of the grid.
    pub fn raw_errors_at(&self, k: f64, theta: Vec2) -> Vec<(f64, f64)> {
        self.entries.iter().filter(|e| e.k == k && e.theta == theta).map(|e| (e.eps, e.raw_error)).collect()
    }

    /// Largest ratio with `|k| = k`, over ε and θ.
    pub fn sup_at_k(&self, k: f64) -> f64 {
        self.entries.iter().filter(|e| e.k.abs() == k.abs()).map(|e| e.ratio).fold(0.0, f64::max)
    }
}

/// Dyadic quasimomenta `±π 2^{-j}`, `j = 0..=jmax`, along the axes (and the
/// diagonal in 2D). `+π` lies outside `[−π, π)` and is skipped.
pub fn dyadic_thetas(dim: usize, jmax: u32) -> Vec<Vec2> {
    let mut scalars = Vec::new();
    for j in 0..=jmax {
        let t = core::f64::consts::PI / (1u64 << j) as f64;
        scalars.push(-t);
        if j > 0 {
            scalars.push(t);
        }
    }
    let mut out = Vec::new();
    for &t in &scalars {
        out.push([t, 0.0]);
        if dim == 2 {
            out.push([0.0, t]);
            out.push([t, t]);
        }
    }
    out
}

/// Evaluates the normalised fibre error over `ε × θ × k` (with `λ = ν + ik`).
#[allow(clippy::too_many_arguments)]
pub fn fibre_error_sweep<E: Executor>(
    eq: FibreEquation,
    c: &CoefficientCell,
    cor0: &Corrector,
    tensor0: &HomogenisedTensor,
    eps: &[f64],
    nu: f64,
    ks: &[f64],
    thetas: &[Vec2],
    f: &SpectralField,
    exec: &E,
) -> Result<FibreSweep> {
    if eps.is_empty() || ks.is_empty() || thetas.is_empty() {
        return Err(Error::InvalidConfig("fibre sweep grids must be nonempty".into()));
    }
    let d = c.dim();
    let f_norm = f.norm_l2();
    let mean_f = f.in_domain(Domain::Frequency).mean(0);
    let kappa_eff = energy_constant(eq, c, nu)?;
    let (nt, nk) = (thetas.len(), ks.len());
    let results = exec.map(eps.len() * nt * nk, |idx| -> Result<SweepEntry> {
        let (ie, rest) = (idx / (nt * nk), idx % (nt * nk));
        let (it, ik) = (rest / nk, rest % nk);
        let p = FibreParams::new(eps[ie], &thetas[it][..d], d, C64::new(nu, ks[ik]))?;
        let u = solve_fibre(eq, c, &p, f)?;
        let w = reference_w(eq, c, cor0, tensor0, &p, p.xi(), mean_f)?;
        let (ratio, raw_error) = fibre_error(&u, &w, f_norm)?;
        Ok(SweepEntry {
            eps: eps[ie],
            theta: p.theta(),
            k: ks[ik],
            ratio,
            raw_error,
            residual: u.residual,
            energy: u.u.norm_l2() * kappa_eff / f_norm,
        })
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let sup_per_eps: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| (e, entries.iter().filter(|x| x.eps == e).map(|x| x.ratio).fold(0.0, f64::max)))
        .collect();
    let hi = sup_per_eps.iter().map(|s| s.1).fold(0.0, f64::max);
    let lo = sup_per_eps.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let variation = if hi == 0.0 { 1.0 } else { hi / lo };
    Ok(FibreSweep { equation: eq, entries, sup_per_eps, variation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityTable {
    /// `(θ, smallest singular value of A_θ on E_θ^⊥)`.
    pub rows: Vec<(Vec2, f64)>,
    pub min: f64,
    pub floor: f64,
    pub pass: bool,
}

/// Smallest singular value of `A_θ P_θ^⊥`, mode by mode: on mode `m ≠ 0`
/// the complement is spanned by `(e_m, 0)` and `(0, κ̂ e_m)`.
pub fn uniform_invertibility(thetas: &[Vec2], grid: &CellGrid) -> Result<InvertibilityTable> {
    let d = grid.dim();
    let mut rows = Vec::with_capacity(thetas.len());
    for t in thetas {
        let th = check_theta(&t[..d], d)?;
        let mut best = f64::INFINITY;
        for k in 1..grid.len() {
            let kv = grid.wavevector(k, &th);
            let kn = libm::sqrt(kv[..d].iter().map(|x| x * x).sum());
            // Images of the two basis vectors as (scalar, vector) pairs.
            // A(1, 0) = (0, −iκ); A(0, κ̂) = (−i κ·κ̂, 0).
            let img1 = (ZERO, [-I * kv[0], -I * kv[1]]);
            let img2 = (-I * ((kv[0] * kv[0] + kv[1] * kv[1]) / kn), [ZERO; 2]);
            let ip = |a: &(C64, [C64; 2]), b: &(C64, [C64; 2])| {
                a.0 * b.0.conj() + (0..d).map(|i| a.1[i] * b.1[i].conj()).sum::<C64>()
            };
            let mut gram = Mat::zeros(2);
            gram.m = [[ip(&img1, &img1), ip(&img2, &img1)], [ip(&img1, &img2), ip(&img2, &img2)]];
            let sv = libm::sqrt(gram.hermitian_eigenvalues()[0].max(0.0));
            best = best.min(sv);
        }
        rows.push((th, best));
    }
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let floor = core::f64::consts::PI * (1.0 - 1e-12);
    Ok(InvertibilityTable { rows, min, floor, pass: min >= floor })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxRegularity {
    /// `(param index, rhs index, ratio)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// Largest ratio per fibre parameter.
    pub per_param: Vec<f64>,
    pub max: f64,
    /// `max / min` of `per_param`.
    pub spread: f64,
}

/// Parabolic regularity ratio
/// `(‖λu₁‖ + ‖λ^{1/2}u₂‖ + ‖λ^{1/2}C*u₁‖ + ‖Cu₂‖)/(‖f₁‖ + ‖λ^{1/2}f₂‖)`
/// on heat fibres, `C = −ε⁻¹(div + iθ·)`.
pub fn maximal_regularity_ratio(
    b: &CoefficientCell,
    params: &[FibreParams],
    rhs: &[(SpectralField, SpectralField)],
) -> Result<MaxRegularity> {
    if params.is_empty() || rhs.is_empty() {
        return Err(Error::InvalidConfig("maximal regularity needs fibres and right-hand sides".into()));
    }
    let mut entries = Vec::new();
    let mut per_param = Vec::new();
    for (ip, p) in params.iter().enumerate() {
        let half = lambda_pow(p.lambda, 0.5).norm();
        let mut best = 0.0f64;
        for (ir, (f1, f2)) in rhs.iter().enumerate() {
            let full = SpectralField::stack(&[f1, f2])?;
            let st = solve_fibre_general(FibreEquation::Heat, b, p, &full)?;
            let u1 = st.first();
            let u2 = st.second();
            let grad = crate::torus::shifted_gradient(&u1, &p.theta[..b.dim()])?;
            let div = crate::torus::shifted_divergence(&u2, &p.theta[..b.dim()])?;
            let num = p.lambda.norm() * u1.norm_l2()
                + half * u2.norm_l2()
                + half * grad.norm_l2() / p.eps
                + div.norm_l2() / p.eps;
            let den = f1.norm_l2() + half * f2.norm_l2();
            let r = num / den;
            entries.push((ip, ir, r));
            best = best.max(r);
        }
        per_param.push(best);
    }
    let max = per_param.iter().copied().fold(0.0, f64::max);
    let min = per_param.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MaxRegularity { entries, per_param, max, spread: max / min })
}
