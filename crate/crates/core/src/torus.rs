//! Spectral calculus on the periodic unit cell `[-1/2, 1/2)^d`, `d ∈ {1, 2}`.
//!
//! Fields are sampled at the nodes `y_i = -1/2 + i/n` and, in the frequency
//! domain, stored as Fourier-series coefficients
//! `c_m = n^{-d} Σ_y f(y) e^{-2πi m·y}`, `m ∈ [-n/2, n/2)^d`. Physical norms
//! carry the cell quadrature weight `n^{-d}`, so the pair is unitary between
//! `L²(cell)` and `ℓ²` and the zero mode is the cell mean.
//!
//! The same grid type doubles as the unit periodic box used by the
//! evolution solvers (wavevectors `2πq`, θ = 0).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft};
use crate::small::Mat;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A point or wavevector; entries past the grid dimension are zero.
pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Physical,
    Frequency,
}

#[derive(Debug)]
struct GridInner {
    dim: usize,
    n: usize,
    len: usize,
    fft: Fft,
    modes: Vec<[i64; 2]>,
    /// `(-1)^{m_1 + m_2}`: the shift from `y = i/n` to `y = -1/2 + i/n`.
    sign: Vec<f64>,
}

/// Uniform tensor grid on the unit cell with `n` (even, ≥ 8) nodes per axis.
#[derive(Debug, Clone)]
pub struct CellGrid {
    inner: Arc<GridInner>,
}

impl PartialEq for CellGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.dim == other.inner.dim && self.inner.n == other.inner.n
    }
}

impl CellGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("points per axis {n} must be even and at least 8")));
        }
        let len = n.pow(dim as u32);
        let signed = |k: usize| if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
        let modes: Vec<[i64; 2]> = (0..len)
            .map(|idx| match dim {
                1 => [signed(idx), 0],
                _ => [signed(idx / n), signed(idx % n)],
            })
            .collect();
        let sign = modes
            .iter()
            .map(|m| if (m[0] + m[1]).rem_euclid(2) == 0 { 1.0 } else { -1.0 })
            .collect();
        Ok(Self { inner: Arc::new(GridInner { dim, n, len, fft: Fft::new(n), modes, sign }) })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Total node (and mode) count `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    /// Signed frequency index of the mode stored at `idx`.
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        self.inner.modes[idx]
    }

    pub fn modes(&self) -> &[[i64; 2]] {
        &self.inner.modes
    }

    /// Storage index of a signed mode, if it is on the grid.
    pub fn mode_index(&self, m: [i64; 2]) -> Option<usize> {
        let n = self.n() as i64;
        let wrap = |k: i64| -> Option<usize> { (-n / 2..n / 2).contains(&k).then(|| k.rem_euclid(n) as usize) };
        match self.dim() {
            1 => (m[1] == 0).then_some(()).and_then(|_| wrap(m[0])),
            _ => Some(wrap(m[0])? * self.n() + wrap(m[1])?),
        }
    }

    /// Axis indices of node `idx`.
    #[inline]
    pub fn node_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / self.n(), idx % self.n()],
        }
    }

    pub fn node_from_index(&self, ij: [usize; 2]) -> usize {
        match self.dim() {
            1 => ij[0],
            _ => ij[0] * self.n() + ij[1],
        }
    }

    /// Physical coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> Vec2 {
        let n = self.n() as f64;
        let ij = self.node_index(idx);
        let mut y = [0.0; 2];
        for (a, yi) in y.iter_mut().enumerate().take(self.dim()) {
            *yi = -0.5 + ij[a] as f64 / n;
        }
        y
    }

    /// Shifted wavevector `2πm + θ` of the mode at `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize, theta: &Vec2) -> Vec2 {
        let m = self.inner.modes[idx];
        let mut k = [0.0; 2];
        for a in 0..self.dim() {
            k[a] = 2.0 * PI * m[a] as f64 + theta[a];
        }
        k
    }

    /// Node values → Fourier-series coefficients, in place.
    pub(crate) fn forward(&self, data: &mut [C64]) {
        self.inner.fft.process_nd(data, self.dim(), Direction::Forward);
        let scale = 1.0 / self.len() as f64;
        for (z, s) in data.iter_mut().zip(&self.inner.sign) {
            *z *= s * scale;
        }
    }

    /// Fourier-series coefficients → node values, in place.
    pub(crate) fn backward(&self, data: &mut [C64]) {
        for (z, s) in data.iter_mut().zip(&self.inner.sign) {
            *z *= *s;
        }
        self.inner.fft.process_nd(data, self.dim(), Direction::Inverse);
    }
}

/// Converts a user-facing quasimomentum into a padded vector, rejecting
/// components outside `[-π, π)`.
pub fn check_theta(theta: &[f64], dim: usize) -> Result<Vec2> {
    if theta.len() != dim {
        return Err(Error::ComponentMismatch { expected: dim, found: theta.len() });
    }
    let mut out = [0.0; 2];
    for (a, &t) in theta.iter().enumerate() {
        if !(-PI..PI).contains(&t) {
            return Err(Error::ThetaOutOfRange { component: a, value: t });
        }
        out[a] = t;
    }
    Ok(out)
}

/// A multi-component complex field on a [`CellGrid`].
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: CellGrid,
    domain: Domain,
    comps: Vec<Vec<C64>>,
}

impl SpectralField {
    pub fn zeros(grid: &CellGrid, ncomp: usize, domain: Domain) -> Self {
        Self { grid: grid.clone(), domain, comps: vec![vec![ZERO; grid.len()]; ncomp] }
    }

    pub fn from_components(grid: &CellGrid, domain: Domain, comps: Vec<Vec<C64>>) -> Result<Self> {
        if let Some(bad) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid(format!("component of length {} on a grid of {}", bad.len(), grid.len())));
        }
        Ok(Self { grid: grid.clone(), domain, comps })
    }

    /// Samples `f(y, component)` at the grid nodes.
    pub fn from_fn(grid: &CellGrid, ncomp: usize, f: impl Fn(&Vec2, usize) -> C64) -> Self {
        let comps = (0..ncomp)
            .map(|c| (0..grid.len()).map(|i| f(&grid.node(i), c)).collect())
            .collect();
        Self { grid: grid.clone(), domain: Domain::Physical, comps }
    }

    pub fn scalar_from_fn(grid: &CellGrid, f: impl Fn(&Vec2) -> C64) -> Self {
        Self::from_fn(grid, 1, |y, _| f(y))
    }

    /// A single Fourier mode `amp · e^{2πi m·y}` in the frequency domain.
    pub fn mode(grid: &CellGrid, m: [i64; 2], amp: C64) -> Result<Self> {
        let idx = grid
            .mode_index(m)
            .ok_or_else(|| Error::NotBandLimited(format!("mode {m:?} is not on a grid with n = {}", grid.n())))?;
        let mut out = Self::zeros(grid, 1, Domain::Frequency);
        out.comps[0][idx] = amp;
        Ok(out)
    }

    #[inline]
    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<C64>> {
        self.comps
    }

    pub fn to_frequency(mut self) -> Result<Self> {
        if self.domain != Domain::Physical {
            return Err(Error::WrongDomain { expected: Domain::Physical, found: self.domain });
        }
        for c in self.comps.iter_mut() {
            self.grid.forward(c);
        }
        self.domain = Domain::Frequency;
        Ok(self)
    }

    pub fn to_physical(mut self) -> Result<Self> {
        if self.domain != Domain::Frequency {
            return Err(Error::WrongDomain { expected: Domain::Frequency, found: self.domain });
        }
        for c in self.comps.iter_mut() {
            self.grid.backward(c);
        }
        self.domain = Domain::Physical;
        Ok(self)
    }

    /// A copy of this field in `domain`.
    pub fn in_domain(&self, domain: Domain) -> Self {
        let out = self.clone();
        match (self.domain, domain) {
            (Domain::Physical, Domain::Frequency) => out.to_frequency().expect("domain checked"),
            (Domain::Frequency, Domain::Physical) => out.to_physical().expect("domain checked"),
            _ => out,
        }
    }

    /// `Σ_c ‖f_c‖²_{L²(cell)}` evaluated in whichever domain the field is in.
    pub fn norm_sqr(&self) -> f64 {
        let raw: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum();
        match self.domain {
            Domain::Frequency => raw,
            Domain::Physical => raw / self.grid.len() as f64,
        }
    }

    pub fn norm_l2(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    /// `⟨self, other⟩_{L²(cell)} = ∫ Σ_c self_c · conj(other_c)`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_compatible(other)?;
        let other = other.in_domain(self.domain);
        let raw: C64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| x * y.conj())
            .sum();
        Ok(match self.domain {
            Domain::Frequency => raw,
            Domain::Physical => raw / self.grid.len() as f64,
        })
    }

    /// Cell mean `⟨f_c, 1⟩` of one component.
    pub fn mean(&self, c: usize) -> C64 {
        match self.domain {
            Domain::Frequency => self.comps[c][0],
            Domain::Physical => self.comps[c].iter().sum::<C64>() / self.grid.len() as f64,
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.ncomp() != other.ncomp() {
            return Err(Error::ComponentMismatch { expected: self.ncomp(), found: other.ncomp() });
        }
        Ok(())
    }

    /// `self + s · other` (other converted into this field's domain).
    pub fn add_scaled(&self, s: C64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let other = other.in_domain(self.domain);
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            c.iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    /// Stacks the components of several fields on the same grid and domain.
    pub fn stack(parts: &[&SpectralField]) -> Result<Self> {
        let first = parts.first().ok_or(Error::ComponentMismatch { expected: 1, found: 0 })?;
        let mut comps = Vec::new();
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::GridMismatch);
            }
            comps.extend(p.in_domain(first.domain).comps);
        }
        Ok(Self { grid: first.grid.clone(), domain: first.domain, comps })
    }

    /// Components `range` as a new field.
    pub fn select(&self, range: core::ops::Range<usize>) -> Self {
        Self { grid: self.grid.clone(), domain: self.domain, comps: self.comps[range].to_vec() }
    }
}

/// Physical → frequency; a field already in frequency space is rejected.
pub fn to_frequency(f: SpectralField) -> Result<SpectralField> {
    f.to_frequency()
}

/// Frequency → physical.
pub fn to_physical(f: SpectralField) -> Result<SpectralField> {
    f.to_physical()
}

/// `out_a[k] = i·scale·(2πm_a + θ_a)·src[k]` on frequency coefficients.
pub(crate) fn gradient_modes(grid: &CellGrid, theta: &Vec2, scale: f64, src: &[C64], out: &mut [Vec<C64>]) {
    for (k, &s) in src.iter().enumerate() {
        let kv = grid.wavevector(k, theta);
        for (a, o) in out.iter_mut().enumerate().take(grid.dim()) {
            o[k] = C64::new(0.0, scale * kv[a]) * s;
        }
    }
}

/// `out[k] = Σ_a i·scale·(2πm_a + θ_a)·src_a[k]` on frequency coefficients.
pub(crate) fn divergence_modes(grid: &CellGrid, theta: &Vec2, scale: f64, src: &[Vec<C64>], out: &mut [C64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let kv = grid.wavevector(k, theta);
        let mut acc = ZERO;
        for a in 0..grid.dim() {
            acc += C64::new(0.0, scale * kv[a]) * src[a][k];
        }
        *o = acc;
    }
}

/// `(∇ + iθ) f` for a scalar field; the result is returned in the input's domain.
pub fn shifted_gradient(f: &SpectralField, theta: &[f64]) -> Result<SpectralField> {
    if f.ncomp() != 1 {
        return Err(Error::ComponentMismatch { expected: 1, found: f.ncomp() });
    }
    let grid = f.grid();
    let th = check_theta(theta, grid.dim())?;
    let freq = f.in_domain(Domain::Frequency);
    let mut out = SpectralField::zeros(grid, grid.dim(), Domain::Frequency);
    gradient_modes(grid, &th, 1.0, freq.component(0), &mut out.comps);
    Ok(out.in_domain(f.domain()))
}

/// `(div + iθ·) v` for a `d`-vector field; returned in the input's domain.
pub fn shifted_divergence(v: &SpectralField, theta: &[f64]) -> Result<SpectralField> {
    let grid = v.grid();
    if v.ncomp() != grid.dim() {
        return Err(Error::ComponentMismatch { expected: grid.dim(), found: v.ncomp() });
    }
    let th = check_theta(theta, grid.dim())?;
    let freq = v.in_domain(Domain::Frequency);
    let mut out = SpectralField::zeros(grid, 1, Domain::Frequency);
    divergence_modes(grid, &th, 1.0, &freq.comps, &mut out.comps[0]);
    Ok(out.in_domain(v.domain()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    /// `d × d` matrix field (1×1 amplitudes in `d = 2` mean a multiple of the identity).
    Matrix,
    Scalar,
}

/// One term `A · e^{2πi k·y}` of a trigonometric-polynomial coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub freq: [i64; 2],
    pub amp: Mat,
}

/// Serialised form of one trigonometric term: `{freq, re, im}` with
/// `re`/`im` square matrices (1×1 for scalar or isotropic terms).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TermSpec {
    pub freq: Vec<i64>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

impl TermSpec {
    /// A scalar term `(re + i·im) e^{2πi k·y}`.
    pub fn scalar(freq: &[i64], re: f64, im: f64) -> Self {
        Self { freq: freq.to_vec(), re: vec![vec![re]], im: vec![vec![im]] }
    }

    fn to_term(&self, dim: usize) -> Result<TrigTerm> {
        if self.freq.len() != dim {
            return Err(Error::InvalidCoefficient(format!(
                "frequency {:?} does not have {dim} components",
                self.freq
            )));
        }
        let size = self.re.len();
        if !(1..=2).contains(&size) || self.re.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidCoefficient("amplitude must be a 1x1 or 2x2 matrix".into()));
        }
        if !self.im.is_empty() && (self.im.len() != size || self.im.iter().any(|r| r.len() != size)) {
            return Err(Error::InvalidCoefficient("re and im must have the same shape".into()));
        }
        let mut amp = Mat::zeros(size);
        for i in 0..size {
            for j in 0..size {
                let im = self.im.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
                amp.m[i][j] = C64::new(self.re[i][j], im);
            }
        }
        let mut freq = [0i64; 2];
        freq[..dim].copy_from_slice(&self.freq);
        Ok(TrigTerm { freq, amp })
    }
}

/// A periodic coefficient given as a trigonometric polynomial, with its
/// samples cached on a [`CellGrid`].
#[derive(Debug, Clone)]
pub struct CoefficientCell {
    kind: CoefficientKind,
    dim: usize,
    terms: Vec<TrigTerm>,
    grid: CellGrid,
    samples: Vec<Mat>,
    kappa: f64,
}

impl CoefficientCell {
    /// Builds and samples a coefficient. A constant term is required and the
    /// grid must resolve every frequency (`n > 2·max|k|`).
    pub fn new(kind: CoefficientKind, terms: Vec<TrigTerm>, grid: &CellGrid) -> Result<Self> {
        let dim = grid.dim();
        let value_dim = match kind {
            CoefficientKind::Scalar => 1,
            CoefficientKind::Matrix => dim,
        };
        if !terms.iter().any(|t| t.freq == [0, 0]) {
            return Err(Error::InvalidCoefficient("a constant term is required".into()));
        }
        let mut normalised = Vec::with_capacity(terms.len());
        for t in terms {
            if dim == 1 && t.freq[1] != 0 {
                return Err(Error::InvalidCoefficient(format!("frequency {:?} has too many components", t.freq)));
            }
            let amp = if t.amp.dim == value_dim {
                t.amp
            } else if t.amp.dim == 1 && kind == CoefficientKind::Matrix {
                Mat::scalar(dim, t.amp.m[0][0])
            } else {
                return Err(Error::InvalidCoefficient(format!(
                    "amplitude of size {} for a {value_dim}-dimensional value",
                    t.amp.dim
                )));
            };
            normalised.push(TrigTerm { freq: t.freq, amp });
        }
        let max_freq = normalised.iter().flat_map(|t| t.freq).map(i64::abs).max().unwrap_or(0);
        let limit = (grid.n() as i64 - 1) / 2;
        if max_freq > limit {
            return Err(Error::Aliasing { max_frequency: max_freq, limit });
        }
        let mut out = Self { kind, dim, terms: normalised, grid: grid.clone(), samples: Vec::new(), kappa: 0.0 };
        out.samples = (0..grid.len()).map(|i| out.eval(&grid.node(i))).collect();
        out.kappa = out
            .samples
            .iter()
            .map(|m| m.min_hermitian_eigenvalue())
            .fold(f64::INFINITY, f64::min);
        Ok(out)
    }

    /// Builds a coefficient from its serialised terms.
    pub fn from_spec(kind: CoefficientKind, spec: &[TermSpec], grid: &CellGrid) -> Result<Self> {
        let terms = spec.iter().map(|t| t.to_term(grid.dim())).collect::<Result<Vec<_>>>()?;
        Self::new(kind, terms, grid)
    }

    /// The serialised terms of this coefficient.
    pub fn to_spec(&self) -> Vec<TermSpec> {
        self.terms
            .iter()
            .map(|t| {
                let size = t.amp.dim;
                TermSpec {
                    freq: t.freq[..self.dim].to_vec(),
                    re: (0..size).map(|i| (0..size).map(|j| t.amp.m[i][j].re).collect()).collect(),
                    im: (0..size).map(|i| (0..size).map(|j| t.amp.m[i][j].im).collect()).collect(),
                }
            })
            .collect()
    }

    /// A spatially constant coefficient.
    pub fn constant(kind: CoefficientKind, value: Mat, grid: &CellGrid) -> Result<Self> {
        Self::new(kind, vec![TrigTerm { freq: [0, 0], amp: value }], grid)
    }

    /// A scalar trigonometric polynomial `Σ c_k e^{2πi k·y}` used as `s(y)·I`.
    pub fn isotropic(terms: &[([i64; 2], C64)], grid: &CellGrid) -> Result<Self> {
        let terms = terms.iter().map(|&(freq, c)| TrigTerm { freq, amp: Mat::scalar(1, c) }).collect();
        Self::new(CoefficientKind::Matrix, terms, grid)
    }

    /// A scalar-kind coefficient (e.g. the thermoelastic coupling γ).
    pub fn scalar(terms: &[([i64; 2], C64)], grid: &CellGrid) -> Result<Self> {
        let terms = terms.iter().map(|&(freq, c)| TrigTerm { freq, amp: Mat::scalar(1, c) }).collect();
        Self::new(CoefficientKind::Scalar, terms, grid)
    }

    /// The same trigonometric polynomial sampled on another grid.
    pub fn resampled(&self, grid: &CellGrid) -> Result<Self> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch);
        }
        Self::new(self.kind, self.terms.clone(), grid)
    }

    #[inline]
    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    /// Value at node `idx`.
    #[inline]
    pub fn sample(&self, idx: usize) -> &Mat {
        &self.samples[idx]
    }

    pub fn samples(&self) -> &[Mat] {
        &self.samples
    }

    /// Smallest eigenvalue of the Hermitian part over all nodes (may be ≤ 0).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn max_frequency(&self) -> i64 {
        self.terms.iter().flat_map(|t| t.freq).map(i64::abs).max().unwrap_or(0)
    }

    /// Cell mean (the constant term).
    pub fn mean(&self) -> Mat {
        let value_dim = self.samples[0].dim;
        self.terms
            .iter()
            .filter(|t| t.freq == [0, 0])
            .fold(Mat::zeros(value_dim), |acc, t| acc.add(&t.amp))
    }

    /// Evaluates the polynomial at an arbitrary point.
    pub fn eval(&self, y: &Vec2) -> Mat {
        let value_dim = match self.kind {
            CoefficientKind::Scalar => 1,
            CoefficientKind::Matrix => self.dim,
        };
        self.terms.iter().fold(Mat::zeros(value_dim), |acc, t| {
            let phi = 2.0 * PI * (t.freq[0] as f64 * y[0] + t.freq[1] as f64 * y[1]);
            acc.add(&t.amp.scale(C64::new(libm::cos(phi), libm::sin(phi))))
        })
    }

    /// Gradient of a scalar-kind coefficient at `y` (for matrix kind, of entry (0,0)).
    pub fn eval_gradient(&self, y: &Vec2) -> [C64; 2] {
        let mut g = [ZERO; 2];
        for t in &self.terms {
            let phi = 2.0 * PI * (t.freq[0] as f64 * y[0] + t.freq[1] as f64 * y[1]);
            let e = C64::new(libm::cos(phi), libm::sin(phi)) * t.amp.m[0][0];
            for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
                *ga += C64::new(0.0, 2.0 * PI * t.freq[a] as f64) * e;
            }
        }
        g
    }

    /// `c(y) = c(y)*` at every node, to `tol`.
    pub fn is_hermitian_valued(&self, tol: f64) -> bool {
        self.samples.iter().all(|m| m.is_hermitian(tol))
    }

    /// Pointwise inverses `c(y)^{-1}`.
    pub fn inverse_samples(&self) -> Result<Vec<Mat>> {
        self.samples
            .iter()
            .map(|m| m.inverse().ok_or(Error::NonElliptic { kappa: self.kappa }))
            .collect()
    }

    /// Scalar samples of a scalar-kind coefficient.
    pub fn scalar_samples(&self) -> Vec<C64> {
        self.samples.iter().map(|m| m.m[0][0]).collect()
    }
}

/// Smallest eigenvalue of `Re c(y)` over the grid nodes; fails when it is
/// not bounded away from zero.
pub fn ellipticity_check(c: &CoefficientCell) -> Result<f64> {
    if c.kappa() <= 1e-10 {
        return Err(Error::NonElliptic { kappa: c.kappa() });
    }
    Ok(c.kappa())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_mode(y: &Vec2, m: [f64; 2]) -> C64 {
        let phi = 2.0 * PI * (m[0] * y[0] + m[1] * y[1]);
        C64::new(libm::cos(phi), libm::sin(phi))
    }

    #[test]
    fn constant_field_is_a_unit_delta_at_the_zero_mode() {
        let grid = CellGrid::new(1, 16).unwrap();
        let f = SpectralField::scalar_from_fn(&grid, |_| C64::new(1.0, 0.0));
        let hat = to_frequency(f).unwrap();
        assert!((hat.component(0)[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(hat.component(0)[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn single_exponential_lands_on_its_mode() {
        let grid = CellGrid::new(1, 16).unwrap();
        let f = SpectralField::scalar_from_fn(&grid, |y| exp_mode(y, [1.0, 0.0]));
        let hat = to_frequency(f).unwrap();
        let idx = grid.mode_index([1, 0]).unwrap();
        for (k, z) in hat.component(0).iter().enumerate() {
            let expect = if k == idx { 1.0 } else { 0.0 };
            assert!((z - C64::new(expect, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let grid = CellGrid::new(1, 8).unwrap();
        let f = SpectralField::zeros(&grid, 1, Domain::Frequency);
        assert!(matches!(to_frequency(f), Err(Error::WrongDomain { .. })));
    }

    #[test]
    fn grid_rejects_odd_or_small_sizes() {
        assert!(CellGrid::new(1, 7).is_err());
        assert!(CellGrid::new(1, 6).is_err());
        assert!(CellGrid::new(3, 8).is_err());
    }

    #[test]
    fn gradient_of_constant_picks_up_the_shift() {
        let grid = CellGrid::new(1, 8).unwrap();
        let one = SpectralField::scalar_from_fn(&grid, |_| C64::new(1.0, 0.0));
        let g = shifted_gradient(&one, &[PI / 2.0]).unwrap();
        assert_eq!(g.domain(), Domain::Physical);
        for z in g.component(0) {
            assert!((z - C64::new(0.0, PI / 2.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_eigenfunction() {
        let grid = CellGrid::new(1, 16).unwrap();
        let f = SpectralField::scalar_from_fn(&grid, |y| exp_mode(y, [1.0, 0.0]));
        let g = shifted_gradient(&f, &[0.0]).unwrap();
        for (z, fz) in g.component(0).iter().zip(f.component(0)) {
            assert!((z - C64::new(0.0, 2.0 * PI) * fz).norm() < 1e-12);
        }
    }

    #[test]
    fn theta_outside_dual_cell_is_rejected() {
        let grid = CellGrid::new(1, 8).unwrap();
        let f = SpectralField::zeros(&grid, 1, Domain::Frequency);
        assert!(matches!(shifted_gradient(&f, &[PI]), Err(Error::ThetaOutOfRange { .. })));
        assert!(shifted_gradient(&f, &[-PI]).is_ok());
    }

    #[test]
    fn divergence_of_constant_vanishes_and_component_count_is_checked() {
        let grid = CellGrid::new(2, 8).unwrap();
        let v = SpectralField::from_fn(&grid, 2, |_, c| C64::new(1.0 + c as f64, 0.0));
        let d = shifted_divergence(&v, &[0.0, 0.0]).unwrap();
        assert!(d.norm_l2() < 1e-13);
        let s = SpectralField::zeros(&grid, 1, Domain::Physical);
        assert!(matches!(shifted_divergence(&s, &[0.0, 0.0]), Err(Error::ComponentMismatch { .. })));
    }

    #[test]
    fn divergence_of_gradient_on_a_single_mode() {
        let grid = CellGrid::new(1, 16).unwrap();
        let p = SpectralField::scalar_from_fn(&grid, |y| exp_mode(y, [1.0, 0.0]));
        let lap = shifted_divergence(&shifted_gradient(&p, &[1.0]).unwrap(), &[1.0]).unwrap();
        let expect = -(2.0 * PI + 1.0) * (2.0 * PI + 1.0);
        for (z, pz) in lap.component(0).iter().zip(p.component(0)) {
            assert!((z - pz * expect).norm() < 1e-11);
        }
    }

    fn sin_coefficient(grid: &CellGrid, offset: f64) -> CoefficientCell {
        // offset + sin 2πy = offset + (e^{2πiy} - e^{-2πiy}) / 2i
        CoefficientCell::isotropic(
            &[([0, 0], C64::new(offset, 0.0)), ([1, 0], C64::new(0.0, -0.5)), ([-1, 0], C64::new(0.0, 0.5))],
            grid,
        )
        .unwrap()
    }

    #[test]
    fn ellipticity_examples() {
        let grid = CellGrid::new(1, 16).unwrap();
        let id = CoefficientCell::constant(CoefficientKind::Matrix, Mat::identity(1), &grid).unwrap();
        assert!((ellipticity_check(&id).unwrap() - 1.0).abs() < 1e-15);
        let c = sin_coefficient(&grid, 2.0);
        assert!((ellipticity_check(&c).unwrap() - 1.0).abs() < 1e-14);
        let s = sin_coefficient(&grid, 0.0);
        assert!(matches!(ellipticity_check(&s), Err(Error::NonElliptic { .. })));
    }

    #[test]
    fn coefficient_validation() {
        let grid = CellGrid::new(1, 8).unwrap();
        let no_const = CoefficientCell::isotropic(&[([1, 0], C64::new(1.0, 0.0))], &grid);
        assert!(matches!(no_const, Err(Error::InvalidCoefficient(_))));
        let aliased = CoefficientCell::isotropic(&[([0, 0], C64::new(1.0, 0.0)), ([4, 0], C64::new(0.1, 0.0))], &grid);
        assert!(matches!(aliased, Err(Error::Aliasing { .. })));
        let c = sin_coefficient(&grid, 2.0);
        assert!(c.is_hermitian_valued(1e-14));
        assert!((c.mean().m[0][0] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }
}
