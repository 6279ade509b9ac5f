//! Matrix-free variable-coefficient operators on frequency coefficients.
//!
//! Products with a trigonometric-polynomial coefficient are evaluated on a
//! grid with twice the resolution and truncated back, which is the exact
//! Galerkin projection onto the retained modes.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::evolution::BoxGrid;
use crate::small::Mat;
use crate::torus::{CellGrid, CoefficientCell, CoefficientKind, Vec2};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone)]
struct Padding {
    grid: CellGrid,
    pad: CellGrid,
    embed: Vec<usize>,
}

impl Padding {
    fn new(grid: &CellGrid) -> Result<Self> {
        let pad = CellGrid::new(grid.dim(), 2 * grid.n())?;
        let embed = grid
            .modes()
            .iter()
            .map(|&m| pad.mode_index(m).expect("padded grid contains every mode"))
            .collect();
        Ok(Self { grid: grid.clone(), pad, embed })
    }

    fn lift(&self, x: &[C64], scale: impl Fn(usize) -> C64) -> Vec<C64> {
        let mut out = vec![ZERO; self.pad.len()];
        for (k, &xk) in x.iter().enumerate() {
            out[self.embed[k]] = scale(k) * xk;
        }
        self.pad.backward(&mut out);
        out
    }
}

/// Pad-grid samples of a coefficient on a cell grid or, replicated, on a box.
fn padded_samples(c: &CoefficientCell, pad: &CellGrid, box_m: Option<usize>) -> Result<Vec<Mat>> {
    match box_m {
        None => Ok(c.resampled(pad)?.samples().to_vec()),
        Some(m) => {
            let pad_cell = CellGrid::new(pad.dim(), pad.n() / m)?;
            let fine = c.resampled(&pad_cell)?;
            let bx = BoxGrid::new(&pad_cell, m)?;
            Ok((0..pad.len()).map(|i| *fine.sample(bx.cell_index(i))).collect())
        }
    }
}

/// `x ↦ −(div + iθ·)(c (∇ + iθ) x)` on the modes of `grid`.
#[derive(Debug, Clone)]
pub(crate) struct DivergenceForm {
    padding: Padding,
    theta: Vec2,
    samples: Vec<Mat>,
    scalar: bool,
    mean: f64,
}

impl DivergenceForm {
    pub fn on_cell(c: &CoefficientCell, theta: Vec2) -> Result<Self> {
        let padding = Padding::new(c.grid())?;
        let samples = padded_samples(c, &padding.pad, None)?;
        Ok(Self::build(c, padding, theta, samples))
    }

    /// The operator with coefficient `c(x/ε)` on the box.
    pub fn on_box(c: &CoefficientCell, bx: &BoxGrid) -> Result<Self> {
        let padding = Padding::new(bx.grid())?;
        let samples = padded_samples(c, &padding.pad, Some(bx.m()))?;
        Ok(Self::build(c, padding, [0.0; 2], samples))
    }

    fn build(c: &CoefficientCell, padding: Padding, theta: Vec2, samples: Vec<Mat>) -> Self {
        let mean = c.mean();
        let scalar = c.kind() == CoefficientKind::Scalar;
        let avg = if scalar { mean.m[0][0].re } else { mean.trace().re / mean.dim as f64 };
        Self { padding, theta, samples, scalar, mean: avg.max(c.kappa()).max(1e-12) }
    }

    pub fn grid(&self) -> &CellGrid {
        &self.padding.grid
    }

    /// A positive average of the coefficient, for preconditioning.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `|2πm + θ|²` of mode `k`.
    pub fn symbol(&self, k: usize) -> f64 {
        let kv = self.grid().wavevector(k, &self.theta);
        kv[0] * kv[0] + kv[1] * kv[1]
    }

    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let grid = &self.padding.grid;
        let pad = &self.padding.pad;
        let d = grid.dim();
        let mut grads: Vec<Vec<C64>> = (0..d)
            .map(|a| self.padding.lift(x, |k| C64::new(0.0, grid.wavevector(k, &self.theta)[a])))
            .collect();
        for i in 0..pad.len() {
            let g = [grads[0][i], if d > 1 { grads[1][i] } else { ZERO }];
            let a = &self.samples[i];
            let f = if self.scalar { [a.m[0][0] * g[0], a.m[0][0] * g[1]] } else { a.apply(&g) };
            for (p, gp) in grads.iter_mut().enumerate() {
                gp[i] = f[p];
            }
        }
        for f in grads.iter_mut() {
            pad.forward(f);
        }
        for (k, o) in out.iter_mut().enumerate() {
            let kv = grid.wavevector(k, &self.theta);
            let e = self.padding.embed[k];
            let mut acc = ZERO;
            for (p, f) in grads.iter().enumerate() {
                acc += C64::new(0.0, kv[p]) * f[e];
            }
            *o = -acc;
        }
    }
}

/// `x ↦ P(s·x)` for a scalar trigonometric polynomial `s` (cell or box scaled).
#[derive(Debug, Clone)]
pub(crate) struct Multiplier {
    padding: Padding,
    samples: Vec<C64>,
}

impl Multiplier {
    pub fn on_box(s: &CoefficientCell, bx: &BoxGrid, conjugate: bool) -> Result<Self> {
        let padding = Padding::new(bx.grid())?;
        let samples = padded_samples(s, &padding.pad, Some(bx.m()))?
            .into_iter()
            .map(|m| if conjugate { m.m[0][0].conj() } else { m.m[0][0] })
            .collect();
        Ok(Self { padding, samples })
    }

    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let mut v = self.padding.lift(x, |_| C64::new(1.0, 0.0));
        for (z, s) in v.iter_mut().zip(&self.samples) {
            *z *= s;
        }
        self.padding.pad.forward(&mut v);
        for (k, o) in out.iter_mut().enumerate() {
            *o = v[self.padding.embed[k]];
        }
    }
}
