//! Weighted Laplace transform in time, weighted space-time norms and the
//! time-derivative multipliers `∂_t^s ↦ λ^s`.
//!
//! The discrete pair lives on `t_i = iΔt`, `i < S = 2J`, and `k_j = 2πj/T`,
//! `j ∈ [−J, J)`; frequency slices are stored in increasing `j`.
//! `‖f‖²_{L²_ν} = Δt Σ_i |f(t_i)|² e^{−2νt_i} = Δk Σ_j |F_j|²` holds exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::SpaceTimeField;
use crate::fft::{Direction, Fft};
use crate::torus::{Domain, SpectralField};

#[derive(Debug, Clone)]
pub struct TimeGrid {
    nu: f64,
    horizon: f64,
    half: usize,
    fft: alloc::sync::Arc<Fft>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.nu == other.nu && self.horizon == other.horizon && self.half == other.half
    }
}

impl TimeGrid {
    /// `ν > 0`, horizon `T > 0`, `J ≥ 1` (so `S = 2J` samples).
    pub fn new(nu: f64, horizon: f64, half: usize) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("weight nu = {nu} must be positive")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("horizon T = {horizon} must be positive")));
        }
        if half == 0 {
            return Err(Error::InvalidConfig("frequency window J must be positive".into()));
        }
        Ok(Self { nu, horizon, half, fft: alloc::sync::Arc::new(Fft::new(2 * half)) })
    }

    /// `T = 16/ν`, `J = 64`.
    pub fn with_defaults(nu: f64) -> Result<Self> {
        Self::new(nu, 16.0 / nu, 64)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `J`.
    pub fn half_window(&self) -> usize {
        self.half
    }

    /// `S = 2J`, the number of time samples and of frequencies.
    pub fn len(&self) -> usize {
        2 * self.half
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.len() as f64
    }

    /// Frequency spacing `Δk = 2π/T`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.horizon
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    /// Signed index `j` of slice `idx`.
    pub fn index(&self, idx: usize) -> i64 {
        idx as i64 - self.half as i64
    }

    /// Slice holding signed index `j`, if inside the window.
    pub fn slot(&self, j: i64) -> Option<usize> {
        let s = j + self.half as i64;
        (0..self.len() as i64).contains(&s).then_some(s as usize)
    }

    pub fn frequency(&self, idx: usize) -> f64 {
        self.index(idx) as f64 * self.dk()
    }

    /// `λ_j = ν + i k_j`.
    pub fn lambda(&self, idx: usize) -> C64 {
        C64::new(self.nu, self.frequency(idx))
    }

    pub fn lambdas(&self) -> Vec<C64> {
        (0..self.len()).map(|i| self.lambda(i)).collect()
    }
}

/// `λ^s` on the principal branch; integer powers are formed by multiplication.
pub fn lambda_pow(lambda: C64, s: f64) -> C64 {
    if s == libm::round(s) && s.abs() <= 8.0 {
        let k = s as i32;
        return if k >= 0 { lambda.powi(k) } else { C64::new(1.0, 0.0) / lambda.powi(-k) };
    }
    if s == 0.5 {
        return lambda.sqrt();
    }
    (lambda.ln() * s).exp()
}

/// `F_j = (Δt/√2π) Σ_i f(t_i) e^{−(ν + ik_j)t_i}`.
pub fn laplace_forward(grid: &TimeGrid, signal: &[C64]) -> Result<Vec<C64>> {
    if signal.len() != grid.len() {
        return Err(Error::ComponentMismatch { expected: grid.len(), found: signal.len() });
    }
    let s = grid.len();
    let mut work: Vec<C64> =
        signal.iter().enumerate().map(|(i, f)| f * libm::exp(-grid.nu * grid.time(i))).collect();
    grid.fft.process(&mut work, Direction::Forward);
    let scale = grid.dt() / libm::sqrt(2.0 * PI);
    Ok((0..s)
        .map(|idx| work[grid.index(idx).rem_euclid(s as i64) as usize] * scale)
        .collect())
}

/// Inverse of [`laplace_forward`]: `f(t_i) = e^{νt_i} (√2π/T) Σ_j F_j e^{ik_j t_i}`.
pub fn laplace_inverse(grid: &TimeGrid, spectrum: &[C64]) -> Result<Vec<C64>> {
    if spectrum.len() != grid.len() {
        return Err(Error::ComponentMismatch { expected: grid.len(), found: spectrum.len() });
    }
    let s = grid.len();
    let mut work = vec![C64::new(0.0, 0.0); s];
    for (idx, f) in spectrum.iter().enumerate() {
        work[grid.index(idx).rem_euclid(s as i64) as usize] = *f;
    }
    grid.fft.process(&mut work, Direction::Inverse);
    let scale = libm::sqrt(2.0 * PI) / grid.horizon;
    Ok(work
        .iter()
        .enumerate()
        .map(|(i, z)| z * (scale * libm::exp(grid.nu * grid.time(i))))
        .collect())
}

/// Weighted norm of a scalar time signal from its samples.
pub fn signal_norm_time(grid: &TimeGrid, signal: &[C64]) -> f64 {
    let s: f64 = signal
        .iter()
        .enumerate()
        .map(|(i, f)| f.norm_sqr() * libm::exp(-2.0 * grid.nu * grid.time(i)))
        .sum();
    libm::sqrt(grid.dt() * s)
}

/// Weighted norm of a scalar time signal from its spectrum.
pub fn signal_norm_frequency(grid: &TimeGrid, spectrum: &[C64]) -> f64 {
    libm::sqrt(grid.dk() * spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// `‖f‖_{L²_ν(ℝ; L²)}` by weighted Plancherel.
pub fn norm_l2nu(field: &SpaceTimeField) -> f64 {
    let s: f64 = field.slices().iter().map(|f| f.norm_sqr()).sum();
    libm::sqrt(field.time().dk() * s)
}

/// Spatial `‖h‖_{H^{-1}}` with the multiplier `(1 + |ξ|²)^{-1/2}`.
pub fn norm_hminus1(h: &SpectralField) -> f64 {
    libm::sqrt(hminus1_sqr(h))
}

fn hminus1_sqr(h: &SpectralField) -> f64 {
    let grid = h.grid();
    let freq = h.in_domain(Domain::Frequency);
    freq.components()
        .iter()
        .flat_map(|c| c.iter().enumerate())
        .map(|(k, z)| {
            let kv = grid.wavevector(k, &[0.0; 2]);
            z.norm_sqr() / (1.0 + kv[0] * kv[0] + kv[1] * kv[1])
        })
        .sum()
}

/// `‖f‖_{L²_ν(ℝ; H^{-1})}`.
pub fn norm_l2nu_hminus1(field: &SpaceTimeField) -> f64 {
    let s: f64 = field.slices().iter().map(hminus1_sqr).sum();
    libm::sqrt(field.time().dk() * s)
}

/// `‖f‖_{L²_ν(ℝ; H¹)}` with `|·|²_{H¹} = Σ (1 + |ξ|²)|ĥ|²`.
pub fn norm_l2nu_h1(field: &SpaceTimeField) -> f64 {
    let s: f64 = field
        .slices()
        .iter()
        .map(|h| {
            let grid = h.grid();
            h.in_domain(Domain::Frequency)
                .components()
                .iter()
                .flat_map(|c| c.iter().enumerate())
                .map(|(k, z)| {
                    let kv = grid.wavevector(k, &[0.0; 2]);
                    z.norm_sqr() * (1.0 + kv[0] * kv[0] + kv[1] * kv[1])
                })
                .sum::<f64>()
        })
        .sum();
    libm::sqrt(field.time().dk() * s)
}

/// Multiplies every frequency slice by `λ_j^s`.
pub fn dt_multiplier(s: f64, field: &SpaceTimeField) -> SpaceTimeField {
    let time = field.time().clone();
    field.map_slices(|idx, f| f.scaled(lambda_pow(time.lambda(idx), s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 8.0, 16).unwrap()
    }

    #[test]
    fn weighted_delta_has_flat_spectrum() {
        let g = grid();
        let mut f = vec![C64::new(0.0, 0.0); g.len()];
        f[0] = C64::new(1.0, 0.0);
        let hat = laplace_forward(&g, &f).unwrap();
        let expect = g.dt() / libm::sqrt(2.0 * PI);
        assert!(hat.iter().all(|z| (z.norm() - expect).abs() < 1e-15));
    }

    #[test]
    fn on_grid_exponential_is_a_single_slice() {
        let g = grid();
        let j0 = 3i64;
        let k0 = j0 as f64 * g.dk();
        let f: Vec<C64> = (0..g.len())
            .map(|i| (C64::new(g.nu(), k0) * g.time(i)).exp())
            .collect();
        let hat = laplace_forward(&g, &f).unwrap();
        let slot = g.slot(j0).unwrap();
        for (idx, z) in hat.iter().enumerate() {
            if idx == slot {
                assert!(z.norm() > 1.0);
            } else {
                assert!(z.norm() < 1e-12, "slice {idx}: {z}");
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = grid();
        let f: Vec<C64> = (0..g.len())
            .map(|i| C64::new(libm::sin(0.37 * i as f64), libm::cos(1.1 * (i * i) as f64)))
            .collect();
        let hat = laplace_forward(&g, &f).unwrap();
        let back = laplace_inverse(&g, &hat).unwrap();
        let err = f.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = back.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale.max(1.0));
        let a = signal_norm_time(&g, &f);
        let b = signal_norm_frequency(&g, &hat);
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn branch_identities() {
        let lam = C64::new(0.5, -7.0);
        let half = lambda_pow(lam, 0.5);
        assert!((half * half - lam).norm() < 1e-13);
        assert!(half.re > 0.0);
        assert!((lambda_pow(lam, 1.0) * lambda_pow(lam, 1.0) - lambda_pow(lam, 2.0)).norm() < 1e-12);
        assert!((lambda_pow(lam, -1.0) * lam - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
