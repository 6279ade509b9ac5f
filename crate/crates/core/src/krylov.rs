//! Matrix-free Krylov solvers.
//!
//! Operators and preconditioners are closures `(x, y) ↦ y = Op x`. The
//! conjugate-gradient path is for Hermitian positive-definite systems; the
//! restarted GMRES path (right preconditioning, so the monitored residual is
//! the true one) covers everything else.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length; ignored by CG.
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, restart: 80 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// `Σ conj(u_i) v_i`.
#[inline]
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm(u: &[C64]) -> f64 {
    libm::sqrt(u.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

fn true_residual<A>(apply: &mut A, x: &[C64], b: &[C64], scratch: &mut [C64]) -> f64
where
    A: FnMut(&[C64], &mut [C64]),
{
    apply(x, scratch);
    let r: f64 = b.iter().zip(scratch.iter()).map(|(bi, ai)| (bi - ai).norm_sqr()).sum();
    libm::sqrt(r)
}

/// Preconditioned conjugate gradients for Hermitian positive-definite `A`
/// with Hermitian positive-definite preconditioner `P ≈ A⁻¹`.
pub fn pcg<A, P>(mut apply: A, mut precond: P, b: &[C64], cfg: &KrylovConfig) -> Result<(Vec<C64>, SolveStats)>
where
    A: FnMut(&[C64], &mut [C64]),
    P: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![ZERO; n];
    if b_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut r = b.to_vec();
    let mut z = vec![ZERO; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![ZERO; n];
    let mut rz = dot(&r, &z).re;

    for it in 1..=cfg.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rel = norm(&r) / b_norm;
        if rel <= cfg.tol {
            let res = true_residual(&mut apply, &x, b, &mut ap) / b_norm;
            if res <= cfg.tol * 10.0 {
                return Ok((x, SolveStats { iterations: it, residual: res }));
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    let res = true_residual(&mut apply, &x, b, &mut ap) / b_norm;
    Err(Error::NoConvergence { iterations: cfg.max_iter, residual: res })
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    // Rotation [c, s; -conj(s), c] zeroing b against a, with real c.
    let an = a.norm();
    if an == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let rho = libm::hypot(an, b.norm());
    let c = an / rho;
    let s = (a / an) * b.conj() / rho;
    (c, s)
}

/// Restarted GMRES with right preconditioning `A P y = b`, `x = P y`.
pub fn gmres<A, P>(mut apply: A, mut precond: P, b: &[C64], cfg: &KrylovConfig) -> Result<(Vec<C64>, SolveStats)>
where
    A: FnMut(&[C64], &mut [C64]),
    P: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![ZERO; n];
    if b_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let m = cfg.restart.max(1).min(n.max(1));
    let mut total = 0usize;
    let mut scratch = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![ZERO; m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![ZERO; m];
    let mut g = vec![ZERO; m + 1];

    loop {
        apply(&x, &mut scratch);
        let mut r: Vec<C64> = b.iter().zip(&scratch).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / b_norm <= cfg.tol {
            return Ok((x, SolveStats { iterations: total, residual: beta / b_norm }));
        }
        if total >= cfg.max_iter {
            return Err(Error::NoConvergence { iterations: total, residual: beta / b_norm });
        }
        for z in r.iter_mut() {
            *z /= beta;
        }
        basis.clear();
        basis.push(r);
        for row in h.iter_mut() {
            row.iter_mut().for_each(|z| *z = ZERO);
        }
        g.iter_mut().for_each(|z| *z = ZERO);
        g[0] = C64::new(beta, 0.0);

        let mut k_used = 0;
        for j in 0..m {
            precond(&basis[j], &mut scratch);
            apply(&scratch, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = C64::new(wn, 0.0);
            for i in 0..j {
                let (c, s) = (cs[i], sn[i]);
                let t = h[i][j] * c + s * h[i + 1][j];
                h[i + 1][j] = -s.conj() * h[i][j] + h[i + 1][j] * c;
                h[i][j] = t;
            }
            let (c, s) = givens(h[j][j], h[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            h[j][j] = h[j][j] * c + s * h[j + 1][j];
            h[j + 1][j] = ZERO;
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;

            total += 1;
            k_used = j + 1;
            let est = g[j + 1].norm() / b_norm;
            if est <= cfg.tol * 0.5 || wn <= 1e-300 || total >= cfg.max_iter {
                break;
            }
            let next: Vec<C64> = w.iter().map(|z| z / wn).collect();
            basis.push(next);
        }

        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for k in i + 1..k_used {
                acc -= h[i][k] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![ZERO; n];
        for (yk, v) in y.iter().zip(&basis) {
            for (u, vi) in update.iter_mut().zip(v) {
                *u += yk * vi;
            }
        }
        precond(&update, &mut scratch);
        for (xi, si) in x.iter_mut().zip(&scratch) {
            *xi += si;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[C64], y: &mut [C64], shift: C64) {
        let n = x.len();
        for i in 0..n {
            let mut acc = x[i] * (C64::new(4.0, 0.0) + shift);
            if i > 0 {
                acc -= x[i - 1];
            }
            if i + 1 < n {
                acc -= x[i + 1];
            }
            y[i] = acc;
        }
    }

    #[test]
    fn cg_solves_hermitian_system() {
        let n = 50;
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let cfg = KrylovConfig::default();
        let (x, stats) = pcg(|x, y| tridiag(x, y, ZERO), |r, z| z.copy_from_slice(r), &b, &cfg).unwrap();
        let mut ax = vec![ZERO; n];
        tridiag(&x, &mut ax, ZERO);
        let rel = ax.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / norm(&b);
        assert!(rel <= 1e-9, "{rel} after {} iterations", stats.iterations);
    }

    #[test]
    fn gmres_solves_non_hermitian_system_with_restarts() {
        let n = 60;
        let shift = C64::new(-1.0, 0.7);
        let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, (i % 3) as f64)).collect();
        let cfg = KrylovConfig { tol: 1e-11, max_iter: 500, restart: 7 };
        let (x, stats) = gmres(|x, y| tridiag(x, y, shift), |r, z| z.copy_from_slice(r), &b, &cfg).unwrap();
        let mut ax = vec![ZERO; n];
        tridiag(&x, &mut ax, shift);
        let rel = ax.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / norm(&b);
        assert!(rel <= 1e-11, "residual {rel}");
        assert!((stats.residual - rel).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let n = 40;
        let b = vec![C64::new(1.0, 0.0); n];
        let cfg = KrylovConfig { tol: 1e-14, max_iter: 3, restart: 3 };
        let err = gmres(|x, y| tridiag(x, y, C64::new(-3.9, 0.0)), |r, z| z.copy_from_slice(r), &b, &cfg);
        assert!(matches!(err, Err(Error::NoConvergence { .. })));
    }
}
