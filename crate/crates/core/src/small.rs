//! Tiny dense complex linear algebra for `d ≤ 2` coefficient matrices and
//! the per-mode blocks of the Fourier preconditioners.

use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A `dim × dim` complex matrix with `dim ∈ {1, 2}`; unused entries stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub m: [[C64; 2]; 2],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!((1..=2).contains(&dim));
        Self { dim, m: [[ZERO; 2]; 2] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    pub fn scalar(dim: usize, s: C64) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = s;
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    #[inline]
    pub fn apply(&self, v: &[C64; 2]) -> [C64; 2] {
        let mut out = [ZERO; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            for (j, vj) in v.iter().enumerate().take(self.dim) {
                *o += self.m[i][j] * vj;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    out.m[i][j] += self.m[i][k] * other.m[k][j];
                }
            }
        }
        out
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        self.add(&self.adjoint()).scale(C64::new(0.5, 0.0))
    }

    pub fn inverse(&self) -> Option<Self> {
        match self.dim {
            1 => {
                let a = self.m[0][0];
                (a.norm() > 0.0).then(|| Self::scalar(1, ONE / a))
            }
            _ => {
                let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
                if det.norm() == 0.0 {
                    return None;
                }
                let inv = ONE / det;
                let mut out = Self::zeros(2);
                out.m[0][0] = self.m[1][1] * inv;
                out.m[1][1] = self.m[0][0] * inv;
                out.m[0][1] = -self.m[0][1] * inv;
                out.m[1][0] = -self.m[1][0] * inv;
                Some(out)
            }
        }
    }

    /// Eigenvalues (ascending) of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let h = self.hermitian_part();
        match self.dim {
            1 => [h.m[0][0].re, h.m[0][0].re],
            _ => {
                let p = h.m[0][0].re;
                let r = h.m[1][1].re;
                let q = h.m[0][1].norm();
                let mid = 0.5 * (p + r);
                let rad = libm::hypot(0.5 * (p - r), q);
                [mid - rad, mid + rad]
            }
        }
    }

    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.adjoint().mul(self);
        libm::sqrt(gram.hermitian_eigenvalues()[1].max(0.0))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.sub(&self.adjoint());
        (0..self.dim).all(|i| (0..self.dim).all(|j| d.m[i][j].norm() <= tol))
    }

    /// `Σ_{ij} ξ_i A_{ij} ξ_j` for a real vector ξ.
    pub fn quad_form(&self, xi: &[f64; 2]) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.m[i][j] * (xi[i] * xi[j]);
            }
        }
        acc
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }
}

/// Solves `A x = b` in place (row-major `n × n`), partial pivoting.
/// Returns `false` on a numerically singular matrix.
pub fn solve_in_place(a: &mut [C64], n: usize, b: &mut [C64]) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
            .unwrap_or(col);
        if a[pivot * n + col].norm() == 0.0 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = ONE / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor == ZERO {
                continue;
            }
            for k in col..n {
                let t = a[col * n + k];
                a[row * n + k] -= factor * t;
            }
            let t = b[col];
            b[row] -= factor * t;
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}

/// Inverts a row-major `n × n` matrix with `n ≤ 3` into `out`.
pub fn invert_small(a: &[C64], n: usize, out: &mut [C64]) -> bool {
    for col in 0..n {
        let mut work = [ZERO; 9];
        work[..n * n].copy_from_slice(&a[..n * n]);
        let mut rhs = [ZERO; 3];
        rhs[col] = ONE;
        if !solve_in_place(&mut work[..n * n], n, &mut rhs[..n]) {
            return false;
        }
        for row in 0..n {
            out[row * n + col] = rhs[row];
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigenvalues_of_known_matrix() {
        let mut a = Mat::zeros(2);
        a.m = [[C64::new(2.0, 0.0), C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), C64::new(2.0, 0.0)]];
        let [lo, hi] = a.hermitian_eigenvalues();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        assert!(a.is_hermitian(0.0));
    }

    #[test]
    fn inverse_and_dense_solve_agree() {
        let mut a = Mat::zeros(2);
        a.m = [[C64::new(3.0, 1.0), C64::new(1.0, 0.0)], [C64::new(0.5, -2.0), C64::new(4.0, 0.0)]];
        let inv = a.inverse().unwrap();
        let id = a.mul(&inv);
        assert!(id.sub(&Mat::identity(2)).operator_norm() < 1e-14);

        let mut dense = [a.m[0][0], a.m[0][1], a.m[1][0], a.m[1][1]];
        let mut b = [ONE, C64::new(0.0, 2.0)];
        assert!(solve_in_place(&mut dense, 2, &mut b));
        let expect = inv.apply(&[ONE, C64::new(0.0, 2.0)]);
        assert!((b[0] - expect[0]).norm() < 1e-14 && (b[1] - expect[1]).norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = [ONE, ONE, ONE, ONE];
        let mut b = [ONE, ONE];
        assert!(!solve_in_place(&mut a, 2, &mut b));
    }
}
