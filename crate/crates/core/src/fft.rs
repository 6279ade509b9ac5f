//! Unnormalised complex FFTs.
//!
//! Power-of-two lengths use an iterative radix-2 kernel; every other length
//! goes through Bluestein's chirp-z reduction onto a power-of-two kernel.
//! Multi-dimensional transforms act on row-major arrays with equal extent
//! along every axis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `e^{-2πi jk/n}`.
    Forward,
    /// Kernel `e^{+2πi jk/n}`, no scaling.
    Inverse,
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<C64>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let phi = -2.0 * PI * k as f64 / n as f64;
                C64::new(libm::cos(phi), libm::sin(phi))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    fn process(&self, data: &mut [C64], dir: Direction) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if dir == Direction::Inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    chirp: Vec<C64>,
    kernel_hat: Vec<C64>,
    inner: Radix2,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // k^2 mod 2n keeps the chirp phase small and accurate.
        let chirp: Vec<C64> = (0..n)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
                let phi = -PI * k2 / n as f64;
                C64::new(libm::cos(phi), libm::sin(phi))
            })
            .collect();
        let mut kernel = vec![C64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.process(&mut kernel, Direction::Forward);
        Self { n, chirp, kernel_hat: kernel, inner }
    }

    fn forward(&self, data: &mut [C64]) {
        let m = self.inner.n;
        let mut work = vec![C64::new(0.0, 0.0); m];
        for k in 0..self.n {
            work[k] = data[k] * self.chirp[k];
        }
        self.inner.process(&mut work, Direction::Forward);
        for (w, h) in work.iter_mut().zip(&self.kernel_hat) {
            *w *= h;
        }
        self.inner.process(&mut work, Direction::Inverse);
        let scale = 1.0 / m as f64;
        for k in 0..self.n {
            data[k] = work[k] * self.chirp[k] * scale;
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// A reusable transform plan for one length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kernel: Kernel,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let kernel = if n.is_power_of_two() {
            Kernel::Radix2(Radix2::new(n))
        } else {
            Kernel::Bluestein(Bluestein::new(n))
        };
        Self { n, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place 1D transform of `data` (length must match the plan).
    pub fn process(&self, data: &mut [C64], dir: Direction) {
        assert_eq!(data.len(), self.n, "FFT length mismatch");
        match &self.kernel {
            Kernel::Radix2(r) => r.process(data, dir),
            Kernel::Bluestein(b) => match dir {
                Direction::Forward => b.forward(data),
                Direction::Inverse => {
                    for z in data.iter_mut() {
                        *z = z.conj();
                    }
                    b.forward(data);
                    for z in data.iter_mut() {
                        *z = z.conj();
                    }
                }
            },
        }
    }

    /// In-place transform of a row-major array with `dim` axes of this length.
    pub fn process_nd(&self, data: &mut [C64], dim: usize, dir: Direction) {
        let n = self.n;
        assert_eq!(data.len(), n.pow(dim as u32), "FFT array size mismatch");
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    if stride == 1 {
                        self.process(&mut data[base..base + n], dir);
                        continue;
                    }
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = data[base + i * stride];
                    }
                    self.process(&mut line, dir);
                    for (i, z) in line.iter().enumerate() {
                        data[base + i * stride] = *z;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[C64], sign: f64) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(C64::new(0.0, 0.0), |acc, (j, &v)| {
                    let phi = sign * 2.0 * PI * (j * k % n) as f64 / n as f64;
                    acc + v * C64::new(libm::cos(phi), libm::sin(phi))
                })
            })
            .collect()
    }

    fn sample(n: usize) -> Vec<C64> {
        (0..n)
            .map(|j| C64::new(libm::sin(1.3 * j as f64 + 0.2), libm::cos(0.7 * (j * j) as f64)))
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_mixed_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 16, 24, 30, 64, 96] {
            let x = sample(n);
            let plan = Fft::new(n);
            let mut fwd = x.clone();
            plan.process(&mut fwd, Direction::Forward);
            let mut inv = x.clone();
            plan.process(&mut inv, Direction::Inverse);
            for (a, b) in fwd.iter().zip(naive(&x, -1.0)) {
                assert!((a - b).norm() < 1e-10 * n as f64, "n={n}");
            }
            for (a, b) in inv.iter().zip(naive(&x, 1.0)) {
                assert!((a - b).norm() < 1e-10 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn two_dimensional_transform_separates_axes() {
        let n = 6;
        let plan = Fft::new(n);
        let mut data: Vec<C64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                // e^{2πi(1·r + 2·c)/n}
                let phi = 2.0 * PI * (r + 2 * c) as f64 / n as f64;
                C64::new(libm::cos(phi), libm::sin(phi))
            })
            .collect();
        plan.process_nd(&mut data, 2, Direction::Forward);
        for (i, z) in data.iter().enumerate() {
            let expect = if i == n + 2 { (n * n) as f64 } else { 0.0 };
            assert!((z.re - expect).abs() < 1e-9 && z.im.abs() < 1e-9, "index {i}: {z}");
        }
    }
}
