use std::f64::consts::PI;

use homoglab_core::c64;
use homoglab_core::torus::{
    ellipticity_check, shifted_divergence, shifted_gradient, CellGrid, CoefficientCell, Domain, SpectralField,
};
use homoglab_core::{Complex64 as C64, Error};
use proptest::prelude::*;

fn dot(m: [i64; 2], y: [f64; 2]) -> f64 {
    m[0] as f64 * y[0] + m[1] as f64 * y[1]
}

/// Direct-summation Fourier-series coefficients at the cell nodes.
fn direct_dft(grid: &CellGrid, values: &[C64]) -> Vec<C64> {
    let n = grid.len() as f64;
    (0..grid.len())
        .map(|k| {
            let m = grid.mode(k);
            (0..grid.len())
                .map(|i| values[i] * C64::from_polar(1.0, -2.0 * PI * dot(m, grid.node(i))))
                .sum::<C64>()
                / n
        })
        .collect()
}

fn seeded_values(len: usize, seed: u64) -> Vec<C64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..len).map(|_| c64(next(), next())).collect()
}

#[test]
fn fft_matches_direct_dft_at_n8() {
    for dim in [1, 2] {
        let g = CellGrid::new(dim, 8).unwrap();
        let vals = seeded_values(g.len(), 3 + dim as u64);
        let f = SpectralField::from_components(&g, Domain::Physical, vec![vals.clone()]).unwrap();
        let freq = f.clone().to_frequency().unwrap();
        let oracle = direct_dft(&g, &vals);
        let err = freq.component(0).iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14, "dim {dim}: {err}");
        let back = freq.to_physical().unwrap();
        let rt = back.component(0).iter().zip(&vals).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(rt < 1e-12, "dim {dim}: {rt}");
    }
}

#[test]
fn constant_and_single_mode() {
    let g = CellGrid::new(1, 16).unwrap();
    let one = SpectralField::scalar_from_fn(&g, |_| c64(1.0, 0.0)).to_frequency().unwrap();
    let m1 = SpectralField::scalar_from_fn(&g, |y| C64::from_polar(1.0, 2.0 * PI * y[0])).to_frequency().unwrap();
    for k in 0..g.len() {
        let mode = g.mode(k)[0];
        let e0 = if mode == 0 { 1.0 } else { 0.0 };
        let e1 = if mode == 1 { 1.0 } else { 0.0 };
        assert!((one.component(0)[k] - e0).norm() < 1e-15);
        assert!((m1.component(0)[k] - e1).norm() < 1e-14);
    }
    let before = SpectralField::scalar_from_fn(&g, |_| c64(1.0, 0.0));
    assert!(matches!(before.to_physical(), Err(Error::WrongDomain { .. })));
}

#[test]
fn gradient_examples() {
    let g = CellGrid::new(1, 16).unwrap();
    let one = SpectralField::scalar_from_fn(&g, |_| c64(1.0, 0.0));
    let grad = shifted_gradient(&one, &[PI / 2.0]).unwrap();
    assert!(grad.component(0).iter().all(|z| (z - c64(0.0, PI / 2.0)).norm() < 1e-13));

    let p = SpectralField::scalar_from_fn(&g, |y| C64::from_polar(1.0, 2.0 * PI * y[0]));
    let dp = shifted_gradient(&p, &[0.0]).unwrap();
    for (i, z) in dp.component(0).iter().enumerate() {
        assert!((z - c64(0.0, 2.0 * PI) * p.component(0)[i]).norm() < 1e-12);
    }
    let lap = shifted_divergence(&shifted_gradient(&p, &[1.0]).unwrap(), &[1.0]).unwrap();
    let k2 = (2.0 * PI + 1.0).powi(2);
    for (i, z) in lap.component(0).iter().enumerate() {
        assert!((z + k2 * p.component(0)[i]).norm() < 1e-11);
    }
    let v = SpectralField::from_fn(&g, 1, |_, _| c64(0.3, -0.2));
    assert!(shifted_divergence(&v, &[0.0]).unwrap().norm_l2() < 1e-14);
    assert!(matches!(shifted_gradient(&one, &[PI]), Err(Error::ThetaOutOfRange { .. })));
    assert!(matches!(shifted_divergence(&one, &[0.0]), Ok(_)));
    let g2 = CellGrid::new(2, 8).unwrap();
    let s = SpectralField::scalar_from_fn(&g2, |_| c64(1.0, 0.0));
    assert!(matches!(shifted_divergence(&s, &[0.0, 0.0]), Err(Error::ComponentMismatch { .. })));
}

/// Band-limited test function as explicit Fourier terms.
fn band_limited() -> Vec<([i64; 2], C64)> {
    vec![([1, 0], c64(0.7, 0.1)), ([-2, 1], c64(-0.3, 0.4)), ([0, -1], c64(0.2, -0.5)), ([2, 2], c64(0.1, 0.1))]
}

fn eval(terms: &[([i64; 2], C64)], y: [f64; 2]) -> C64 {
    terms.iter().map(|(m, c)| c * C64::from_polar(1.0, 2.0 * PI * dot(*m, y))).sum()
}

fn fd_error(n: usize, theta: [f64; 2]) -> f64 {
    let g = CellGrid::new(2, n).unwrap();
    let terms = band_limited();
    let f = SpectralField::scalar_from_fn(&g, |y| eval(&terms, *y));
    let grad = shifted_gradient(&f, &theta).unwrap();
    let h = 1.0 / n as f64;
    let shifted = |y: [f64; 2]| C64::from_polar(1.0, theta[0] * y[0] + theta[1] * y[1]) * eval(&terms, y);
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let y = g.node(i);
        let back = C64::from_polar(1.0, -(theta[0] * y[0] + theta[1] * y[1]));
        for a in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[a] += h;
            ym[a] -= h;
            let fd = (shifted(yp) - shifted(ym)) / (2.0 * h) * back;
            worst = worst.max((fd - grad.component(a)[i]).norm());
        }
    }
    worst
}

#[test]
fn gradient_matches_central_differences() {
    let theta = [1.0, -2.0];
    let (e16, e32, e64) = (fd_error(16, theta), fd_error(32, theta), fd_error(64, theta));
    let r1 = e16 / e32;
    let r2 = e32 / e64;
    assert!((3.6..=4.4).contains(&r1) && (3.8..=4.2).contains(&r2), "{e16} {e32} {e64}");
}

#[test]
fn ellipticity_examples() {
    let g = CellGrid::new(1, 16).unwrap();
    let id = CoefficientCell::isotropic(&[([0, 0], c64(1.0, 0.0))], &g).unwrap();
    assert_eq!(ellipticity_check(&id).unwrap(), 1.0);
    let a = CoefficientCell::isotropic(&[([0, 0], c64(2.0, 0.0)), ([1, 0], c64(0.0, -0.5)), ([-1, 0], c64(0.0, 0.5))], &g).unwrap();
    assert!((ellipticity_check(&a).unwrap() - 1.0).abs() < 1e-14);
    let s = CoefficientCell::isotropic(&[([0, 0], c64(0.0, 0.0)), ([1, 0], c64(0.0, -0.5)), ([-1, 0], c64(0.0, 0.5))], &g).unwrap();
    assert!(matches!(ellipticity_check(&s), Err(Error::NonElliptic { .. })));
}

fn field_strategy(dim: usize, n: usize, ncomp: usize) -> impl Strategy<Value = SpectralField> {
    let len = CellGrid::new(dim, n).unwrap().len() * ncomp;
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(move |v| {
        let g = CellGrid::new(dim, n).unwrap();
        let comps = v.chunks(g.len()).map(|c| c.iter().map(|&(a, b)| c64(a, b)).collect()).collect();
        SpectralField::from_components(&g, Domain::Physical, comps).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_and_roundtrip(f in field_strategy(2, 8, 2)) {
        let freq = f.clone().to_frequency().unwrap();
        let scale = f.norm_l2().max(1e-300);
        prop_assert!((freq.norm_l2() - f.norm_l2()).abs() <= 1e-12 * scale);
        prop_assert!(freq.to_physical().unwrap().sub(&f).unwrap().norm_l2() <= 1e-12 * scale);
    }

    #[test]
    fn gradient_divergence_adjoint(
        p in field_strategy(2, 8, 1),
        v in field_strategy(2, 8, 2),
        t0 in -PI..PI,
        t1 in -PI..PI,
    ) {
        let th = [t0, t1];
        let lhs = shifted_gradient(&p, &th).unwrap().inner(&v).unwrap();
        let rhs = -p.inner(&shifted_divergence(&v, &th).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn mean_zero_gradient_has_no_constant_mode(p in field_strategy(1, 16, 1)) {
        let mean = p.mean(0);
        let centred = p.sub(&SpectralField::scalar_from_fn(p.grid(), |_| mean)).unwrap();
        let g = shifted_gradient(&centred, &[0.0]).unwrap();
        prop_assert!(g.mean(0).norm() <= 1e-13);
    }
}
