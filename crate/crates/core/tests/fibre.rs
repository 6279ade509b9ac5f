use std::f64::consts::PI;

use homoglab_core::c64;
use homoglab_core::fibre::project_e;
use homoglab_core::torus::{CellGrid, Domain, SpectralField};
use homoglab_core::Complex64 as C64;
use proptest::prelude::*;

/// Dense complex Gaussian elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let s: C64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn inner(u: &[C64], v: &[C64], w: f64) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() * w
}

/// `P_θ^⊥ w` from a deliberately non-orthogonal basis of `E_θ^⊥` and its Gram matrix.
#[test]
fn projection_matches_gram_oracle() {
    let g = CellGrid::new(2, 8).unwrap();
    let nodes = g.len();
    let theta = [0.9, -2.3];
    let plane = |m: [i64; 2]| -> Vec<C64> {
        (0..nodes)
            .map(|i| {
                let y = g.node(i);
                C64::from_polar(1.0, 2.0 * PI * (m[0] as f64 * y[0] + m[1] as f64 * y[1]))
            })
            .collect()
    };
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for k in 1..nodes {
        let m = g.mode(k);
        let e = plane(m);
        let mut scalar = e.clone();
        scalar.extend(vec![C64::new(0.0, 0.0); 2 * nodes]);
        basis.push(scalar);
        let mut grad = vec![C64::new(0.0, 0.0); nodes];
        for a in 0..2 {
            let s = C64::new(0.0, 2.0 * PI * m[a] as f64 + theta[a]);
            grad.extend(e.iter().map(|z| s * z));
        }
        basis.push(grad);
    }
    // Mix neighbours so the basis is far from orthogonal.
    let raw = basis.clone();
    for i in 0..basis.len() {
        let j = (i * 7 + 3) % raw.len();
        let c = c64(0.4, 0.3 * ((i % 5) as f64 - 2.0));
        for (x, y) in basis[i].iter_mut().zip(&raw[j]) {
            *x += c * y;
        }
    }
    let w = 1.0 / nodes as f64;
    let vals: Vec<C64> = (0..3 * nodes).map(|i| c64(((i * 37) % 11) as f64 - 5.0, ((i * 13) % 7) as f64 - 3.0)).collect();
    let gram: Vec<Vec<C64>> = basis.iter().map(|bi| basis.iter().map(|bj| inner(bj, bi, w)).collect()).collect();
    let rhs: Vec<C64> = basis.iter().map(|bi| inner(&vals, bi, w)).collect();
    let coef = gauss(gram, rhs);
    let mut perp = vec![C64::new(0.0, 0.0); 3 * nodes];
    for (c, b) in coef.iter().zip(&basis) {
        for (p, x) in perp.iter_mut().zip(b) {
            *p += c * x;
        }
    }
    let field = SpectralField::from_components(&g, Domain::Physical, vals.chunks(nodes).map(|c| c.to_vec()).collect()).unwrap();
    let (_, p) = project_e(&theta, &field).unwrap();
    let err: f64 = (0..3)
        .flat_map(|c| p.component(c).iter().zip(&perp[c * nodes..(c + 1) * nodes]).map(|(a, b)| (a - b).norm_sqr()))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-10 * field.norm_l2().max(1.0) * (nodes as f64).sqrt(), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_idempotent_and_orthogonal(
        v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3 * 64),
        t0 in -PI..PI,
        t1 in -PI..PI,
    ) {
        let g = CellGrid::new(2, 8).unwrap();
        let comps = v.chunks(64).map(|c| c.iter().map(|&(a, b)| c64(a, b)).collect()).collect();
        let w = SpectralField::from_components(&g, Domain::Physical, comps).unwrap();
        let (e, p) = project_e(&[t0, t1], &w).unwrap();
        let (ee, ep) = project_e(&[t0, t1], &e).unwrap();
        let s = w.norm_l2().max(1e-12);
        prop_assert!(ee.sub(&e).unwrap().norm_l2() <= 1e-12 * s);
        prop_assert!(ep.norm_l2() <= 1e-12 * s);
        prop_assert!(e.inner(&p).unwrap().norm() <= 1e-12 * s * s);
        prop_assert!(e.add_scaled(c64(1.0, 0.0), &p).unwrap().sub(&w).unwrap().norm_l2() <= 1e-12 * s);
    }
}
