use homoglab_core::c64;
use homoglab_core::check::two_plus_sin;
use homoglab_core::evolution::{solve_heterogeneous, BoxGrid, EquationKind, EquationSpec, SourceSpec, TemporalProfile};
use homoglab_core::exec::Sequential;
use homoglab_core::norms::{norm_l2nu, TimeGrid};
use homoglab_core::torus::CellGrid;
use proptest::prelude::*;

fn spec(kind: EquationKind, seed: u64) -> EquationSpec {
    let cell = CellGrid::new(1, 8).unwrap();
    let bx = BoxGrid::new(&cell, 2).unwrap();
    let time = TimeGrid::new(1.0, 16.0, 8).unwrap();
    let a = two_plus_sin(&cell).unwrap();
    let f = SourceSpec::plane_waves(TemporalProfile::Smooth { jmax: 4 }, 1, 1)
        .randomised(&time, 1, 1, seed, 0)
        .build(bx.grid(), &time)
        .unwrap();
    EquationSpec { kind, a: Some(a.clone()), b: Some(a), gamma: None, bx, time, f, g: None }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solution_map_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, re in -2.0f64..2.0, im in -2.0f64..2.0, heat in any::<bool>()) {
        let kind = if heat { EquationKind::Heat } else { EquationKind::Wave };
        let c = c64(re, im);
        let a = spec(kind, s1);
        let b = spec(kind, s2);
        let mut sum = a.clone();
        sum.f = a.f.add_scaled(c, &b.f).unwrap();
        let ua = solve_heterogeneous(&a, &Sequential).unwrap().u;
        let ub = solve_heterogeneous(&b, &Sequential).unwrap().u;
        let us = solve_heterogeneous(&sum, &Sequential).unwrap().u;
        let diff = norm_l2nu(&us.sub(&ua.add_scaled(c, &ub).unwrap()).unwrap());
        prop_assert!(diff <= 1e-9 * norm_l2nu(&us).max(1e-12));
    }
}
