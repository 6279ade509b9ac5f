use homoglab_core::evolution::{EquationKind, SourceSpec, TemporalProfile};
use homoglab_core::exec::Sequential;
use homoglab_core::study::{fit_slope, metrics_for, run_study, SlopeFit, StudyConfig};
use homoglab_core::torus::TermSpec;
use proptest::prelude::*;

fn small(kind: EquationKind) -> StudyConfig {
    let mut cfg = StudyConfig::new(kind, vec![0.5, 0.25, 0.125]);
    cfg.n = 16;
    cfg.half_window = 16;
    cfg.random_sources = 0;
    cfg
}

#[test]
fn slopes_do_not_see_source_scale() {
    for kind in [EquationKind::Wave, EquationKind::Heat] {
        let cfg = small(kind);
        let mut doubled = cfg.clone();
        let mut src = cfg.declared_source();
        for m in &mut src.spatial {
            m.re *= 2.0;
            m.im *= 2.0;
        }
        doubled.source = Some(src);
        let r1 = run_study(&cfg, &Sequential).unwrap();
        let r2 = run_study(&doubled, &Sequential).unwrap();
        for (a, b) in r1.summaries.iter().zip(&r2.summaries) {
            let (sa, sb) = (a.slope.slope().unwrap(), b.slope.slope().unwrap());
            assert!((sa - sb).abs() <= 1e-10, "{} {}: {sa} vs {sb}", kind.name(), a.metric);
        }
        for (a, b) in r1.rows.iter().zip(&r2.rows) {
            assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-10 * a.lhs.max(1e-300));
        }
    }
}

#[test]
fn constant_coefficients_give_zero_metrics() {
    let mut cfg = small(EquationKind::Wave);
    cfg.a = Some(vec![TermSpec::scalar(&[0], 1.5, 0.0)]);
    cfg.source = Some(SourceSpec::plane_waves(TemporalProfile::Smooth { jmax: 4 }, 1, 1));
    let rep = run_study(&cfg, &Sequential).unwrap();
    assert_eq!(rep.rows.len(), 3 * metrics_for(EquationKind::Wave).len());
    for r in &rep.rows {
        assert!(r.lhs <= 1e-10 * r.rhs_norm, "{} at {}: {}", r.metric, r.eps, r.lhs);
    }
}

#[test]
fn every_equation_has_its_metrics() {
    for kind in [EquationKind::Wave, EquationKind::Heat, EquationKind::Thermoelastic] {
        assert_eq!(metrics_for(kind).len(), 6);
    }
}

#[test]
fn slope_examples() {
    assert!((fit_slope(&[(0.25, 0.25), (0.125, 0.125), (0.0625, 0.0625)]).unwrap().slope().unwrap() - 1.0).abs() < 1e-12);
    assert!(fit_slope(&[(0.25, 1.0), (0.125, 1.0)]).unwrap().slope().unwrap().abs() < 1e-12);
    assert!((fit_slope(&[(0.25, 1.0 / 16.0), (0.125, 1.0 / 64.0)]).unwrap().slope().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(fit_slope(&[(0.25, 0.0), (0.125, 0.0)]).unwrap(), SlopeFit::Exact);
}

proptest! {
    #[test]
    fn power_laws_are_recovered(p in -3.0f64..3.0, c in 0.01f64..100.0, k in 3usize..7) {
        let pts: Vec<(f64, f64)> = (0..k).map(|i| {
            let e = 0.5f64.powi(i as i32 + 1);
            (e, c * e.powf(p))
        }).collect();
        let s = fit_slope(&pts).unwrap().slope().unwrap();
        prop_assert!((s - p).abs() <= 1e-10);
    }
}
