//! Acceptance criteria 1-10, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use homoglab::commands::{fibre_sweep, FibreArgs, FibreEq};
use homoglab::RayonExecutor;
use homoglab_core::cell::{tensor_at, tensor_theta_deviation};
use homoglab_core::check::{decoupling_mismatch, oblique_2d, random_field, run_check, two_plus_sin, Suite};
use homoglab_core::evolution::{mean_value_check, smoothing_bound, BoxGrid, EquationKind, TemporalProfile};
use homoglab_core::fibre::{dyadic_thetas, uniform_invertibility, FibreSweep};
use homoglab_core::study::{fit_slope, run_study, ConvergenceReport, StudyConfig};
use homoglab_core::torus::{CellGrid, CoefficientCell, CoefficientKind, TermSpec};
use homoglab_core::c64;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn criterion(id: usize, name: &'static str, f: impl FnOnce() -> Outcome) -> Line {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let line = Line { id, name, pass, detail, elapsed: start.elapsed() };
    println!(
        "{} criterion {:>2} {:<34} [{:>8.2?}] {}",
        if line.pass { "PASS" } else { "FAIL" },
        line.id,
        line.name,
        line.elapsed,
        line.detail
    );
    line
}

fn exec() -> RayonExecutor {
    RayonExecutor::from_env().expect("thread pool")
}

fn golden_tensor() -> Outcome {
    let start = Instant::now();
    let g = CellGrid::new(1, 64)?;
    let (_, t) = tensor_at(&two_plus_sin(&g)?, &[0.0])?;
    let err1 = (t.matrix.m[0][0] - c64(3f64.sqrt(), 0.0)).norm();
    let t1 = start.elapsed();

    let g2 = CellGrid::new(2, 32)?;
    let lam = CoefficientCell::from_spec(
        CoefficientKind::Matrix,
        &[
            TermSpec { freq: vec![0, 0], re: vec![vec![2.0, 0.0], vec![0.0, 2.0]], im: vec![] },
            TermSpec { freq: vec![1, 0], re: vec![vec![0.0, 0.0], vec![0.0, 0.0]], im: vec![vec![-0.5, 0.0], vec![0.0, 0.0]] },
            TermSpec { freq: vec![-1, 0], re: vec![vec![0.0, 0.0], vec![0.0, 0.0]], im: vec![vec![0.5, 0.0], vec![0.0, 0.0]] },
        ],
        &g2,
    )?;
    let (_, l) = tensor_at(&lam, &[0.0, 0.0])?;
    let diag = (l.matrix.m[0][0] - c64(3f64.sqrt(), 0.0)).norm().max((l.matrix.m[1][1] - c64(2.0, 0.0)).norm());
    let off = l.matrix.m[0][1].norm().max(l.matrix.m[1][0].norm());
    let pass = err1 <= 1e-8 && t1 < Duration::from_secs(1) && diag <= 1e-8 && off <= 1e-10;
    Ok((pass, format!("|a0 - sqrt3| = {err1:.1e} in {t1:.2?}; laminate diag {diag:.1e}, offdiag {off:.1e}")))
}

fn theta_lipschitz() -> Outcome {
    let dyadic = |d: usize| -> Vec<Vec<f64>> {
        (1..=6)
            .map(|k| {
                let mut t = vec![0.0; d];
                t[0] = 2f64.powi(-k);
                t
            })
            .collect()
    };
    let g1 = CellGrid::new(1, 64)?;
    let d1 = tensor_theta_deviation(&two_plus_sin(&g1)?, &dyadic(1))?;
    let g2 = CellGrid::new(2, 16)?;
    let d2 = tensor_theta_deviation(&oblique_2d(&g2)?, &dyadic(2))?;
    let cor1 = d1.corrector_slope.slope().unwrap_or(f64::NAN);
    let cor2 = d2.corrector_slope.slope().unwrap_or(f64::NAN);
    let ten2 = d2.tensor_slope.slope().unwrap_or(f64::NAN);
    // Each halving of theta halves the corrector deviation (within 10%).
    let halving = d1.corrector.windows(2).map(|w| w[0] / w[1]).all(|r| (1.8..=2.2).contains(&r));
    let monotone = d2.tensor.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let pass = cor1 >= 0.95 && cor2 >= 0.95 && ten2 >= 0.95 && d1.tensor_slope.at_least(0.95) && halving && monotone;
    let t1 = d1.tensor_slope.slope().map_or("exact".to_string(), |s| format!("{s:.3}"));
    Ok((pass, format!("corrector slope 1D {cor1:.3}, 2D {cor2:.3}; tensor slope 2D {ten2:.3}, 1D {t1}; halving {halving}")))
}

fn invertibility() -> Outcome {
    let g = CellGrid::new(1, 32)?;
    let mut thetas = vec![[0.0, 0.0]];
    thetas.extend(dyadic_thetas(1, 6));
    let table = uniform_invertibility(&thetas, &g)?;
    let mut err = 0.0f64;
    for (th, s) in &table.rows {
        let exact = (-16i64..16).filter(|&m| m != 0).map(|m| (2.0 * PI * m as f64 + th[0]).abs()).fold(f64::INFINITY, f64::min);
        err = err.max((s - exact).abs());
    }
    let at0 = table.rows[0].1;
    let at_pi = table.rows.iter().find(|(t, _)| t[0] == -PI).map(|r| r.1).unwrap_or(f64::NAN);
    let pass = err <= 1e-12 && (at0 - 2.0 * PI).abs() <= 1e-12 && (at_pi - PI).abs() <= 1e-12 && table.pass && table.min > 0.0;
    Ok((pass, format!("max |sigma - min|2 pi m + theta|| = {err:.1e}; sigma(0) = {at0:.12}, sigma(-pi) = {at_pi:.12}, floor {:.6}", table.min)))
}

fn sweep(eq: FibreEq) -> Result<(FibreSweep, Duration), Box<dyn std::error::Error>> {
    let args = FibreArgs {
        eq,
        coeff: None,
        dim: 1,
        n: 32,
        eps: "1/8,1/16,1/32".into(),
        kmax: 8,
        theta_grid: "dyadic:4".into(),
        nu: 1.0,
        out: None,
        config: None,
    };
    let start = Instant::now();
    let s = fibre_sweep(&args, &exec())?;
    Ok((s, start.elapsed()))
}

fn fibre_wave() -> Outcome {
    let (s, t) = sweep(FibreEq::Wave)?;
    let bounded = s.entries.iter().all(|e| e.ratio.is_finite());
    let sup = s.sup_per_eps.iter().map(|x| x.1).fold(0.0, f64::max);
    let raw = fit_slope(&s.raw_errors_at(0.0, [PI / 4.0, 0.0]))?;
    let pass = bounded && s.variation < 2.0 && raw.at_least(0.9) && t < Duration::from_secs(120);
    Ok((pass, format!("sup ratio {sup:.4}, variation {:.4}, raw slope {:.3} at (k=0, theta=pi/4), {t:.2?}", s.variation, raw.slope().unwrap_or(f64::NAN))))
}

fn fibre_heat() -> Outcome {
    let (s, _) = sweep(FibreEq::Heat)?;
    let per_k: Vec<f64> = (0..=8).map(|k| s.sup_at_k(k as f64)).collect();
    let hi = per_k.iter().copied().fold(0.0, f64::max);
    let lo = per_k.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let pass = hi.is_finite() && lo > 0.0 && spread < 2.0 && s.variation < 2.0;
    Ok((pass, format!("sup over k in [{lo:.4}, {hi:.4}] (spread {spread:.3}), variation across eps {:.4}", s.variation)))
}

fn smoothing() -> Outcome {
    let mut worst_const = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for (d, n, m) in [(1, 16, 4), (2, 8, 2)] {
        let cell = CellGrid::new(d, n)?;
        let bx = BoxGrid::new(&cell, m)?;
        let sb = smoothing_bound(&bx, &random_field(bx.grid(), 1, 7, None))?;
        worst_const = worst_const.max(sb.mode_constant);
        worst_ratio = worst_ratio.max(sb.lhs / sb.rhs);
    }
    let cell = CellGrid::new(1, 16)?;
    let bx = BoxGrid::from_eps(&cell, 0.25)?;
    let gamma = CoefficientCell::scalar(&[([0, 0], c64(3.0, 0.0)), ([1, 0], c64(0.5, 0.0)), ([-1, 0], c64(0.5, 0.0))], &cell)?;
    let phi = random_field(bx.grid(), 1, 9, Some(1));
    let mv = mean_value_check(&gamma, &bx, &phi)? / phi.norm_l2();
    let pass = worst_const <= 1.0 / PI + 1e-15 && worst_ratio <= 1.0 + 1e-12 && mv <= 1e-12;
    Ok((pass, format!("mode constant {worst_const:.6} <= 1/pi, bound ratio {worst_ratio:.4}; mean-value residual {mv:.1e}")))
}

fn study(kind: EquationKind) -> Result<(ConvergenceReport, Duration), Box<dyn std::error::Error>> {
    let cfg = StudyConfig::new(kind, vec![0.25, 0.125, 0.0625, 0.03125]);
    let start = Instant::now();
    let rep = run_study(&cfg, &exec())?;
    Ok((rep, start.elapsed()))
}

fn slopes(rep: &ConvergenceReport) -> (bool, String) {
    let pass = rep.summaries.len() == 6 && rep.summaries.iter().all(|s| s.slope.at_least(0.9));
    let text = rep
        .summaries
        .iter()
        .map(|s| format!("{} {}", s.metric, s.slope.slope().map_or("exact".to_string(), |v| format!("{v:.3}"))))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, text)
}

fn wave_study() -> Outcome {
    let (rep, t) = study(EquationKind::Wave)?;
    let (pass, text) = slopes(&rep);
    Ok((pass && t < Duration::from_secs(600), format!("{text}; {t:.2?}")))
}

fn heat_study() -> Outcome {
    let cfg = StudyConfig::new(EquationKind::Heat, vec![0.25, 0.125, 0.0625, 0.03125]);
    let rough = cfg.declared_source().temporal == TemporalProfile::Rough;
    let (rep, _) = study(EquationKind::Heat)?;
    let (pass, text) = slopes(&rep);
    Ok((pass && rough, format!("{text}; rough source {rough}")))
}

fn thermo_study() -> Outcome {
    let (rep, _) = study(EquationKind::Thermoelastic)?;
    let (pass, text) = slopes(&rep);
    let dec = decoupling_mismatch(&exec())?;
    Ok((pass && dec <= 1e-10, format!("{text}; decoupling {dec:.1e}")))
}

fn invariants() -> Outcome {
    let start = Instant::now();
    let rep = run_check(Suite::All, None, &exec());
    let t = start.elapsed();
    let failed: Vec<String> = rep.failures().map(|r| format!("{}/{}", r.suite, r.name)).collect();
    let pass = rep.passed() && t < Duration::from_secs(300);
    Ok((pass, format!("{} invariants, failures {:?}, {t:.2?}", rep.results.len(), failed)))
}

fn main() {
    let lines = [
        criterion(1, "homogenised coefficient golden", golden_tensor),
        criterion(2, "corrector theta-Lipschitz", theta_lipschitz),
        criterion(3, "uniform invertibility", invertibility),
        criterion(4, "fibre wave estimate", fibre_wave),
        criterion(5, "fibre heat estimate", fibre_heat),
        criterion(6, "smoothing operator", smoothing),
        criterion(7, "wave study", wave_study),
        criterion(8, "heat study", heat_study),
        criterion(9, "thermoelastic study", thermo_study),
        criterion(10, "invariant suite", invariants),
    ];
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("{} of {} criteria passed", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
