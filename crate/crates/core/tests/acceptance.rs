//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use common::*;
use scalcurv_core::bubbles::{bubble_value, l_bubble, Bubble};
use scalcurv_core::constants::{constant, verify_identities};
use scalcurv_core::decomposition::{
    decomposition_grid, parameter_distance, project_to_bubbles, AnalyticEnsemble, ProjectOptions,
};
use scalcurv_core::expansion::{
    balance_alphas, error_budget, reduced_energy, reduced_gradient, rescale_to_unit_k,
};
use scalcurv_core::geometry::{unit_sphere_area, SphereModel};
use scalcurv_core::oracle::{direct_energy, direct_gradient, euler_defect, oracle_grid};
use scalcurv_core::scan::{scan, tower_newton, ScanOptions, Scenario};
use scalcurv_core::solver::{
    newton_refine, predict, sigma_solve, sigma_solve_from, RefineOptions, RefineStatus,
};
use scalcurv_core::*;

const CONST_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-10;
const FD_TOL: f64 = 1e-5;
const YAMABE_TOL: f64 = 1e-6;
const YAMABE_SPREAD: f64 = 1e-8;
const SLOPE_SINGLE: f64 = -3.5;
const SLOPE_PAIR: f64 = -2.5;
const PAIRING_FACTOR: f64 = 10.0;
const EULER_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-10;
const SCALE_DRIFT: f64 = 0.05;
const SIGMA_TOL: f64 = 1e-10;
const DECOMP_TOL: f64 = 1e-8;
const ORACLE_LEVEL: usize = 6;
const SCALES: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c1_constants_n4() -> Check {
    let s = (3.0 * unit_sphere_area(3)).sqrt();
    let mut worst: f64 = 0.0;
    for (name, k) in [
        ("tilde_c1", 2.0),
        ("tilde_c2", 1.0),
        ("tilde_c3", 24.0),
        ("tilde_c4", 24.0),
        ("grave_c0", 16.0),
        ("grave_c2", 4.0),
        ("grave_d1", 24.0),
        ("grave_b1", 144.0),
    ] {
        let v = constant(name, 4).map_err(|e| e.to_string())?;
        worst = worst.max(rel(v, k * s));
    }
    ensure(worst < CONST_TOL, format!("max rel error {worst:.2e}"))
}

fn c2_ratios_n5() -> Check {
    let g = |s| constant(s, 5).map_err(|e: Error| e.to_string());
    let t1 = g("tilde_c1")?;
    let d = [
        rel(g("tilde_c2")? / t1, 2.0 / 9.0),
        rel(g("tilde_c3")? / t1, 512.0 / (9.0 * std::f64::consts::PI)),
        rel(g("tilde_c4")? / t1, 512.0 / (9.0 * std::f64::consts::PI)),
    ];
    let worst = d.iter().copied().fold(0.0, f64::max);
    ensure(worst < CONST_TOL, format!("max rel error {worst:.2e}"))
}

fn c3_identities() -> Check {
    let strict = [
        "b1 = b2",
        "b1 = b3",
        "c1 = bar_c0",
        "pre_tilde_b2 = (n-2) omega/(2n)",
        "pre_bar_b2 = pre_tilde_b2",
    ];
    let mut worst: f64 = 0.0;
    let mut flags = Vec::new();
    for n in 4..=8 {
        let r = verify_identities(n, IDENTITY_TOL).map_err(|e| e.to_string())?;
        for label in strict {
            let l = r.line(label).ok_or(format!("n={n}: missing line {label}"))?;
            if l.status != AuditStatus::Pass {
                return Err(format!("n={n}: {label} off by {:.2e}", l.relative_discrepancy));
            }
            worst = worst.max(l.relative_discrepancy);
        }
        let mut flagged = vec!["bar_d1 = tilde_d1 (r-term)".to_string()];
        if n == 4 {
            flagged.extend(r.lines.iter().filter(|l| l.label.starts_with("check_")).map(|l| l.label.clone()));
        }
        for label in &flagged {
            let l = r.line(label).ok_or(format!("n={n}: missing report line {label}"))?;
            if l.values.len() < 2 || l.status == AuditStatus::Fail {
                return Err(format!("n={n}: {label} not reported with both numbers"));
            }
            if l.status == AuditStatus::Flag {
                flags.push(format!("n={n} {label}"));
            }
        }
        if n == 4 && flagged.len() < 5 {
            return Err("check-family lines missing for n=4".into());
        }
    }
    Ok(format!("identities to {worst:.1e}; {} FLAG lines", flags.len()))
}

/// `L phi` by second differences of the 0-homogeneous extension in `R^{n+1}`.
fn fd_l_phi(n: usize, a: &SpherePoint, lambda: f64, x: &[f64], h: f64) -> f64 {
    let f = |y: &[f64]| {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let z: Vec<f64> = y.iter().map(|v| v / r).collect();
        bubble_value(n, a, lambda, &z)
    };
    let f0 = f(x);
    let mut lap = 0.0;
    for k in 0..=n {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[k] += h;
        m[k] -= h;
        lap += (f(&p) - 2.0 * f0 + f(&m)) / (h * h);
    }
    let model = SphereModel::new(n).unwrap();
    -model.c_n * lap + model.scalar_curvature * f0
}

fn c4_sphere_exactness() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for n in [4usize, 5, 6] {
        for _ in 0..100 {
            let a = SpherePoint::normalized((0..=n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let lambda: f64 = rng.random_range(0.5..20.0);
            let frame = TangentFrame::at(&a);
            let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.random_range(0.0..3.0) / lambda;
            let v: Vec<f64> = dir.iter().map(|d| d * r / len).collect();
            let x = a.exp(&frame.to_ambient(&v));
            let exact = l_bubble(n, bubble_value(n, &a, lambda, x.coords()));
            let fd = fd_l_phi(n, &a, lambda, x.coords(), 1e-3 / lambda);
            worst = worst.max(rel(fd, exact));
        }
    }
    ensure(worst < FD_TOL, format!("300 samples, max rel error {worst:.2e}"))
}

fn c5_yamabe() -> Check {
    let mut worst: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for n in [4usize, 5, 6] {
        let c = Constants::new(n).map_err(|e| e.to_string())?;
        let k = CurvatureField::affine(1.0, vec![0.0; n + 1]).unwrap();
        let target = c.hat_c0(0.0);
        let centers = [
            SpherePoint::north_pole(n),
            SpherePoint::basis(n, 0),
            SpherePoint::normalized((0..=n).map(|i| 1.0 + i as f64).collect()).unwrap(),
        ];
        let mut vals = Vec::new();
        for a in &centers {
            for lambda in [1.0, 5.0, 20.0] {
                let cfg = Configuration::new(n, 0.0, vec![Bubble::new(1.0, a.clone(), lambda).unwrap()]).unwrap();
                let grid = oracle_grid(&cfg, &k, GridSpec::new(ORACLE_LEVEL)).map_err(|e| e.to_string())?;
                let j = direct_energy(&cfg, &k, &grid).map_err(|e| e.to_string())?.j;
                worst = worst.max(rel(j, target));
                vals.push(j);
            }
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max((hi - lo) / target);
    }
    ensure(
        worst < YAMABE_TOL && spread < YAMABE_SPREAD,
        format!("max rel error {worst:.2e}, spread {spread:.2e}"),
    )
}

/// Bubble configurations of the expansion checks, balanced and normalized by
/// the quadrature value of `int K u^{p+1}`.
fn expansion_cases(n: usize, pair: bool) -> Vec<(Configuration, QuadratureGrid)> {
    let k = pole_field(n);
    let c = Constants::new(n).unwrap();
    SCALES
        .iter()
        .map(|&lambda| {
            let [north, south] = poles(n);
            let mut bs = vec![Bubble::new(1.0, north, lambda).unwrap()];
            if pair {
                bs.push(Bubble::new(1.0, south, lambda).unwrap());
            }
            let cfg = balance_alphas(&Configuration::new(n, 0.0, bs).unwrap(), &k, &c).unwrap();
            let grid = oracle_grid(&cfg, &k, GridSpec::new(ORACLE_LEVEL)).unwrap();
            let kt = direct_energy(&cfg, &k, &grid).unwrap().k_tau;
            (rescale_to_unit_k(&cfg, kt), grid)
        })
        .collect()
}

fn c6_expansion() -> Check {
    let mut out = Vec::new();
    for (n, pair, bound) in [(6usize, false, SLOPE_SINGLE), (5, true, SLOPE_PAIR)] {
        let k = pole_field(n);
        let c = Constants::new(n).unwrap();
        let gaps: Vec<f64> = expansion_cases(n, pair)
            .iter()
            .map(|(cfg, grid)| {
                let jd = direct_energy(cfg, &k, grid).unwrap().j;
                (jd - reduced_energy(cfg, &k, &c).unwrap().value).abs()
            })
            .collect();
        let slope = log_slope(&SCALES, &gaps);
        out.push(format!("n={n} slope {slope:.2} (bound {bound})"));
        if slope.is_nan() || slope > bound {
            return Err(out.join(", "));
        }
    }
    Ok(out.join(", "))
}

fn c7_pairing() -> Check {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_euler: f64 = 0.0;
    for (n, pair) in [(6usize, false), (5, true)] {
        let k = pole_field(n);
        let c = Constants::new(n).unwrap();
        for (cfg, grid) in expansion_cases(n, pair) {
            let gd = direct_gradient(&cfg, &k, &grid).map_err(|e| e.to_string())?;
            let gr = reduced_gradient(&cfg, &k, &c).map_err(|e| e.to_string())?;
            let j = direct_energy(&cfg, &k, &grid).map_err(|e| e.to_string())?.j;
            let budget = error_budget(&cfg, &k).map_err(|e| e.to_string())?;
            let diff = gd
                .flatten()
                .iter()
                .zip(gr.flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(diff / (j * budget));
            worst_euler = worst_euler.max(euler_defect(&cfg, &gd, j));
        }
    }
    ensure(
        worst_ratio <= PAIRING_FACTOR && worst_euler < EULER_TOL,
        format!("max |g_d - g_r|/(J budget) {worst_ratio:.3}, Euler defect {worst_euler:.1e}"),
    )
}

fn c8_parameter_law() -> Check {
    let mut out = Vec::new();
    for n in [5usize, 6] {
        let k = poly_field(n);
        let p = top_candidate(&k).location;
        let mut sig = Vec::new();
        let mut last_rel = 0.0;
        for tau in [1e-3, 1e-4, 1e-5] {
            let pred = predict(&k, std::slice::from_ref(&p), tau).map_err(|e| e.to_string())?;
            let r = newton_refine(&pred.config, &k, RefineOptions::default()).map_err(|e| e.to_string())?;
            if r.status != RefineStatus::Converged || r.residual >= NEWTON_TOL {
                return Err(format!("n={n} tau={tau}: {:?} residual {:.1e}", r.status, r.residual));
            }
            let l = r.config.bubbles[0].lambda;
            sig.push(l * tau.sqrt());
            last_rel = (l - pred.predictions[0].lambda).abs() / l;
        }
        let drift = sig.windows(2).map(|w| rel(w[1], w[0])).fold(0.0, f64::max);
        out.push(format!("n={n} drift {drift:.1e} pred gap {last_rel:.1e}"));
        if drift > SCALE_DRIFT || last_rel > SCALE_DRIFT {
            return Err(out.join(", "));
        }
    }
    Ok(out.join(", "))
}

fn c9_sigma_system() -> Check {
    let k = pole_field(4);
    let north = SpherePoint::north_pole(4);
    let s = sigma_solve(&k, std::slice::from_ref(&north)).map_err(|e| e.to_string())?;
    let closed = (-k.laplacian(north.coords()) / (2.0 * k.value(north.coords()))).sqrt();
    let single = (s.sigma[0] - closed).abs();

    let field = polar_field(4, 8.0);
    let pts = poles(4);
    let base = sigma_solve(&field, &pts).map_err(|e| e.to_string())?;
    let mut spread: f64 = 0.0;
    for start in [[0.1, 0.1], [5.0, 0.2], [0.3, 7.0], [2.0, 2.0]] {
        let s = sigma_solve_from(&field, &pts, Some(&start)).map_err(|e| e.to_string())?;
        spread = spread.max(s.sigma.iter().zip(&base.sigma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let rejected = matches!(sigma_solve(&polar_field(4, 1.0), &pts), Err(Error::NoSolution(_)));
    ensure(
        single < SIGMA_TOL && spread < SIGMA_TOL && base.residual < SIGMA_TOL && rejected,
        format!(
            "closed form {single:.1e}, multi-start {spread:.1e}, residual {:.1e}, indefinite rejected {rejected}",
            base.residual
        ),
    )
}

fn c10_tower() -> Check {
    let k = poly_field(6);
    let tau = 1e-4;
    let report = scan(Scenario::Tower, &k, &ScanOptions::new(tau)).map_err(|e| e.to_string())?;
    let seeds: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.params[0], r.params[1])).collect();
    let outcomes = tower_newton(&k, tau, &seeds, RefineOptions::default()).map_err(|e| e.to_string())?;
    let converged_tower = outcomes.iter().filter(|o| !o.excluded).count();
    ensure(
        report.min_ratio > 0.0 && converged_tower == 0,
        format!(
            "min ratio {:.3e} at {:?} over {} points; {} seeds, {} converged to a tower",
            report.min_ratio,
            report.argmin,
            report.grid_size,
            outcomes.len(),
            converged_tower
        ),
    )
}

fn c11_decomposition() -> Check {
    let n = 5;
    let b = |a: Vec<f64>, l: f64, al: f64| Bubble::new(al, SpherePoint::normalized(a).unwrap(), l).unwrap();
    let truth = Configuration::new(
        n,
        0.0,
        vec![b(vec![0.0, 0.0, 0.1, 0.0, 0.2, 1.0], 20.0, 1.0), b(vec![0.3, 0.0, 0.0, 1.0, 0.0, 0.2], 15.0, 0.8)],
    )
    .unwrap();
    let mut init = truth.clone();
    for (i, x) in init.bubbles.iter_mut().enumerate() {
        x.alpha *= 1.01;
        x.lambda *= 0.99;
        let mut xi = vec![0.0; n];
        xi[i] = 0.01 / x.lambda;
        x.center = x.center.exp(&TangentFrame::at(&x.center).to_ambient(&xi));
    }
    let u = AnalyticEnsemble::from_config(&truth);
    let grid = decomposition_grid(&u, &init, GridSpec::new(3)).map_err(|e| e.to_string())?;
    let r = project_to_bubbles(&u, 2, &init, &grid, ProjectOptions::default()).map_err(|e| e.to_string())?;
    let exact = (r.v_norm_sq / r.u_norm_sq).sqrt();
    let recovered = parameter_distance(&r.config, &truth);

    let one = Configuration::new(n, 0.0, vec![truth.bubbles[0].clone()]).unwrap();
    let mut lin = vec![0.0; n + 1];
    lin[0] = 0.01;
    let u = AnalyticEnsemble::new(n, one.bubbles.clone(), 0.0, lin).unwrap();
    let mut init = one.clone();
    init.bubbles[0].lambda *= 1.01;
    init.bubbles[0].alpha *= 0.99;
    let grid = decomposition_grid(&u, &init, GridSpec::new(3)).map_err(|e| e.to_string())?;
    let p = project_to_bubbles(&u, 1, &init, &grid, ProjectOptions::default()).map_err(|e| e.to_string())?;
    let ortho = p.max_relative_ortho();
    ensure(
        exact < DECOMP_TOL && ortho < DECOMP_TOL && recovered < 1e-8 && p.local_min_warning.is_none(),
        format!("exact-sum |v|/|u| {exact:.1e} (params {recovered:.1e}), perturbed orthogonality {ortho:.1e}"),
    )
}

/// Name, runtime cap in seconds, check.
type Criterion = (&'static str, u64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 11] = [
        ("constants audit n=4", 5, c1_constants_n4),
        ("constant ratios n=5", 5, c2_ratios_n5),
        ("identity suite n=4..8", 10, c3_identities),
        ("sphere exactness of L phi", 30, c4_sphere_exactness),
        ("Yamabe value", 120, c5_yamabe),
        ("expansion vs oracle", 300, c6_expansion),
        ("gradient pairing", 300, c7_pairing),
        ("parameter law", 600, c8_parameter_law),
        ("four-dimensional scale system", 10, c9_sigma_system),
        ("tower exclusion", 600, c10_tower),
        ("decomposition", 120, c11_decomposition),
    ];
    let mut failed = 0;
    for (i, (name, cap, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let el = t.elapsed();
        let over = el > Duration::from_secs(*cap);
        let (ok, msg) = match r {
            Ok(m) if !over => (true, m),
            Ok(m) => (false, format!("{m}; exceeded {cap} s")),
            Err(m) => (false, m),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {msg} [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            el.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
