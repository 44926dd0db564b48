#![allow(dead_code)]

use scalcurv_core::geometry::{find_critical_points, CriticalPoint};
use scalcurv_core::{CurvatureField, SpherePoint};

/// `K = 2 + x_{n+1}`: maximum at the north pole, minimum at the south pole.
pub fn pole_field(n: usize) -> CurvatureField {
    let mut v = vec![0.0; n + 1];
    v[n] = 1.0;
    CurvatureField::affine(2.0, v).unwrap()
}

/// Quadratic field with two local maxima and several saddles.
pub fn poly_field(n: usize) -> CurvatureField {
    let m = n + 1;
    let mut a = vec![vec![0.0; m]; m];
    for (k, row) in a.iter_mut().enumerate().take(n) {
        row[k] = 0.05 * (k + 1) as f64;
    }
    a[n][n] = 1.0;
    a[0][n] = 0.1;
    a[n][0] = 0.1;
    let mut b = vec![0.0; m];
    b[n] = 0.3;
    b[1] = 0.05;
    CurvatureField::polynomial(2.0, b, a).unwrap()
}

/// `K = 1 + sum_k a_k x_k^2` with `a_{n+1} = top`; both poles are maxima.
pub fn polar_field(n: usize, top: f64) -> CurvatureField {
    let mut d: Vec<f64> = (0..n).map(|k| 0.1 * (k + 1) as f64).collect();
    d.push(top);
    let m = n + 1;
    let a: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect();
    CurvatureField::polynomial(1.0, vec![0.0; m], a).unwrap()
}

/// Blow-up candidate with the largest value of `K`.
pub fn top_candidate(field: &CurvatureField) -> CriticalPoint {
    find_critical_points(field)
        .unwrap()
        .points
        .into_iter()
        .filter(|p| p.blowup_candidate)
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap()
}

pub fn poles(n: usize) -> [SpherePoint; 2] {
    [SpherePoint::north_pole(n), SpherePoint::south_pole(n)]
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
