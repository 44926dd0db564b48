//! Fixtures shared by the benchmarks in `benches/engine.rs`.

use scalcurv_core::{Bubble, Configuration, CurvatureField, SpherePoint};

/// `K = 2 + x_{n+1}`.
pub fn pole_field(n: usize) -> CurvatureField {
    let mut v = vec![0.0; n + 1];
    v[n] = 1.0;
    CurvatureField::affine(2.0, v).unwrap()
}

/// Quadratic field with two maxima and two saddles of negative Laplacian.
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

/// Two separated bubbles of comparable scale near the north pole.
pub fn pair(n: usize, lambda: f64) -> Configuration {
    let mut a = vec![0.0; n + 1];
    a[n] = 1.0;
    a[0] = 0.3;
    let mut b = vec![0.0; n + 1];
    b[n] = 1.0;
    b[1] = -0.3;
    Configuration::new(
        n,
        1e-4,
        vec![
            Bubble::new(1.0, SpherePoint::normalized(a).unwrap(), lambda).unwrap(),
            Bubble::new(0.9, SpherePoint::normalized(b).unwrap(), 1.2 * lambda).unwrap(),
        ],
    )
    .unwrap()
}
