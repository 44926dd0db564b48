//! Quadrature rules on `S^n`: a uniform hyperspherical product rule and a
//! bubble-adapted rule built from logarithmic radial patches.

use super::{check_dim, dot, norm, unit_sphere_area, SpherePoint, TangentFrame};
use crate::error::{Error, Result};
use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::num::NonZeroUsize;

/// Weighted point set on `S^n`; node coordinates are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn from_parts(n: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() * (n + 1) {
            return Err(Error::DimensionMismatch {
                expected: weights.len() * (n + 1),
                found: nodes.len(),
            });
        }
        Ok(Self { n, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let m = self.n + 1;
        &self.nodes[i * m..(i + 1) * m]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes
            .chunks_exact(self.n + 1)
            .zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

fn jacobi(nodes: usize, exponent: f64) -> Vec<(f64, f64)> {
    let a = (exponent - 1.0) / 2.0;
    let p = FiniteAboveNegOneF64::new(a).expect("Jacobi parameter above -1");
    let rule = GaussJacobi::new(NonZeroUsize::new(nodes).expect("positive node count"), p, p);
    rule.iter().map(|(x, w)| (*x, *w)).collect()
}

/// Product rule on `S^n` exact for polynomials of degree `<= 2 level + 1`.
///
/// Uses Gauss-Jacobi rules with `level + 1` nodes in each polar angle and the
/// trapezoid rule with `2(level + 1)` points on the final circle.
pub fn quadrature_grid(n: usize, level: usize) -> Result<QuadratureGrid> {
    check_dim(n)?;
    let g = level + 1;
    let polar: Vec<Vec<(f64, f64)>> = (1..n).map(|k| jacobi(g, (n - k) as f64)).collect();
    let m = 2 * g;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut x = Vec::with_capacity(n + 1);
        let mut s = 1.0;
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            let (u, wk) = polar[k][i];
            x.push(s * u);
            s *= (1.0 - u * u).max(0.0).sqrt();
            w *= wk;
        }
        for j in 0..m {
            let phi = 2.0 * PI * j as f64 / m as f64;
            nodes.extend(&x);
            nodes.push(s * phi.cos());
            nodes.push(s * phi.sin());
            weights.push(w * 2.0 * PI / m as f64);
        }
        let mut k = 0;
        loop {
            if k == n - 1 {
                return QuadratureGrid::from_parts(n, nodes, weights);
            }
            idx[k] += 1;
            if idx[k] < g {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Angular resolution around each patch center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngularMode {
    /// Full hyperspherical Gauss rule only in the span of the relevant
    /// directions, a degree-3 cross rule on the orthogonal fibre.
    Adaptive,
    /// Full hyperspherical Gauss rule in every tangent direction.
    Full,
}

/// Resolution of a bubble-adapted grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub level: usize,
    pub mode: AngularMode,
}

impl GridSpec {
    pub fn new(level: usize) -> Self {
        Self { level, mode: AngularMode::Adaptive }
    }

    pub fn full(level: usize) -> Self {
        Self { level, mode: AngularMode::Full }
    }

    /// Step in the logarithmic radial variable.
    pub fn radial_step(&self) -> f64 {
        0.3 / self.level.max(1) as f64
    }

    /// Gauss nodes per resolved polar angle.
    pub fn angular_nodes(&self) -> usize {
        4 * self.level.max(1) + 4
    }
}

/// Decay margin: the radial range extends until the `sin^n` factor reaches `e^{-40}`.
const TAIL: f64 = 40.0;
const MAX_LAMBDA: f64 = 1e6;

impl QuadratureGrid {
    /// Bubble-adapted rule for functions concentrating at the given patches.
    ///
    /// Each patch `(a, lambda)` uses the radial variable `t = ln(2 lambda tan(theta/2))`
    /// with the trapezoid rule, angular nodes resolving the tangential directions
    /// of the other centers and of `extra_directions`, and the partition of unity
    /// `phi_i^s / sum_j phi_j^s` with `s = 2n/(n-2)`.
    pub fn bubble_adapted(
        n: usize,
        patches: &[(SpherePoint, f64)],
        extra_directions: &[Vec<f64>],
        spec: GridSpec,
    ) -> Result<QuadratureGrid> {
        check_dim(n)?;
        if patches.is_empty() {
            return Err(Error::InvalidInput("no patches".into()));
        }
        if spec.level == 0 {
            return Err(Error::ResolutionTooCoarse("level must be at least 1".into()));
        }
        for (a, l) in patches {
            if a.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.dim() });
            }
            if !(*l > 0.0) {
                return Err(Error::NonpositiveLambda(*l));
            }
            if *l > MAX_LAMBDA {
                return Err(Error::LambdaOverflow(*l));
            }
        }
        let nf = n as f64;
        let sigma = 2.0 * nf / (nf - 2.0);
        let h = spec.radial_step();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (i, (a, lam)) in patches.iter().enumerate() {
            let mut dirs: Vec<Vec<f64>> = patches
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (b, _))| a.project_tangent(b.coords()))
                .collect();
            dirs.extend(extra_directions.iter().map(|v| a.project_tangent(v)));
            let angular = angular_rule(a, &dirs, spec);
            let t_lo = -TAIL / nf;
            let t_hi = (4.0 * lam).ln() + TAIL / nf;
            let steps = ((t_hi - t_lo) / h).ceil() as usize;
            for k in 0..=steps {
                let t = t_lo + k as f64 * h;
                let s = t.exp() / (2.0 * lam);
                let sin_t = 2.0 * s / (1.0 + s * s);
                let cos_t = (1.0 - s * s) / (1.0 + s * s);
                let wr = h * sin_t.powi(n as i32);
                if wr < 1e-300 {
                    continue;
                }
                for (om, wa) in &angular {
                    let x: Vec<f64> = a
                        .coords()
                        .iter()
                        .zip(om)
                        .map(|(ac, o)| cos_t * ac + sin_t * o)
                        .collect();
                    let chi = partition(&x, patches, i, sigma, nf);
                    if chi == 0.0 {
                        continue;
                    }
                    nodes.extend(&x);
                    weights.push(wr * wa * chi);
                }
            }
        }
        QuadratureGrid::from_parts(n, nodes, weights)
    }
}

/// `phi_i^s / sum_j phi_j^s` evaluated in log space.
fn partition(x: &[f64], patches: &[(SpherePoint, f64)], i: usize, sigma: f64, nf: f64) -> f64 {
    let logs: Vec<f64> = patches
        .iter()
        .map(|(a, l)| {
            let c: f64 = a.coords().iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum();
            let d = 1.0 + (4.0 * l * l - 1.0) * c / 4.0;
            sigma * (nf - 2.0) / 2.0 * (l.ln() - d.ln())
        })
        .collect();
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|v| (v - mx).exp()).sum();
    (logs[i] - mx).exp() / z
}

/// Unit tangent directions at `a` with weights summing to `|S^{n-1}|`.
fn angular_rule(a: &SpherePoint, dirs: &[Vec<f64>], spec: GridSpec) -> Vec<(Vec<f64>, f64)> {
    let n = a.dim();
    let frame = TangentFrame::at(a);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let candidates: Vec<Vec<f64>> = match spec.mode {
        AngularMode::Full => frame.vectors().to_vec(),
        AngularMode::Adaptive => dirs.to_vec(),
    };
    for v in candidates {
        if basis.len() >= n - 1 {
            break;
        }
        if let Some(u) = orthonormal_residual(&basis, &v) {
            basis.push(u);
        }
    }
    let m = basis.len();
    for e in frame.vectors() {
        if basis.len() == n {
            break;
        }
        if let Some(u) = orthonormal_residual(&basis, e) {
            basis.push(u);
        }
    }
    let d = n - m;
    let fibre: Vec<(Vec<f64>, f64)> = {
        let w = unit_sphere_area(d - 1) / (2 * d) as f64;
        let mut out = Vec::new();
        for f in &basis[m..] {
            out.push((f.clone(), w));
            out.push((f.iter().map(|x| -x).collect(), w));
        }
        out
    };
    let polar: Vec<Vec<(f64, f64)>> = (1..=m)
        .map(|k| jacobi(spec.angular_nodes(), (n - 1 - k) as f64))
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; m];
    loop {
        let mut coef = Vec::with_capacity(m);
        let mut s = 1.0;
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            let (u, wk) = polar[k][i];
            coef.push(s * u);
            s *= (1.0 - u * u).max(0.0).sqrt();
            w *= wk;
        }
        let mut head = vec![0.0; n + 1];
        for (c, b) in coef.iter().zip(&basis) {
            head.iter_mut().zip(b).for_each(|(h, x)| *h += c * x);
        }
        for (f, wf) in &fibre {
            let om: Vec<f64> = head.iter().zip(f).map(|(h, x)| h + s * x).collect();
            out.push((om, w * wf));
        }
        let mut k = 0;
        loop {
            if k == m {
                return out;
            }
            idx[k] += 1;
            if idx[k] < polar[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn orthonormal_residual(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let scale = norm(v);
    if scale == 0.0 {
        return None;
    }
    let mut u = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let r = norm(&u);
    (r > 1e-9 * scale).then(|| u.iter().map(|x| x / r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_integrates_monomials() {
        for n in 3..=6 {
            let g = quadrature_grid(n, 3).unwrap();
            let vol = unit_sphere_area(n);
            assert!((g.total_weight() - vol).abs() < 1e-12 * vol);
            let x2 = g.integrate(|x| x[0] * x[0]);
            assert!((x2 - vol / (n + 1) as f64).abs() < 1e-12);
            let x4 = g.integrate(|x| x[1].powi(4));
            let exact = 3.0 * vol / ((n + 1) * (n + 3)) as f64;
            assert!((x4 - exact).abs() < 1e-12);
            assert!(g.integrate(|x| x[0].powi(3) * x[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn adapted_grid_has_sphere_volume() {
        let n = 5;
        let a = SpherePoint::north_pole(n);
        let b = SpherePoint::south_pole(n);
        let g = QuadratureGrid::bubble_adapted(n, &[(a, 20.0), (b, 35.0)], &[], GridSpec::new(8))
            .unwrap();
        let vol = unit_sphere_area(n);
        assert!((g.total_weight() - vol).abs() < 1e-12 * vol, "{} vs {vol}", g.total_weight());
        let x2 = g.integrate(|x| x[n] * x[n]);
        assert!((x2 - vol / (n + 1) as f64).abs() < 1e-11);
    }

    #[test]
    fn full_mode_integrates_tangential_quadratics() {
        let n = 4;
        let a = SpherePoint::normalized(vec![0.2, 0.1, -0.3, 0.4, 0.8]).unwrap();
        let g = QuadratureGrid::bubble_adapted(n, &[(a, 3.0)], &[], GridSpec::full(2)).unwrap();
        let vol = unit_sphere_area(n);
        let v = g.integrate(|x| x[1] * x[1] * x[2] * x[2]);
        let exact = vol / ((n + 1) * (n + 3)) as f64;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }
}
