//! Round-sphere geometry: points, tangent frames, stereographic charts and the
//! Green kernel of the conformal Laplacian.

mod field;
mod grid;

pub use field::{
    check_nondegeneracy, find_critical_points, CriticalPoint, CriticalPointInventory,
    CurvatureField, FieldFamily, KJet, NondegeneracyReport, SubsetReport,
};
pub use grid::{quadrature_grid, AngularMode, GridSpec, QuadratureGrid};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 10;

/// Tolerance on `|x| - 1` accepted by [`SpherePoint::new`].
pub const UNIT_TOL: f64 = 1e-12;

pub fn check_dim(n: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Area of the unit sphere `S^k` in `R^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Round sphere `S^n` with the constants used throughout the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub n: usize,
    /// Scalar curvature of the round metric, `n(n-1)`.
    pub scalar_curvature: f64,
    /// `omega_n = |S^{n-1}|`.
    pub omega_n: f64,
    /// `gamma_n = (4n(n-1) omega_n)^{2/(2-n)}`.
    pub gamma_n: f64,
    /// `c_n = 4(n-1)/(n-2)`.
    pub c_n: f64,
}

impl SphereModel {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        let nf = n as f64;
        let omega_n = unit_sphere_area(n - 1);
        Ok(Self {
            n,
            scalar_curvature: nf * (nf - 1.0),
            omega_n,
            gamma_n: (4.0 * nf * (nf - 1.0) * omega_n).powf(2.0 / (2.0 - nf)),
            c_n: 4.0 * (nf - 1.0) / (nf - 2.0),
        })
    }

    /// Volume `|S^n|`.
    pub fn volume(&self) -> f64 {
        unit_sphere_area(self.n)
    }

    /// The round sphere has vanishing Weyl tensor.
    pub fn weyl_norm(&self, _a: &SpherePoint) -> f64 {
        0.0
    }

    /// Regular part of the Green function in conformal normal coordinates; zero on the round sphere.
    pub fn mass(&self, _a: &SpherePoint) -> f64 {
        0.0
    }
}

/// Unit vector in `R^{n+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpherePoint::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.coords
    }
}

impl SpherePoint {
    /// Validates `|x| = 1` to within [`UNIT_TOL`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!("{coords:?}")));
        }
        let r = norm(&coords);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPoint(format!("|x| - 1 = {:e}", r - 1.0)));
        }
        Ok(Self { coords })
    }

    /// Normalizes a nonzero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidPoint(format!("cannot normalize {coords:?}")));
        }
        coords.iter_mut().for_each(|c| *c /= r);
        Ok(Self { coords })
    }

    /// `e_{n+1}` in `R^{n+1}`.
    pub fn north_pole(n: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[n] = 1.0;
        Self { coords }
    }

    pub fn south_pole(n: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[n] = -1.0;
        Self { coords }
    }

    /// Unit basis vector `e_{k+1}` (zero-based `k`).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[k] = 1.0;
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.coords, &other.coords)
    }

    /// Squared chordal distance `|a - b|^2`.
    pub fn chordal_sq(&self, other: &SpherePoint) -> f64 {
        dist_sq(&self.coords, &other.coords)
    }

    /// Great-circle distance.
    pub fn geodesic_distance(&self, other: &SpherePoint) -> f64 {
        2.0 * (self.chordal_sq(other).sqrt() / 2.0).min(1.0).asin()
    }

    /// Exponential map applied to an ambient tangent vector `v` at `self`.
    pub fn exp(&self, v: &[f64]) -> SpherePoint {
        let t = norm(v);
        if t == 0.0 {
            return self.clone();
        }
        let (s, c) = t.sin_cos();
        let coords: Vec<f64> = self
            .coords
            .iter()
            .zip(v)
            .map(|(a, w)| c * a + s * w / t)
            .collect();
        let r = norm(&coords);
        Self {
            coords: coords.into_iter().map(|x| x / r).collect(),
        }
    }

    /// Tangential projection `v - (v.x) x`.
    pub fn project_tangent(&self, v: &[f64]) -> Vec<f64> {
        let s = dot(v, &self.coords);
        v.iter().zip(&self.coords).map(|(w, x)| w - s * x).collect()
    }
}

/// Orthonormal tangent frame at a point, obtained from the Householder
/// reflection exchanging `e_{n+1}` and the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    base: SpherePoint,
    vectors: Vec<Vec<f64>>,
}

impl TangentFrame {
    pub fn at(base: &SpherePoint) -> Self {
        let a = base.coords();
        let n = a.len() - 1;
        let mut v: Vec<f64> = a.iter().map(|x| -x).collect();
        v[n] = if a[n] > 0.0 {
            a[..n].iter().map(|x| x * x).sum::<f64>() / (1.0 + a[n])
        } else {
            1.0 - a[n]
        };
        let vv = dot(&v, &v);
        let vectors = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n + 1];
                e[k] = 1.0;
                if vv > 0.0 {
                    let s = 2.0 * v[k] / vv;
                    e.iter_mut().zip(&v).for_each(|(x, w)| *x -= s * w);
                }
                e
            })
            .collect();
        Self {
            base: base.clone(),
            vectors,
        }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// The `k`-th tangent basis vector in ambient coordinates.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Frame components of an ambient vector.
    pub fn components(&self, v: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|e| dot(e, v)).collect()
    }

    /// Ambient vector with the given frame components.
    pub fn to_ambient(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.coords.len()];
        for (ck, e) in c.iter().zip(&self.vectors) {
            out.iter_mut().zip(e).for_each(|(o, x)| *o += ck * x);
        }
        out
    }

    /// Stereographic chart `y_k = 2 (x.e_k) / (1 + a.x)` centered at the base point.
    pub fn chart(&self, x: &SpherePoint) -> Result<Vec<f64>> {
        let d = 1.0 + self.base.dot(x);
        if d < 1e-12 {
            return Err(Error::AntipodalSingularity(d));
        }
        Ok(self
            .vectors
            .iter()
            .map(|e| 2.0 * dot(e, x.coords()) / d)
            .collect())
    }

    /// Inverse of [`TangentFrame::chart`].
    pub fn chart_inverse(&self, y: &[f64]) -> SpherePoint {
        let r2 = dot(y, y) / 4.0;
        let mut x: Vec<f64> = self.base.coords.iter().map(|a| (1.0 - r2) * a).collect();
        for (yk, e) in y.iter().zip(&self.vectors) {
            x.iter_mut().zip(e).for_each(|(o, v)| *o += yk * v);
        }
        x.iter_mut().for_each(|o| *o /= 1.0 + r2);
        SpherePoint { coords: x }
    }
}

/// Chart centered at `a`.
pub fn chart(a: &SpherePoint) -> TangentFrame {
    TangentFrame::at(a)
}

/// Conformal factor `u_a(x) = (2 / (1 + a.x))^{(n-2)/2}` of the stereographic projection from `-a`.
pub fn conformal_factor(a: &SpherePoint, x: &SpherePoint) -> Result<f64> {
    let d = 1.0 + a.dot(x);
    if d < 1e-12 {
        return Err(Error::AntipodalSingularity(d));
    }
    let n = a.dim() as f64;
    Ok((2.0 / d).powf((n - 2.0) / 2.0))
}

/// Green kernel `|a - b|^2` in the normalization `G = gamma_n |a-b|^{2-n}`.
pub fn green_kernel(a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
    let d = a.chordal_sq(b);
    if d.sqrt() < 1e-12 {
        return Err(Error::CoincidentPoints(d.sqrt()));
    }
    Ok(d)
}

/// Green function `G(a, b) = gamma_n |a - b|^{2-n}` of `L = -c_n Delta + n(n-1)`.
pub fn green_function(a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
    let m = SphereModel::new(a.dim())?;
    let n = a.dim() as f64;
    Ok(m.gamma_n * green_kernel(a, b)?.powf((2.0 - n) / 2.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
