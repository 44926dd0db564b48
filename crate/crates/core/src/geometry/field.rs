//! Curvature fields `K(x) = c + b.x + x^T A x` restricted to `S^n`, their exact
//! intrinsic jets, and the critical-point inventory.

use super::{check_dim, dot, norm, SpherePoint, TangentFrame};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFamily {
    /// `c + v.x`.
    Affine,
    /// `c + sum_k d_k x_k^2`.
    Quadratic,
    /// `c + b.x + x^T A x` with a full symmetric matrix.
    Polynomial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FieldSpec {
    family: FieldFamily,
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
}

/// Positive polynomial field of degree at most two on `S^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldSpec", into = "FieldSpec")]
pub struct CurvatureField {
    family: FieldFamily,
    n: usize,
    c: f64,
    b: Vec<f64>,
    /// Row-major symmetric `(n+1) x (n+1)` matrix.
    a: Vec<f64>,
}

impl TryFrom<FieldSpec> for CurvatureField {
    type Error = Error;
    fn try_from(s: FieldSpec) -> Result<Self> {
        if s.coeffs.len() < 2 {
            return Err(Error::InvalidField("coeffs must hold c0 and n+1 entries".into()));
        }
        let c0 = s.coeffs[0];
        let rest = s.coeffs[1..].to_vec();
        match s.family {
            FieldFamily::Affine => CurvatureField::affine(c0, rest),
            FieldFamily::Quadratic => CurvatureField::quadratic(c0, rest),
            FieldFamily::Polynomial => {
                let m = s
                    .matrix
                    .ok_or_else(|| Error::InvalidField("polynomial family needs `matrix`".into()))?;
                CurvatureField::polynomial(c0, rest, m)
            }
        }
    }
}

impl From<CurvatureField> for FieldSpec {
    fn from(f: CurvatureField) -> Self {
        let m = f.n + 1;
        let mut coeffs = vec![f.c];
        match f.family {
            FieldFamily::Affine => {
                coeffs.extend(&f.b);
                FieldSpec { family: f.family, coeffs, matrix: None }
            }
            FieldFamily::Quadratic => {
                coeffs.extend((0..m).map(|k| f.a[k * m + k]));
                FieldSpec { family: f.family, coeffs, matrix: None }
            }
            FieldFamily::Polynomial => {
                coeffs.extend(&f.b);
                let matrix = (0..m).map(|i| f.a[i * m..(i + 1) * m].to_vec()).collect();
                FieldSpec { family: f.family, coeffs, matrix: Some(matrix) }
            }
        }
    }
}

/// Exact 2-jet of `K` plus `Delta K` and `grad Delta K` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct KJet {
    pub value: f64,
    /// Intrinsic gradient as an ambient tangent vector.
    pub grad: Vec<f64>,
    /// Covariant Hessian in `frame`.
    pub hess: DMatrix<f64>,
    pub lap: f64,
    /// Intrinsic gradient of `Delta K` as an ambient tangent vector.
    pub grad_lap: Vec<f64>,
    pub frame: TangentFrame,
}

impl CurvatureField {
    pub fn affine(c0: f64, v: Vec<f64>) -> Result<Self> {
        let n = Self::dim_from(v.len())?;
        Self::build(FieldFamily::Affine, n, c0, v, vec![0.0; (n + 1) * (n + 1)])
    }

    pub fn quadratic(c0: f64, d: Vec<f64>) -> Result<Self> {
        let n = Self::dim_from(d.len())?;
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for (k, dk) in d.iter().enumerate() {
            a[k * m + k] = *dk;
        }
        Self::build(FieldFamily::Quadratic, n, c0, vec![0.0; m], a)
    }

    pub fn polynomial(c0: f64, b: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = Self::dim_from(b.len())?;
        let m = n + 1;
        if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: matrix.len() });
        }
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = 0.5 * (matrix[i][j] + matrix[j][i]);
            }
        }
        Self::build(FieldFamily::Polynomial, n, c0, b, a)
    }

    fn dim_from(len: usize) -> Result<usize> {
        let n = len.checked_sub(1).ok_or(Error::UnsupportedDimension(0))?;
        check_dim(n)?;
        Ok(n)
    }

    fn build(family: FieldFamily, n: usize, c: f64, b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if !c.is_finite() || b.iter().chain(&a).any(|x| !x.is_finite()) {
            return Err(Error::InvalidField("non-finite coefficient".into()));
        }
        let f = Self { family, n, c, b, a };
        let lo = f.positivity_bound();
        if lo <= 0.0 {
            let m = f.min_estimate();
            if m <= 0.0 {
                return Err(Error::NonpositiveField(m));
            }
        }
        Ok(f)
    }

    pub fn family(&self) -> FieldFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    /// Symmetric quadratic part as a dense matrix.
    pub fn quadratic_part(&self) -> DMatrix<f64> {
        let m = self.n + 1;
        DMatrix::from_row_slice(m, m, &self.a)
    }

    fn a_times(&self, x: &[f64]) -> Vec<f64> {
        let m = self.n + 1;
        (0..m).map(|i| dot(&self.a[i * m..(i + 1) * m], x)).collect()
    }

    /// Lower bound `c - |b| + lambda_min(A)` on the sphere.
    fn positivity_bound(&self) -> f64 {
        let eig = SymmetricEigen::new(self.quadratic_part()).eigenvalues;
        self.c - norm(&self.b) + eig.min()
    }

    fn min_estimate(&self) -> f64 {
        let inv = find_critical_points_unchecked(self);
        inv.points
            .iter()
            .map(|p| p.value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.c + dot(&self.b, x) + dot(x, &self.a_times(x))
    }

    /// Ambient gradient `b + 2 A x`.
    pub fn ambient_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a_times(x)
            .iter()
            .zip(&self.b)
            .map(|(ax, b)| b + 2.0 * ax)
            .collect()
    }

    /// Intrinsic gradient as an ambient tangent vector.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.ambient_gradient(x);
        let s = dot(x, &g);
        g.iter().zip(x).map(|(g, x)| g - s * x).collect()
    }

    /// `Delta K = 2 tr A - n b.x - 2(n+1) x^T A x`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let m = self.n + 1;
        let nf = self.n as f64;
        let tr: f64 = (0..m).map(|k| self.a[k * m + k]).sum();
        2.0 * tr - nf * dot(&self.b, x) - 2.0 * (nf + 1.0) * dot(x, &self.a_times(x))
    }

    /// Intrinsic gradient of `Delta K`.
    pub fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let nf = self.n as f64;
        let g: Vec<f64> = self
            .a_times(x)
            .iter()
            .zip(&self.b)
            .map(|(ax, b)| -nf * b - 4.0 * (nf + 1.0) * ax)
            .collect();
        let s = dot(x, &g);
        g.iter().zip(x).map(|(g, x)| g - s * x).collect()
    }

    /// Covariant Hessian in the given frame: `e_k^T 2A e_l - (x.g) delta_kl`.
    pub fn hessian(&self, frame: &TangentFrame) -> DMatrix<f64> {
        let x = frame.base().coords();
        let s = dot(x, &self.ambient_gradient(x));
        let ae: Vec<Vec<f64>> = frame.vectors().iter().map(|e| self.a_times(e)).collect();
        let n = self.n;
        DMatrix::from_fn(n, n, |k, l| {
            2.0 * dot(frame.vector(k), &ae[l]) - if k == l { s } else { 0.0 }
        })
    }

    pub fn jet(&self, x: &SpherePoint) -> Result<KJet> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        let frame = TangentFrame::at(x);
        let xc = x.coords();
        Ok(KJet {
            value: self.value(xc),
            grad: self.gradient(xc),
            hess: self.hessian(&frame),
            lap: self.laplacian(xc),
            grad_lap: self.grad_laplacian(xc),
            frame,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: SpherePoint,
    pub value: f64,
    pub morse_index: usize,
    pub laplacian: f64,
    pub hessian_eigenvalues: Vec<f64>,
    /// `Delta K < 0`: the sign condition for a single concentrating bubble.
    pub blowup_candidate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointInventory {
    pub points: Vec<CriticalPoint>,
    pub warnings: Vec<String>,
}

impl CriticalPointInventory {
    pub fn candidates(&self) -> Vec<&CriticalPoint> {
        self.points.iter().filter(|p| p.blowup_candidate).collect()
    }
}

const DEDUP_TOL: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-10;
const MORSE_TOL: f64 = 1e-8;
const UNIFORM_SEEDS: usize = 1024;

/// Multi-start Riemannian Newton search for all critical points of `K`.
///
/// Fails with [`Error::NotMorse`] if a critical point has a Hessian eigenvalue
/// below `1e-8` in modulus. A Morse-parity mismatch is reported as an
/// `IncompleteSearch` warning.
pub fn find_critical_points(field: &CurvatureField) -> Result<CriticalPointInventory> {
    let inv = find_critical_points_unchecked(field);
    for p in &inv.points {
        let least = p
            .hessian_eigenvalues
            .iter()
            .map(|e| e.abs())
            .fold(f64::INFINITY, f64::min);
        if least < MORSE_TOL {
            return Err(Error::NotMorse {
                location: p.location.coords().to_vec(),
                least_eigenvalue: least,
            });
        }
    }
    Ok(inv)
}

fn find_critical_points_unchecked(field: &CurvatureField) -> CriticalPointInventory {
    let n = field.n;
    let mut found: Vec<SpherePoint> = Vec::new();
    for seed in seeds(field) {
        if let Some(p) = newton_polish(field, seed) {
            if !found.iter().any(|q| q.chordal_sq(&p).sqrt() < DEDUP_TOL) {
                found.push(p);
            }
        }
    }
    let mut points: Vec<CriticalPoint> = found
        .into_iter()
        .map(|x| {
            let frame = TangentFrame::at(&x);
            let h = field.hessian(&frame);
            let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| a.total_cmp(b));
            let lap = field.laplacian(x.coords());
            CriticalPoint {
                value: field.value(x.coords()),
                morse_index: eig.iter().filter(|e| **e < 0.0).count(),
                laplacian: lap,
                hessian_eigenvalues: eig,
                blowup_candidate: lap < 0.0,
                location: x,
            }
        })
        .collect();
    points.sort_by(|p, q| {
        p.location
            .coords()
            .iter()
            .zip(q.location.coords())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut warnings = Vec::new();
    let chi: i64 = points
        .iter()
        .map(|p| if p.morse_index % 2 == 0 { 1 } else { -1 })
        .sum();
    let expected = 1 + if n % 2 == 0 { 1 } else { -1 };
    if chi != expected {
        warnings.push(format!(
            "IncompleteSearch: sum of (-1)^index is {chi}, Euler characteristic is {expected}"
        ));
    }
    CriticalPointInventory { points, warnings }
}

fn newton_polish(field: &CurvatureField, seed: Vec<f64>) -> Option<SpherePoint> {
    let mut x = SpherePoint::normalized(seed).ok()?;
    for _ in 0..100 {
        let frame = TangentFrame::at(&x);
        let g = frame.components(&field.gradient(x.coords()));
        let gn = norm(&g);
        if gn < 1e-14 {
            break;
        }
        let h = field.hessian(&frame);
        let step = match h.clone().lu().solve(&DVector::from_vec(g.clone())) {
            Some(s) if s.iter().all(|v| v.is_finite()) => -s,
            _ => -DVector::from_vec(g),
        };
        let mut step: Vec<f64> = step.iter().copied().collect();
        let len = norm(&step);
        if len > 0.5 {
            step.iter_mut().for_each(|s| *s *= 0.5 / len);
        }
        x = x.exp(&frame.to_ambient(&step));
        if len < 1e-15 {
            break;
        }
    }
    (norm(&field.gradient(x.coords())) < GRAD_TOL).then_some(x)
}

/// Analytic seeds (eigenvectors of `A`, `b/|b|`, secular-equation roots) plus a
/// low-discrepancy cloud.
fn seeds(field: &CurvatureField) -> Vec<Vec<f64>> {
    let m = field.n + 1;
    let eig = SymmetricEigen::new(field.quadratic_part());
    let mut out = Vec::new();
    for k in 0..m {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        out.push(v.iter().map(|x| -x).collect());
        out.push(v);
    }
    let bn = norm(&field.b);
    if bn > 0.0 {
        out.push(field.b.iter().map(|x| x / bn).collect());
        out.push(field.b.iter().map(|x| -x / bn).collect());
        out.extend(secular_roots(field, &eig));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    for i in 1..=UNIFORM_SEEDS {
        let v: Vec<f64> = (0..m)
            .map(|k| normal.inverse_cdf(halton(i, PRIMES[k])))
            .collect();
        out.push(v);
    }
    out
}

/// Roots of `sum_i bh_i^2 / (mu - 2 lambda_i)^2 = 1`, mapped back to points.
fn secular_roots(field: &CurvatureField, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<Vec<f64>> {
    let m = field.n + 1;
    let bh = eig.eigenvectors.transpose() * DVector::from_column_slice(&field.b);
    let lam2: Vec<f64> = eig.eigenvalues.iter().map(|l| 2.0 * l).collect();
    let h = |mu: f64| -> f64 {
        lam2.iter()
            .zip(bh.iter())
            .map(|(l, b)| b * b / ((mu - l) * (mu - l)))
            .sum::<f64>()
            - 1.0
    };
    let mut poles = lam2.clone();
    poles.sort_by(|a, b| a.total_cmp(b));
    let span = norm(&field.b) + poles.iter().map(|p| p.abs()).fold(0.0, f64::max) + 1.0;
    let mut edges = vec![poles[0] - 2.0 * span];
    edges.extend(&poles);
    edges.push(poles[m - 1] + 2.0 * span);
    let mut roots = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-14 {
            continue;
        }
        let samples = 400;
        let mut prev: Option<(f64, f64)> = None;
        for s in 1..samples {
            let t = s as f64 / samples as f64;
            let u = 0.5 - 0.5 * (std::f64::consts::PI * t).cos();
            let mu = lo + (hi - lo) * u;
            let hv = h(mu);
            if let Some((pm, ph)) = prev {
                if ph.is_finite() && hv.is_finite() && ph.signum() != hv.signum() {
                    let (mut a, mut b) = (pm, mu);
                    for _ in 0..200 {
                        let c = 0.5 * (a + b);
                        if h(c).signum() == h(a).signum() {
                            a = c;
                        } else {
                            b = c;
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
            }
            prev = Some((mu, hv));
        }
    }
    roots
        .into_iter()
        .map(|mu| {
            let xh: Vec<f64> = lam2
                .iter()
                .zip(bh.iter())
                .map(|(l, b)| b / (mu - l))
                .collect();
            (eig.eigenvectors.clone() * DVector::from_vec(xh))
                .iter()
                .copied()
                .collect()
        })
        .collect()
}

const PRIMES: [u64; 11] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31];

fn halton(mut i: usize, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as usize;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    /// Indices into [`NondegeneracyReport::candidates`].
    pub indices: Vec<usize>,
    pub least_eigenvalue: f64,
    /// Whether the least eigenvalue is simple.
    pub simple: bool,
    /// Whether its eigenvector can be chosen with positive entries.
    pub positive_eigenvector: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub n: usize,
    pub candidates: Vec<CriticalPoint>,
    /// Indices of candidates with `|Delta K| <= 1e-10`.
    pub degenerate: Vec<usize>,
    /// Interaction-matrix spectra of candidate subsets (dimension four only).
    pub subsets: Vec<SubsetReport>,
    pub nondegenerate: bool,
}

/// Nondegeneracy of the critical set in the sense needed for the blow-up analysis:
/// `Delta K != 0` at every critical point, and for `n = 4` a nonzero least
/// eigenvalue of the interaction matrix on every subset of at most `q` points.
pub fn check_nondegeneracy(field: &CurvatureField, q: usize) -> Result<NondegeneracyReport> {
    let inv = find_critical_points(field)?;
    let degenerate: Vec<usize> = inv
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.laplacian.abs() <= 1e-10)
        .map(|(i, _)| i)
        .collect();
    let candidates: Vec<CriticalPoint> = inv.candidates().into_iter().cloned().collect();
    let mut subsets = Vec::new();
    if field.n == 4 {
        let c = candidates.len();
        for mask in 1u64..(1u64 << c.min(20)) {
            let idx: Vec<usize> = (0..c).filter(|i| mask >> i & 1 == 1).collect();
            if idx.len() > q {
                continue;
            }
            let pts: Vec<SpherePoint> = idx.iter().map(|&i| candidates[i].location.clone()).collect();
            let m = crate::solver::interaction_matrix(field, &pts)?;
            let eig = SymmetricEigen::new(m);
            let mut order: Vec<usize> = (0..idx.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let least = eig.eigenvalues[order[0]];
            let simple = order.len() < 2 || (eig.eigenvalues[order[1]] - least).abs() > 1e-10;
            let v = eig.eigenvectors.column(order[0]);
            let positive = v.iter().all(|x| *x > 0.0) || v.iter().all(|x| *x < 0.0);
            subsets.push(SubsetReport {
                indices: idx,
                least_eigenvalue: least,
                simple,
                positive_eigenvector: positive,
            });
        }
    }
    let nondegenerate =
        degenerate.is_empty() && subsets.iter().all(|s| s.least_eigenvalue.abs() > 1e-10);
    Ok(NondegeneracyReport {
        n: field.n,
        candidates,
        degenerate,
        subsets,
        nondegenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n + 1];
        v[k] = 1.0;
        v
    }

    #[test]
    fn affine_field_has_two_poles() {
        let k = CurvatureField::affine(2.0, e(4, 4)).unwrap();
        let inv = find_critical_points(&k).unwrap();
        assert_eq!(inv.points.len(), 2);
        assert!(inv.warnings.is_empty());
        let max = inv.points.iter().find(|p| p.value > 2.5).unwrap();
        assert_eq!(max.morse_index, 4);
        assert!((max.laplacian + 4.0).abs() < 1e-12);
        assert!(max.blowup_candidate);
    }

    #[test]
    fn quadratic_field_inventory() {
        let k = CurvatureField::quadratic(2.0, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let inv = find_critical_points(&k).unwrap();
        assert_eq!(inv.points.len(), 12);
        assert!(inv.warnings.is_empty());
    }

    #[test]
    fn generic_polynomial_field_satisfies_morse_parity() {
        let m = vec![
            vec![0.3, 0.1, 0.0, 0.05, 0.0],
            vec![0.1, -0.2, 0.07, 0.0, 0.0],
            vec![0.0, 0.07, 0.1, 0.0, 0.02],
            vec![0.05, 0.0, 0.0, 0.4, 0.0],
            vec![0.0, 0.0, 0.02, 0.0, -0.1],
        ];
        let k = CurvatureField::polynomial(3.0, vec![0.2, -0.1, 0.3, 0.05, 0.1], m).unwrap();
        let inv = find_critical_points(&k).unwrap();
        assert!(inv.warnings.is_empty(), "{:?}", inv.warnings);
        for p in &inv.points {
            assert!(norm(&k.gradient(p.location.coords())) < 1e-10);
        }
    }

    #[test]
    fn degenerate_field_is_rejected() {
        let k = CurvatureField::quadratic(2.0, vec![0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(find_critical_points(&k), Err(Error::NotMorse { .. })));
    }

    #[test]
    fn nonpositive_field_is_rejected() {
        assert!(matches!(
            CurvatureField::affine(0.5, e(4, 4)),
            Err(Error::NonpositiveField(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let k: CurvatureField =
            serde_json::from_str(r#"{"family":"affine","coeffs":[2,0,0,0,0,0,0,1]}"#).unwrap();
        assert_eq!(k.dim(), 6);
        let s = serde_json::to_string(&k).unwrap();
        let k2: CurvatureField = serde_json::from_str(&s).unwrap();
        assert_eq!(k, k2);
    }
}
