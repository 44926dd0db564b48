//! Standard bubbles on `S^n`, their derivative slots, and the interaction
//! quantities `epsilon_{ij}`.

use crate::error::{Error, Result};
use crate::geometry::{check_dim, dot, AngularMode, GridSpec, QuadratureGrid, SpherePoint};
use serde::{Deserialize, Serialize};

/// `alpha * phi_{a, lambda}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub alpha: f64,
    pub center: SpherePoint,
    pub lambda: f64,
}

impl Bubble {
    pub fn new(alpha: f64, center: SpherePoint, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonpositiveLambda(lambda));
        }
        Ok(Self { alpha, center, lambda })
    }
}

/// A weighted sum of bubbles together with the subcritical defect `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub n: usize,
    #[serde(default)]
    pub tau: f64,
    pub bubbles: Vec<Bubble>,
}

impl Configuration {
    pub fn new(n: usize, tau: f64, bubbles: Vec<Bubble>) -> Result<Self> {
        let c = Self { n, tau, bubbles };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidInput(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if self.bubbles.is_empty() {
            return Err(Error::InvalidInput("configuration has no bubbles".into()));
        }
        for b in &self.bubbles {
            if b.center.dim() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: b.center.dim() });
            }
            if !(b.lambda > 0.0) || !b.lambda.is_finite() {
                return Err(Error::NonpositiveLambda(b.lambda));
            }
            if !b.alpha.is_finite() {
                return Err(Error::InvalidInput("non-finite alpha".into()));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.bubbles.len()
    }

    /// Subcritical exponent `p = (n+2)/(n-2) - tau`.
    pub fn p(&self) -> f64 {
        let nf = self.n as f64;
        (nf + 2.0) / (nf - 2.0) - self.tau
    }

    /// `theta = (n-2) tau / 2`.
    pub fn theta(&self) -> f64 {
        (self.n as f64 - 2.0) * self.tau / 2.0
    }

    /// `u = sum_i alpha_i phi_i` at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.bubbles
            .iter()
            .map(|b| b.alpha * bubble_value(self.n, &b.center, b.lambda, x))
            .sum()
    }

    /// `epsilon_{ij}` for `i != j`.
    pub fn epsilon(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.bubbles[i], &self.bubbles[j]);
        interaction(self.n, &a.center, a.lambda, &b.center, b.lambda)
    }

    /// Patches `(a_i, lambda_i)` for a bubble-adapted grid.
    pub fn patches(&self) -> Vec<(SpherePoint, f64)> {
        self.bubbles.iter().map(|b| (b.center.clone(), b.lambda)).collect()
    }
}

/// `D = 1 + (4 lambda^2 - 1) |x - a|^2 / 4`.
#[inline]
fn denominator(lambda: f64, c: f64) -> f64 {
    1.0 + (4.0 * lambda * lambda - 1.0) * c / 4.0
}

#[inline]
fn chordal_sq(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `phi_{a, lambda}(x) = (lambda / D)^{(n-2)/2}`.
pub fn bubble_value(n: usize, a: &SpherePoint, lambda: f64, x: &[f64]) -> f64 {
    let d = denominator(lambda, chordal_sq(a.coords(), x));
    (lambda / d).powf((n as f64 - 2.0) / 2.0)
}

/// Values of a bubble and its derivative slots at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BubbleJet {
    pub phi: f64,
    /// `phi_2 = -lambda d_lambda phi`.
    pub phi2: f64,
    /// `phi_3 = lambda^{-1} grad_a phi` as an ambient tangent vector at `a`.
    pub phi3: Vec<f64>,
    /// `L phi = 4n(n-1) phi^{(n+2)/(n-2)}`.
    pub l_phi: f64,
}

pub fn bubble_jet(n: usize, a: &SpherePoint, lambda: f64, x: &[f64]) -> BubbleJet {
    let nf = n as f64;
    let c = chordal_sq(a.coords(), x);
    let d = denominator(lambda, c);
    let phi = (lambda / d).powf((nf - 2.0) / 2.0);
    let phi2 = (nf - 2.0) / 2.0 * phi * (2.0 * lambda * lambda * c - d) / d;
    let s = (nf - 2.0) * (4.0 * lambda * lambda - 1.0) * phi / (4.0 * lambda * d);
    let ax = dot(a.coords(), x);
    let phi3 = x.iter().zip(a.coords()).map(|(xi, ai)| s * (xi - ax * ai)).collect();
    BubbleJet { phi, phi2, phi3, l_phi: l_bubble(n, phi) }
}

/// `L phi` expressed through `phi`.
#[inline]
pub fn l_bubble(n: usize, phi: f64) -> f64 {
    let nf = n as f64;
    4.0 * nf * (nf - 1.0) * phi.powf((nf + 2.0) / (nf - 2.0))
}

/// `epsilon_{ij} = (lambda_j/lambda_i + lambda_i/lambda_j + lambda_i lambda_j |a_i - a_j|^2)^{(2-n)/2}`.
pub fn interaction(n: usize, ai: &SpherePoint, li: f64, aj: &SpherePoint, lj: f64) -> f64 {
    let b = lj / li + li / lj + li * lj * ai.chordal_sq(aj);
    b.powf((2.0 - n as f64) / 2.0)
}

/// `lambda_j d_{lambda_j} epsilon_{ij}`.
pub fn interaction_lambda_derivative(
    n: usize,
    ai: &SpherePoint,
    li: f64,
    aj: &SpherePoint,
    lj: f64,
) -> f64 {
    let nf = n as f64;
    let k = ai.chordal_sq(aj);
    let b = lj / li + li / lj + li * lj * k;
    (2.0 - nf) / 2.0 * (lj / li - li / lj + li * lj * k) * b.powf(-nf / 2.0)
}

/// `lambda_j^{-1} grad_{a_j} epsilon_{ij}` as an ambient tangent vector at `a_j`.
pub fn interaction_center_gradient(
    n: usize,
    ai: &SpherePoint,
    li: f64,
    aj: &SpherePoint,
    lj: f64,
) -> Vec<f64> {
    let nf = n as f64;
    let b = lj / li + li / lj + li * lj * ai.chordal_sq(aj);
    let s = (nf - 2.0) * li * b.powf(-nf / 2.0);
    aj.project_tangent(ai.coords()).into_iter().map(|v| s * v).collect()
}

/// The integral families controlled by the bubble-interaction estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    /// `int phi^{4/(n-2)} phi_k^2` against `c_k`; `k = 3` uses one tangent direction.
    SelfSlot { k: usize },
    /// `int phi_i^{(n+2)/(n-2)} phi_j` against `b_1 epsilon_{ij}`.
    Cross,
    /// `int phi_i^{(n+2)/(n-2)} phi_{2,j}` against `-b_1 lambda_j d_{lambda_j} epsilon_{ij}`.
    CrossScale,
    /// `int phi^{4/(n-2)} phi phi_2`, which vanishes.
    Mixed,
    /// `int phi_i^{a} phi_j^{b}` against `epsilon_{ij}^{b}`, for `a + b = 2n/(n-2)`, `a > b`.
    Power { a: f64, b: f64 },
    /// `int (phi_i phi_j)^{n/(n-2)}` against `epsilon^{n/(n-2)} ln(1/epsilon)`.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionCheck {
    pub integral: f64,
    pub prediction: f64,
}

impl InteractionCheck {
    pub fn ratio(&self) -> f64 {
        self.integral / self.prediction
    }
}

/// Evaluates one interaction integral on a bubble-adapted grid and pairs it with
/// its leading-order prediction.
pub fn interaction_integral(
    kind: InteractionKind,
    n: usize,
    bi: (&SpherePoint, f64),
    bj: (&SpherePoint, f64),
    level: usize,
) -> Result<InteractionCheck> {
    check_dim(n)?;
    let nf = n as f64;
    let crit = 2.0 * nf / (nf - 2.0);
    let e4 = 4.0 / (nf - 2.0);
    let pstar = (nf + 2.0) / (nf - 2.0);
    let single = matches!(kind, InteractionKind::SelfSlot { .. } | InteractionKind::Mixed);
    let patches: Vec<(SpherePoint, f64)> = if single {
        vec![(bi.0.clone(), bi.1)]
    } else {
        vec![(bi.0.clone(), bi.1), (bj.0.clone(), bj.1)]
    };
    let dir = crate::geometry::TangentFrame::at(bi.0).vector(0).to_vec();
    let spec = GridSpec { level, mode: AngularMode::Adaptive };
    let grid = QuadratureGrid::bubble_adapted(n, &patches, std::slice::from_ref(&dir), spec)?;
    let eps = || interaction(n, bi.0, bi.1, bj.0, bj.1);
    let b1 = crate::constants::constant("b1", n)?;
    Ok(match kind {
        InteractionKind::SelfSlot { k } => {
            let name = match k {
                1 => "c1",
                2 => "c2",
                3 => "c3",
                _ => return Err(Error::InvalidInput(format!("slot {k}"))),
            };
            let integral = grid.integrate(|x| {
                let j = bubble_jet(n, bi.0, bi.1, x);
                let s = match k {
                    1 => j.phi,
                    2 => j.phi2,
                    _ => dot(&j.phi3, &dir),
                };
                j.phi.powf(e4) * s * s
            });
            InteractionCheck { integral, prediction: crate::constants::constant(name, n)? }
        }
        InteractionKind::Mixed => {
            let integral = grid.integrate(|x| {
                let j = bubble_jet(n, bi.0, bi.1, x);
                j.phi.powf(e4) * j.phi * j.phi2
            });
            InteractionCheck { integral, prediction: 0.0 }
        }
        InteractionKind::Cross => InteractionCheck {
            integral: grid.integrate(|x| {
                bubble_value(n, bi.0, bi.1, x).powf(pstar) * bubble_value(n, bj.0, bj.1, x)
            }),
            prediction: b1 * eps(),
        },
        InteractionKind::CrossScale => InteractionCheck {
            integral: grid.integrate(|x| {
                bubble_value(n, bi.0, bi.1, x).powf(pstar) * bubble_jet(n, bj.0, bj.1, x).phi2
            }),
            prediction: -b1 * interaction_lambda_derivative(n, bi.0, bi.1, bj.0, bj.1),
        },
        InteractionKind::Power { a, b } => {
            if (a + b - crit).abs() > 1e-12 || a <= b {
                return Err(Error::InvalidInput(format!("exponents {a}, {b}")));
            }
            InteractionCheck {
                integral: grid.integrate(|x| {
                    bubble_value(n, bi.0, bi.1, x).powf(a) * bubble_value(n, bj.0, bj.1, x).powf(b)
                }),
                prediction: eps().powf(b),
            }
        }
        InteractionKind::Log => {
            let h = nf / (nf - 2.0);
            let e = eps();
            InteractionCheck {
                integral: grid.integrate(|x| {
                    (bubble_value(n, bi.0, bi.1, x) * bubble_value(n, bj.0, bj.1, x)).powf(h)
                }),
                prediction: e.powf(h) * (1.0 / e).ln(),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_scale_bubble_is_constant() {
        let a = SpherePoint::north_pole(4);
        let x = SpherePoint::normalized(vec![0.3, 0.1, -0.2, 0.5, 0.4]).unwrap();
        let v = bubble_value(4, &a, 0.5, x.coords());
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phi2_zero_locus() {
        let n = 5;
        let lam = 3.0;
        let c: f64 = 1.0 / (lam * lam + 0.25);
        let z = 1.0 - c / 2.0;
        let s = (1.0 - z * z).sqrt();
        let x = [s, 0.0, 0.0, 0.0, 0.0, z];
        let j = bubble_jet(n, &SpherePoint::north_pole(n), lam, &x);
        assert!(j.phi2.abs() < 1e-14);
    }

    #[test]
    fn interaction_same_center_equal_scale() {
        let a = SpherePoint::north_pole(6);
        assert!((interaction(6, &a, 10.0, &a, 10.0) - 0.25).abs() < 1e-15);
    }
}
