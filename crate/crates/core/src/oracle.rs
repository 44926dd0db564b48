//! Direct quadrature of the functional and of its first variation on bubble
//! sums, used as the reference for the reduced expansions.

use crate::bubbles::{bubble_jet, Configuration};
use crate::error::{Error, Result};
use crate::expansion::ReducedGradient;
use crate::geometry::{dot, CurvatureField, GridSpec, QuadratureGrid, TangentFrame};
use serde::{Deserialize, Serialize};

/// Bubble-adapted grid resolving every bubble of `cfg`.
///
/// `K` has degree at most two, so the integrands are polynomials of degree at
/// most three in the unresolved fibre directions, which the cross rule on the
/// fibre integrates exactly; no direction of `K` needs resolving.
pub fn oracle_grid(cfg: &Configuration, field: &CurvatureField, spec: GridSpec) -> Result<QuadratureGrid> {
    cfg.validate()?;
    if field.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, found: field.dim() });
    }
    QuadratureGrid::bubble_adapted(cfg.n, &cfg.patches(), &[], spec)
}

/// `r = int u L u`, `k = int K |u|^{p+1}` and `J = r / k^{2/(p+1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub r: f64,
    pub k_tau: f64,
    pub j: f64,
    /// Differences against the next coarser grid; zero when not estimated.
    pub r_error: f64,
    pub k_error: f64,
    pub j_error: f64,
    pub nodes: usize,
}

pub fn direct_energy(cfg: &Configuration, field: &CurvatureField, grid: &QuadratureGrid) -> Result<EnergyBreakdown> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.p();
    let mut r = 0.0;
    let mut k = 0.0;
    for (x, w) in grid.iter() {
        let (mut u, mut lu) = (0.0, 0.0);
        for b in &cfg.bubbles {
            let j = bubble_jet_value(n, b, x);
            u += b.alpha * j.0;
            lu += b.alpha * j.1;
        }
        r += w * u * lu;
        k += w * field.value(x) * u.abs().powf(p + 1.0);
    }
    if !(k > 0.0) {
        return Err(Error::InvalidInput("int K u^{p+1} vanishes".into()));
    }
    Ok(EnergyBreakdown {
        r,
        k_tau: k,
        j: r / k.powf(2.0 / (p + 1.0)),
        r_error: 0.0,
        k_error: 0.0,
        j_error: 0.0,
        nodes: grid.len(),
    })
}

#[inline]
fn bubble_jet_value(n: usize, b: &crate::bubbles::Bubble, x: &[f64]) -> (f64, f64) {
    let phi = crate::bubbles::bubble_value(n, &b.center, b.lambda, x);
    (phi, crate::bubbles::l_bubble(n, phi))
}

/// [`direct_energy`] on `oracle_grid(level)` with an error estimate from `level - 1`.
pub fn direct_energy_estimate(cfg: &Configuration, field: &CurvatureField, level: usize) -> Result<EnergyBreakdown> {
    let fine = direct_energy(cfg, field, &oracle_grid(cfg, field, GridSpec::new(level))?)?;
    if level < 2 {
        return Ok(fine);
    }
    let coarse = direct_energy(cfg, field, &oracle_grid(cfg, field, GridSpec::new(level - 1))?)?;
    Ok(EnergyBreakdown {
        r_error: (fine.r - coarse.r).abs(),
        k_error: (fine.k_tau - coarse.k_tau).abs(),
        j_error: (fine.j - coarse.j).abs(),
        ..fine
    })
}

/// Test direction attached to bubble `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    /// `phi_j`.
    Alpha,
    /// `lambda_j d_{lambda_j} phi_j`.
    Lambda,
    /// `lambda_j^{-1} d_{e_k} phi_j` along the `k`-th vector of the Householder frame at `a_j`.
    Center(usize),
}

/// Direct first variation `dJ(u)[w]` for one slot.
pub fn direct_pairing(
    cfg: &Configuration,
    field: &CurvatureField,
    grid: &QuadratureGrid,
    j: usize,
    slot: Slot,
) -> Result<f64> {
    if j >= cfg.q() {
        return Err(Error::InvalidInput(format!("bubble index {j} out of range")));
    }
    let g = direct_gradient(cfg, field, grid)?;
    Ok(match slot {
        Slot::Alpha => g.alpha[j],
        Slot::Lambda => g.lambda[j],
        Slot::Center(k) => {
            let frame = TangentFrame::at(&cfg.bubbles[j].center);
            if k >= frame.dim() {
                return Err(Error::InvalidInput(format!("direction {k} out of range")));
            }
            dot(frame.vector(k), &g.center[j])
        }
    })
}

/// All direct pairings in the normalization of [`crate::expansion::reduced_gradient`].
pub fn direct_gradient(cfg: &Configuration, field: &CurvatureField, grid: &QuadratureGrid) -> Result<ReducedGradient> {
    cfg.validate()?;
    let n = cfg.n;
    let q = cfg.q();
    let p = cfg.p();
    let m = n + 1;
    let mut r = 0.0;
    let mut k = 0.0;
    let mut lin = vec![0.0; q * (m + 2)];
    let mut non = vec![0.0; q * (m + 2)];
    let mut jets = Vec::with_capacity(q);
    for (x, w) in grid.iter() {
        jets.clear();
        let (mut u, mut lu) = (0.0, 0.0);
        for b in &cfg.bubbles {
            let jb = bubble_jet(n, &b.center, b.lambda, x);
            u += b.alpha * jb.phi;
            lu += b.alpha * jb.l_phi;
            jets.push(jb);
        }
        let kx = field.value(x);
        let up = u.abs().powf(p);
        r += w * u * lu;
        k += w * kx * up * u.abs();
        let a = w * lu;
        let bnl = w * kx * up * u.signum();
        for (jj, jb) in jets.iter().enumerate() {
            let o = jj * (m + 2);
            lin[o] += a * jb.phi;
            non[o] += bnl * jb.phi;
            lin[o + 1] -= a * jb.phi2;
            non[o + 1] -= bnl * jb.phi2;
            for (d, v) in jb.phi3.iter().enumerate() {
                lin[o + 2 + d] += a * v;
                non[o + 2 + d] += bnl * v;
            }
        }
    }
    let pref = 2.0 / k.powf(2.0 / (p + 1.0));
    let ratio = r / k;
    let mut g = ReducedGradient { alpha: vec![], lambda: vec![], center: vec![] };
    for jj in 0..q {
        let o = jj * (m + 2);
        let f = |i: usize| pref * (lin[o + i] - ratio * non[o + i]);
        g.alpha.push(f(0));
        g.lambda.push(f(1));
        g.center.push((0..m).map(|d| f(2 + d)).collect());
    }
    Ok(g)
}

/// Defect of the Euler identity `dJ(u)[u] = 0`, relative to the size `2J` of
/// either of its two cancelling halves.
pub fn euler_defect(cfg: &Configuration, g: &ReducedGradient, energy: f64) -> f64 {
    let s: f64 = cfg.bubbles.iter().zip(&g.alpha).map(|(b, v)| b.alpha * v).sum();
    s.abs() / (2.0 * energy.abs()).max(f64::MIN_POSITIVE)
}
