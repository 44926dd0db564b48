//! Optimal choice of a bubble configuration for a given function: minimization
//! of `<u - sum alpha_i phi_i, L(u - sum alpha_i phi_i)>` over `(alpha, a, lambda)`
//! and the projection onto the span of the bubble slots.
//!
//! Inputs are restricted to functions whose `L`-action is known in closed form,
//! so every pairing is a plain quadrature sum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bubbles::{bubble_jet, l_bubble, Bubble, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{check_dim, dot, norm, GridSpec, QuadratureGrid, SphereModel, SpherePoint, TangentFrame};

/// A function on `S^n` with closed-form `L`-action.
pub trait LFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// `L u (x)` with `L = -c_n Delta + n(n-1)`.
    fn l_value(&self, x: &[f64]) -> f64;
    /// Concentration patches a quadrature grid has to resolve.
    fn patches(&self) -> Vec<(SpherePoint, f64)> {
        Vec::new()
    }
    /// Ambient directions in which the smooth part varies.
    fn directions(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// Bubbles plus a constant and a linear combination of the coordinate functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEnsemble {
    pub n: usize,
    #[serde(default)]
    pub bubbles: Vec<Bubble>,
    #[serde(default)]
    pub constant: f64,
    /// Coefficients of `x_1, ..., x_{n+1}`; empty means zero.
    #[serde(default)]
    pub linear: Vec<f64>,
}

impl AnalyticEnsemble {
    pub fn new(n: usize, bubbles: Vec<Bubble>, constant: f64, linear: Vec<f64>) -> Result<Self> {
        let e = Self { n, bubbles, constant, linear };
        e.validate()?;
        Ok(e)
    }

    pub fn from_config(cfg: &Configuration) -> Self {
        Self { n: cfg.n, bubbles: cfg.bubbles.clone(), constant: 0.0, linear: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        if !self.linear.is_empty() && self.linear.len() != self.n + 1 {
            return Err(Error::DimensionMismatch { expected: self.n + 1, found: self.linear.len() });
        }
        if !self.bubbles.is_empty() {
            Configuration::new(self.n, 0.0, self.bubbles.clone())?;
        }
        Ok(())
    }

    fn linear_eigenvalue(&self) -> f64 {
        let m = SphereModel::new(self.n).expect("validated dimension");
        m.c_n * self.n as f64 + m.scalar_curvature
    }
}

impl LFunction for AnalyticEnsemble {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let b: f64 = self
            .bubbles
            .iter()
            .map(|b| b.alpha * crate::bubbles::bubble_value(self.n, &b.center, b.lambda, x))
            .sum();
        b + self.constant + dot(&self.linear, x)
    }

    fn l_value(&self, x: &[f64]) -> f64 {
        let nf = self.n as f64;
        let b: f64 = self
            .bubbles
            .iter()
            .map(|b| b.alpha * l_bubble(self.n, crate::bubbles::bubble_value(self.n, &b.center, b.lambda, x)))
            .sum();
        b + nf * (nf - 1.0) * self.constant + self.linear_eigenvalue() * dot(&self.linear, x)
    }

    fn patches(&self) -> Vec<(SpherePoint, f64)> {
        self.bubbles.iter().map(|b| (b.center.clone(), b.lambda)).collect()
    }

    fn directions(&self) -> Vec<Vec<f64>> {
        if norm(&self.linear) > 0.0 {
            vec![self.linear.clone()]
        } else {
            Vec::new()
        }
    }
}

impl LFunction for Configuration {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        Configuration::value(self, x)
    }

    fn l_value(&self, x: &[f64]) -> f64 {
        self.bubbles
            .iter()
            .map(|b| b.alpha * l_bubble(self.n, crate::bubbles::bubble_value(self.n, &b.center, b.lambda, x)))
            .sum()
    }

    fn patches(&self) -> Vec<(SpherePoint, f64)> {
        Configuration::patches(self)
    }
}

/// Slot label `(k, i)`: `k = 1` is `phi_i`, `k = 2` is `lambda_i d_lambda phi_i`,
/// `k = 3` is `lambda_i^{-1} d_{e_c} phi_i` along frame vector `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotIndex {
    pub kind: u8,
    pub bubble: usize,
    pub component: Option<usize>,
}

fn slots(n: usize, q: usize) -> Vec<SlotIndex> {
    let mut out = Vec::with_capacity(q * (n + 2));
    for i in 0..q {
        out.push(SlotIndex { kind: 1, bubble: i, component: None });
        out.push(SlotIndex { kind: 2, bubble: i, component: None });
        for c in 0..n {
            out.push(SlotIndex { kind: 3, bubble: i, component: Some(c) });
        }
    }
    out
}

/// Values and `L`-actions of all `n + 2` slots of one bubble at `x`.
///
/// The slots are derivatives of `phi` along the bubble family, so
/// `L psi = 4n(n-1) (n+2)/(n-2) phi^{4/(n-2)} psi`.
fn slot_values(n: usize, b: &Bubble, frame: &TangentFrame, x: &[f64], vals: &mut Vec<f64>, lvals: &mut Vec<f64>) {
    let nf = n as f64;
    let j = bubble_jet(n, &b.center, b.lambda, x);
    let lin = 4.0 * nf * (nf - 1.0) * (nf + 2.0) / (nf - 2.0) * j.phi.powf(4.0 / (nf - 2.0));
    vals.push(j.phi);
    lvals.push(j.l_phi);
    vals.push(-j.phi2);
    lvals.push(-lin * j.phi2);
    for c in 0..n {
        let v = dot(frame.vector(c), &j.phi3);
        vals.push(v);
        lvals.push(lin * v);
    }
}

/// A single slot function, mainly for projection tests.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotFunction {
    pub n: usize,
    pub bubble: Bubble,
    pub kind: u8,
    pub component: Option<usize>,
}

impl SlotFunction {
    fn index(&self) -> usize {
        match self.kind {
            1 => 0,
            2 => 1,
            _ => 2 + self.component.unwrap_or(0),
        }
    }

    fn eval(&self, x: &[f64]) -> (f64, f64) {
        let frame = TangentFrame::at(&self.bubble.center);
        let unit = Bubble { alpha: 1.0, ..self.bubble.clone() };
        let (mut v, mut l) = (Vec::new(), Vec::new());
        slot_values(self.n, &unit, &frame, x, &mut v, &mut l);
        let i = self.index();
        (self.bubble.alpha * v[i], self.bubble.alpha * l[i])
    }
}

impl LFunction for SlotFunction {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }

    fn l_value(&self, x: &[f64]) -> f64 {
        self.eval(x).1
    }

    fn patches(&self) -> Vec<(SpherePoint, f64)> {
        vec![(self.bubble.center.clone(), self.bubble.lambda)]
    }
}

/// Grid resolving both `u` and the configuration `cfg`. Bubbles of `cfg` that
/// sit on a patch of `u` (offset below `1/lambda`, comparable scale) share it.
pub fn decomposition_grid(u: &dyn LFunction, cfg: &Configuration, spec: GridSpec) -> Result<QuadratureGrid> {
    let mut patches = u.patches();
    for (a, l) in cfg.patches() {
        let covered = patches
            .iter()
            .any(|(b, m)| (l / m).ln().abs() < 0.5 && l.max(*m) * a.geodesic_distance(b) < 1.0);
        if !covered {
            patches.push((a, l));
        }
    }
    if patches.is_empty() {
        patches.push((SpherePoint::north_pole(cfg.n), 1.0));
    }
    QuadratureGrid::bubble_adapted(cfg.n, &patches, &u.directions(), spec)
}

/// `<u, L u>`.
pub fn l_norm_sq(u: &dyn LFunction, grid: &QuadratureGrid) -> f64 {
    grid.iter().map(|(x, w)| w * u.value(x) * u.l_value(x)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthoResidual {
    pub slot: SlotIndex,
    /// `<v, L psi>`.
    pub value: f64,
    /// `|<v, L psi>| / (|v|_L |psi|_L)`.
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub config: Configuration,
    /// `<v, L v>` with `v = u - sum alpha_i phi_i`.
    pub v_norm_sq: f64,
    pub u_norm_sq: f64,
    pub ortho_residuals: Vec<OrthoResidual>,
    pub iterations: usize,
    /// Largest parameter disagreement between the jittered restarts and the main run.
    pub restart_spread: f64,
    /// Set when the restarts disagree beyond `1e-6` or fail.
    pub local_min_warning: Option<String>,
}

impl DecompositionResult {
    pub fn max_relative_ortho(&self) -> f64 {
        self.ortho_residuals.iter().map(|r| r.relative).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectOptions {
    pub max_iterations: usize,
    /// Number of jittered restarts used for the uniqueness check.
    pub restarts: usize,
    pub restart_tol: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self { max_iterations: 100, restarts: 3, restart_tol: 1e-6 }
    }
}

/// Pairings needed by one Gauss-Newton step.
struct Assembly {
    n_sq: f64,
    /// `<b_k, L v>`.
    grad: DVector<f64>,
    /// `<b_k, L b_l>`.
    hess: DMatrix<f64>,
    /// `<v, L psi>` and `<psi, L psi>` for the unit slots.
    ortho: Vec<(f64, f64)>,
}

fn assemble(u: &dyn LFunction, cfg: &Configuration, grid: &QuadratureGrid) -> Assembly {
    let n = cfg.n;
    let q = cfg.q();
    let s = n + 2;
    let dim = q * s;
    let frames: Vec<TangentFrame> = cfg.bubbles.iter().map(|b| TangentFrame::at(&b.center)).collect();
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    let mut ortho = vec![(0.0, 0.0); dim];
    let mut n_sq = 0.0;
    let (mut vals, mut lvals) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    let (mut cols, mut lcols) = (vec![0.0; dim], vec![0.0; dim]);
    for (x, w) in grid.iter() {
        vals.clear();
        lvals.clear();
        for (b, f) in cfg.bubbles.iter().zip(&frames) {
            slot_values(n, b, f, x, &mut vals, &mut lvals);
        }
        let mut m = 0.0;
        let mut lm = 0.0;
        for (i, b) in cfg.bubbles.iter().enumerate() {
            m += b.alpha * vals[i * s];
            lm += b.alpha * lvals[i * s];
        }
        let v = u.value(x) - m;
        let lv = u.l_value(x) - lm;
        n_sq += w * v * lv;
        // Parameter derivatives of `alpha_i phi_i`: alpha, ln lambda, lambda^{-1}-scaled chart.
        for (i, b) in cfg.bubbles.iter().enumerate() {
            for k in 0..s {
                let f = if k == 0 { 1.0 } else { b.alpha };
                cols[i * s + k] = f * vals[i * s + k];
                lcols[i * s + k] = f * lvals[i * s + k];
            }
        }
        for k in 0..dim {
            grad[k] += w * cols[k] * lv;
            ortho[k].0 += w * vals[k] * lv;
            ortho[k].1 += w * vals[k] * lvals[k];
            for l in k..dim {
                hess[(k, l)] += w * cols[k] * lcols[l];
            }
        }
    }
    for k in 0..dim {
        for l in 0..k {
            hess[(k, l)] = hess[(l, k)];
        }
    }
    Assembly { n_sq, grad, hess, ortho }
}

/// Applies a step in `(alpha, ln lambda, lambda * chart)` coordinates.
fn apply_step(cfg: &Configuration, delta: &DVector<f64>) -> Result<Configuration> {
    let n = cfg.n;
    let s = n + 2;
    let mut out = cfg.clone();
    for (i, b) in out.bubbles.iter_mut().enumerate() {
        b.alpha += delta[i * s];
        b.lambda *= delta[i * s + 1].exp();
        let xi: Vec<f64> = (0..n).map(|c| delta[i * s + 2 + c] / cfg.bubbles[i].lambda).collect();
        let frame = TangentFrame::at(&cfg.bubbles[i].center);
        b.center = cfg.bubbles[i].center.exp(&frame.to_ambient(&xi));
    }
    out.validate()?;
    Ok(out)
}

struct Fit {
    config: Configuration,
    assembly: Assembly,
    iterations: usize,
}

fn gauss_newton(u: &dyn LFunction, init: &Configuration, grid: &QuadratureGrid, max_iterations: usize, u_sq: f64) -> Result<Fit> {
    let mut cfg = init.clone();
    let mut a = assemble(u, &cfg, grid);
    let mut mu = 1e-6;
    for it in 0..max_iterations {
        let d = a.hess.diagonal();
        let tol = 1e-12 * a.n_sq.max(0.0).sqrt() + 1e-15 * u_sq.sqrt();
        if a.grad.iter().zip(d.iter()).all(|(g, h)| g.abs() <= tol * h.sqrt()) {
            return Ok(Fit { config: cfg, assembly: a, iterations: it });
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut h = a.hess.clone();
            for k in 0..h.nrows() {
                h[(k, k)] *= 1.0 + mu;
            }
            let Some(delta) = h.cholesky().map(|c| c.solve(&a.grad)) else {
                mu *= 10.0;
                continue;
            };
            let big = delta.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let delta = if big > 0.5 { delta * (0.5 / big) } else { delta };
            let trial = match apply_step(&cfg, &delta) {
                Ok(t) if t.bubbles.iter().all(|b| b.alpha > 0.0) => t,
                _ => {
                    mu *= 10.0;
                    continue;
                }
            };
            let b = assemble(u, &trial, grid);
            if b.n_sq <= a.n_sq {
                let small = delta.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-14;
                cfg = trial;
                a = b;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return Ok(Fit { config: cfg, assembly: a, iterations: it + 1 });
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // No descent left: the discrete minimum is reached to rounding.
            let rel = a.grad.iter().zip(d.iter()).map(|(g, h)| g.abs() / h.sqrt()).fold(0.0, f64::max);
            if rel <= 1e-9 * a.n_sq.max(0.0).sqrt() + 1e-12 * u_sq.sqrt() {
                return Ok(Fit { config: cfg, assembly: a, iterations: it });
            }
            return Err(Error::NonConvergence(format!("no descent step at iteration {it} (gradient {rel:e})")));
        }
    }
    Err(Error::NonConvergence(format!("{max_iterations} Gauss-Newton iterations")))
}

fn jitter(cfg: &Configuration, r: usize) -> Configuration {
    let mut out = cfg.clone();
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    for (i, b) in out.bubbles.iter_mut().enumerate() {
        let e = 1e-2 * sign * (1.0 + 0.5 * (r + i) as f64);
        b.alpha *= 1.0 + e;
        b.lambda *= 1.0 - e;
        let frame = TangentFrame::at(&b.center);
        let c = (r + i) % cfg.n;
        let mut xi = vec![0.0; cfg.n];
        xi[c] = e / b.lambda;
        b.center = b.center.exp(&frame.to_ambient(&xi));
    }
    out
}

/// Largest disagreement between two fits, matching bubbles greedily.
pub fn parameter_distance(a: &Configuration, b: &Configuration) -> f64 {
    let mut used = vec![false; b.q()];
    let mut worst: f64 = 0.0;
    for x in &a.bubbles {
        let d = |y: &Bubble| {
            ((x.alpha - y.alpha) / x.alpha)
                .abs()
                .max((x.lambda / y.lambda).ln().abs())
                .max(x.lambda * x.center.geodesic_distance(&y.center))
        };
        let Some((j, dj)) = b
            .bubbles
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, d(y)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
        else {
            return f64::INFINITY;
        };
        used[j] = true;
        worst = worst.max(dj);
    }
    worst
}

/// Minimizes `|u - sum alpha_i phi_i|_L` over `q` bubbles starting from `init`.
pub fn project_to_bubbles(
    u: &dyn LFunction,
    q: usize,
    init: &Configuration,
    grid: &QuadratureGrid,
    opts: ProjectOptions,
) -> Result<DecompositionResult> {
    init.validate()?;
    if u.dim() != init.n || grid.dim() != init.n {
        return Err(Error::DimensionMismatch { expected: init.n, found: u.dim() });
    }
    if q != init.q() {
        return Err(Error::InvalidInput(format!("q = {q} but the initial configuration has {}", init.q())));
    }
    let u_sq = l_norm_sq(u, grid);
    let fit = gauss_newton(u, init, grid, opts.max_iterations, u_sq)?;
    let mut spread: f64 = 0.0;
    let mut warning = None;
    for r in 0..opts.restarts {
        match gauss_newton(u, &jitter(init, r), grid, opts.max_iterations, u_sq) {
            Ok(f) => spread = spread.max(parameter_distance(&fit.config, &f.config)),
            Err(e) => {
                spread = f64::INFINITY;
                warning = Some(format!("restart {r} failed: {e}"));
            }
        }
    }
    if warning.is_none() && spread > opts.restart_tol {
        warning = Some(format!("restarts disagree by {spread:e}"));
    }
    let v_norm_sq = fit.assembly.n_sq.max(0.0);
    let vn = v_norm_sq.sqrt();
    let ortho_residuals = slots(init.n, q)
        .into_iter()
        .zip(&fit.assembly.ortho)
        .map(|(slot, &(value, psi_sq))| OrthoResidual {
            slot,
            value,
            relative: if vn > 0.0 { value.abs() / (vn * psi_sq.sqrt()) } else { 0.0 },
        })
        .collect();
    Ok(DecompositionResult {
        config: fit.config,
        v_norm_sq,
        u_norm_sq: u_sq,
        ortho_residuals,
        iterations: fit.iterations,
        restart_spread: spread,
        local_min_warning: warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotCoefficient {
    pub slot: SlotIndex,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HProjection {
    pub coefficients: Vec<SlotCoefficient>,
    /// `<w, L w>` for the complement `w = u - sum c_s psi_s`.
    pub complement_norm_sq: f64,
    /// `max_s |<w, L psi_s>| / (|u|_L |psi_s|_L)`.
    pub residual: f64,
    /// Condition number of the diagonally scaled Gram matrix.
    pub condition: f64,
    pub gram: Vec<Vec<f64>>,
}

/// Gram matrix of the slots in `<., L .>`, in [`SlotIndex`] order.
pub fn gram_matrix(cfg: &Configuration, grid: &QuadratureGrid) -> DMatrix<f64> {
    let n = cfg.n;
    let dim = cfg.q() * (n + 2);
    let frames: Vec<TangentFrame> = cfg.bubbles.iter().map(|b| TangentFrame::at(&b.center)).collect();
    let mut g = DMatrix::zeros(dim, dim);
    let (mut vals, mut lvals) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    for (x, w) in grid.iter() {
        vals.clear();
        lvals.clear();
        for (b, f) in cfg.bubbles.iter().zip(&frames) {
            slot_values(n, &Bubble { alpha: 1.0, ..b.clone() }, f, x, &mut vals, &mut lvals);
        }
        for k in 0..dim {
            for l in k..dim {
                g[(k, l)] += w * vals[k] * lvals[l];
            }
        }
    }
    for k in 0..dim {
        for l in 0..k {
            g[(k, l)] = g[(l, k)];
        }
    }
    g
}

/// Coefficients of `u` on the slots of `cfg` and the norm of the `L`-orthogonal complement.
pub fn h_projection(u: &dyn LFunction, cfg: &Configuration, grid: &QuadratureGrid) -> Result<HProjection> {
    cfg.validate()?;
    let n = cfg.n;
    let dim = cfg.q() * (n + 2);
    let g = gram_matrix(cfg, grid);
    let scale: Vec<f64> = (0..dim).map(|k| g[(k, k)].sqrt()).collect();
    let scaled = DMatrix::from_fn(dim, dim, |i, j| g[(i, j)] / (scale[i] * scale[j]));
    let sv = scaled.clone().singular_values();
    let condition = sv.max() / sv.min();
    if !(condition < 1e8) {
        return Err(Error::IllConditioned(condition));
    }
    let frames: Vec<TangentFrame> = cfg.bubbles.iter().map(|b| TangentFrame::at(&b.center)).collect();
    let mut rhs = DVector::zeros(dim);
    let mut u_sq = 0.0;
    let (mut vals, mut lvals) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    for (x, w) in grid.iter() {
        vals.clear();
        lvals.clear();
        for (b, f) in cfg.bubbles.iter().zip(&frames) {
            slot_values(n, &Bubble { alpha: 1.0, ..b.clone() }, f, x, &mut vals, &mut lvals);
        }
        let ux = u.value(x);
        u_sq += w * ux * u.l_value(x);
        for k in 0..dim {
            rhs[k] += w * ux * lvals[k];
        }
    }
    let srhs = DVector::from_fn(dim, |k, _| rhs[k] / scale[k]);
    let y = scaled
        .clone()
        .cholesky()
        .ok_or(Error::IllConditioned(condition))?
        .solve(&srhs);
    let c = DVector::from_fn(dim, |k, _| y[k] / scale[k]);
    let resid = &rhs - &g * &c;
    let un = u_sq.max(0.0).sqrt();
    let residual = (0..dim).map(|k| resid[k].abs() / (un * scale[k])).fold(0.0, f64::max);
    Ok(HProjection {
        coefficients: slots(n, cfg.q())
            .into_iter()
            .zip(c.iter())
            .map(|(slot, &value)| SlotCoefficient { slot, value })
            .collect(),
        complement_norm_sq: u_sq - rhs.dot(&c),
        residual,
        condition,
        gram: (0..dim).map(|i| (0..dim).map(|j| g[(i, j)]).collect()).collect(),
    })
}
