//! Leading-order predictions of critical configurations and their Newton
//! refinement on the reduced gradient system.

use crate::bubbles::{interaction_center_gradient, Bubble, Configuration};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::expansion::{
    alpha_k_tau, alpha_sq, center_data, k_tau_estimate, reduced_gradient, v_membership,
};
use crate::geometry::{norm, CurvatureField, SpherePoint, TangentFrame};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Interaction matrix of the four-dimensional scale equations:
/// `M_jj = -tilde_c2 Delta K_j / K_j^2`, `M_ij = -tilde_c4 / (|x_i - x_j|^2 sqrt(K_i K_j))`.
pub fn interaction_matrix(field: &CurvatureField, points: &[SpherePoint]) -> Result<DMatrix<f64>> {
    let n = field.dim();
    let c = Constants::new(n)?;
    let q = points.len();
    let k: Vec<f64> = points.iter().map(|x| field.value(x.coords())).collect();
    let lap: Vec<f64> = points.iter().map(|x| field.laplacian(x.coords())).collect();
    let mut m = DMatrix::zeros(q, q);
    for i in 0..q {
        m[(i, i)] = -c.tilde_c2 * lap[i] / (k[i] * k[i]);
        for j in 0..q {
            if i != j {
                let d = crate::geometry::green_kernel(&points[i], &points[j])?;
                m[(i, j)] = -c.tilde_c4 / (d * (k[i] * k[j]).sqrt());
            }
        }
    }
    Ok(m)
}

/// Solution of the four-dimensional scale system `tilde_c1 sigma_j / K_j = [M (1/sigma)]_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSolution {
    pub sigma: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the scale system by minimizing the strictly convex potential
/// `Phi(s) = s^T M s / 2 - tilde_c1 sum_j ln(s_j) / K_j` over `s = 1/sigma > 0`,
/// whose stationarity condition is the system itself.
///
/// Requires `M` positive definite; otherwise [`Error::NoSolution`].
pub fn sigma_solve(field: &CurvatureField, points: &[SpherePoint]) -> Result<SigmaSolution> {
    sigma_solve_from(field, points, None)
}

/// [`sigma_solve`] started from the given `sigma` instead of the diagonal guess.
pub fn sigma_solve_from(field: &CurvatureField, points: &[SpherePoint], start: Option<&[f64]>) -> Result<SigmaSolution> {
    let n = field.dim();
    if n != 4 {
        return Err(Error::InvalidInput("the scale system is four-dimensional".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    let c = Constants::new(n)?;
    let m = interaction_matrix(field, points)?;
    let least = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if least <= 0.0 {
        return Err(Error::NoSolution(format!(
            "interaction matrix is not positive definite (least eigenvalue {least:e})"
        )));
    }
    let q = points.len();
    let k: Vec<f64> = points.iter().map(|x| field.value(x.coords())).collect();
    let t = c.tilde_c1;
    let grad = |s: &DVector<f64>| -> DVector<f64> {
        let ms = &m * s;
        DVector::from_fn(q, |j, _| ms[j] - t / (k[j] * s[j]))
    };
    let phi = |s: &DVector<f64>| -> f64 {
        0.5 * s.dot(&(&m * s)) - (0..q).map(|j| t * s[j].ln() / k[j]).sum::<f64>()
    };
    let mut s = match start {
        Some(v) if v.len() == q && v.iter().all(|x| *x > 0.0) => DVector::from_fn(q, |j, _| 1.0 / v[j]),
        Some(_) => return Err(Error::InvalidInput("start must hold one positive sigma per point".into())),
        None => DVector::from_fn(q, |j, _| (t / (k[j] * m[(j, j)].max(least))).sqrt()),
    };
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it;
        let g = grad(&s);
        if g.amax() < 1e-14 {
            break;
        }
        let h = DMatrix::from_fn(q, q, |i, j| {
            m[(i, j)] + if i == j { t / (k[j] * s[j] * s[j]) } else { 0.0 }
        });
        let step = h.cholesky().map(|ch| ch.solve(&g)).unwrap_or_else(|| g.clone());
        let mut a = 1.0;
        let f0 = phi(&s);
        loop {
            let trial = &s - a * &step;
            // Near the minimum the decrease of `Phi` drowns in rounding; the gradient still shrinks.
            if trial.iter().all(|v| *v > 0.0) && (phi(&trial) <= f0 || grad(&trial).amax() < g.amax()) {
                s = trial;
                break;
            }
            a *= 0.5;
            if a < 1e-12 {
                break;
            }
        }
        if a < 1e-12 {
            break;
        }
    }
    let sigma: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    let ms = &m * &s;
    let residual = (0..q)
        .map(|j| (t * sigma[j] / k[j] - ms[j]).abs())
        .fold(0.0, f64::max);
    Ok(SigmaSolution { sigma, residual, iterations })
}

/// Leading-order prediction for one concentration point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub point: SpherePoint,
    pub lambda: f64,
    /// `lambda sqrt(tau)`.
    pub sigma: f64,
    pub center: SpherePoint,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
    pub config: Configuration,
}

/// Predicted `(lambda, a, alpha)` at the given critical points of `K`.
pub fn predict(field: &CurvatureField, points: &[SpherePoint], tau: f64) -> Result<PredictionSet> {
    let n = field.dim();
    let nf = n as f64;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    let c = Constants::new(n)?;
    for x in points {
        if x.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.dim() });
        }
        let g = norm(&field.gradient(x.coords()));
        if g > 1e-8 {
            return Err(Error::NotBlowupCandidate(format!("|grad K| = {g:e}")));
        }
        let lap = field.laplacian(x.coords());
        if !(lap < 0.0) {
            return Err(Error::NotBlowupCandidate(format!("Delta K = {lap} is not negative")));
        }
    }
    let k: Vec<f64> = points.iter().map(|x| field.value(x.coords())).collect();
    let lap: Vec<f64> = points.iter().map(|x| field.laplacian(x.coords())).collect();
    let p = (nf + 2.0) / (nf - 2.0) - tau;
    let sigma: Vec<f64> = if n == 4 {
        sigma_solve(field, points)?.sigma
    } else {
        let mut s: Vec<f64> = k
            .iter()
            .zip(&lap)
            .map(|(k, l)| (c.tilde_c2 / c.tilde_c1 * (-l / k)).sqrt())
            .collect();
        if n == 5 && points.len() > 1 {
            s = couple_scales(&c, field, points, tau, s)?;
        }
        s
    };
    let lambda: Vec<f64> = sigma.iter().map(|s| s / tau.sqrt()).collect();
    let th = (nf - 2.0) * tau / 2.0;
    let base: Vec<f64> = lambda
        .iter()
        .zip(&k)
        .map(|(l, k)| (l.powf(th) / k).powf(1.0 / (p - 1.0)))
        .collect();
    let ratio = |i: usize, j: usize| base[i] / base[j];
    let interactions = n == 4 || n == 5;
    let mut centers = Vec::with_capacity(points.len());
    for (j, x) in points.iter().enumerate() {
        let frame = TangentFrame::at(x);
        let hess = field.hessian(&frame);
        let lj = lambda[j];
        let mut rhs: Vec<f64> = field
            .grad_laplacian(x.coords())
            .iter()
            .map(|v| c.check_c4 / c.check_c3 * v / (lj * lj))
            .collect();
        if interactions {
            for (i, y) in points.iter().enumerate() {
                if i != j {
                    let g = interaction_center_gradient(n, y, lambda[i], x, lj);
                    let s = c.check_b3 / c.check_c3 * k[j] * lj * ratio(i, j);
                    rhs.iter_mut().zip(&g).for_each(|(r, v)| *r += s * v);
                }
            }
        }
        let comp = DVector::from_vec(frame.components(&rhs));
        let shift = hess
            .lu()
            .solve(&comp)
            .ok_or_else(|| Error::NotBlowupCandidate("singular Hessian".into()))?;
        let v: Vec<f64> = shift.iter().map(|s| -s).collect();
        centers.push(x.exp(&frame.to_ambient(&v)));
    }
    let corr: Vec<f64> = match c.alpha_correction() {
        Some(kappa) => {
            let d: Vec<f64> = (0..points.len())
                .map(|j| lap[j] / (k[j] * lambda[j] * lambda[j]))
                .collect();
            let num: f64 = (0..points.len()).map(|j| d[j] / k[j]).sum();
            let den: f64 = k.iter().map(|k| 1.0 / k).sum();
            d.iter().map(|dj| kappa * (dj - num / den)).collect()
        }
        None => vec![0.0; points.len()],
    };
    let mut bubbles = Vec::with_capacity(points.len());
    for j in 0..points.len() {
        let a = base[j] * (1.0 + corr[j]).powf(1.0 / (p - 1.0));
        bubbles.push(Bubble::new(a, centers[j].clone(), lambda[j])?);
    }
    let cfg = Configuration::new(n, tau, bubbles)?;
    let mut theta_sum = 0.0;
    for (j, b) in cfg.bubbles.iter().enumerate() {
        let l2 = b.lambda * b.lambda;
        theta_sum += (b.lambda.powf(th) / k[j]).powf(2.0 / (p - 1.0))
            * (c.bar_c0 + c.bar_c1 * tau + c.bar_c2 * lap[j] / (k[j] * l2));
    }
    let theta = theta_sum.powf(-1.0 / (p + 1.0));
    let mut cfg = cfg;
    cfg.bubbles.iter_mut().for_each(|b| b.alpha *= theta);
    let predictions = points
        .iter()
        .zip(&cfg.bubbles)
        .zip(&sigma)
        .map(|((x, b), s)| Prediction {
            point: x.clone(),
            lambda: b.lambda,
            sigma: *s,
            center: b.center.clone(),
            alpha: b.alpha,
        })
        .collect();
    Ok(PredictionSet { predictions, config: cfg })
}

/// Five-dimensional scale equations including the cross-point terms:
/// `tilde_c1 + tilde_c2 Delta K_j / (K_j sigma_j^2) + (3/2) tilde_b2 sum_i (K_j/K_i)^{3/4} tau^{1/2} / (sigma_i sigma_j d_ij^2)^{3/2} = 0`.
fn couple_scales(
    c: &Constants,
    field: &CurvatureField,
    points: &[SpherePoint],
    tau: f64,
    init: Vec<f64>,
) -> Result<Vec<f64>> {
    let q = points.len();
    let k: Vec<f64> = points.iter().map(|x| field.value(x.coords())).collect();
    let lap: Vec<f64> = points.iter().map(|x| field.laplacian(x.coords())).collect();
    let mut d = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            if i != j {
                d[(i, j)] = crate::geometry::green_kernel(&points[i], &points[j])?;
            }
        }
    }
    let f = |ls: &[f64]| -> Vec<f64> {
        let s: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
        (0..q)
            .map(|j| {
                let mut v = c.tilde_c1 + c.tilde_c2 * lap[j] / (k[j] * s[j] * s[j]);
                for i in 0..q {
                    if i != j {
                        let w = (k[j] / k[i]).powf(0.75);
                        v += 1.5 * c.tilde_b2 * w * tau.sqrt() / (s[i] * s[j] * d[(i, j)]).powf(1.5);
                    }
                }
                v
            })
            .collect()
    };
    let mut x: Vec<f64> = init.iter().map(|s| s.ln()).collect();
    for _ in 0..100 {
        let r = f(&x);
        if r.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(q, q);
        for l in 0..q {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += 1e-7;
            xm[l] -= 1e-7;
            let (rp, rm) = (f(&xp), f(&xm));
            for j in 0..q {
                jac[(j, l)] = (rp[j] - rm[j]) / 2e-7;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| Error::NoSolution("singular scale Jacobian".into()))?;
        x.iter_mut().zip(step.iter()).for_each(|(v, s)| *v -= s);
    }
    Ok(x.iter().map(|v| v.exp()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    Converged,
    NonConvergence,
    LeftRegime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub config: Configuration,
    /// Max-norm of the reduced gradient and of the normalization defect.
    pub residual: f64,
    pub iterations: usize,
    pub status: RefineStatus,
    pub message: String,
}

impl Refinement {
    pub fn into_result(self) -> Result<Refinement> {
        match self.status {
            RefineStatus::Converged => Ok(self),
            RefineStatus::NonConvergence => Err(Error::NonConvergence(format!(
                "residual {:e} after {} iterations",
                self.residual, self.iterations
            ))),
            RefineStatus::LeftRegime => Err(Error::LeftRegime(self.message)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Size of the neighbourhood `V(q, eps)` the iterates must stay in.
    pub regime_eps: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 50, regime_eps: 0.1 }
    }
}

struct Unknowns<'a> {
    base: &'a Configuration,
    frames: Vec<TangentFrame>,
}

impl Unknowns<'_> {
    fn pack(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.base.bubbles.iter().map(|b| b.alpha).collect();
        z.extend(self.base.bubbles.iter().map(|b| b.lambda.ln()));
        z.extend(std::iter::repeat(0.0).take(self.base.n * self.base.q()));
        z
    }

    fn unpack(&self, z: &[f64]) -> Configuration {
        let q = self.base.q();
        let n = self.base.n;
        let mut cfg = self.base.clone();
        for (j, b) in cfg.bubbles.iter_mut().enumerate() {
            b.alpha = z[j];
            b.lambda = z[q + j].exp();
            let xi = &z[2 * q + j * n..2 * q + (j + 1) * n];
            b.center = self.base.bubbles[j].center.exp(&self.frames[j].to_ambient(xi));
        }
        cfg
    }

    fn equations(&self, cfg: &Configuration, field: &CurvatureField, c: &Constants) -> Result<Vec<f64>> {
        let g = reduced_gradient(cfg, field, c)?;
        let q = cfg.q();
        let mut f: Vec<f64> = g.alpha[..q - 1].to_vec();
        f.push(k_tau_estimate(cfg, field, c)? - 1.0);
        f.extend(&g.lambda);
        for (j, v) in g.center.iter().enumerate() {
            f.extend(self.frames[j].components(v));
        }
        Ok(f)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Damped Newton iteration with a central-difference Jacobian on the reduced
/// gradient system. The redundant last `alpha` equation (Euler identity) is
/// replaced by the normalization `int K u^{p+1} = 1`.
pub fn newton_refine(
    start: &Configuration,
    field: &CurvatureField,
    opts: RefineOptions,
) -> Result<Refinement> {
    start.validate()?;
    let c = Constants::new(start.n)?;
    let u = Unknowns {
        base: start,
        frames: start.bubbles.iter().map(|b| TangentFrame::at(&b.center)).collect(),
    };
    let mut z = u.pack();
    let mut cfg = u.unpack(&z);
    let mut f = u.equations(&cfg, field, &c)?;
    let mut res = max_abs(&f);
    let dim = z.len();
    let outcome = |cfg: Configuration, res, it, status, message: String| Refinement {
        config: cfg,
        residual: res,
        iterations: it,
        status,
        message,
    };
    for it in 0..opts.max_iterations {
        if res < opts.tol {
            return Ok(outcome(cfg, res, it, RefineStatus::Converged, String::new()));
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for l in 0..dim {
            let h = 1e-6 * z[l].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[l] += h;
            zm[l] -= h;
            let fp = u.equations(&u.unpack(&zp), field, &c)?;
            let fm = u.equations(&u.unpack(&zm), field, &c)?;
            for r in 0..dim {
                jac[(r, l)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let step = match jac.clone().lu().solve(&DVector::from_vec(f.clone())) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                return Ok(outcome(
                    cfg,
                    res,
                    it,
                    RefineStatus::NonConvergence,
                    "singular Jacobian".into(),
                ))
            }
        };
        let mut a = 1.0;
        let mut accepted = false;
        while a > 1e-6 {
            let zt: Vec<f64> = z.iter().zip(step.iter()).map(|(x, s)| x - a * s).collect();
            let ct = u.unpack(&zt);
            if ct.bubbles.iter().all(|b| b.alpha > 0.0 && b.lambda.is_finite()) {
                if let Ok(ft) = u.equations(&ct, field, &c) {
                    let rt = max_abs(&ft);
                    if rt.is_finite() && (rt < res || rt < opts.tol) {
                        z = zt;
                        cfg = ct;
                        f = ft;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
            }
            a *= 0.5;
        }
        if !accepted {
            return Ok(outcome(cfg, res, it, RefineStatus::NonConvergence, "line search failed".into()));
        }
        let m = v_membership(&cfg, field, &c, opts.regime_eps, None)?;
        if !m.inside {
            return Ok(outcome(cfg, res, it + 1, RefineStatus::LeftRegime, m.violations.join("; ")));
        }
    }
    if res < opts.tol {
        return Ok(outcome(cfg, res, opts.max_iterations, RefineStatus::Converged, String::new()));
    }
    Ok(outcome(cfg, res, opts.max_iterations, RefineStatus::NonConvergence, "iteration limit".into()))
}

/// Two-sided control of the reduced gradient by the configuration parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gradient_norm: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `gradient_norm / lower_bound`.
    pub ratio: f64,
    /// Whether the configuration lies in the admissible window of a
    /// critical-point prediction: `tau > 0`, every center within `2/lambda`
    /// of a blow-up candidate and every `lambda sqrt(tau)` within 20% of the
    /// predicted value.
    pub admissible_window: bool,
}

/// `lower_bound = tau + sum_r (|grad K(a_r)|/lambda_r + lambda_r^{-2} + |1 - balance_r|) + sum_{r != s} eps_rs`;
/// the upper bound adds `lambda_r^{-(n-2)}` and replaces `eps_rs` by `eps_rs^{(n+2)/(2n)}`.
pub fn residual_certificate(cfg: &Configuration, field: &CurvatureField) -> Result<Certificate> {
    cfg.validate()?;
    let c = Constants::new(cfg.n)?;
    let nf = cfg.n as f64;
    let data = center_data(cfg, field)?;
    let g = reduced_gradient(cfg, field, &c)?;
    let p = cfg.p();
    let th = cfg.theta();
    let a2 = alpha_sq(cfg);
    let ka = alpha_k_tau(cfg, field, p + 1.0);
    let mut lower = cfg.tau;
    let mut upper = cfg.tau;
    for (b, d) in cfg.bubbles.iter().zip(&data) {
        let bal = (1.0 - a2 / ka * d.k / b.lambda.powf(th) * b.alpha.powf(p - 1.0)).abs();
        let common = norm(&d.grad) / b.lambda + b.lambda.powi(-2) + bal;
        lower += common;
        upper += common + b.lambda.powf(-(nf - 2.0));
    }
    for i in 0..cfg.q() {
        for j in 0..cfg.q() {
            if i != j {
                let e = cfg.epsilon(i, j);
                lower += e;
                upper += e.powf((nf + 2.0) / (2.0 * nf));
            }
        }
    }
    let gradient_norm = g.norm();
    let admissible_window = cfg.tau > 0.0
        && cfg.bubbles.iter().zip(&data).all(|(b, d)| {
            let grad = norm(&d.grad);
            let near = grad * b.lambda < 2.0 * (1.0 + d.k);
            let pred = (c.tilde_c2 / c.tilde_c1 * (-d.lap / d.k)).sqrt();
            let s = b.lambda * cfg.tau.sqrt();
            near && d.lap < 0.0 && (s - pred).abs() <= 0.2 * pred
        });
    Ok(Certificate {
        gradient_norm,
        lower_bound: lower,
        upper_bound: upper,
        ratio: gradient_norm / lower,
        admissible_window,
    })
}

/// Distance-weighted test used by the tower scan: `max_j |g_lambda_j| / (tau + lambda_j^{-2})`.
pub fn scale_defect(cfg: &Configuration, field: &CurvatureField) -> Result<f64> {
    let c = Constants::new(cfg.n)?;
    let g = reduced_gradient(cfg, field, &c)?;
    Ok(g.lambda
        .iter()
        .zip(&cfg.bubbles)
        .map(|(v, b)| v.abs() / (cfg.tau + b.lambda.powi(-2)))
        .fold(0.0, f64::max))
}
