//! Reduced energy and gradient expansions of the normalized functional
//! `J(u) = int u L u / (int K u^{p+1})^{2/(p+1)}` on weighted sums of bubbles.
//!
//! Gradient components are the pairings `dJ(u)[phi_j]`,
//! `dJ(u)[lambda_j d_{lambda_j} phi_j]` and `dJ(u)[lambda_j^{-1} grad_{a_j} phi_j]`.

use crate::bubbles::{
    interaction_center_gradient, interaction_lambda_derivative, Configuration,
};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, CurvatureField};
use serde::{Deserialize, Serialize};

/// Values of `K` and its derivatives at each bubble center.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterData {
    pub k: f64,
    pub lap: f64,
    pub grad: Vec<f64>,
    pub grad_lap: Vec<f64>,
}

pub fn center_data(cfg: &Configuration, field: &CurvatureField) -> Result<Vec<CenterData>> {
    if field.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, found: field.dim() });
    }
    Ok(cfg
        .bubbles
        .iter()
        .map(|b| {
            let x = b.center.coords();
            CenterData {
                k: field.value(x),
                lap: field.laplacian(x),
                grad: field.gradient(x),
                grad_lap: field.grad_laplacian(x),
            }
        })
        .collect())
}

/// `|alpha|^2 = sum_i alpha_i^2`.
pub fn alpha_sq(cfg: &Configuration) -> f64 {
    cfg.bubbles.iter().map(|b| b.alpha * b.alpha).sum()
}

/// `alpha_{K,tau}^s = sum_i K(a_i) alpha_i^s / lambda_i^theta`.
pub fn alpha_k_tau(cfg: &Configuration, field: &CurvatureField, s: f64) -> f64 {
    let th = cfg.theta();
    cfg.bubbles
        .iter()
        .map(|b| field.value(b.center.coords()) * b.alpha.powf(s) / b.lambda.powf(th))
        .sum()
}

fn pair_sum(cfg: &Configuration) -> f64 {
    let q = cfg.q();
    let mut s = 0.0;
    for i in 0..q {
        for j in 0..q {
            if i != j {
                s += cfg.bubbles[i].alpha * cfg.bubbles[j].alpha * cfg.epsilon(i, j);
            }
        }
    }
    s
}

/// Reduced energy with its pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedEnergy {
    pub value: f64,
    /// `hat_c0 |alpha|^2 / (alpha_{K,tau}^{p+1})^{2/(p+1)}`.
    pub leading: f64,
    /// Relative corrections: `tau`, `Delta K`, interaction.
    pub tau_term: f64,
    pub laplacian_term: f64,
    pub interaction_term: f64,
}

/// Expansion of `J` through order `tau + lambda^{-2} + epsilon`.
pub fn reduced_energy(
    cfg: &Configuration,
    field: &CurvatureField,
    c: &Constants,
) -> Result<ReducedEnergy> {
    cfg.validate()?;
    let data = center_data(cfg, field)?;
    let p = cfg.p();
    let w = 2.0 / (p + 1.0);
    let a2 = alpha_sq(cfg);
    let leading = c.hat_c0(cfg.tau) * a2 / alpha_k_tau(cfg, field, p + 1.0).powf(w);
    let s_delta: f64 = cfg
        .bubbles
        .iter()
        .zip(&data)
        .map(|(b, d)| d.lap / (d.k * b.lambda * b.lambda) * b.alpha * b.alpha)
        .sum();
    let tau_term = -w * c.hat_c1 * cfg.tau;
    let laplacian_term = -w * c.hat_c2 * s_delta / a2;
    let interaction_term = -0.5 * c.hat_b1 * pair_sum(cfg) / a2;
    Ok(ReducedEnergy {
        value: leading * (1.0 + tau_term + laplacian_term + interaction_term),
        leading,
        tau_term,
        laplacian_term,
        interaction_term,
    })
}

/// Exact partial derivatives of [`reduced_energy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDerivatives {
    /// `d J_red / d alpha_j`.
    pub alpha: Vec<f64>,
    /// `lambda_j d J_red / d lambda_j`.
    pub lambda: Vec<f64>,
    /// `grad_{a_j} J_red` as ambient tangent vectors.
    pub center: Vec<Vec<f64>>,
}

pub fn reduced_energy_derivatives(
    cfg: &Configuration,
    field: &CurvatureField,
    c: &Constants,
) -> Result<EnergyDerivatives> {
    cfg.validate()?;
    let n = cfg.n;
    let data = center_data(cfg, field)?;
    let p = cfg.p();
    let th = cfg.theta();
    let w = 2.0 / (p + 1.0);
    let a2 = alpha_sq(cfg);
    let ka = alpha_k_tau(cfg, field, p + 1.0);
    let j0 = c.hat_c0(cfg.tau) * a2 * ka.powf(-w);
    let delta: Vec<f64> = cfg
        .bubbles
        .iter()
        .zip(&data)
        .map(|(b, d)| d.lap / (d.k * b.lambda * b.lambda))
        .collect();
    let s_delta: f64 = cfg.bubbles.iter().zip(&delta).map(|(b, d)| d * b.alpha * b.alpha).sum();
    let s_eps = pair_sum(cfg);
    let corr = w * c.hat_c2 * s_delta + 0.5 * c.hat_b1 * s_eps;
    let e = 1.0 - w * c.hat_c1 * cfg.tau - corr / a2;
    let combine = |da: f64, dka: f64, dsd: f64, dse: f64| -> f64 {
        let de = -(w * c.hat_c2 * dsd + 0.5 * c.hat_b1 * dse) / a2 + corr * da / (a2 * a2);
        j0 * ((da / a2 - w * dka / ka) * e + de)
    };
    let q = cfg.q();
    let mut out = EnergyDerivatives {
        alpha: Vec::with_capacity(q),
        lambda: Vec::with_capacity(q),
        center: Vec::with_capacity(q),
    };
    for j in 0..q {
        let bj = &cfg.bubbles[j];
        let dj = &data[j];
        let lt = bj.lambda.powf(-th);
        let mut eps_sum = 0.0;
        let mut deps_sum = 0.0;
        let mut geps = vec![0.0; n + 1];
        for (i, bi) in cfg.bubbles.iter().enumerate() {
            if i == j {
                continue;
            }
            eps_sum += bi.alpha * cfg.epsilon(i, j);
            deps_sum += bi.alpha
                * interaction_lambda_derivative(n, &bi.center, bi.lambda, &bj.center, bj.lambda);
            let g = interaction_center_gradient(n, &bi.center, bi.lambda, &bj.center, bj.lambda);
            geps.iter_mut().zip(&g).for_each(|(s, v)| *s += bi.alpha * bj.lambda * v);
        }
        out.alpha.push(combine(
            2.0 * bj.alpha,
            (p + 1.0) * dj.k * bj.alpha.powf(p) * lt,
            2.0 * delta[j] * bj.alpha,
            2.0 * eps_sum,
        ));
        out.lambda.push(combine(
            0.0,
            -th * dj.k * bj.alpha.powf(p + 1.0) * lt,
            -2.0 * delta[j] * bj.alpha * bj.alpha,
            2.0 * bj.alpha * deps_sum,
        ));
        let l2 = bj.lambda * bj.lambda;
        let center: Vec<f64> = (0..=n)
            .map(|k| {
                let dka = dj.grad[k] * bj.alpha.powf(p + 1.0) * lt;
                let dsd = bj.alpha * bj.alpha
                    * (dj.grad_lap[k] / dj.k - dj.lap * dj.grad[k] / (dj.k * dj.k))
                    / l2;
                combine(0.0, dka, dsd, 2.0 * bj.alpha * geps[k])
            })
            .collect();
        out.center.push(center);
    }
    Ok(out)
}

/// Leading-order gradient of `J` in the pairing normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedGradient {
    /// `dJ(u)[phi_j]`.
    pub alpha: Vec<f64>,
    /// `dJ(u)[lambda_j d_{lambda_j} phi_j]`.
    pub lambda: Vec<f64>,
    /// `dJ(u)[lambda_j^{-1} grad_{a_j} phi_j]`, ambient tangent vectors.
    pub center: Vec<Vec<f64>>,
}

impl ReducedGradient {
    /// Euclidean norm over all components.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.alpha.iter().chain(&self.lambda).map(|v| v * v).sum::<f64>()
            + self.center.iter().map(|v| dot(v, v)).sum::<f64>();
        s.sqrt()
    }

    /// Flattened `[alpha.., lambda.., center..]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.alpha.clone();
        v.extend(&self.lambda);
        for c in &self.center {
            v.extend(c);
        }
        v
    }
}

/// Prefactor `P_j = alpha_j / (alpha_{K,tau}^{2n/(n-2)})^{(n-2)/n}`.
pub fn prefactor(cfg: &Configuration, field: &CurvatureField, j: usize) -> f64 {
    let nf = cfg.n as f64;
    let s = 2.0 * nf / (nf - 2.0);
    cfg.bubbles[j].alpha / alpha_k_tau(cfg, field, s).powf((nf - 2.0) / nf)
}

/// Gradient expansion through order `tau + |grad K|/lambda + lambda^{-2} + epsilon`.
pub fn reduced_gradient(
    cfg: &Configuration,
    field: &CurvatureField,
    c: &Constants,
) -> Result<ReducedGradient> {
    cfg.validate()?;
    let n = cfg.n;
    let data = center_data(cfg, field)?;
    let p = cfg.p();
    let th = cfg.theta();
    let a2 = alpha_sq(cfg);
    let ka = alpha_k_tau(cfg, field, p + 1.0);
    let delta: Vec<f64> = cfg
        .bubbles
        .iter()
        .zip(&data)
        .map(|(b, d)| d.lap / (d.k * b.lambda * b.lambda))
        .collect();
    let mean_delta: f64 =
        cfg.bubbles.iter().zip(&delta).map(|(b, d)| d * b.alpha * b.alpha).sum::<f64>() / a2;
    let s_eps = pair_sum(cfg) / a2;
    let q = cfg.q();
    let mut g = ReducedGradient {
        alpha: Vec::with_capacity(q),
        lambda: Vec::with_capacity(q),
        center: Vec::with_capacity(q),
    };
    for j in 0..q {
        let bj = &cfg.bubbles[j];
        let dj = &data[j];
        let pj = prefactor(cfg, field, j);
        let mut eps_j = 0.0;
        let mut deps_j = 0.0;
        let mut geps = vec![0.0; n + 1];
        for (i, bi) in cfg.bubbles.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = bi.alpha / bj.alpha;
            eps_j += r * cfg.epsilon(i, j);
            deps_j += r
                * interaction_lambda_derivative(n, &bi.center, bi.lambda, &bj.center, bj.lambda);
            let v = interaction_center_gradient(n, &bi.center, bi.lambda, &bj.center, bj.lambda);
            geps.iter_mut().zip(&v).for_each(|(s, x)| *s += r * x);
        }
        let balance = a2 / ka * dj.k / bj.lambda.powf(th) * bj.alpha.powf(p - 1.0);
        g.alpha.push(
            pj * (c.grave_c0 * (1.0 - balance) - c.grave_c2 * (delta[j] - mean_delta)
                + c.grave_b1 * (s_eps - eps_j)),
        );
        g.lambda.push(
            2.0 * pj * (c.tilde_c1 * cfg.tau + c.tilde_c2 * delta[j] - c.tilde_b2 * deps_j),
        );
        let l = bj.lambda;
        g.center.push(
            (0..=n)
                .map(|k| {
                    -pj * (c.check_c3 * dj.grad[k] / (dj.k * l)
                        + c.check_c4 * dj.grad_lap[k] / (dj.k * l * l * l)
                        + c.check_b3 * geps[k])
                })
                .collect(),
        );
    }
    Ok(g)
}

/// Size of the expansion remainder:
/// `tau^2 + sum |grad K|^2/lambda^2 + lambda^{-4} + lambda^{-2(n-2)} + sum_{r != s} eps^{(n+2)/n}`.
pub fn error_budget(cfg: &Configuration, field: &CurvatureField) -> Result<f64> {
    let data = center_data(cfg, field)?;
    let nf = cfg.n as f64;
    let mut s = cfg.tau * cfg.tau;
    for (b, d) in cfg.bubbles.iter().zip(&data) {
        let g = norm(&d.grad);
        s += g * g / (b.lambda * b.lambda) + b.lambda.powi(-4) + b.lambda.powf(-2.0 * (nf - 2.0));
    }
    for i in 0..cfg.q() {
        for j in 0..cfg.q() {
            if i != j {
                s += cfg.epsilon(i, j).powf((nf + 2.0) / nf);
            }
        }
    }
    Ok(s)
}

/// `int K u^{p+1}` to the order of the energy expansion.
pub fn k_tau_estimate(cfg: &Configuration, field: &CurvatureField, c: &Constants) -> Result<f64> {
    let data = center_data(cfg, field)?;
    let p = cfg.p();
    let th = cfg.theta();
    let mut s = 0.0;
    for (b, d) in cfg.bubbles.iter().zip(&data) {
        let l2 = b.lambda * b.lambda;
        s += d.k * b.alpha.powf(p + 1.0) / b.lambda.powf(th)
            * (c.bar_c0 + c.bar_c1 * cfg.tau + c.bar_c2 * d.lap / (d.k * l2));
    }
    for (i, (bi, di)) in cfg.bubbles.iter().zip(&data).enumerate() {
        for j in 0..cfg.q() {
            if i != j {
                s += (p + 1.0) * c.b1 * di.k * bi.alpha.powf(p) * cfg.bubbles[j].alpha
                    * cfg.epsilon(i, j)
                    / bi.lambda.powf(th);
            }
        }
    }
    Ok(s)
}

/// `int u L u` to the order of the energy expansion.
pub fn r_estimate(cfg: &Configuration, c: &Constants) -> f64 {
    let nf = cfg.n as f64;
    4.0 * nf * (nf - 1.0) * (c.bar_c0 * alpha_sq(cfg) + c.b1 * pair_sum(cfg))
}

/// Rescales all weights so that `k` becomes one, where `k` is homogeneous of degree `p+1`.
pub fn rescale_to_unit_k(cfg: &Configuration, k: f64) -> Configuration {
    let s = k.powf(-1.0 / (cfg.p() + 1.0));
    let mut out = cfg.clone();
    out.bubbles.iter_mut().for_each(|b| b.alpha *= s);
    out
}

/// Rescales the weights so that [`k_tau_estimate`] equals one.
pub fn normalize(cfg: &Configuration, field: &CurvatureField, c: &Constants) -> Result<Configuration> {
    Ok(rescale_to_unit_k(cfg, k_tau_estimate(cfg, field, c)?))
}

/// Weights `alpha_j = (lambda_j^theta / K(a_j))^{1/(p-1)}`, normalized as in [`normalize`].
pub fn balance_alphas(cfg: &Configuration, field: &CurvatureField, c: &Constants) -> Result<Configuration> {
    let p = cfg.p();
    let th = cfg.theta();
    let mut out = cfg.clone();
    for b in &mut out.bubbles {
        b.alpha = (b.lambda.powf(th) / field.value(b.center.coords())).powf(1.0 / (p - 1.0));
    }
    normalize(&out, field, c)
}

/// Result of a membership test for the neighbourhood `V(q, eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    pub violations: Vec<String>,
}

/// Tests `lambda_i^{-1} < eps`, `eps_{ij} < eps`, `lambda_i^tau < 1 + eps` and
/// `|1 - r alpha_i^{4/(n-2)} K_i / (4n(n-1) k)| < eps`.
///
/// `surrogates` supplies `(r, k)`; the expansion estimates are used when absent.
pub fn v_membership(
    cfg: &Configuration,
    field: &CurvatureField,
    c: &Constants,
    eps: f64,
    surrogates: Option<(f64, f64)>,
) -> Result<Membership> {
    cfg.validate()?;
    let nf = cfg.n as f64;
    let (r, k) = match surrogates {
        Some(v) => v,
        None => (r_estimate(cfg, c), k_tau_estimate(cfg, field, c)?),
    };
    let mut violations = Vec::new();
    for (i, b) in cfg.bubbles.iter().enumerate() {
        if 1.0 / b.lambda >= eps {
            violations.push(format!("1/lambda_{i} = {:e}", 1.0 / b.lambda));
        }
        if b.lambda.powf(cfg.tau) >= 1.0 + eps {
            violations.push(format!("lambda_{i}^tau = {}", b.lambda.powf(cfg.tau)));
        }
        let ki = field.value(b.center.coords());
        let bal = 1.0 - r * b.alpha.powf(4.0 / (nf - 2.0)) * ki / (4.0 * nf * (nf - 1.0) * k);
        if bal.abs() >= eps {
            violations.push(format!("alpha balance defect {bal:e} at bubble {i}"));
        }
        for j in (i + 1)..cfg.q() {
            let e = cfg.epsilon(i, j);
            if e >= eps {
                violations.push(format!("epsilon_{i}{j} = {e:e}"));
            }
        }
    }
    Ok(Membership { inside: violations.is_empty(), violations })
}
