//! Sweeps over configurations excluded by the gradient lower bound: towers,
//! clusters along stable or unstable directions of `K`, and the single-bubble
//! energy profile in `lambda`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::bubbles::{Bubble, Configuration};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::expansion::{balance_alphas, reduced_energy};
use crate::geometry::{find_critical_points, CriticalPoint, CurvatureField, SpherePoint};
use crate::solver::{newton_refine, residual_certificate, RefineOptions, RefineStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Tower,
    UnstableCluster,
    StableCluster,
    SingleProfile,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Tower => "tower",
            Scenario::UnstableCluster => "unstable_cluster",
            Scenario::StableCluster => "stable_cluster",
            Scenario::SingleProfile => "single_profile",
        }
    }

    /// Names of the grid parameters, in the order they appear in [`ScanRow::params`].
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Scenario::Tower => &["lambda_ratio", "base_sigma"],
            Scenario::UnstableCluster | Scenario::StableCluster => &["separation", "sigma"],
            Scenario::SingleProfile => &["sigma"],
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tower" => Ok(Scenario::Tower),
            "unstable_cluster" => Ok(Scenario::UnstableCluster),
            "stable_cluster" => Ok(Scenario::StableCluster),
            "single_profile" => Ok(Scenario::SingleProfile),
            _ => Err(Error::InvalidInput(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Grid ranges. `sigma` is always `lambda sqrt(tau)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub tau: f64,
    pub lambda_ratio: (f64, f64),
    pub sigma: (f64, f64),
    pub separation: (f64, f64),
    /// Points per axis.
    pub points: usize,
    /// Concentration point; defaults to the candidate with the largest `K`
    /// (with an unstable direction, for the unstable cluster).
    pub center: Option<SpherePoint>,
}

impl ScanOptions {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            lambda_ratio: (1.5, 100.0),
            sigma: (0.3, 3.0),
            separation: (0.02, 0.5),
            points: 12,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    pub gradient_norm: f64,
    pub lower_bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleProfile {
    pub lambda_tau: f64,
    pub sigma: f64,
    pub predicted_sigma: f64,
    /// `d^2 J / d(ln lambda)^2` at the minimizer.
    pub curvature: f64,
    /// `(lambda, J)` samples.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResidual {
    /// Least value of the stationarity residual over the grid.
    pub min_residual: f64,
    /// `(separation, sigma)` where it is attained.
    pub argmin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Single(SingleProfile),
    Cluster(ClusterResidual),
    /// Per base scale, the index into the ratio axis from which the gradient
    /// ratio is nondecreasing.
    Tower { tail_start: Vec<usize>, axis_len: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub scenario: Scenario,
    pub n: usize,
    pub tau: f64,
    pub center: SpherePoint,
    pub rows: Vec<ScanRow>,
    pub min_ratio: f64,
    pub argmin: Vec<f64>,
    pub grid_size: usize,
    /// Grid points dropped by the near-critical margins.
    pub excluded: usize,
    pub profile: Option<Profile>,
}

/// Compact summary written next to the CSV rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub scenario: Scenario,
    pub min_ratio: f64,
    pub argmin: Vec<f64>,
    pub grid_size: usize,
}

impl ScanReport {
    pub fn summary(&self) -> ScanSummary {
        ScanSummary {
            scenario: self.scenario,
            min_ratio: self.min_ratio,
            argmin: self.argmin.clone(),
            grid_size: self.grid_size,
        }
    }
}

fn log_space(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..m).map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp()).collect()
}

fn pick_center(field: &CurvatureField, opts: &ScanOptions, need_unstable: bool) -> Result<CriticalPoint> {
    let inv = find_critical_points(field)?;
    let n = field.dim();
    match &opts.center {
        Some(p) => inv
            .points
            .into_iter()
            .find(|c| c.location.geodesic_distance(p) < 1e-6)
            .filter(|c| c.blowup_candidate)
            .ok_or_else(|| Error::NotBlowupCandidate("center is not a critical point with Delta K < 0".into())),
        None => inv
            .points
            .into_iter()
            .filter(|c| c.blowup_candidate && (!need_unstable || c.morse_index < n))
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .ok_or_else(|| Error::NotBlowupCandidate("K has no critical point with Delta K < 0".into())),
    }
}

/// Predicted single-bubble scale `sqrt(tilde_c2/tilde_c1 * (-Delta K/K))`.
fn predicted_sigma(c: &Constants, p: &CriticalPoint) -> f64 {
    (c.tilde_c2 / c.tilde_c1 * (-p.laplacian / p.value)).sqrt()
}

/// Unit ambient tangent vector along a Hessian eigendirection at `p`, choosing
/// the most negative (`stable`) or most positive eigenvalue.
fn eigen_direction(field: &CurvatureField, p: &SpherePoint, stable: bool) -> Result<Vec<f64>> {
    let jet = field.jet(p)?;
    let eig = SymmetricEigen::new(jet.hess.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let k = if stable { idx[0] } else { *idx.last().unwrap() };
    let ev = eig.eigenvalues[k];
    if (stable && ev >= 0.0) || (!stable && ev <= 0.0) {
        return Err(Error::NotBlowupCandidate(format!(
            "no {} direction at the chosen point (eigenvalue {ev})",
            if stable { "stable" } else { "unstable" }
        )));
    }
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    Ok(jet.frame.to_ambient(&v))
}

/// Two bubbles at `exp_p(+-d v)` with the same scale.
fn symmetric_pair(n: usize, tau: f64, p: &SpherePoint, v: &[f64], d: f64, lambda: f64) -> Result<Configuration> {
    let plus: Vec<f64> = v.iter().map(|x| x * d).collect();
    let minus: Vec<f64> = v.iter().map(|x| -x * d).collect();
    Configuration::new(
        n,
        tau,
        vec![Bubble::new(1.0, p.exp(&plus), lambda)?, Bubble::new(1.0, p.exp(&minus), lambda)?],
    )
}

/// Tower seed: two bubbles at `p` with scales `base` and `base * ratio`.
pub fn tower_config(n: usize, tau: f64, p: &SpherePoint, base: f64, ratio: f64) -> Result<Configuration> {
    Configuration::new(
        n,
        tau,
        vec![Bubble::new(1.0, p.clone(), base)?, Bubble::new(1.0, p.clone(), base * ratio)?],
    )
}

/// Residual of the cluster stationarity relations
/// `lambda^{-2} = tau + (lambda d)^{-(n-2)}` and `d = lambda^{-(n-2)} d^{-(n-1)}`.
pub fn cluster_relation_residual(n: usize, tau: f64, lambda: f64, d: f64) -> f64 {
    let nf = n as f64;
    let l2 = lambda.powi(-2);
    let r1 = (l2 - tau - (lambda * d).powf(-(nf - 2.0))).abs() / l2;
    let r2 = (d - lambda.powf(-(nf - 2.0)) * d.powf(-(nf - 1.0))).abs() / d;
    r1.max(r2)
}

fn evaluate(cfg: &Configuration, field: &CurvatureField, c: &Constants, params: Vec<f64>) -> Result<ScanRow> {
    let cfg = balance_alphas(cfg, field, c)?;
    let cert = residual_certificate(&cfg, field)?;
    Ok(ScanRow {
        params,
        gradient_norm: cert.gradient_norm,
        lower_bound: cert.lower_bound,
        ratio: cert.ratio,
    })
}

/// Index from which `v` is nondecreasing.
fn tail_start(v: &[f64]) -> usize {
    let mut k = v.len().saturating_sub(1);
    while k > 0 && v[k - 1] <= v[k] {
        k -= 1;
    }
    k
}

/// Minimizes the reduced single-bubble energy over `ln lambda` by golden-section search.
fn minimize_profile(
    n: usize,
    tau: f64,
    field: &CurvatureField,
    c: &Constants,
    p: &SpherePoint,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    let energy = |t: f64| -> Result<f64> {
        let cfg = Configuration::new(n, tau, vec![Bubble::new(1.0, p.clone(), t.exp())?])?;
        Ok(reduced_energy(&balance_alphas(&cfg, field, c)?, field, c)?.value)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = energy(x1)?;
    let mut f2 = energy(x2)?;
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = energy(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = energy(x2)?;
        }
    }
    let t = 0.5 * (a + b);
    let h = 1e-3;
    let curvature = (energy(t + h)? - 2.0 * energy(t)? + energy(t - h)?) / (h * h);
    if t - lo.ln() < 1e-6 || hi.ln() - t < 1e-6 {
        return Err(Error::NonConvergence("profile minimum at the edge of the bracket".into()));
    }
    Ok((t.exp(), curvature))
}

/// Runs one scenario over its grid.
pub fn scan(scenario: Scenario, field: &CurvatureField, opts: &ScanOptions) -> Result<ScanReport> {
    let n = field.dim();
    let tau = opts.tau;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    if opts.points == 0 {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let c = Constants::new(n)?;
    let cp = pick_center(field, opts, scenario == Scenario::UnstableCluster)?;
    let p = cp.location.clone();
    let sigma0 = predicted_sigma(&c, &cp);
    let st = tau.sqrt();
    let sigmas = log_space(opts.sigma.0, opts.sigma.1, opts.points);
    let mut rows = Vec::new();
    let mut excluded = 0;
    let mut profile = None;
    let far = |lambda: f64| (lambda * st - sigma0).abs() >= 0.2 * sigma0;

    match scenario {
        Scenario::Tower => {
            let ratios = log_space(opts.lambda_ratio.0, opts.lambda_ratio.1, opts.points);
            let mut tails = Vec::new();
            for &s in &sigmas {
                let mut line = Vec::new();
                for &r in &ratios {
                    let base = s / st;
                    let cfg = tower_config(n, tau, &p, base, r)?;
                    if !(cfg.epsilon(0, 1) >= 10.0 * tau || far(base) || far(base * r)) {
                        excluded += 1;
                        continue;
                    }
                    let row = evaluate(&cfg, field, &c, vec![r, s])?;
                    line.push(row.ratio);
                    rows.push(row);
                }
                tails.push(tail_start(&line) + (ratios.len() - line.len()));
            }
            profile = Some(Profile::Tower { tail_start: tails, axis_len: ratios.len() });
        }
        Scenario::UnstableCluster | Scenario::StableCluster => {
            let stable = scenario == Scenario::StableCluster;
            let v = eigen_direction(field, &p, stable)?;
            let seps = log_space(opts.separation.0, opts.separation.1, opts.points);
            let mut best = (f64::INFINITY, vec![]);
            for &d in &seps {
                for &s in &sigmas {
                    let lambda = s / st;
                    let cfg = symmetric_pair(n, tau, &p, &v, d, lambda)?;
                    let res = cluster_relation_residual(n, tau, lambda, d);
                    if res < best.0 {
                        best = (res, vec![d, s]);
                    }
                    if !(cfg.epsilon(0, 1) >= 10.0 * tau || far(lambda)) {
                        excluded += 1;
                        continue;
                    }
                    rows.push(evaluate(&cfg, field, &c, vec![d, s])?);
                }
            }
            if stable {
                profile = Some(Profile::Cluster(ClusterResidual { min_residual: best.0, argmin: best.1 }));
            }
        }
        Scenario::SingleProfile => {
            let (lo, hi) = (opts.sigma.0 / st, opts.sigma.1 / st);
            let (lambda_tau, curvature) = minimize_profile(n, tau, field, &c, &p, lo, hi)?;
            let mut samples = Vec::new();
            for &s in &sigmas {
                let cfg = Configuration::new(n, tau, vec![Bubble::new(1.0, p.clone(), s / st)?])?;
                let bal = balance_alphas(&cfg, field, &c)?;
                samples.push((s / st, reduced_energy(&bal, field, &c)?.value));
                if !far(s / st) {
                    excluded += 1;
                    continue;
                }
                rows.push(evaluate(&cfg, field, &c, vec![s])?);
            }
            profile = Some(Profile::Single(SingleProfile {
                lambda_tau,
                sigma: lambda_tau * st,
                predicted_sigma: sigma0,
                curvature,
                samples,
            }));
        }
    }

    let (min_ratio, argmin) = rows
        .iter()
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .map(|r| (r.ratio, r.params.clone()))
        .unwrap_or((f64::NAN, vec![]));
    Ok(ScanReport {
        scenario,
        n,
        tau,
        center: p,
        grid_size: rows.len() + excluded,
        rows,
        min_ratio,
        argmin,
        excluded,
        profile,
    })
}

/// Outcome of a Newton run started at a tower seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub lambda_ratio: f64,
    pub base_sigma: f64,
    pub status: RefineStatus,
    pub residual: f64,
    /// Interaction of the final iterate.
    pub final_epsilon: f64,
    /// True unless Newton converged to a configuration that is still a tower.
    pub excluded: bool,
}

/// Runs [`newton_refine`] from each tower seed `(lambda_ratio, base_sigma)`.
pub fn tower_newton(
    field: &CurvatureField,
    tau: f64,
    seeds: &[(f64, f64)],
    opts: RefineOptions,
) -> Result<Vec<SeedOutcome>> {
    let n = field.dim();
    let c = Constants::new(n)?;
    let p = pick_center(field, &ScanOptions::new(tau), false)?.location;
    seeds
        .iter()
        .map(|&(r, s)| {
            let cfg = balance_alphas(&tower_config(n, tau, &p, s / tau.sqrt(), r)?, field, &c)?;
            let out = newton_refine(&cfg, field, opts)?;
            let final_epsilon = out.config.epsilon(0, 1);
            let converged = out.status == RefineStatus::Converged;
            Ok(SeedOutcome {
                lambda_ratio: r,
                base_sigma: s,
                status: out.status,
                residual: out.residual,
                final_epsilon,
                excluded: !converged || final_epsilon < opts.regime_eps,
            })
        })
        .collect()
}
