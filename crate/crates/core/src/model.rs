//! Target distributions exposing `s_p(x) = ∇ log p(x)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::particles::ParticleSet;
use crate::rng::{standard_normal, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A target density known through its score.
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇ log p(x)` into `out`.
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        out
    }

    /// `log p(x)` up to an additive constant, when available.
    fn log_density_unnormalized(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Exact draws from the target, when available.
    fn sample_ground_truth(&self, _n: usize, _rng: &mut Rng) -> Option<ParticleSet> {
        None
    }

    /// Exact covariance of the target, when available.
    fn covariance(&self) -> Option<DMatrix<f64>> {
        None
    }

    /// Scores of every particle, row by row.
    fn scores(&self, particles: &ParticleSet) -> ParticleSet {
        let mut out = ParticleSet::zeros(particles.len(), particles.dim());
        for i in 0..particles.len() {
            self.score_into(particles.row(i), out.row_mut(i));
        }
        out
    }
}

#[derive(Debug, Clone)]
enum CovForm {
    Diagonal { var: Vec<f64> },
    Dense { chol: DMatrix<f64>, precision: DMatrix<f64> },
}

/// `N(mean, cov)` with a diagonal fast path.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    form: CovForm,
    log_norm: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.shape() != (d, d) {
            return Err(dim_err(format!("covariance must be {d}×{d}")));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)] == 0.0));
        let (form, log_det) = if diagonal {
            let var: Vec<f64> = (0..d).map(|i| cov[(i, i)]).collect();
            if var.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidArgument("covariance is not positive definite".into()));
            }
            let ld = var.iter().map(|v| v.ln()).sum();
            (CovForm::Diagonal { var }, ld)
        } else {
            let chol = nalgebra::linalg::Cholesky::new(cov.clone())
                .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
            let l = chol.l();
            let ld = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let precision = chol.inverse();
            (CovForm::Dense { chol: l, precision }, ld)
        };
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(Self { mean, cov, form, log_norm })
    }

    pub fn standard(d: usize) -> Self {
        Self::isotropic(vec![0.0; d], 1.0)
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Self {
        let d = mean.len();
        Self::new(mean, DMatrix::from_diagonal_element(d, d, var)).expect("positive variance")
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Writes `−Σ⁻¹(x − μ)` into `out` and returns the normalised log density.
    fn score_and_log_density(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let mut quad = 0.0;
        match &self.form {
            CovForm::Diagonal { var } => {
                for i in 0..x.len() {
                    let r = x[i] - self.mean[i];
                    let g = r / var[i];
                    out[i] = -g;
                    quad += r * g;
                }
            }
            CovForm::Dense { precision, .. } => {
                let d = x.len();
                out.iter_mut().for_each(|o| *o = 0.0);
                for j in 0..d {
                    let rj = x[j] - self.mean[j];
                    if rj == 0.0 {
                        continue;
                    }
                    let col = precision.column(j);
                    for i in 0..d {
                        out[i] -= col[i] * rj;
                    }
                }
                for i in 0..d {
                    quad -= (x[i] - self.mean[i]) * out[i];
                }
            }
        }
        self.log_norm - 0.5 * quad
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut tmp = vec![0.0; x.len()];
        self.score_and_log_density(x, &mut tmp)
    }

    fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        match &self.form {
            CovForm::Diagonal { var } => {
                for i in 0..d {
                    out[i] = self.mean[i] + var[i].sqrt() * z[i];
                }
            }
            CovForm::Dense { chol, .. } => {
                for i in 0..d {
                    let mut s = self.mean[i];
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        s += chol[(i, j)] * zj;
                    }
                    out[i] = s;
                }
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> ParticleSet {
        let mut out = ParticleSet::zeros(n, self.mean.len());
        for i in 0..n {
            self.draw_into(rng, out.row_mut(i));
        }
        out
    }
}

impl ScoreModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.score_and_log_density(x, out);
    }

    fn log_density_unnormalized(&self, x: &[f64]) -> Option<f64> {
        Some(self.log_density(x))
    }

    fn sample_ground_truth(&self, n: usize, rng: &mut Rng) -> Option<ParticleSet> {
        Some(self.sample(n, rng))
    }

    fn covariance(&self) -> Option<DMatrix<f64>> {
        Some(self.cov.clone())
    }
}

/// Finite mixture of Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixtureTarget {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<GaussianTarget>,
}

impl GaussianMixtureTarget {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianTarget>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument("need one weight per component".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive and sum to 1 (sum = {total})")));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(dim_err("mixture components have different dimensions"));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { weights, log_weights, components })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianTarget] {
        &self.components
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                m[i] += w * c.mean()[i];
            }
        }
        m
    }

    /// `Σ_k w_k (Σ_k + μ_k μ_kᵀ) − μ̄ μ̄ᵀ`.
    pub fn mixture_covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut s = DMatrix::zeros(d, d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let mu = DVector::from_column_slice(c.mean());
            s += (c.cov() + &mu * mu.transpose()) * *w;
        }
        let mbar = DVector::from_vec(self.mean());
        s - &mbar * mbar.transpose()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let lps: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(x))
            .collect();
        log_sum_exp(&lps)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> ParticleSet {
        let mut out = ParticleSet::zeros(n, self.dim());
        for i in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = j;
                    break;
                }
            }
            self.components[k].draw_into(rng, out.row_mut(i));
        }
        out
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl ScoreModel for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let k = self.components.len();
        let mut comp_scores = vec![0.0; k * d];
        let mut lps = vec![0.0; k];
        for c in 0..k {
            lps[c] = self.log_weights[c]
                + self.components[c].score_and_log_density(x, &mut comp_scores[c * d..(c + 1) * d]);
        }
        let lse = log_sum_exp(&lps);
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in 0..k {
            let r = (lps[c] - lse).exp();
            for i in 0..d {
                out[i] += r * comp_scores[c * d + i];
            }
        }
    }

    fn log_density_unnormalized(&self, x: &[f64]) -> Option<f64> {
        Some(self.log_density(x))
    }

    fn sample_ground_truth(&self, n: usize, rng: &mut Rng) -> Option<ParticleSet> {
        Some(self.sample(n, rng))
    }

    fn covariance(&self) -> Option<DMatrix<f64>> {
        Some(self.mixture_covariance())
    }
}

/// Four unit-covariance Gaussians with means on a circle of radius √5 in the
/// first two coordinates.
pub fn make_multimodal_target(d: usize) -> Result<GaussianMixtureTarget> {
    if d < 2 {
        return Err(Error::InvalidArgument("multimodal target needs d ≥ 2".into()));
    }
    let r = 5f64.sqrt();
    let comps = (1..=4)
        .map(|k| {
            let ang = 2.0 * k as f64 * std::f64::consts::PI / 4.0 + std::f64::consts::FRAC_PI_4;
            let mut mu = vec![0.0; d];
            mu[0] = r * ang.cos();
            mu[1] = r * ang.sin();
            GaussianTarget::isotropic(mu, 1.0)
        })
        .collect();
    GaussianMixtureTarget::new(vec![0.25; 4], comps)
}

/// Correlation used by the X-shaped target.
pub const XSHAPED_CORRELATION: f64 = 0.95;

pub fn make_xshaped_target(d: usize) -> Result<GaussianMixtureTarget> {
    make_xshaped_target_with(d, XSHAPED_CORRELATION)
}

/// Two Gaussians sharing the mean `(1, 1, 0, …)` whose leading 2×2
/// covariance blocks have correlation `+corr` and `−corr`.
pub fn make_xshaped_target_with(d: usize, corr: f64) -> Result<GaussianMixtureTarget> {
    if d < 2 {
        return Err(Error::InvalidArgument("x-shaped target needs d ≥ 2".into()));
    }
    let mut mu = vec![0.0; d];
    mu[0] = 1.0;
    mu[1] = 1.0;
    let comps = [corr, -corr]
        .iter()
        .map(|&c| {
            let mut cov = DMatrix::identity(d, d);
            cov[(0, 1)] = c;
            cov[(1, 0)] = c;
            GaussianTarget::new(mu.clone(), cov)
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianMixtureTarget::new(vec![0.5, 0.5], comps)
}

/// Drift `f(u) = 10u(1 − u²)/(1 + u²)`.
#[inline]
pub fn diffusion_drift(u: f64) -> f64 {
    10.0 * u * (1.0 - u * u) / (1.0 + u * u)
}

/// `f′(u) = 10(1 − 4u² − u⁴)/(1 + u²)²`.
#[inline]
pub fn diffusion_drift_prime(u: f64) -> f64 {
    let u2 = u * u;
    10.0 * (1.0 - 4.0 * u2 - u2 * u2) / ((1.0 + u2) * (1.0 + u2))
}

/// Posterior over the Brownian increments `w ∈ R^100` driving
/// `u_{j+1} = u_j + f(u_j)Δt + w_j`, `u_0 = 0`, observed with Gaussian noise
/// at every fifth grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionedDiffusion {
    pub n_steps: usize,
    pub dt: f64,
    pub obs_every: usize,
    pub sigma_obs: f64,
    pub y: Vec<f64>,
}

/// Observation set shipped with the crate (generated with seed 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionObservations {
    pub seed: u64,
    pub sigma_obs: f64,
    pub w_true: Vec<f64>,
    pub y: Vec<f64>,
}

const REFERENCE_OBSERVATIONS: &str = include_str!("../data/diffusion_observations.json");

impl ConditionedDiffusion {
    pub const N_STEPS: usize = 100;
    pub const DT: f64 = 1e-2;
    pub const OBS_EVERY: usize = 5;
    pub const N_OBS: usize = 20;
    pub const SIGMA_OBS: f64 = 0.1;

    pub fn new(y: Vec<f64>, sigma_obs: f64) -> Result<Self> {
        if y.len() != Self::N_OBS {
            return Err(dim_err(format!("expected {} observations, got {}", Self::N_OBS, y.len())));
        }
        if !(sigma_obs > 0.0) {
            return Err(Error::InvalidArgument("observation noise must be positive".into()));
        }
        Ok(Self { n_steps: Self::N_STEPS, dt: Self::DT, obs_every: Self::OBS_EVERY, sigma_obs, y })
    }

    /// The shipped observation set.
    pub fn reference() -> Self {
        let obs = Self::reference_observations();
        Self::new(obs.y, obs.sigma_obs).expect("shipped observations are valid")
    }

    pub fn reference_observations() -> DiffusionObservations {
        serde_json::from_str(REFERENCE_OBSERVATIONS).expect("shipped observation file parses")
    }

    /// Index into the path returned by [`Self::forward`] of observation `i` (1-based).
    pub fn obs_path_index(&self, i: usize) -> usize {
        self.obs_every * i - 1
    }

    /// Path `(u_1, …, u_100)` from increments `w`.
    pub fn forward(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n_steps {
            return Err(dim_err(format!("expected {} increments, got {}", self.n_steps, w.len())));
        }
        Ok(diffusion_forward_unchecked(w, self.dt))
    }

    pub fn log_posterior(&self, w: &[f64]) -> Result<f64> {
        let u = self.forward(w)?;
        let prior: f64 = -w.iter().map(|x| x * x).sum::<f64>() / (2.0 * self.dt);
        let s2 = self.sigma_obs * self.sigma_obs;
        let lik: f64 = (1..=self.y.len())
            .map(|i| {
                let r = self.y[i - 1] - u[self.obs_path_index(i)];
                -r * r / (2.0 * s2)
            })
            .sum();
        Ok(prior + lik)
    }

    fn score_unchecked(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n_steps;
        // u_full[j] = u_j, j = 0..=n
        let mut u = vec![0.0; n + 1];
        for j in 0..n {
            u[j + 1] = u[j] + diffusion_drift(u[j]) * self.dt + w[j];
        }
        let s2 = self.sigma_obs * self.sigma_obs;
        let mut direct = vec![0.0; n + 1];
        for i in 1..=self.y.len() {
            let g = self.obs_every * i;
            direct[g] += (self.y[i - 1] - u[g]) / s2;
        }
        // adjoint of u_j; ∂/∂w_j = adjoint of u_{j+1}
        let mut adj = direct[n];
        for j in (0..n).rev() {
            out[j] = adj - w[j] / self.dt;
            adj = direct[j] + adj * (1.0 + diffusion_drift_prime(u[j]) * self.dt);
        }
    }

    /// `(w_true, y)`: prior increments, forward solve, noisy observations.
    /// With `sigma_obs = 0` the observations are the exact path values.
    pub fn generate_observations(sigma_obs: f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let sd = Self::DT.sqrt();
        let w: Vec<f64> = (0..Self::N_STEPS).map(|_| sd * standard_normal(rng)).collect();
        let u = diffusion_forward_unchecked(&w, Self::DT);
        let y = (1..=Self::N_OBS)
            .map(|i| u[Self::OBS_EVERY * i - 1] + sigma_obs * standard_normal(rng))
            .collect();
        (w, y)
    }

    /// Draws from the increment prior `N(0, Δt I)`.
    pub fn sample_prior(&self, n: usize, rng: &mut Rng) -> ParticleSet {
        let sd = self.dt.sqrt();
        let mut out = ParticleSet::zeros(n, self.n_steps);
        out.as_mut_slice().iter_mut().for_each(|v| *v = sd * standard_normal(rng));
        out
    }
}

fn diffusion_forward_unchecked(w: &[f64], dt: f64) -> Vec<f64> {
    let mut path = Vec::with_capacity(w.len());
    let mut u = 0.0;
    for wj in w {
        u = u + diffusion_drift(u) * dt + wj;
        path.push(u);
    }
    path
}

impl ScoreModel for ConditionedDiffusion {
    fn dim(&self) -> usize {
        self.n_steps
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.score_unchecked(x, out);
    }

    fn log_density_unnormalized(&self, x: &[f64]) -> Option<f64> {
        self.log_posterior(x).ok()
    }
}
