//! SVGD and GSVGD particle dynamics.
//!
//! One GSVGD iteration reads a snapshot `(x, A_1..A_M, T)`:
//!
//! 1. scores `s_p(x_i)` are computed once;
//! 2. `x_i ← x_i + ε Σ_l φ̂_{A_l}(x_i)`;
//! 3. `A_l ← R_{A_l}(δ Π∇α(A_l) + √(2Tδ) Πξ_l)` using the start-of-iteration
//!    particles;
//! 4. the temperature is annealed from the particle-averaged magnitude of
//!    the summed update;
//! 5. every `reorthonormalize_every` iterations the batch is re-orthonormalised.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{accumulate_outer, pair_sq_dists, project_rows, stein_pass, Want};
use crate::error::{dim_err, Error, Result};
use crate::kernel::{KernelPolicy, RadialKernelSpec};
use crate::manifold::{
    default_projector_count, init_projectors, polar_retract, reorthonormalize, tangent_project, Projector,
};
use crate::metrics::MetricSeries;
use crate::model::ScoreModel;
use crate::particles::ParticleSet;
use crate::rng::{standard_normal, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub t0: f64,
    pub t_large: f64,
    pub factor: f64,
    pub threshold: f64,
}

impl AnnealConfig {
    /// `T₀ = 1e−4`, `T_large = 1e6`, factor 10, threshold `1e−4·M`.
    pub fn with_projectors(count: usize) -> Self {
        Self { t0: 1e-4, t_large: 1e6, factor: 10.0, threshold: 1e-4 * count as f64 }
    }

    /// Temperature pinned at zero.
    pub fn frozen() -> Self {
        Self { t0: 0.0, t_large: 0.0, factor: 1.0, threshold: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsvgdConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub m: usize,
    pub projectors: usize,
    pub anneal: AnnealConfig,
    pub reorthonormalize_every: usize,
}

impl GsvgdConfig {
    /// Defaults for ambient dimension `d`: `ε = 0.1`, `δ = 0.05`,
    /// `M = min(20, ⌊d/m⌋)`.
    pub fn new(d: usize, m: usize) -> Self {
        let projectors = default_projector_count(d, m);
        Self {
            epsilon: 0.1,
            delta: 0.05,
            m,
            projectors,
            anneal: AnnealConfig::with_projectors(projectors),
            reorthonormalize_every: 1000,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("particle step ε must be finite and ≥ 0");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("projector step δ must be finite and ≥ 0");
        }
        if self.m == 0 || self.projectors == 0 {
            return bad("m and M must be positive");
        }
        if self.m * self.projectors > d {
            return Err(Error::Config(format!("M·m = {} exceeds d = {d}", self.m * self.projectors)));
        }
        let a = &self.anneal;
        if !(a.t0 >= 0.0 && a.t0 <= a.t_large && a.factor >= 1.0 && a.threshold >= 0.0) {
            return bad("anneal settings need 0 ≤ T₀ ≤ T_large, factor ≥ 1, threshold ≥ 0");
        }
        if self.reorthonormalize_every == 0 {
            return bad("reorthonormalize_every must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealState {
    pub t: f64,
    pub prev_gamma: Option<f64>,
}

impl AnnealState {
    pub fn new(cfg: &AnnealConfig) -> Self {
        Self { t: cfg.t0, prev_gamma: None }
    }
}

/// `(1/N) Σ_i ‖u_i‖_∞`.
pub fn particle_avg_magnitude(updates: &ParticleSet) -> f64 {
    if updates.is_empty() {
        return 0.0;
    }
    let total: f64 = updates.rows().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum();
    total / updates.len() as f64
}

/// Multiplies `T` by the factor (capped at `T_large`) when γ changed by less
/// than the threshold since the previous iteration.
pub fn anneal_update(state: AnnealState, gamma: f64, cfg: &AnnealConfig) -> AnnealState {
    let mut t = state.t;
    if let Some(prev) = state.prev_gamma {
        if (gamma - prev).abs() < cfg.threshold {
            t = (t * cfg.factor).min(cfg.t_large);
        }
    }
    AnnealState { t, prev_gamma: Some(gamma) }
}

fn check_model(particles: &ParticleSet, model: &dyn ScoreModel) -> Result<()> {
    if particles.is_empty() {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    if model.dim() != particles.dim() {
        return Err(dim_err(format!("model in R^{} but particles in R^{}", model.dim(), particles.dim())));
    }
    Ok(())
}

/// `(1/N) Σ_j [k(x_j, x_i) s_j + ∇_{x_j} k(x_j, x_i)]` in the ambient space,
/// with the bandwidth chosen by `policy` on the raw particles.
pub fn svgd_phi(particles: &ParticleSet, scores: &ParticleSet, policy: &KernelPolicy) -> Result<ParticleSet> {
    let (n, d) = (particles.len(), particles.dim());
    if scores.len() != n || scores.dim() != d {
        return Err(dim_err("particles and scores differ in shape"));
    }
    let sq = pair_sq_dists(particles.as_slice(), n, d);
    let kernel = policy.resolve(&mut sq.clone(), n)?;
    let mut phi = ParticleSet::zeros(n, d);
    let mut idx = 0;
    for i in 0..n {
        let (xi, si) = (particles.row(i), scores.row(i));
        {
            let k0 = kernel.phi(0.0);
            let out = phi.row_mut(i);
            for a in 0..d {
                out[a] += k0 * si[a];
            }
        }
        for j in (i + 1)..n {
            let (xj, sj) = (particles.row(j), scores.row(j));
            let s = sq[idx];
            idx += 1;
            let k = kernel.phi(s);
            // ∇_{x_j} k(x_j, x_i) = 2Φ′(s)(x_j − x_i)
            let g = 2.0 * kernel.derivs(s).d1;
            let data = phi.as_mut_slice();
            let (lo, hi) = data.split_at_mut(j * d);
            let (oi, oj) = (&mut lo[i * d..(i + 1) * d], &mut hi[..d]);
            for a in 0..d {
                let diff = xj[a] - xi[a];
                oi[a] += k * sj[a] + g * diff;
                oj[a] += k * si[a] - g * diff;
            }
        }
    }
    let inv = 1.0 / n as f64;
    phi.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    Ok(phi)
}

/// Non-finite coordinates, or rows large enough that pairwise squared
/// distances overflow.
fn diverged(x: &ParticleSet) -> bool {
    let mut max_sq = 0.0f64;
    for i in 0..x.len() {
        let sq: f64 = x.row(i).iter().map(|v| v * v).sum();
        if !sq.is_finite() {
            return true;
        }
        max_sq = max_sq.max(sq);
    }
    !(4.0 * max_sq).is_finite()
}

/// `x_i ← x_i + ε φ(x_i)` with `φ` the SVGD direction.
pub fn svgd_step(particles: &ParticleSet, model: &dyn ScoreModel, policy: &KernelPolicy, epsilon: f64) -> Result<ParticleSet> {
    check_model(particles, model)?;
    let scores = model.scores(particles);
    let phi = svgd_phi(particles, &scores, policy)?;
    let mut out = particles.clone();
    axpy(&mut out, epsilon, &phi);
    if diverged(&out) {
        return Err(Error::Divergence { iteration: 0 });
    }
    Ok(out)
}

fn axpy(x: &mut ParticleSet, a: f64, y: &ParticleSet) {
    for (xv, yv) in x.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *xv += a * yv;
    }
}

/// Per-projector quantities computed from the start-of-iteration snapshot.
struct ProjectorPass {
    /// Projected update direction, `N × m`, already divided by `N`.
    phi: Vec<f64>,
    /// Euclidean gradient of `α` w.r.t. `A`, if requested.
    grad: Option<DMatrix<f64>>,
}

fn projector_pass(
    particles: &ParticleSet,
    scores: &ParticleSet,
    a: &Projector,
    kernel: Option<&RadialKernelSpec>,
    policy: &KernelPolicy,
    want_grad: bool,
) -> Result<ProjectorPass> {
    let (n, m) = (particles.len(), a.rank());
    let p = project_rows(particles, a.matrix());
    let s = project_rows(scores, a.matrix());
    let sq = pair_sq_dists(&p, n, m);
    let kernel = match kernel {
        Some(k) => *k,
        None => policy.resolve(&mut sq.clone(), n)?,
    };
    let pass = stein_pass(&p, &s, n, m, &sq, &kernel, Want { phi: true, grad: want_grad });
    let inv_n = 1.0 / n as f64;
    let phi = pass.phi.iter().map(|v| v * inv_n).collect();
    let grad = want_grad.then(|| {
        let scale = inv_n * inv_n;
        let mut g = DMatrix::zeros(particles.dim(), m);
        accumulate_outer(particles, &pass.grad_p, m, scale, &mut g);
        accumulate_outer(scores, &pass.grad_s, m, scale, &mut g);
        g
    });
    Ok(ProjectorPass { phi, grad })
}

fn lift_into(out: &mut ParticleSet, a: &Projector, phi: &[f64]) {
    let (d, m) = (a.ambient_dim(), a.rank());
    let am = a.matrix();
    for i in 0..out.len() {
        let row = out.row_mut(i);
        for k in 0..m {
            let c = phi[i * m + k];
            let col = am.column(k);
            for r in 0..d {
                row[r] += col[r] * c;
            }
        }
    }
}

/// Row `i` is `(1/N) Σ_j [AAᵀs_j k(Aᵀx_j, Aᵀx_i) + A ∇_{Aᵀx_j} k(Aᵀx_j, Aᵀx_i)]`.
pub fn gsvgd_phi(
    particles: &ParticleSet,
    scores: &ParticleSet,
    a: &Projector,
    kernel: &RadialKernelSpec,
) -> Result<ParticleSet> {
    if particles.len() != scores.len() || particles.dim() != scores.dim() {
        return Err(dim_err("particles and scores differ in shape"));
    }
    if a.ambient_dim() != particles.dim() {
        return Err(dim_err("projector and particles differ in dimension"));
    }
    if particles.is_empty() {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    let pass = projector_pass(particles, scores, a, Some(kernel), &KernelPolicy::default(), false)?;
    let mut out = ParticleSet::zeros(particles.len(), particles.dim());
    lift_into(&mut out, a, &pass.phi);
    Ok(out)
}

/// AdaGrad-style per-coordinate step scaling with momentum 0.9.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGrad {
    hist: Option<Vec<f64>>,
}

impl AdaGrad {
    const ALPHA: f64 = 0.9;
    const FUDGE: f64 = 1e-6;

    pub fn new() -> Self {
        Self { hist: None }
    }

    /// Rescales `update` in place.
    pub fn apply(&mut self, update: &mut ParticleSet) {
        let u = update.as_mut_slice();
        let hist = self.hist.get_or_insert_with(|| u.iter().map(|v| v * v).collect());
        for (h, v) in hist.iter_mut().zip(u.iter_mut()) {
            *h = Self::ALPHA * *h + (1.0 - Self::ALPHA) * *v * *v;
            *v /= Self::FUDGE + h.sqrt();
        }
    }
}

impl Default for AdaGrad {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsvgdState {
    pub particles: ParticleSet,
    pub projectors: Vec<Projector>,
    pub anneal: AnnealState,
    /// Number of completed iterations.
    pub iteration: usize,
    pub adagrad: Option<AdaGrad>,
}

impl GsvgdState {
    /// Particles with projectors on consecutive canonical blocks.
    pub fn new(particles: ParticleSet, cfg: &GsvgdConfig) -> Result<Self> {
        cfg.validate(particles.dim())?;
        let projectors = init_projectors(particles.dim(), cfg.m, cfg.projectors)?;
        Ok(Self { particles, projectors, anneal: AnnealState::new(&cfg.anneal), iteration: 0, adagrad: None })
    }
}

/// One iteration of GSVGD.
pub fn gsvgd_step(
    state: &GsvgdState,
    model: &dyn ScoreModel,
    policy: &KernelPolicy,
    cfg: &GsvgdConfig,
    rng: &mut Rng,
) -> Result<GsvgdState> {
    let x = &state.particles;
    check_model(x, model)?;
    let (n, d) = (x.len(), x.dim());
    if state.projectors.iter().any(|a| a.ambient_dim() != d) {
        return Err(dim_err("projector and particles differ in dimension"));
    }
    let scores = model.scores(x);
    let noise_scale = (2.0 * state.anneal.t * cfg.delta).sqrt();
    let want_grad = cfg.delta > 0.0;
    // Noise is drawn serially in projector order so the stream does not
    // depend on the thread schedule.
    let noise: Vec<Option<DMatrix<f64>>> = state
        .projectors
        .iter()
        .map(|a| (noise_scale > 0.0).then(|| DMatrix::from_fn(d, a.rank(), |_, _| standard_normal(rng))))
        .collect();

    let passes: Vec<Result<(ProjectorPass, Projector)>> = state
        .projectors
        .par_iter()
        .zip(noise.par_iter())
        .map(|(a, xi)| {
            let pass = projector_pass(x, &scores, a, None, policy, want_grad)?;
            let mut step = DMatrix::zeros(d, a.rank());
            if let Some(g) = &pass.grad {
                step += tangent_project(a, g)?.scale(cfg.delta);
            }
            if let Some(xi) = xi {
                step += tangent_project(a, xi)?.scale(noise_scale);
            }
            let next = polar_retract(a, &step)?;
            Ok((pass, next))
        })
        .collect();

    let mut update = ParticleSet::zeros(n, d);
    let mut projectors = Vec::with_capacity(passes.len());
    for (a, res) in state.projectors.iter().zip(passes) {
        let (pass, next) = res?;
        lift_into(&mut update, a, &pass.phi);
        projectors.push(next);
    }
    let gamma = particle_avg_magnitude(&update);
    let iteration = state.iteration + 1;

    let mut adagrad = state.adagrad.clone();
    if let Some(ag) = adagrad.as_mut() {
        ag.apply(&mut update);
    }
    let mut particles = x.clone();
    axpy(&mut particles, cfg.epsilon, &update);
    if diverged(&particles) {
        return Err(Error::Divergence { iteration });
    }
    if iteration.is_multiple_of(cfg.reorthonormalize_every) {
        projectors = reorthonormalize(&projectors)?;
    }
    Ok(GsvgdState {
        particles,
        projectors,
        anneal: anneal_update(state.anneal, gamma, &cfg.anneal),
        iteration,
        adagrad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Svgd { epsilon: f64 },
    Gsvgd(GsvgdConfig),
}

/// Initial particle distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `N(mean, var·I)`.
    Isotropic { mean: Vec<f64>, var: f64 },
    Given(ParticleSet),
}

impl Init {
    pub fn draw(&self, n: usize, rng: &mut Rng) -> Result<ParticleSet> {
        match self {
            Init::Isotropic { mean, var } => {
                if !(*var >= 0.0) {
                    return Err(Error::InvalidArgument("initial variance must be ≥ 0".into()));
                }
                let d = mean.len();
                let sd = var.sqrt();
                let mut x = ParticleSet::zeros(n, d);
                for i in 0..n {
                    let row = x.row_mut(i);
                    for (r, mu) in row.iter_mut().zip(mean) {
                        *r = mu + sd * standard_normal(rng);
                    }
                }
                Ok(x)
            }
            Init::Given(p) => {
                if p.len() != n {
                    return Err(dim_err(format!("{} initial particles given but N = {n}", p.len())));
                }
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub n_particles: usize,
    pub iterations: usize,
    pub kernel: KernelPolicy,
    pub adagrad: bool,
    /// Metrics are recorded at iteration 0, every `metric_stride` iterations
    /// and at the final iteration.
    pub metric_stride: usize,
    pub seed: u64,
}

/// A metric evaluated on the current particles.
type MetricFn<'a> = Box<dyn Fn(&ParticleSet) -> Result<f64> + Send + Sync + 'a>;

pub struct MetricHook<'a> {
    pub name: String,
    pub eval: MetricFn<'a>,
}

impl<'a> MetricHook<'a> {
    pub fn new(name: impl Into<String>, eval: impl Fn(&ParticleSet) -> Result<f64> + Send + Sync + 'a) -> Self {
        Self { name: name.into(), eval: Box::new(eval) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub particles: ParticleSet,
    pub projectors: Vec<Projector>,
    pub temperature: Option<f64>,
    pub metrics: Vec<MetricSeries>,
    pub wall_time_secs: f64,
    pub config_echo: Option<String>,
    pub version: String,
}

/// Runs `iterations` steps of the configured method from `init`.
pub fn run(
    model: &dyn ScoreModel,
    cfg: &RunConfig,
    init: &Init,
    rng: &mut Rng,
    hooks: &[MetricHook<'_>],
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut series: Vec<MetricSeries> = hooks.iter().map(|h| MetricSeries::new(h.name.clone(), cfg.seed, "")).collect();
    let particles = init.draw(cfg.n_particles, rng)?;
    check_model(&particles, model)?;
    let stride = cfg.metric_stride.max(1);
    let record = |series: &mut Vec<MetricSeries>, it: usize, x: &ParticleSet| -> Result<()> {
        for (s, h) in series.iter_mut().zip(hooks) {
            s.push(it, (h.eval)(x)?)?;
        }
        Ok(())
    };
    record(&mut series, 0, &particles)?;

    let (particles, projectors, temperature) = match cfg.method {
        Method::Svgd { epsilon } => {
            let mut x = particles;
            let mut ag = cfg.adagrad.then(AdaGrad::new);
            for t in 1..=cfg.iterations {
                let scores = model.scores(&x);
                let mut phi = svgd_phi(&x, &scores, &cfg.kernel)?;
                if let Some(ag) = ag.as_mut() {
                    ag.apply(&mut phi);
                }
                axpy(&mut x, epsilon, &phi);
                if diverged(&x) {
                    return Err(Error::Divergence { iteration: t });
                }
                if t % stride == 0 || t == cfg.iterations {
                    record(&mut series, t, &x)?;
                }
            }
            (x, Vec::new(), None)
        }
        Method::Gsvgd(g) => {
            let mut state = GsvgdState::new(particles, &g)?;
            state.adagrad = cfg.adagrad.then(AdaGrad::new);
            for _ in 0..cfg.iterations {
                state = gsvgd_step(&state, model, &cfg.kernel, &g, rng)?;
                let t = state.iteration;
                if t % stride == 0 || t == cfg.iterations {
                    record(&mut series, t, &state.particles)?;
                }
            }
            (state.particles, state.projectors, Some(state.anneal.t))
        }
    };
    Ok(RunRecord {
        particles,
        projectors,
        temperature,
        metrics: series,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config_echo: None,
        version: crate::VERSION.to_string(),
    })
}
