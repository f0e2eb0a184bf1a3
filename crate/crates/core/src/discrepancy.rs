//! Projected kernel Stein discrepancy `KSD_A` between the empirical particle
//! measure and a target known through its score, its gradients with respect
//! to the projector, and the Grassmann maximiser (GKSD).
//!
//! All estimators are V-statistics: the double sums include `i = j`.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{dim_err, Error, Result};
use crate::kernel::RadialKernelSpec;
use crate::manifold::{self, polar_retract, tangent_project, Projector, TangentVector};
use crate::model::ScoreModel;
use crate::particles::{dot, ParticleSet};
use crate::rng::Rng;

/// Rows of `points` mapped through `Aᵀ`, stored row-major as `N × m`.
pub fn project_rows(points: &ParticleSet, a: &DMatrix<f64>) -> Vec<f64> {
    let (n, d, m) = (points.len(), points.dim(), a.ncols());
    debug_assert_eq!(d, a.nrows());
    let mut out = vec![0.0; n * m];
    for k in 0..m {
        let col = a.column(k);
        let col = col.as_slice();
        for i in 0..n {
            out[i * m + k] = dot(points.row(i), col);
        }
    }
    out
}

/// Squared distances between projected rows, upper triangle in row order.
pub(crate) fn pair_sq_dists(p: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut sq = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let pi = &p[i * m..(i + 1) * m];
        for j in (i + 1)..n {
            let pj = &p[j * m..(j + 1) * m];
            let mut s = 0.0;
            for k in 0..m {
                let r = pi[k] - pj[k];
                s += r * r;
            }
            sq.push(s);
        }
    }
    sq
}

/// Quantities accumulated in one sweep over particle pairs in projected
/// coordinates.
#[derive(Debug, Clone, Default)]
pub(crate) struct SteinPass {
    /// `Σ_{i,j} h(i, j)`, unnormalised.
    pub value_sum: f64,
    /// `Σ_j [S_j k(P_j, P_i) + ∇₁k(P_j, P_i)]` per row `i` (`N × m`), unnormalised.
    pub phi: Vec<f64>,
    /// `∂(Σ h)/∂P_i` and `∂(Σ h)/∂S_i` (`N × m` each), unnormalised.
    pub grad_p: Vec<f64>,
    pub grad_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Want {
    pub phi: bool,
    pub grad: bool,
}

/// One symmetric sweep over unordered pairs. `p`, `s` are the projected
/// particles and scores; `sq` the upper-triangle squared distances.
pub(crate) fn stein_pass(
    p: &[f64],
    s: &[f64],
    n: usize,
    m: usize,
    sq: &[f64],
    kernel: &RadialKernelSpec,
    want: Want,
) -> SteinPass {
    match m {
        1 => stein_pass_fixed::<1>(p, s, n, sq, kernel, want),
        2 => stein_pass_fixed::<2>(p, s, n, sq, kernel, want),
        3 => stein_pass_fixed::<3>(p, s, n, sq, kernel, want),
        _ => stein_pass_dyn(p, s, n, m, sq, kernel, want),
    }
}

/// [`stein_pass`] with the projected dimension known at compile time.
fn stein_pass_fixed<const M: usize>(
    p: &[f64],
    s: &[f64],
    n: usize,
    sq: &[f64],
    kernel: &RadialKernelSpec,
    want: Want,
) -> SteinPass {
    let mf = M as f64;
    let p: &[[f64; M]] = as_rows(p, n);
    let s: &[[f64; M]] = as_rows(s, n);
    let mut phi = if want.phi { vec![[0.0; M]; n] } else { Vec::new() };
    let mut gp = if want.grad { vec![[0.0; M]; n] } else { Vec::new() };
    let mut gs = if want.grad { vec![[0.0; M]; n] } else { Vec::new() };
    let mut value_sum = 0.0;
    let d0 = kernel.derivs(0.0);
    let mut idx = 0;
    for i in 0..n {
        let (pi, si) = (&p[i], &s[i]);
        let ss: f64 = si.iter().map(|v| v * v).sum();
        value_sum += ss * d0.phi - 2.0 * mf * d0.d1;
        let mut phi_i = [0.0; M];
        let mut gp_i = [0.0; M];
        let mut gs_i = [0.0; M];
        for k in 0..M {
            phi_i[k] = si[k] * d0.phi;
            gs_i[k] = 2.0 * si[k] * d0.phi;
        }
        let row_sq = &sq[idx..idx + (n - i - 1)];
        idx += n - i - 1;
        for (off, &sqd) in row_sq.iter().enumerate() {
            let j = i + 1 + off;
            let (pj, sj) = (&p[j], &s[j]);
            let dv = kernel.derivs(sqd);
            let mut r = [0.0; M];
            let mut ab = 0.0;
            let mut dsr = 0.0;
            for k in 0..M {
                r[k] = pi[k] - pj[k];
                ab += si[k] * sj[k];
                dsr += (si[k] - sj[k]) * r[k];
            }
            value_sum += 2.0 * ab * dv.phi - 4.0 * dv.d1 * dsr - 8.0 * dv.d2 * sqd - 4.0 * mf * dv.d1;
            if want.phi {
                let phi_j = &mut phi[j];
                for k in 0..M {
                    phi_i[k] += sj[k] * dv.phi - 2.0 * dv.d1 * r[k];
                    phi_j[k] += si[k] * dv.phi + 2.0 * dv.d1 * r[k];
                }
            }
            if want.grad {
                let c = 2.0
                    * (2.0 * ab * dv.d1 - 4.0 * dv.d2 * dsr - 8.0 * dv.d3 * sqd - (8.0 + 4.0 * mf) * dv.d2);
                let (gp_j, gs_j) = (&mut gp[j], &mut gs[j]);
                for k in 0..M {
                    gs_i[k] += 2.0 * sj[k] * dv.phi - 4.0 * dv.d1 * r[k];
                    gs_j[k] += 2.0 * si[k] * dv.phi + 4.0 * dv.d1 * r[k];
                    let t = c * r[k] - 4.0 * dv.d1 * (si[k] - sj[k]);
                    gp_i[k] += t;
                    gp_j[k] -= t;
                }
            }
        }
        if want.phi {
            for k in 0..M {
                phi[i][k] += phi_i[k];
            }
        }
        if want.grad {
            for k in 0..M {
                gp[i][k] += gp_i[k];
                gs[i][k] += gs_i[k];
            }
        }
    }
    SteinPass { value_sum, phi: flatten(phi), grad_p: flatten(gp), grad_s: flatten(gs) }
}

fn as_rows<const M: usize>(v: &[f64], n: usize) -> &[[f64; M]] {
    let (rows, rest) = v[..n * M].as_chunks::<M>();
    debug_assert!(rest.is_empty());
    rows
}

fn flatten<const M: usize>(v: Vec<[f64; M]>) -> Vec<f64> {
    v.into_iter().flatten().collect()
}

fn stein_pass_dyn(
    p: &[f64],
    s: &[f64],
    n: usize,
    m: usize,
    sq: &[f64],
    kernel: &RadialKernelSpec,
    want: Want,
) -> SteinPass {

    let mf = m as f64;
    let mut out = SteinPass {
        value_sum: 0.0,
        phi: if want.phi { vec![0.0; n * m] } else { Vec::new() },
        grad_p: if want.grad { vec![0.0; n * m] } else { Vec::new() },
        grad_s: if want.grad { vec![0.0; n * m] } else { Vec::new() },
    };
    let d0 = kernel.derivs(0.0);
    let mut r = vec![0.0; m];
    let mut idx = 0;
    for i in 0..n {
        let pi = &p[i * m..(i + 1) * m];
        let si = &s[i * m..(i + 1) * m];
        // i = j
        let ss = dot(si, si);
        out.value_sum += ss * d0.phi - 2.0 * mf * d0.d1;
        if want.phi {
            for k in 0..m {
                out.phi[i * m + k] += si[k] * d0.phi;
            }
        }
        if want.grad {
            for k in 0..m {
                out.grad_s[i * m + k] += 2.0 * si[k] * d0.phi;
            }
        }
        for j in (i + 1)..n {
            let pj = &p[j * m..(j + 1) * m];
            let sj = &s[j * m..(j + 1) * m];
            let sqd = sq[idx];
            idx += 1;
            let dv = kernel.derivs(sqd);
            let mut ab = 0.0;
            let mut dsr = 0.0;
            for k in 0..m {
                r[k] = pi[k] - pj[k];
                ab += si[k] * sj[k];
                dsr += (si[k] - sj[k]) * r[k];
            }
            out.value_sum += 2.0 * ab * dv.phi - 4.0 * dv.d1 * dsr - 8.0 * dv.d2 * sqd - 4.0 * mf * dv.d1;
            if want.phi {
                let (lo, hi) = out.phi.split_at_mut(j * m);
                let phi_i = &mut lo[i * m..(i + 1) * m];
                let phi_j = &mut hi[..m];
                for k in 0..m {
                    phi_i[k] += sj[k] * dv.phi - 2.0 * dv.d1 * r[k];
                    phi_j[k] += si[k] * dv.phi + 2.0 * dv.d1 * r[k];
                }
            }
            if want.grad {
                let c = 2.0
                    * (2.0 * ab * dv.d1 - 4.0 * dv.d2 * dsr - 8.0 * dv.d3 * sqd - (8.0 + 4.0 * mf) * dv.d2);
                for k in 0..m {
                    out.grad_s[i * m + k] += 2.0 * sj[k] * dv.phi - 4.0 * dv.d1 * r[k];
                    out.grad_s[j * m + k] += 2.0 * si[k] * dv.phi + 4.0 * dv.d1 * r[k];
                    let t = c * r[k] - 4.0 * dv.d1 * (si[k] - sj[k]);
                    out.grad_p[i * m + k] += t;
                    out.grad_p[j * m + k] -= t;
                }
            }
        }
    }
    out
}

/// `Σ_i x_i g_iᵀ` for row-major `x` (`N × d`) and `g` (`N × m`), scaled.
pub(crate) fn accumulate_outer(x: &ParticleSet, g: &[f64], m: usize, scale: f64, into: &mut DMatrix<f64>) {
    let d = x.dim();
    for i in 0..x.len() {
        let xi = x.row(i);
        for k in 0..m {
            let gk = g[i * m + k] * scale;
            if gk == 0.0 {
                continue;
            }
            let mut col = into.column_mut(k);
            for a in 0..d {
                col[a] += xi[a] * gk;
            }
        }
    }
}

fn check_inputs(particles: &ParticleSet, scores: &ParticleSet, a: &DMatrix<f64>) -> Result<()> {
    if particles.is_empty() {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    if particles.len() != scores.len() || particles.dim() != scores.dim() {
        return Err(dim_err("particles and scores differ in shape"));
    }
    if a.nrows() != particles.dim() || a.ncols() == 0 {
        return Err(dim_err(format!(
            "projector is {}×{} but particles live in R^{}",
            a.nrows(),
            a.ncols(),
            particles.dim()
        )));
    }
    Ok(())
}

/// Projected particles and scores for a fixed projector and bandwidth.
#[derive(Debug, Clone)]
pub struct KsdWorkspace {
    n: usize,
    m: usize,
    proj_x: Vec<f64>,
    proj_s: Vec<f64>,
    kernel: RadialKernelSpec,
}

impl KsdWorkspace {
    pub fn new(
        particles: &ParticleSet,
        scores: &ParticleSet,
        a: &DMatrix<f64>,
        kernel: &RadialKernelSpec,
    ) -> Result<Self> {
        check_inputs(particles, scores, a)?;
        Ok(Self {
            n: particles.len(),
            m: a.ncols(),
            proj_x: project_rows(particles, a),
            proj_s: project_rows(scores, a),
            kernel: *kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> f64 {
        self.kernel.bandwidth()
    }

    pub fn projected_particles(&self) -> &[f64] {
        &self.proj_x
    }

    pub fn projected_scores(&self) -> &[f64] {
        &self.proj_s
    }

    /// Stein kernel `h(x_i, x_j)` in projected coordinates.
    pub fn pair_term(&self, i: usize, j: usize) -> f64 {
        let m = self.m;
        let (pi, pj) = (&self.proj_x[i * m..(i + 1) * m], &self.proj_x[j * m..(j + 1) * m]);
        let (si, sj) = (&self.proj_s[i * m..(i + 1) * m], &self.proj_s[j * m..(j + 1) * m]);
        let mut sqd = 0.0;
        let mut ab = 0.0;
        let mut sr = 0.0;
        for k in 0..m {
            let r = pi[k] - pj[k];
            sqd += r * r;
            ab += si[k] * sj[k];
            sr += si[k] * r;
        }
        let dv = self.kernel.derivs(sqd);
        ab * dv.phi - 4.0 * dv.d1 * sr - 4.0 * dv.d2 * sqd - 2.0 * m as f64 * dv.d1
    }

    pub fn value(&self) -> f64 {
        let sq = pair_sq_dists(&self.proj_x, self.n, self.m);
        let pass = stein_pass(&self.proj_x, &self.proj_s, self.n, self.m, &sq, &self.kernel, Want { phi: false, grad: false });
        pass.value_sum / (self.n * self.n) as f64
    }

    /// Bootstrap standard error of [`Self::value`].
    pub fn bootstrap_se(&self, resamples: usize, rng: &mut Rng) -> f64 {
        bootstrap_vstat_se(self.n, |i, j| self.pair_term(i, j), resamples, rng)
    }
}

/// Standard deviation of the V-statistic `N⁻² Σ h(i, j)` over multinomial
/// resamples of the indices.
pub fn bootstrap_vstat_se(n: usize, h: impl Fn(usize, usize) -> f64, resamples: usize, rng: &mut Rng) -> f64 {
    if n == 0 || resamples < 2 {
        return 0.0;
    }
    let mut counts = vec![0.0f64; resamples * n];
    for b in 0..resamples {
        for _ in 0..n {
            counts[b * n + rng.random_range(0..n)] += 1.0;
        }
    }
    let mut acc = vec![0.0; resamples];
    let mut row = vec![0.0; n];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = h(i, j);
        }
        for b in 0..resamples {
            let c = &counts[b * n..(b + 1) * n];
            if c[i] == 0.0 {
                continue;
            }
            acc[b] += c[i] * dot(c, &row);
        }
    }
    let nn = (n * n) as f64;
    let vals: Vec<f64> = acc.iter().map(|v| v / nn).collect();
    sample_sd(&vals)
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// One-sample V-statistic of `KSD_A`.
pub fn ksd_a_vstat(particles: &ParticleSet, scores: &ParticleSet, a: &Projector, kernel: &RadialKernelSpec) -> Result<f64> {
    ksd_vstat_matrix(particles, scores, a.matrix(), kernel)
}

/// [`ksd_a_vstat`] for an arbitrary `d × m` matrix (not necessarily orthonormal).
pub fn ksd_vstat_matrix(
    particles: &ParticleSet,
    scores: &ParticleSet,
    a: &DMatrix<f64>,
    kernel: &RadialKernelSpec,
) -> Result<f64> {
    Ok(KsdWorkspace::new(particles, scores, a, kernel)?.value())
}

/// Euclidean gradient of [`ksd_a_vstat`] with respect to the entries of `A`,
/// bandwidth held fixed.
pub fn grad_a_ksd(particles: &ParticleSet, scores: &ParticleSet, a: &Projector, kernel: &RadialKernelSpec) -> Result<DMatrix<f64>> {
    grad_ksd_matrix(particles, scores, a.matrix(), kernel)
}

pub fn grad_ksd_matrix(
    particles: &ParticleSet,
    scores: &ParticleSet,
    a: &DMatrix<f64>,
    kernel: &RadialKernelSpec,
) -> Result<DMatrix<f64>> {
    Ok(value_and_grad(particles, scores, a, kernel)?.1)
}

pub(crate) fn value_and_grad(
    particles: &ParticleSet,
    scores: &ParticleSet,
    a: &DMatrix<f64>,
    kernel: &RadialKernelSpec,
) -> Result<(f64, DMatrix<f64>)> {
    let ws = KsdWorkspace::new(particles, scores, a, kernel)?;
    let (n, m) = (ws.n, ws.m);
    let sq = pair_sq_dists(&ws.proj_x, n, m);
    let pass = stein_pass(&ws.proj_x, &ws.proj_s, n, m, &sq, kernel, Want { phi: false, grad: true });
    let scale = 1.0 / (n * n) as f64;
    let mut g = DMatrix::zeros(a.nrows(), m);
    accumulate_outer(particles, &pass.grad_p, m, scale, &mut g);
    accumulate_outer(scores, &pass.grad_s, m, scale, &mut g);
    Ok((pass.value_sum * scale, g))
}

/// Riemannian gradient `Π_A G`.
pub fn riemannian_grad(a: &Projector, g: &DMatrix<f64>) -> Result<TangentVector> {
    tangent_project(a, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GksdOptions {
    pub ascent_steps: usize,
    pub step: f64,
    /// Number of starting projectors: one-hot blocks first, then uniform draws.
    pub restarts: usize,
}

impl GksdOptions {
    /// `⌊d/m⌋` one-hot starts plus four random starts, 200 ascent steps.
    pub fn default_for(d: usize, m: usize, step: f64) -> Self {
        Self { ascent_steps: 200, step, restarts: d / m.max(1) + 4 }
    }
}

#[derive(Debug, Clone)]
pub struct GksdEstimate {
    pub value: f64,
    pub projector: Projector,
}

/// Riemannian gradient ascent of `A ↦ KSD_A` over `Gr(d, m)` from several
/// starts; returns the best value seen and its projector.
pub fn gksd_estimate(
    particles: &ParticleSet,
    scores: &ParticleSet,
    kernel: &RadialKernelSpec,
    m: usize,
    opts: GksdOptions,
    rng: &mut Rng,
) -> Result<GksdEstimate> {
    let d = particles.dim();
    if m == 0 || m > d {
        return Err(Error::InvalidArgument(format!("projection dimension {m} must be in 1..={d}")));
    }
    if opts.ascent_steps == 0 || opts.restarts == 0 {
        return Err(Error::InvalidArgument("ascent_steps and restarts must be ≥ 1".into()));
    }
    if m == d {
        let a = Projector::identity(d);
        let value = ksd_a_vstat(particles, scores, &a, kernel)?;
        return Ok(GksdEstimate { value, projector: a });
    }
    let blocks = d / m;
    let mut best: Option<GksdEstimate> = None;
    for r in 0..opts.restarts {
        let mut a = if r < blocks { Projector::one_hot(d, m, r * m)? } else { Projector::random(d, m, rng)? };
        for step in 0..=opts.ascent_steps {
            let (value, g) = value_and_grad(particles, scores, a.matrix(), kernel)?;
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(GksdEstimate { value, projector: a.clone() });
            }
            if step == opts.ascent_steps {
                break;
            }
            let rg = riemannian_grad(&a, &g)?;
            a = polar_retract(&a, &rg.scale(opts.step))?;
        }
    }
    Ok(best.expect("at least one candidate evaluated"))
}

fn score_diffs(samples: &ParticleSet, p: &dyn ScoreModel, q: &dyn ScoreModel) -> Result<ParticleSet> {
    if p.dim() != samples.dim() || q.dim() != samples.dim() {
        return Err(dim_err("score models and samples differ in dimension"));
    }
    let sp = p.scores(samples);
    let sq = q.scores(samples);
    let mut out = sp;
    for (o, b) in out.as_mut_slice().iter_mut().zip(sq.as_slice()) {
        *o -= b;
    }
    Ok(out)
}

/// Quadratic-form expression of `KSD_A` using both scores:
/// `N⁻² Σ_{i,j} (Aᵀδ_i)·(Aᵀδ_j) k(Aᵀx_i, Aᵀx_j)` with `δ = s_p − s_q`.
pub fn ksd_a_two_sample_oracle(
    samples: &ParticleSet,
    p: &dyn ScoreModel,
    q: &dyn ScoreModel,
    a: &Projector,
    kernel: &RadialKernelSpec,
) -> Result<f64> {
    two_sample_matrix(samples, p, q, a.matrix(), kernel)
}

pub fn two_sample_matrix(
    samples: &ParticleSet,
    p: &dyn ScoreModel,
    q: &dyn ScoreModel,
    a: &DMatrix<f64>,
    kernel: &RadialKernelSpec,
) -> Result<f64> {
    let ws = TwoSampleWorkspace::new(samples, p, q, a, kernel)?;
    let n = ws.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += ws.pair_term(i, j);
        }
    }
    Ok(total / (n * n) as f64)
}

/// Projected samples and score differences for the two-sample expression.
#[derive(Debug, Clone)]
pub struct TwoSampleWorkspace {
    n: usize,
    m: usize,
    proj_x: Vec<f64>,
    proj_delta: Vec<f64>,
    delta: ParticleSet,
    kernel: RadialKernelSpec,
}

impl TwoSampleWorkspace {
    pub fn new(
        samples: &ParticleSet,
        p: &dyn ScoreModel,
        q: &dyn ScoreModel,
        a: &DMatrix<f64>,
        kernel: &RadialKernelSpec,
    ) -> Result<Self> {
        let delta = score_diffs(samples, p, q)?;
        check_inputs(samples, &delta, a)?;
        Ok(Self {
            n: samples.len(),
            m: a.ncols(),
            proj_x: project_rows(samples, a),
            proj_delta: project_rows(&delta, a),
            delta,
            kernel: *kernel,
        })
    }

    pub fn pair_term(&self, i: usize, j: usize) -> f64 {
        let m = self.m;
        let mut sqd = 0.0;
        let mut dd = 0.0;
        for k in 0..m {
            let r = self.proj_x[i * m + k] - self.proj_x[j * m + k];
            sqd += r * r;
            dd += self.proj_delta[i * m + k] * self.proj_delta[j * m + k];
        }
        dd * self.kernel.phi(sqd)
    }
}

/// Riemannian gradient of the two-sample expression:
/// `2Π_A N⁻² Σ_{i,j} [k_ij δ_j δ_iᵀA + Φ′(‖Aᵀ(x_i − x_j)‖²)(δ_jᵀAAᵀδ_i)(x_i − x_j)(x_i − x_j)ᵀA]`.
pub fn grad_alpha_oracle(
    samples: &ParticleSet,
    p: &dyn ScoreModel,
    q: &dyn ScoreModel,
    a: &Projector,
    kernel: &RadialKernelSpec,
) -> Result<DMatrix<f64>> {
    let g = grad_alpha_oracle_euclidean(samples, p, q, a.matrix(), kernel)?;
    Ok(riemannian_grad(a, &g)?.delta)
}

/// Euclidean version of [`grad_alpha_oracle`] for an arbitrary `d × m` matrix.
pub fn grad_alpha_oracle_euclidean(
    samples: &ParticleSet,
    p: &dyn ScoreModel,
    q: &dyn ScoreModel,
    a: &DMatrix<f64>,
    kernel: &RadialKernelSpec,
) -> Result<DMatrix<f64>> {
    let ws = TwoSampleWorkspace::new(samples, p, q, a, kernel)?;
    let (n, m) = (ws.n, ws.m);
    // c_i = Σ_j k_ij Aᵀδ_j ; e_i = Σ_j Φ′_ij (Aᵀδ_i·Aᵀδ_j)(P_i − P_j)
    let mut c = vec![0.0; n * m];
    let mut e = vec![0.0; n * m];
    for i in 0..n {
        let pi = &ws.proj_x[i * m..(i + 1) * m];
        let di = &ws.proj_delta[i * m..(i + 1) * m];
        for j in 0..n {
            let pj = &ws.proj_x[j * m..(j + 1) * m];
            let dj = &ws.proj_delta[j * m..(j + 1) * m];
            let mut sqd = 0.0;
            for k in 0..m {
                sqd += (pi[k] - pj[k]) * (pi[k] - pj[k]);
            }
            let dv = kernel.derivs(sqd);
            let w = dv.d1 * dot(di, dj);
            for k in 0..m {
                c[i * m + k] += dv.phi * dj[k];
                e[i * m + k] += w * (pi[k] - pj[k]);
            }
        }
    }
    let scale = 2.0 / (n * n) as f64;
    let mut g = DMatrix::zeros(a.nrows(), m);
    accumulate_outer(&ws.delta, &c, m, scale, &mut g);
    accumulate_outer(samples, &e, m, 2.0 * scale, &mut g);
    Ok(g)
}

/// Random orthogonal matrix helper re-exported for invariance checks.
pub fn random_rotation(m: usize, rng: &mut Rng) -> DMatrix<f64> {
    manifold::random_orthogonal(m, rng)
}
