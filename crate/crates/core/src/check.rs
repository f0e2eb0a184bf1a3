//! Invariant and oracle checks on small instances, run by `gsvgd check`.

use nalgebra::DMatrix;

use crate::discrepancy::{grad_ksd_matrix, ksd_a_vstat, ksd_vstat_matrix};
use crate::error::Result;
use crate::harness::ExperimentConfig;
use crate::kernel::{KernelPolicy, RadialKernelSpec};
use crate::manifold::{polar_retract, random_orthogonal, tangent_project, Projector};
use crate::metrics::energy_distance;
use crate::model::{make_multimodal_target, ConditionedDiffusion, GaussianTarget, ScoreModel};
use crate::particles::ParticleSet;
use crate::rng::{normal_vec, seeded, Rng};
use crate::sampler::{gsvgd_step, svgd_step, AnnealConfig, GsvgdConfig, GsvgdState};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_particles(n: usize, d: usize, rng: &mut Rng) -> ParticleSet {
    ParticleSet::from_vec(n, d, normal_vec(rng, n * d)).expect("shape")
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn projector_invariance() -> Result<(bool, String)> {
    let mut rng = seeded(11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = random_particles(12, 6, &mut rng);
        let s = GaussianTarget::standard(6).scores(&x);
        let a = Projector::random(6, 3, &mut rng)?;
        let c = random_orthogonal(3, &mut rng);
        let k = RadialKernelSpec::gaussian(0.7)?;
        let v1 = ksd_a_vstat(&x, &s, &a, &k)?;
        let v2 = ksd_a_vstat(&x, &s, &a.rotate(&c)?, &k)?;
        worst = worst.max((v1 - v2).abs());
    }
    Ok((worst <= 1e-10, format!("max |KSD_A − KSD_AC| = {worst:.2e}")))
}

fn gradient_fd() -> Result<(bool, String)> {
    let mut rng = seeded(12);
    let (n, d, m) = (10, 5, 2);
    let x = random_particles(n, d, &mut rng);
    let target = make_multimodal_target(d)?;
    let s = target.scores(&x);
    let a = Projector::random(d, m, &mut rng)?.into_matrix();
    let k = RadialKernelSpec::gaussian(0.9)?;
    let g = grad_ksd_matrix(&x, &s, &a, &k)?;
    let h = 1e-5;
    let mut fd = DMatrix::zeros(d, m);
    for i in 0..d {
        for j in 0..m {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[(i, j)] += h;
            am[(i, j)] -= h;
            fd[(i, j)] = (ksd_vstat_matrix(&x, &s, &ap, &k)? - ksd_vstat_matrix(&x, &s, &am, &k)?) / (2.0 * h);
        }
    }
    let rel = (&g - &fd).norm() / fd.norm().max(1e-12);
    Ok((rel <= 1e-5, format!("relative error {rel:.2e}")))
}

fn diffusion_fd() -> Result<(bool, String)> {
    let model = ConditionedDiffusion::reference();
    let mut rng = seeded(13);
    let w: Vec<f64> = normal_vec(&mut rng, model.n_steps).iter().map(|v| v * 0.1).collect();
    let s = model.score(&w);
    let h = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..w.len() {
        let mut p = w.clone();
        let mut q = w.clone();
        p[i] += h;
        q[i] -= h;
        let fd = (model.log_posterior(&p)? - model.log_posterior(&q)?) / (2.0 * h);
        num += (fd - s[i]).powi(2);
        den += fd * fd;
    }
    let rel = (num / den).sqrt();
    Ok((rel <= 1e-4, format!("relative error {rel:.2e}")))
}

fn svgd_reduction() -> Result<(bool, String)> {
    let d = 3;
    let target = GaussianTarget::isotropic(vec![0.5; d], 1.5);
    let mut rng = seeded(14);
    let x0 = random_particles(15, d, &mut rng);
    let policy = KernelPolicy::default();
    let cfg = GsvgdConfig {
        epsilon: 0.1,
        delta: 0.0,
        m: d,
        projectors: 1,
        anneal: AnnealConfig::frozen(),
        reorthonormalize_every: 1000,
    };
    let mut state = GsvgdState::new(x0.clone(), &cfg)?;
    let mut x = x0;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        x = svgd_step(&x, &target, &policy, cfg.epsilon)?;
        state = gsvgd_step(&state, &target, &policy, &cfg, &mut rng)?;
        for (a, b) in x.as_slice().iter().zip(state.particles.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max deviation {worst:.2e}")))
}

fn image_confinement() -> Result<(bool, String)> {
    let d = 8;
    let target = make_multimodal_target(d)?;
    let mut rng = seeded(15);
    let x0 = random_particles(20, d, &mut rng);
    let cfg = GsvgdConfig { projectors: 2, ..GsvgdConfig::new(d, 2) };
    let mut state = GsvgdState::new(x0, &cfg)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let next = gsvgd_step(&state, &target, &KernelPolicy::default(), &cfg, &mut rng)?;
        let mut basis = DMatrix::zeros(d, 4);
        basis.columns_mut(0, 2).copy_from(state.projectors[0].matrix());
        basis.columns_mut(2, 2).copy_from(state.projectors[1].matrix());
        let q = basis.qr().q();
        for i in 0..next.particles.len() {
            let disp: Vec<f64> = next.particles.row(i).iter().zip(state.particles.row(i)).map(|(a, b)| a - b).collect();
            let v = nalgebra::DVector::from_vec(disp);
            let r = &v - &q * (q.transpose() * &v);
            worst = worst.max(r.norm());
        }
        state = next;
    }
    Ok((worst <= 1e-10, format!("max residual {worst:.2e}")))
}

fn retraction_orthonormal() -> Result<(bool, String)> {
    let mut rng = seeded(16);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = Projector::random(7, 3, &mut rng)?;
        let g = DMatrix::from_vec(7, 3, normal_vec(&mut rng, 21));
        let t = tangent_project(&a, &g)?;
        let b = polar_retract(&a, &t.scale(0.3))?;
        worst = worst.max(b.orthonormality_error());
    }
    Ok((worst <= 1e-10, format!("max ‖AᵀA − I‖ = {worst:.2e}")))
}

fn energy_symmetry() -> Result<(bool, String)> {
    let mut rng = seeded(17);
    let x = random_particles(9, 3, &mut rng);
    let y = random_particles(7, 3, &mut rng);
    let a = energy_distance(&x, &y)?;
    let b = energy_distance(&y, &x)?;
    Ok((a == b && a >= 0.0 && energy_distance(&x, &x)? == 0.0, format!("{a:.6} vs {b:.6}")))
}

fn config_round_trip() -> Result<(bool, String)> {
    let cfg = ExperimentConfig::parse("method = gsvgd\ntarget = gaussian\nd = 50\nN = 500\niterations = 2000\nm = 1\nseed = 0\n")?;
    let again = ExperimentConfig::parse(&cfg.to_text())?;
    Ok((again == cfg && cfg.projectors == Some(20), format!("M = {:?}", cfg.projectors)))
}

/// Runs every check.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("ksd projector invariance", projector_invariance),
        check("ksd gradient vs finite differences", gradient_fd),
        check("diffusion score vs finite differences", diffusion_fd),
        check("gsvgd reduces to svgd", svgd_reduction),
        check("gsvgd displacement in projector span", image_confinement),
        check("retraction keeps orthonormality", retraction_orthonormal),
        check("energy distance symmetry", energy_symmetry),
        check("config round trip", config_round_trip),
    ]
}
