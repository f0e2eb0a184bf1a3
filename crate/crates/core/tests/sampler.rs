use gsvgd::kernel::{BandwidthRule, KernelPolicy, RadialKernelSpec};
use gsvgd::manifold::Projector;
use gsvgd::model::{make_multimodal_target, GaussianTarget, ScoreModel};
use gsvgd::rng::{normal_vec, seeded, Rng};
use gsvgd::sampler::*;
use gsvgd::{Error, ParticleSet};

fn particles(n: usize, d: usize, rng: &mut Rng) -> ParticleSet {
    ParticleSet::from_vec(n, d, normal_vec(rng, n * d)).unwrap()
}

fn frozen(m: usize, projectors: usize) -> GsvgdConfig {
    GsvgdConfig { epsilon: 0.1, delta: 0.0, m, projectors, anneal: AnnealConfig::frozen(), reorthonormalize_every: 1000 }
}

#[test]
fn svgd_single_particle_follows_score() {
    let target = GaussianTarget::isotropic(vec![1.0, -2.0], 0.5);
    let x = ParticleSet::from_rows(&[vec![0.3, 0.7]]).unwrap();
    let next = svgd_step(&x, &target, &KernelPolicy::default(), 0.2).unwrap();
    let s = target.score(x.row(0));
    for k in 0..2 {
        assert!((next.row(0)[k] - (x.row(0)[k] + 0.2 * s[k])).abs() < 1e-15);
    }
}

#[test]
fn svgd_repulsion_pushes_apart() {
    let target = GaussianTarget::standard(2);
    let x = ParticleSet::from_rows(&[vec![0.1, 0.0], vec![-0.1, 0.0]]).unwrap();
    let policy = KernelPolicy { bandwidth: BandwidthRule::Fixed(1.0), ..KernelPolicy::default() };
    let next = svgd_step(&x, &target, &policy, 0.05).unwrap();
    let before = (x.row(0)[0] - x.row(1)[0]).abs();
    let after = (next.row(0)[0] - next.row(1)[0]).abs();
    assert!(after > before, "{after} ≤ {before}");
}

#[test]
fn zero_step_is_identity() {
    let mut rng = seeded(1);
    let x = particles(10, 3, &mut rng);
    let target = GaussianTarget::standard(3);
    assert_eq!(svgd_step(&x, &target, &KernelPolicy::default(), 0.0).unwrap(), x);

    let cfg = GsvgdConfig { epsilon: 0.0, ..frozen(1, 3) };
    let state = GsvgdState::new(x.clone(), &cfg).unwrap();
    let next = gsvgd_step(&state, &target, &KernelPolicy::default(), &cfg, &mut rng).unwrap();
    assert_eq!(next.particles, x);
    assert_eq!(next.projectors, state.projectors);
    assert_eq!(next.iteration, 1);
    assert!(next.anneal.prev_gamma.is_some());
}

#[test]
fn gsvgd_phi_identity_matches_svgd_direction() {
    let mut rng = seeded(2);
    let x = particles(12, 4, &mut rng);
    let target = make_multimodal_target(4).unwrap();
    let s = target.scores(&x);
    let policy = KernelPolicy { bandwidth: BandwidthRule::Fixed(0.7), ..KernelPolicy::default() };
    let svgd = svgd_phi(&x, &s, &policy).unwrap();
    let k = RadialKernelSpec::gaussian(0.7).unwrap();
    let g = gsvgd_phi(&x, &s, &Projector::identity(4), &k).unwrap();
    for (a, b) in svgd.as_slice().iter().zip(g.as_slice()) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn gsvgd_phi_rows_lie_in_image() {
    let mut rng = seeded(3);
    let x = particles(15, 6, &mut rng);
    let s = particles(15, 6, &mut rng);
    let a = Projector::random(6, 2, &mut rng).unwrap();
    let k = RadialKernelSpec::imq(1.0).unwrap();
    let phi = gsvgd_phi(&x, &s, &a, &k).unwrap();
    let am = a.matrix();
    for row in phi.rows() {
        let v = nalgebra::DVector::from_row_slice(row);
        let r = &v - am * (am.transpose() * &v);
        assert!(r.norm() <= 1e-10);
    }
}

#[test]
fn gsvgd_phi_single_particle() {
    let mut rng = seeded(4);
    let x = particles(1, 5, &mut rng);
    let s = particles(1, 5, &mut rng);
    let a = Projector::random(5, 2, &mut rng).unwrap();
    let phi = gsvgd_phi(&x, &s, &a, &RadialKernelSpec::gaussian(1.0).unwrap()).unwrap();
    let sv = nalgebra::DVector::from_row_slice(s.row(0));
    let want = a.matrix() * (a.matrix().transpose() * sv);
    for k in 0..5 {
        assert!((phi.row(0)[k] - want[k]).abs() < 1e-14);
    }
}

#[test]
fn full_rank_gsvgd_reproduces_svgd() {
    let d = 5;
    let target = GaussianTarget::isotropic(vec![1.0; d], 2.0);
    let mut rng = seeded(5);
    let x0 = particles(30, d, &mut rng);
    let cfg = frozen(d, 1);
    let policy = KernelPolicy::default();
    let mut state = GsvgdState::new(x0.clone(), &cfg).unwrap();
    let mut x = x0;
    for _ in 0..50 {
        x = svgd_step(&x, &target, &policy, cfg.epsilon).unwrap();
        state = gsvgd_step(&state, &target, &policy, &cfg, &mut rng).unwrap();
        let dev = x.as_slice().iter().zip(state.particles.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-8, "deviation {dev}");
    }
}

#[test]
fn magnitude_cases() {
    assert_eq!(particle_avg_magnitude(&ParticleSet::zeros(3, 2)), 0.0);
    assert_eq!(particle_avg_magnitude(&ParticleSet::from_rows(&[vec![3.0, -4.0]]).unwrap()), 4.0);
    let two = ParticleSet::from_rows(&[vec![1.0, -0.5], vec![0.0, -3.0]]).unwrap();
    assert_eq!(particle_avg_magnitude(&two), 2.0);
}

#[test]
fn anneal_cases() {
    let m = 5;
    let cfg = AnnealConfig::with_projectors(m);
    let first = anneal_update(AnnealState::new(&cfg), 0.3, &cfg);
    assert_eq!(first.t, 1e-4);
    let bumped = anneal_update(first, 0.3 + 1e-5 * m as f64, &cfg);
    assert!((bumped.t - 1e-3).abs() < 1e-18);
    let moved = anneal_update(bumped, 1.0, &cfg);
    assert_eq!(moved.t, bumped.t);
    let capped = anneal_update(AnnealState { t: cfg.t_large, prev_gamma: Some(1.0) }, 1.0, &cfg);
    assert_eq!(capped.t, cfg.t_large);
}

#[test]
fn config_validation() {
    assert!(GsvgdConfig::new(10, 2).validate(10).is_ok());
    assert_eq!(GsvgdConfig::new(50, 1).projectors, 20);
    assert_eq!(GsvgdConfig::new(10, 3).projectors, 3);
    assert!(GsvgdConfig { projectors: 6, ..GsvgdConfig::new(10, 2) }.validate(10).is_err());
    let mut bad = GsvgdConfig::new(10, 2);
    bad.anneal.t0 = 2.0 * bad.anneal.t_large;
    assert!(bad.validate(10).is_err());
}

#[test]
fn projectors_stay_orthonormal_and_temperature_monotone() {
    let d = 10;
    let target = make_multimodal_target(d).unwrap();
    let mut rng = seeded(6);
    let cfg = GsvgdConfig { reorthonormalize_every: 7, ..GsvgdConfig::new(d, 2) };
    let mut state = GsvgdState::new(particles(40, d, &mut rng), &cfg).unwrap();
    let mut t_prev = state.anneal.t;
    for it in 1..=30 {
        state = gsvgd_step(&state, &target, &KernelPolicy::default(), &cfg, &mut rng).unwrap();
        for a in &state.projectors {
            assert!(a.orthonormality_error() <= 1e-10);
        }
        if it % 7 == 0 {
            for i in 0..state.projectors.len() {
                for j in (i + 1)..state.projectors.len() {
                    let cross = state.projectors[i].matrix().transpose() * state.projectors[j].matrix();
                    assert!(cross.norm() <= 1e-10);
                }
            }
        }
        assert!(state.anneal.t >= t_prev && state.anneal.t <= cfg.anneal.t_large);
        t_prev = state.anneal.t;
    }
}

#[test]
fn divergence_names_iteration() {
    let target = GaussianTarget::isotropic(vec![0.0; 2], 1e-300);
    let cfg = RunConfig {
        method: Method::Svgd { epsilon: 1e300 },
        n_particles: 5,
        iterations: 10,
        kernel: KernelPolicy::default(),
        adagrad: false,
        metric_stride: 1,
        seed: 0,
    };
    let init = Init::Isotropic { mean: vec![1.0; 2], var: 1.0 };
    match run(&target, &cfg, &init, &mut seeded(0), &[]) {
        Err(Error::Divergence { iteration }) => assert_eq!(iteration, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

fn small_run(method: Method, iterations: usize, seed: u64) -> RunRecord {
    let target = make_multimodal_target(6).unwrap();
    let cfg = RunConfig {
        method,
        n_particles: 25,
        iterations,
        kernel: KernelPolicy::default(),
        adagrad: false,
        metric_stride: 4,
        seed,
    };
    let init = Init::Isotropic { mean: vec![0.0; 6], var: 1.0 };
    let hooks = [MetricHook::new("var", gsvgd::metrics::dim_avg_marginal_variance)];
    run(&target, &cfg, &init, &mut seeded(seed), &hooks).unwrap()
}

#[test]
fn zero_iterations_returns_initial_particles() {
    let rec = small_run(Method::Gsvgd(GsvgdConfig::new(6, 2)), 0, 3);
    let init = Init::Isotropic { mean: vec![0.0; 6], var: 1.0 }.draw(25, &mut seeded(3)).unwrap();
    assert_eq!(rec.particles, init);
    assert_eq!(rec.metrics[0].points.len(), 1);
}

#[test]
fn runs_are_deterministic() {
    for method in [Method::Svgd { epsilon: 0.1 }, Method::Gsvgd(GsvgdConfig::new(6, 2))] {
        let a = small_run(method, 10, 9);
        let b = small_run(method, 10, 9);
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.projectors, b.projectors);
        let iters: Vec<usize> = a.metrics[0].points.iter().map(|p| p.0).collect();
        assert_eq!(iters, vec![0, 4, 8, 10]);
    }
}

#[test]
fn adagrad_runs_and_differs() {
    let target = GaussianTarget::standard(3);
    let mk = |adagrad| RunConfig {
        method: Method::Svgd { epsilon: 0.1 },
        n_particles: 10,
        iterations: 5,
        kernel: KernelPolicy::default(),
        adagrad,
        metric_stride: 5,
        seed: 0,
    };
    let init = Init::Isotropic { mean: vec![2.0; 3], var: 1.0 };
    let a = run(&target, &mk(false), &init, &mut seeded(0), &[]).unwrap();
    let b = run(&target, &mk(true), &init, &mut seeded(0), &[]).unwrap();
    assert!(b.particles.is_finite());
    assert_ne!(a.particles, b.particles);
}
