//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gsvgd::discrepancy::{
    bootstrap_vstat_se, grad_alpha_oracle, grad_ksd_matrix, gksd_estimate, ksd_a_vstat, ksd_vstat_matrix,
    GksdOptions, KsdWorkspace, TwoSampleWorkspace,
};
use gsvgd::harness::{interval, run_experiment, ExperimentConfig, MetricRow};
use gsvgd::kernel::{median_heuristic, KernelPolicy, RadialKernelSpec};
use gsvgd::manifold::{random_orthogonal, subspace_distance, Projector};
use gsvgd::model::{make_multimodal_target, ConditionedDiffusion, GaussianTarget, ScoreModel};
use gsvgd::rng::{normal_vec, seeded, stream, Rng};
use gsvgd::sampler::{gsvgd_step, svgd_step, AnnealConfig, GsvgdConfig, GsvgdState};
use gsvgd::ParticleSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn particles(n: usize, d: usize, rng: &mut Rng) -> ParticleSet {
    ParticleSet::from_vec(n, d, normal_vec(rng, n * d)).unwrap()
}

fn gate(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_projector_invariance() -> Outcome {
    let mut rng = seeded(101);
    let mut worst = 0.0f64;
    for t in 0..20 {
        let d = 2 + t % 7;
        let m = 1 + t % d;
        let n = 5 + 3 * (t % 6);
        let x = particles(n, d, &mut rng);
        let s = make_multimodal_target(d.max(2)).unwrap().scores(&x);
        let a = Projector::random(d, m, &mut rng).unwrap();
        let c = random_orthogonal(m, &mut rng);
        let k = if t % 2 == 0 { RadialKernelSpec::gaussian(0.8).unwrap() } else { RadialKernelSpec::imq(1.3).unwrap() };
        let v1 = ksd_a_vstat(&x, &s, &a, &k).unwrap();
        let v2 = ksd_a_vstat(&x, &s, &a.rotate(&c).unwrap(), &k).unwrap();
        worst = worst.max((v1 - v2).abs());
    }
    gate(worst <= 1e-10, format!("max |KSD_A − KSD_AC| = {worst:.2e} over 20 triples (tol 1e-10)"))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

fn c2_gradient_oracles() -> Outcome {
    let mut rng = seeded(102);
    let h = 1e-5;
    let mut worst_ksd = 0.0f64;
    for t in 0..100 {
        let d = rng.random_range(2..=10);
        let m = rng.random_range(1..=3.min(d));
        let n = rng.random_range(2..=20);
        let x = particles(n, d, &mut rng);
        let s = make_multimodal_target(d).unwrap().scores(&x);
        let a = Projector::random(d, m, &mut rng).unwrap().into_matrix();
        let sigma2 = rng.random_range(0.5..2.0);
        let k = if t % 2 == 0 { RadialKernelSpec::gaussian(sigma2).unwrap() } else { RadialKernelSpec::imq(sigma2).unwrap() };
        let g = grad_ksd_matrix(&x, &s, &a, &k).unwrap();
        let mut fd = DMatrix::zeros(d, m);
        for i in 0..d {
            for j in 0..m {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[(i, j)] += h;
                am[(i, j)] -= h;
                fd[(i, j)] = (ksd_vstat_matrix(&x, &s, &ap, &k).unwrap() - ksd_vstat_matrix(&x, &s, &am, &k).unwrap()) / (2.0 * h);
            }
        }
        worst_ksd = worst_ksd.max(rel_err(g.as_slice(), fd.as_slice()));
    }
    let mut worst_diff = 0.0f64;
    for _ in 0..50 {
        let y: Vec<f64> = normal_vec(&mut rng, ConditionedDiffusion::N_OBS);
        let model = ConditionedDiffusion::new(y, ConditionedDiffusion::SIGMA_OBS).unwrap();
        let w: Vec<f64> = normal_vec(&mut rng, model.n_steps).iter().map(|v| v * model.dt.sqrt()).collect();
        let s = model.score(&w);
        let fd: Vec<f64> = (0..w.len())
            .map(|i| {
                let mut p = w.clone();
                let mut q = w.clone();
                p[i] += h;
                q[i] -= h;
                (model.log_posterior(&p).unwrap() - model.log_posterior(&q).unwrap()) / (2.0 * h)
            })
            .collect();
        worst_diff = worst_diff.max(rel_err(&s, &fd));
    }
    gate(
        worst_ksd <= 1e-5 && worst_diff <= 1e-4,
        format!("ksd grad max rel err {worst_ksd:.2e} (tol 1e-5, 100 cases); diffusion score max rel err {worst_diff:.2e} (tol 1e-4, 50 cases)"),
    )
}

fn c3_svgd_reduction() -> Outcome {
    let d = 5;
    let target = GaussianTarget::standard(d);
    let mut rng = seeded(103);
    let x0 = ParticleSet::from_vec(100, d, normal_vec(&mut rng, 100 * d).iter().map(|v| 2.0 + 2f64.sqrt() * v).collect()).unwrap();
    let cfg = GsvgdConfig { epsilon: 0.1, delta: 0.0, m: d, projectors: 1, anneal: AnnealConfig::frozen(), reorthonormalize_every: 1000 };
    let policy = KernelPolicy::default();
    let mut state = GsvgdState::new(x0.clone(), &cfg).unwrap();
    let mut x = x0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        x = svgd_step(&x, &target, &policy, cfg.epsilon).unwrap();
        state = gsvgd_step(&state, &target, &policy, &cfg, &mut rng).unwrap();
        for (a, b) in x.as_slice().iter().zip(state.particles.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    gate(worst <= 1e-8, format!("max deviation over 50 steps {worst:.2e} (tol 1e-8)"))
}

fn c4_image_confinement() -> Outcome {
    let d = 20;
    let target = make_multimodal_target(d).unwrap();
    let mut rng = seeded(104);
    let cfg = GsvgdConfig { projectors: 5, ..GsvgdConfig::new(d, 2) };
    let mut state = GsvgdState::new(particles(100, d, &mut rng), &cfg).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let next = gsvgd_step(&state, &target, &KernelPolicy::default(), &cfg, &mut rng).unwrap();
        let mut basis = DMatrix::zeros(d, 10);
        for (l, a) in state.projectors.iter().enumerate() {
            basis.columns_mut(2 * l, 2).copy_from(a.matrix());
        }
        let q = basis.svd(true, false).u.unwrap();
        for i in 0..next.particles.len() {
            let v = DVector::from_iterator(d, next.particles.row(i).iter().zip(state.particles.row(i)).map(|(a, b)| a - b));
            worst = worst.max((&v - &q * (q.transpose() * &v)).norm());
        }
        state = next;
    }
    gate(worst <= 1e-10, format!("max residual outside projector span {worst:.2e} over 100 steps (tol 1e-10)"))
}

/// `N(μ, Σ)` with a random mean and random SPD covariance near the identity.
fn perturbed_gaussian(d: usize, scale: f64, rng: &mut Rng) -> GaussianTarget {
    let mean: Vec<f64> = normal_vec(rng, d).iter().map(|v| scale * v).collect();
    let b = DMatrix::from_vec(d, d, normal_vec(rng, d * d)) * scale;
    let cov = DMatrix::identity(d, d) + &b * b.transpose();
    GaussianTarget::new(mean, cov).unwrap()
}

fn c5_two_sample_equivalence() -> Outcome {
    let (d, m, n) = (3, 2, 5000);
    let mut passes = 0;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = stream(105, seed);
        let q = GaussianTarget::standard(d);
        let p = perturbed_gaussian(d, 0.4, &mut rng);
        let a = Projector::random(d, m, &mut rng).unwrap();
        let k = RadialKernelSpec::gaussian(1.0).unwrap();
        let x = q.sample(n, &mut rng);
        let one = KsdWorkspace::new(&x, &p.scores(&x), a.matrix(), &k).unwrap();
        let two = TwoSampleWorkspace::new(&x, &p, &q, a.matrix(), &k).unwrap();
        let v1 = one.value();
        let mut v2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                v2 += two.pair_term(i, j);
            }
        }
        v2 /= (n * n) as f64;
        let se = bootstrap_vstat_se(n, |i, j| one.pair_term(i, j) - two.pair_term(i, j), 200, &mut rng);
        let z = (v1 - v2).abs() / se;
        worst = worst.max(z);
        if z <= 3.0 {
            passes += 1;
        }
    }
    gate(passes >= 9, format!("{passes}/10 seeds within 3 bootstrap SE (max |Δ|/SE = {worst:.2})"))
}

/// Gaussian kernel with the median-heuristic bandwidth of the unprojected sample.
fn raw_median_kernel(x: &ParticleSet) -> RadialKernelSpec {
    let rows: Vec<Vec<f64>> = x.rows().map(|r| r.to_vec()).collect();
    RadialKernelSpec::gaussian(median_heuristic(&rows, x.len()).unwrap().sigma2).unwrap()
}

fn c6_optimal_projection() -> Outcome {
    let (d, n) = (10, 2000);
    let p = make_multimodal_target(d).unwrap();
    let q = GaussianTarget::standard(d);
    let a0 = Projector::one_hot(d, 2, 0).unwrap();
    let at_a0: Vec<f64> = (0..10u64)
        .map(|seed| {
            let x = q.sample(n, &mut stream(106, seed));
            grad_alpha_oracle(&x, &p, &q, &a0, &raw_median_kernel(&x)).unwrap().norm()
        })
        .collect();
    let mut rng = seeded(1060);
    let random: Vec<f64> = (0..20u64)
        .map(|r| {
            let a = Projector::random(d, 2, &mut rng).unwrap();
            let x = q.sample(n, &mut stream(1061, r));
            grad_alpha_oracle(&x, &p, &q, &a, &raw_median_kernel(&x)).unwrap().norm()
        })
        .collect();
    let (m0, mr) = (median(at_a0), median(random));
    gate(m0 <= 0.1 * mr, format!("median ‖grad‖ at A₀ = {m0:.3e}, at random projectors = {mr:.3e}, ratio {:.3} (tol 0.1)", m0 / mr))
}

fn c7_fixed_projection_blind_spot() -> Outcome {
    let n = 4000;
    let mut rng = seeded(107);
    let qd = GaussianTarget::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
    let p = GaussianTarget::standard(2);
    let x = qd.sample(n, &mut rng);
    let s = p.scores(&x);
    let k = raw_median_kernel(&x);

    let e1 = Projector::one_hot(2, 1, 0).unwrap();
    let e2 = Projector::one_hot(2, 1, 1).unwrap();
    let ws = KsdWorkspace::new(&x, &s, e1.matrix(), &k).unwrap();
    let at_e1 = ws.value();
    let bound = 3.0 * ws.bootstrap_se(200, &mut rng);

    let opts = GksdOptions { ascent_steps: 30, step: 1.0, restarts: 3 };
    let est = gksd_estimate(&x, &s, &k, 1, opts, &mut rng).unwrap();
    let to_e2 = subspace_distance(&est.projector, &e2).unwrap();

    // grid oracle over the half circle
    let grid = 90;
    let (mut best_theta, mut best_val) = (0.0, f64::NEG_INFINITY);
    for g in 0..grid {
        let theta = std::f64::consts::PI * g as f64 / grid as f64;
        let a = Projector::new(DMatrix::from_vec(2, 1, vec![theta.cos(), theta.sin()])).unwrap();
        let v = ksd_a_vstat(&x, &s, &a, &k).unwrap();
        if v > best_val {
            best_val = v;
            best_theta = theta;
        }
    }
    let grid_a = Projector::new(DMatrix::from_vec(2, 1, vec![best_theta.cos(), best_theta.sin()])).unwrap();
    let to_grid = subspace_distance(&est.projector, &grid_a).unwrap();
    let ok = at_e1.abs() <= bound && est.value > 10.0 * bound && to_e2 <= 0.1 && to_grid <= 0.1 && est.value >= best_val - 1e-3 * best_val.abs();
    gate(
        ok,
        format!(
            "KSD(e1) = {at_e1:.2e}, 3·SE = {bound:.2e}, GKSD = {:.3e} ({:.0}× bound), dist to e2 = {to_e2:.3}, dist to grid argmax = {to_grid:.3}, grid max = {best_val:.3e}",
            est.value,
            est.value / bound
        ),
    )
}

fn config(method: &str, target: &str, d: usize, m: usize, reps: usize, extra: &str) -> ExperimentConfig {
    let dir = std::env::temp_dir().join(format!("gsvgd-acceptance-{method}-{target}-{d}-{}", std::process::id()));
    let text = format!(
        "method = {method}\ntarget = {target}\nd = {d}\nN = 500\niterations = 2000\nm = {m}\nepsilon = 0.5\n\
         seed = 2024\nrepetitions = {reps}\nmetric_stride = 2000\noutput = {}\n{extra}",
        dir.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn final_values(rows: &[MetricRow], metric: &str) -> Vec<f64> {
    let last = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    rows.iter().filter(|r| r.metric == metric && r.iteration == last).map(|r| r.value).collect()
}

fn run_metric(cfg: &ExperimentConfig, metric: &str) -> Result<Vec<f64>, String> {
    let out = run_experiment(cfg).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&cfg.output);
    if !out.summary.divergences.is_empty() {
        return Err(format!("divergences: {:?}", out.summary.divergences));
    }
    Ok(final_values(&out.rows, metric))
}

fn c8_marginal_variance() -> Outcome {
    let mut svgd = Vec::new();
    let mut gsvgd = Vec::new();
    for d in [10, 30, 50] {
        svgd.push(interval(&run_metric(&config("svgd", "gaussian", d, 1, 5, ""), "dim_avg_var")?).mean);
        gsvgd.push(interval(&run_metric(&config("gsvgd", "gaussian", d, 1, 5, ""), "dim_avg_var")?).mean);
    }
    let decreasing = svgd.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && svgd[2] <= 0.5 && gsvgd.iter().all(|v| (0.8..=1.2).contains(v));
    gate(ok, format!("d = 10/30/50: SVGD {:.3}/{:.3}/{:.3}, GSVGD(m=1) {:.3}/{:.3}/{:.3}", svgd[0], svgd[1], svgd[2], gsvgd[0], gsvgd[1], gsvgd[2]))
}

fn se(v: &[f64]) -> f64 {
    let iv = interval(v);
    (iv.ci_high - iv.mean) / 1.96
}

fn c9_multimodal_energy() -> Outcome {
    let s = run_metric(&config("svgd", "multimodal", 50, 2, 5, ""), "energy_distance")?;
    let g = run_metric(&config("gsvgd", "multimodal", 50, 2, 5, ""), "energy_distance")?;
    let (ms, mg) = (interval(&s).mean, interval(&g).mean);
    let se_gap = (se(&s).powi(2) + se(&g).powi(2)).sqrt();
    gate(mg < ms && ms - mg > 2.0 * se_gap, format!("energy distance SVGD {ms:.4}, GSVGD(m=2) {mg:.4}, gap {:.4} vs 2·SE {:.4}", ms - mg, 2.0 * se_gap))
}

fn c10_xshaped_covariance() -> Outcome {
    let s = interval(&run_metric(&config("svgd", "xshaped", 20, 2, 5, ""), "cov_error_frobenius")?).mean;
    let g = interval(&run_metric(&config("gsvgd", "xshaped", 20, 2, 5, ""), "cov_error_frobenius")?).mean;
    gate(g < s, format!("covariance error SVGD {s:.4}, GSVGD(m=2) {g:.4}"))
}

fn per_iteration_time(projectors: usize) -> Duration {
    let (d, n, m) = (40, 300, 2);
    let target = make_multimodal_target(d).unwrap();
    let cfg = GsvgdConfig { projectors, ..GsvgdConfig::new(d, m) };
    let mut rng = seeded(111);
    let mut state = GsvgdState::new(particles(n, d, &mut rng), &cfg).unwrap();
    let mut best = Duration::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        for _ in 0..4 {
            state = gsvgd_step(&state, &target, &KernelPolicy::default(), &cfg, &mut rng).unwrap();
        }
        best = best.min(t.elapsed() / 4);
    }
    best
}

fn c11_determinism_and_cost() -> Outcome {
    let base = std::env::temp_dir().join(format!("gsvgd-acceptance-det-{}", std::process::id()));
    let mut csvs = Vec::new();
    for run in 0..2 {
        let text = format!(
            "method = gsvgd\ntarget = xshaped\nd = 6\nN = 40\niterations = 30\nm = 2\nseed = 5\nrepetitions = 2\nmetric_stride = 10\noutput = {}\n",
            base.join(run.to_string()).display()
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        csvs.push(std::fs::read(cfg.output.join("metrics.csv")).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&base);
    let identical = csvs[0] == csvs[1] && !csvs[0].is_empty();
    let t1 = per_iteration_time(5);
    let t2 = per_iteration_time(10);
    let ratio = t2.as_secs_f64() / t1.as_secs_f64();
    gate(
        identical && (1.5..=3.0).contains(&ratio),
        format!("CSV byte-identical: {identical}; per-iteration time M=5 {t1:?}, M=10 {t2:?}, ratio {ratio:.2} (range [1.5, 3.0])"),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 projector invariance", c1_projector_invariance),
        ("2 gradient oracles", c2_gradient_oracles),
        ("3 svgd reduction", c3_svgd_reduction),
        ("4 image confinement", c4_image_confinement),
        ("5 one-sample vs two-sample ksd", c5_two_sample_equivalence),
        ("6 optimal projection critical point", c6_optimal_projection),
        ("7 fixed projection blind spot", c7_fixed_projection_blind_spot),
        ("8 dimension-averaged marginal variance", c8_marginal_variance),
        ("9 multimodal energy distance", c9_multimodal_energy),
        ("10 x-shaped covariance error", c10_xshaped_covariance),
        ("11 determinism and cost scaling", c11_determinism_and_cost),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.starts_with(&format!("{p} "))) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
