//! Experiment configuration, seeded repetitions and result files.
//!
//! # Config format
//!
//! One `key = value` pair per line; `#` starts a comment; nested keys are
//! dotted (`anneal.t0 = 1e-4`). See [`ExperimentConfig::to_text`] for the
//! canonical form, which parses back to the same config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{BandwidthRule, KernelFamily, KernelPolicy};
use crate::manifold::default_projector_count;
use crate::metrics::{
    covariance_error, dim_avg_marginal_variance, EnergyReference, COV_ERROR, DIM_AVG_VAR, ENERGY_DISTANCE,
};
use crate::model::{make_multimodal_target, make_xshaped_target_with, ConditionedDiffusion, GaussianTarget, ScoreModel};
use crate::particles::ParticleSet;
use crate::rng::{self, Rng};
use crate::sampler::{self, AnnealConfig, GsvgdConfig, Init, Method, MetricHook, RunConfig};

pub use crate::sampler::RunRecord;

/// Stream id reserved for ground-truth draws (repetitions use `0..R`).
pub const GROUND_TRUTH_STREAM: u64 = u64::MAX;
pub const DEFAULT_GROUND_TRUTH_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Svgd,
    Gsvgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Gaussian,
    Multimodal,
    Xshaped,
    Diffusion,
}

impl MethodKind {
    fn name(self) -> &'static str {
        match self {
            MethodKind::Svgd => "svgd",
            MethodKind::Gsvgd => "gsvgd",
        }
    }
}

impl TargetKind {
    fn name(self) -> &'static str {
        match self {
            TargetKind::Gaussian => "gaussian",
            TargetKind::Multimodal => "multimodal",
            TargetKind::Xshaped => "xshaped",
            TargetKind::Diffusion => "diffusion",
        }
    }
}

/// Fully validated experiment description with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: MethodKind,
    pub target: TargetKind,
    pub d: usize,
    pub n_particles: usize,
    pub iterations: usize,
    pub m: Option<usize>,
    /// Projector count `M`; resolved for `gsvgd`.
    pub projectors: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub anneal: AnnealConfig,
    pub reorthonormalize_every: usize,
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthRule,
    pub adagrad: bool,
    pub seed: u64,
    pub repetitions: usize,
    pub metric_stride: usize,
    pub output: PathBuf,
    pub init_mean: f64,
    pub init_var: f64,
    pub correlation: f64,
    pub sigma_obs: f64,
    pub ground_truth_size: usize,
}

const KEYS: &[&str] = &[
    "method",
    "target",
    "d",
    "N",
    "iterations",
    "m",
    "M",
    "epsilon",
    "delta",
    "anneal.t0",
    "anneal.t_large",
    "anneal.factor",
    "anneal.threshold",
    "reorthonormalize_every",
    "kernel",
    "kernel.beta",
    "kernel.c",
    "bandwidth",
    "adagrad",
    "seed",
    "repetitions",
    "metric_stride",
    "output",
    "init.mean",
    "init.var",
    "target.correlation",
    "target.sigma_obs",
    "ground_truth.n",
];

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidKey { key: key.to_string(), reason: reason.into() }
}

struct Raw {
    map: BTreeMap<String, String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(invalid(k, "unknown key"));
            }
            if v.is_empty() {
                return Err(invalid(k, "empty value"));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(invalid(k, "given more than once"));
            }
        }
        Ok(Self { map })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| invalid(key, format!("cannot parse `{v}`"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| invalid(key, "required field is missing"))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
        Ok(v)
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn nonneg(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be nonnegative, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be at least {min}, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let method = match raw.required::<String>("method")?.as_str() {
            "svgd" => MethodKind::Svgd,
            "gsvgd" => MethodKind::Gsvgd,
            other => return Err(invalid("method", format!("expected svgd or gsvgd, got `{other}`"))),
        };
        let target = match raw.required::<String>("target")?.as_str() {
            "gaussian" => TargetKind::Gaussian,
            "multimodal" => TargetKind::Multimodal,
            "xshaped" => TargetKind::Xshaped,
            "diffusion" => TargetKind::Diffusion,
            other => {
                return Err(invalid(
                    "target",
                    format!("expected gaussian, multimodal, xshaped or diffusion, got `{other}`"),
                ))
            }
        };
        let d = match target {
            TargetKind::Diffusion => {
                let d = raw.get::<usize>("d")?.unwrap_or(ConditionedDiffusion::N_STEPS);
                if d != ConditionedDiffusion::N_STEPS {
                    return Err(invalid("d", format!("the diffusion target has d = {}", ConditionedDiffusion::N_STEPS)));
                }
                d
            }
            TargetKind::Gaussian => at_least("d", raw.required("d")?, 1)?,
            _ => at_least("d", raw.required("d")?, 2)?,
        };
        let n_particles = at_least("N", raw.required("N")?, 2)?;
        let iterations: usize = raw.required("iterations")?;

        let m = raw.get::<usize>("m")?;
        if let Some(m) = m {
            at_least("m", m, 1)?;
            if m > d {
                return Err(invalid("m", format!("must not exceed d = {d}, got {m}")));
            }
        }
        let mut projectors = raw.get::<usize>("M")?;
        if method == MethodKind::Gsvgd {
            let m = m.ok_or_else(|| invalid("m", "required for method = gsvgd"))?;
            let count = projectors.unwrap_or_else(|| default_projector_count(d, m));
            at_least("M", count, 1)?;
            if count * m > d {
                return Err(invalid("M", format!("M·m = {} exceeds d = {d}", count * m)));
            }
            projectors = Some(count);
        }

        let epsilon = positive("epsilon", raw.f64_or("epsilon", 0.1)?)?;
        let delta = nonneg("delta", raw.f64_or("delta", 0.05)?)?;
        let t0 = nonneg("anneal.t0", raw.f64_or("anneal.t0", 1e-4)?)?;
        let t_large = raw.f64_or("anneal.t_large", 1e6)?;
        if t_large < t0 {
            return Err(invalid("anneal.t_large", format!("must be ≥ anneal.t0 = {t0}")));
        }
        let factor = raw.f64_or("anneal.factor", 10.0)?;
        if factor < 1.0 {
            return Err(invalid("anneal.factor", "must be ≥ 1"));
        }
        let threshold = nonneg(
            "anneal.threshold",
            raw.f64_or("anneal.threshold", 1e-4 * projectors.unwrap_or(1) as f64)?,
        )?;
        let reorthonormalize_every = at_least("reorthonormalize_every", raw.get("reorthonormalize_every")?.unwrap_or(1000), 1)?;

        let kernel = match raw.get::<String>("kernel")?.as_deref().unwrap_or("gaussian") {
            "gaussian" => {
                for k in ["kernel.beta", "kernel.c"] {
                    if raw.map.contains_key(k) {
                        return Err(invalid(k, "only valid with kernel = imq"));
                    }
                }
                KernelFamily::Gaussian
            }
            "imq" => {
                let beta = raw.f64_or("kernel.beta", -0.5)?;
                if !(beta > -1.0 && beta < 0.0) {
                    return Err(invalid("kernel.beta", "must lie in (−1, 0)"));
                }
                let c = positive("kernel.c", raw.f64_or("kernel.c", 1.0)?)?;
                KernelFamily::Imq { beta, c }
            }
            other => return Err(invalid("kernel", format!("expected gaussian or imq, got `{other}`"))),
        };
        let bandwidth = match raw.get::<String>("bandwidth")?.as_deref() {
            None | Some("median") => BandwidthRule::Median,
            Some(v) => {
                let s: f64 = v.parse().map_err(|_| invalid("bandwidth", format!("expected median or a number, got `{v}`")))?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(invalid("bandwidth", "must be positive"));
                }
                BandwidthRule::Fixed(s)
            }
        };
        let adagrad = raw.get::<bool>("adagrad")?.unwrap_or(false);
        let seed = raw.get::<u64>("seed")?.unwrap_or(0);
        let repetitions = at_least("repetitions", raw.get("repetitions")?.unwrap_or(1), 1)?;
        let metric_stride = at_least("metric_stride", raw.get("metric_stride")?.unwrap_or(100), 1)?;
        let output = PathBuf::from(raw.get::<String>("output")?.unwrap_or_else(|| "results".into()));
        let (mean0, var0) = match target {
            TargetKind::Gaussian => (2.0, 2.0),
            TargetKind::Diffusion => (0.0, ConditionedDiffusion::DT),
            _ => (0.0, 1.0),
        };
        let init_mean = raw.f64_or("init.mean", mean0)?;
        let init_var = positive("init.var", raw.f64_or("init.var", var0)?)?;
        let correlation = raw.f64_or("target.correlation", crate::model::XSHAPED_CORRELATION)?;
        if !(correlation.abs() < 1.0) {
            return Err(invalid("target.correlation", "must lie in (−1, 1)"));
        }
        let sigma_obs = positive("target.sigma_obs", raw.f64_or("target.sigma_obs", ConditionedDiffusion::SIGMA_OBS)?)?;
        let ground_truth_size = at_least("ground_truth.n", raw.get("ground_truth.n")?.unwrap_or(DEFAULT_GROUND_TRUTH_SIZE), 1)?;

        Ok(Self {
            method,
            target,
            d,
            n_particles,
            iterations,
            m,
            projectors,
            epsilon,
            delta,
            anneal: AnnealConfig { t0, t_large, factor, threshold },
            reorthonormalize_every,
            kernel,
            bandwidth,
            adagrad,
            seed,
            repetitions,
            metric_stride,
            output,
            init_mean,
            init_var,
            correlation,
            sigma_obs,
            ground_truth_size,
        })
    }

    /// Canonical text with every field spelled out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("method", self.method.name().into());
        kv("target", self.target.name().into());
        kv("d", self.d.to_string());
        kv("N", self.n_particles.to_string());
        kv("iterations", self.iterations.to_string());
        if let Some(m) = self.m {
            kv("m", m.to_string());
        }
        if let Some(mm) = self.projectors {
            kv("M", mm.to_string());
        }
        kv("epsilon", self.epsilon.to_string());
        kv("delta", self.delta.to_string());
        kv("anneal.t0", self.anneal.t0.to_string());
        kv("anneal.t_large", self.anneal.t_large.to_string());
        kv("anneal.factor", self.anneal.factor.to_string());
        kv("anneal.threshold", self.anneal.threshold.to_string());
        kv("reorthonormalize_every", self.reorthonormalize_every.to_string());
        kv("kernel", self.kernel.name().into());
        if let KernelFamily::Imq { beta, c } = self.kernel {
            kv("kernel.beta", beta.to_string());
            kv("kernel.c", c.to_string());
        }
        kv(
            "bandwidth",
            match self.bandwidth {
                BandwidthRule::Median => "median".into(),
                BandwidthRule::Fixed(v) => v.to_string(),
            },
        );
        kv("adagrad", self.adagrad.to_string());
        kv("seed", self.seed.to_string());
        kv("repetitions", self.repetitions.to_string());
        kv("metric_stride", self.metric_stride.to_string());
        kv("output", self.output.display().to_string());
        kv("init.mean", self.init_mean.to_string());
        kv("init.var", self.init_var.to_string());
        kv("target.correlation", self.correlation.to_string());
        kv("target.sigma_obs", self.sigma_obs.to_string());
        kv("ground_truth.n", self.ground_truth_size.to_string());
        s
    }

    /// SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn kernel_policy(&self) -> KernelPolicy {
        KernelPolicy { family: self.kernel, bandwidth: self.bandwidth }
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodKind::Svgd => Method::Svgd { epsilon: self.epsilon },
            MethodKind::Gsvgd => Method::Gsvgd(GsvgdConfig {
                epsilon: self.epsilon,
                delta: self.delta,
                m: self.m.expect("validated"),
                projectors: self.projectors.expect("validated"),
                anneal: self.anneal,
                reorthonormalize_every: self.reorthonormalize_every,
            }),
        }
    }

    pub fn run_config(&self, rep: usize) -> RunConfig {
        RunConfig {
            method: self.method(),
            n_particles: self.n_particles,
            iterations: self.iterations,
            kernel: self.kernel_policy(),
            adagrad: self.adagrad,
            metric_stride: self.metric_stride,
            seed: self.seed.wrapping_add(rep as u64),
        }
    }
}

/// Target model plus whatever ground truth it offers.
pub struct Experiment {
    pub model: Box<dyn ScoreModel>,
    pub covariance: Option<DMatrix<f64>>,
    pub energy_reference: Option<EnergyReference>,
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let model: Box<dyn ScoreModel> = match cfg.target {
            TargetKind::Gaussian => Box::new(GaussianTarget::standard(cfg.d)),
            TargetKind::Multimodal => Box::new(make_multimodal_target(cfg.d)?),
            TargetKind::Xshaped => Box::new(make_xshaped_target_with(cfg.d, cfg.correlation)?),
            TargetKind::Diffusion => {
                let obs = ConditionedDiffusion::reference_observations();
                Box::new(ConditionedDiffusion::new(obs.y, cfg.sigma_obs)?)
            }
        };
        let mut gt_rng = rng::stream(cfg.seed, GROUND_TRUTH_STREAM);
        let energy_reference = model
            .sample_ground_truth(cfg.ground_truth_size, &mut gt_rng)
            .map(EnergyReference::new)
            .transpose()?;
        let covariance = model.covariance();
        Ok(Self { model, covariance, energy_reference })
    }

    pub fn hooks(&self) -> Vec<MetricHook<'_>> {
        let mut hooks = Vec::new();
        if let Some(r) = &self.energy_reference {
            hooks.push(MetricHook::new(ENERGY_DISTANCE, move |x: &ParticleSet| r.distance(x)));
        }
        if let Some(c) = &self.covariance {
            hooks.push(MetricHook::new(COV_ERROR, move |x: &ParticleSet| covariance_error(x, c)));
        }
        hooks.push(MetricHook::new(DIM_AVG_VAR, dim_avg_marginal_variance));
        hooks
    }
}

/// Runs repetition `rep` on its own random stream.
pub fn run_repetition(cfg: &ExperimentConfig, exp: &Experiment, rep: usize) -> Result<RunRecord> {
    let mut rng: Rng = rng::stream(cfg.seed, rep as u64);
    let init = Init::Isotropic { mean: vec![cfg.init_mean; cfg.d], var: cfg.init_var };
    let hooks = exp.hooks();
    let mut record = sampler::run(exp.model.as_ref(), &cfg.run_config(rep), &init, &mut rng, &hooks)?;
    let digest = cfg.digest();
    for s in &mut record.metrics {
        s.config_digest = digest.clone();
    }
    record.config_echo = Some(cfg.to_text());
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub rep: usize,
    pub iteration: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub rep: usize,
    pub error: String,
}

/// Final-iteration summaries keyed by metric name, plus failed repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub metrics: BTreeMap<String, Interval>,
    pub divergences: Vec<Divergence>,
}

/// Mean and `mean ± 1.96·SE` across values.
pub fn interval(values: &[f64]) -> Interval {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Interval { mean, ci_low: mean - 1.96 * se, ci_high: mean + 1.96 * se }
}

/// Summary over the last recorded iteration of each (rep, metric).
pub fn summarize(rows: &[MetricRow], divergences: Vec<Divergence>) -> Summary {
    let mut last: BTreeMap<(&str, usize), (usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = last.entry((r.metric.as_str(), r.rep)).or_insert((r.iteration, r.value));
        if r.iteration >= e.0 {
            *e = (r.iteration, r.value);
        }
    }
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((metric, _), (_, v)) in last {
        per_metric.entry(metric.to_string()).or_default().push(v);
    }
    Summary { metrics: per_metric.into_iter().map(|(k, v)| (k, interval(&v))).collect(), divergences }
}

pub fn write_metrics_csv(rows: &[MetricRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Per-timestep posterior summary of the diffusion path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub rep: usize,
    pub step: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Posterior mean and 95% band of `u_t` from increment particles.
pub fn diffusion_path_summary(model: &ConditionedDiffusion, particles: &ParticleSet, rep: usize) -> Result<Vec<PathRow>> {
    let paths: Vec<Vec<f64>> = particles.rows().map(|w| model.forward(w)).collect::<Result<_>>()?;
    let n = paths.len();
    let mut rows = Vec::with_capacity(model.n_steps);
    let mut col = vec![0.0; n];
    for t in 0..model.n_steps {
        for (c, p) in col.iter_mut().zip(&paths) {
            *c = p[t];
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        col.sort_by(f64::total_cmp);
        rows.push(PathRow { rep, step: t + 1, mean, q025: quantile(&col, 0.025), q975: quantile(&col, 0.975) });
    }
    Ok(rows)
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<Result<RunRecord>>,
    pub rows: Vec<MetricRow>,
    pub summary: Summary,
    pub output: PathBuf,
}

impl ExperimentOutcome {
    pub fn all_diverged(&self) -> bool {
        self.records.iter().all(|r| r.is_err())
    }
}

/// Runs every repetition, then writes `metrics.csv`, `summary.json`,
/// `config.txt` and, for the diffusion target, `paths.csv` into the output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let exp = Experiment::new(cfg)?;
    let records: Vec<Result<RunRecord>> =
        (0..cfg.repetitions).into_par_iter().map(|rep| run_repetition(cfg, &exp, rep)).collect();

    let mut rows = Vec::new();
    let mut divergences = Vec::new();
    let mut paths = Vec::new();
    for (rep, rec) in records.iter().enumerate() {
        match rec {
            Ok(rec) => {
                for s in &rec.metrics {
                    rows.extend(s.points.iter().map(|&(iteration, value)| MetricRow {
                        rep,
                        iteration,
                        metric: s.name.clone(),
                        value,
                    }));
                }
                if cfg.target == TargetKind::Diffusion {
                    let model = ConditionedDiffusion::new(ConditionedDiffusion::reference_observations().y, cfg.sigma_obs)?;
                    paths.extend(diffusion_path_summary(&model, &rec.particles, rep)?);
                }
            }
            Err(e) => divergences.push(Divergence { rep, error: e.to_string() }),
        }
    }
    let summary = summarize(&rows, divergences);

    let out = &cfg.output;
    fs::create_dir_all(out)?;
    fs::write(out.join("metrics.csv"), write_metrics_csv(&rows)?)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    if !paths.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &paths {
            w.serialize(p).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        fs::write(out.join("paths.csv"), bytes)?;
    }
    Ok(ExperimentOutcome { records, rows, summary, output: out.clone() })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::parse(&text)
}
