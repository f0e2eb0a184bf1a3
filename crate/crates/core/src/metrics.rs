//! Sample-quality metrics: energy distance, covariance error and the
//! dimension-averaged marginal variance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::particles::{sq_dist, ParticleSet};

pub const ENERGY_DISTANCE: &str = "energy_distance";
pub const COV_ERROR: &str = "cov_error_frobenius";
pub const DIM_AVG_VAR: &str = "dim_avg_var";

/// Values of one metric recorded along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub points: Vec<(usize, f64)>,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>, seed: u64, config_digest: impl Into<String>) -> Self {
        Self { name: name.into(), points: Vec::new(), seed, config_digest: config_digest.into() }
    }

    /// Appends a point; iterations must be strictly increasing.
    pub fn push(&mut self, iteration: usize, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if iteration <= last {
                return Err(Error::InvalidArgument(format!(
                    "metric `{}`: iteration {iteration} does not follow {last}",
                    self.name
                )));
            }
        }
        self.points.push((iteration, value));
        Ok(())
    }

    pub fn last(&self) -> Option<(usize, f64)> {
        self.points.last().copied()
    }
}

/// Mean pairwise Euclidean distance between rows of `x` and rows of `y`.
fn mean_cross_distance(x: &ParticleSet, y: &ParticleSet) -> f64 {
    let mut total = 0.0;
    for xi in x.rows() {
        let mut row = 0.0;
        for yj in y.rows() {
            row += sq_dist(xi, yj).sqrt();
        }
        total += row;
    }
    total / (x.len() * y.len()) as f64
}

/// Mean over all ordered pairs (diagonal included) of distances within `x`.
fn mean_self_distance(x: &ParticleSet) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += sq_dist(x.row(i), x.row(j)).sqrt();
        }
    }
    2.0 * total / (n * n) as f64
}

fn check_pair(x: &ParticleSet, y: &ParticleSet) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("energy distance needs nonempty samples".into()));
    }
    if x.dim() != y.dim() {
        return Err(dim_err(format!("samples in R^{} and R^{}", x.dim(), y.dim())));
    }
    Ok(())
}

fn canonical_order(x: &ParticleSet, y: &ParticleSet) -> bool {
    let key = x.len().cmp(&y.len()).then_with(|| {
        x.as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    key.is_le()
}

/// V-form energy distance
/// `2 E‖X − Y‖ − E‖X − X′‖ − E‖Y − Y′‖` over all pairs.
pub fn energy_distance(x: &ParticleSet, y: &ParticleSet) -> Result<f64> {
    check_pair(x, y)?;
    // Fixed argument order for the cross term makes the result exactly symmetric.
    let cross = if canonical_order(x, y) { mean_cross_distance(x, y) } else { mean_cross_distance(y, x) };
    let value = 2.0 * cross - (mean_self_distance(x) + mean_self_distance(y));
    Ok(value.max(0.0))
}

/// Reference sample with its within-sample term precomputed, for repeated
/// energy distances against the same ground truth.
#[derive(Debug, Clone)]
pub struct EnergyReference {
    samples: ParticleSet,
    self_term: f64,
}

impl EnergyReference {
    pub fn new(samples: ParticleSet) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty reference sample".into()));
        }
        let self_term = mean_self_distance(&samples);
        Ok(Self { samples, self_term })
    }

    pub fn samples(&self) -> &ParticleSet {
        &self.samples
    }

    pub fn distance(&self, x: &ParticleSet) -> Result<f64> {
        check_pair(x, &self.samples)?;
        let value = 2.0 * mean_cross_distance(x, &self.samples) - mean_self_distance(x) - self.self_term;
        Ok(value.max(0.0))
    }
}

/// Unbiased sample covariance (`1/(n − 1)`).
pub fn sample_covariance(x: &ParticleSet) -> Result<DMatrix<f64>> {
    let (n, d) = (x.len(), x.dim());
    if n < 2 {
        return Err(Error::InvalidArgument("covariance needs at least two samples".into()));
    }
    let mean = x.column_means();
    let mut cov = DMatrix::zeros(d, d);
    let mut c = vec![0.0; d];
    for row in x.rows() {
        for k in 0..d {
            c[k] = row[k] - mean[k];
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += c[a] * c[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// `‖Σ̂ − Σ_ref‖_F` with `Σ̂` the unbiased sample covariance.
pub fn covariance_error(x: &ParticleSet, sigma_ref: &DMatrix<f64>) -> Result<f64> {
    if sigma_ref.shape() != (x.dim(), x.dim()) {
        return Err(dim_err(format!(
            "reference covariance is {:?} but samples live in R^{}",
            sigma_ref.shape(),
            x.dim()
        )));
    }
    Ok((sample_covariance(x)? - sigma_ref).norm())
}

/// Mean over coordinates of the unbiased marginal variances.
pub fn dim_avg_marginal_variance(x: &ParticleSet) -> Result<f64> {
    let (n, d) = (x.len(), x.dim());
    if n < 2 {
        return Err(Error::InvalidArgument("variance needs at least two samples".into()));
    }
    let mean = x.column_means();
    let mut total = 0.0;
    for row in x.rows() {
        for k in 0..d {
            let c = row[k] - mean[k];
            total += c * c;
        }
    }
    Ok(total / ((n - 1) as f64 * d as f64))
}
