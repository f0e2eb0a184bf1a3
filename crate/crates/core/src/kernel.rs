//! Radial kernels written as `k(u, v) = Φ(‖u − v‖²)`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::particles::sq_dist;

/// Smallest bandwidth handed out by the median heuristic.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `exp(−s / (2σ²))`
    Gaussian,
    /// `(c + s/σ²)^β` with `β ∈ (−1, 0)`, `c > 0`.
    Imq { beta: f64, c: f64 },
}

impl KernelFamily {
    pub fn imq_default() -> Self {
        KernelFamily::Imq { beta: -0.5, c: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Imq { .. } => "imq",
        }
    }
}

/// Kernel family together with a fixed bandwidth `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernelSpec {
    family: KernelFamily,
    sigma2: f64,
}

/// `Φ` and its first three derivatives at one squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDerivs {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl RadialKernelSpec {
    pub fn new(family: KernelFamily, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {sigma2}")));
        }
        if let KernelFamily::Imq { beta, c } = family {
            if !(c > 0.0) || !(beta > -1.0 && beta < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "imq kernel needs c > 0 and β ∈ (−1, 0), got c = {c}, β = {beta}"
                )));
            }
        }
        Ok(Self { family, sigma2 })
    }

    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma2)
    }

    pub fn imq(sigma2: f64) -> Result<Self> {
        Self::new(KernelFamily::imq_default(), sigma2)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.sigma2
    }

    /// `Φ(s)` for a squared distance `s`.
    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-s / (2.0 * self.sigma2)).exp(),
            KernelFamily::Imq { beta, c } => (c + s / self.sigma2).powf(beta),
        }
    }

    /// `Φ′(s)`; fails for negative `s`.
    pub fn phi_prime(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::InvalidArgument(format!("squared distance must be ≥ 0, got {s}")));
        }
        Ok(self.derivs(s).d1)
    }

    #[inline]
    pub fn derivs(&self, s: f64) -> PhiDerivs {
        let h = self.sigma2;
        match self.family {
            KernelFamily::Gaussian => {
                let phi = (-s / (2.0 * h)).exp();
                let a = -0.5 / h;
                PhiDerivs { phi, d1: a * phi, d2: a * a * phi, d3: a * a * a * phi }
            }
            KernelFamily::Imq { beta, c } => {
                let base = c + s / h;
                let p3 = base.powf(beta - 3.0);
                let p2 = p3 * base;
                let p1 = p2 * base;
                let phi = p1 * base;
                PhiDerivs {
                    phi,
                    d1: beta / h * p1,
                    d2: beta * (beta - 1.0) / (h * h) * p2,
                    d3: beta * (beta - 1.0) * (beta - 2.0) / (h * h * h) * p3,
                }
            }
        }
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        same_len(u, v)?;
        Ok(self.phi(sq_dist(u, v)))
    }

    /// Gradient of `k(u, v)` with respect to `v`: `−2Φ′(‖u−v‖²)(u − v)`.
    /// The gradient with respect to `u` is its negation.
    pub fn grad2(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        same_len(u, v)?;
        let d1 = self.derivs(sq_dist(u, v)).d1;
        Ok(u.iter().zip(v).map(|(a, b)| -2.0 * d1 * (a - b)).collect())
    }

    /// `Σ_i ∂²k / ∂u_i ∂v_i = −4Φ″(s)s − 2mΦ′(s)`.
    pub fn trace_grad12(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        same_len(u, v)?;
        let s = sq_dist(u, v);
        let dv = self.derivs(s);
        Ok(-4.0 * dv.d2 * s - 2.0 * u.len() as f64 * dv.d1)
    }
}

fn same_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(dim_err(format!("kernel arguments have lengths {} and {}", u.len(), v.len())));
    }
    Ok(())
}

/// Result of the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub sigma2: f64,
    /// Set when the floor was applied (collapsed particles).
    pub degenerate: bool,
}

/// `σ² = med² / (2 log n_for_log)` with `med` the lower median of all
/// pairwise Euclidean distances between `points`.
pub fn median_heuristic(points: &[Vec<f64>], n_for_log: usize) -> Result<Bandwidth> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("median heuristic needs at least two points".into()));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(dim_err("points have different lengths"));
    }
    let mut sq = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            sq.push(sq_dist(&points[i], &points[j]));
        }
    }
    bandwidth_from_sq_dists(&mut sq, n_for_log)
}

/// Median heuristic over a buffer of pairwise squared distances. The buffer
/// is reordered in place.
pub fn bandwidth_from_sq_dists(sq: &mut [f64], n_for_log: usize) -> Result<Bandwidth> {
    if sq.is_empty() {
        return Err(Error::InvalidArgument("no pairwise distances".into()));
    }
    if n_for_log < 2 {
        return Err(Error::InvalidArgument("n in the median heuristic must be ≥ 2".into()));
    }
    let mid = (sq.len() - 1) / 2;
    let (_, med2, _) = sq.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    // sqrt and squaring cancel; the median of squared distances is the
    // square of the median distance.
    let sigma2 = *med2 / (2.0 * (n_for_log as f64).ln());
    if !(sigma2 >= BANDWIDTH_FLOOR) {
        return Ok(Bandwidth { sigma2: BANDWIDTH_FLOOR, degenerate: true });
    }
    Ok(Bandwidth { sigma2, degenerate: false })
}

/// How the bandwidth is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPolicy {
    pub family: KernelFamily,
    pub bandwidth: BandwidthRule,
}

impl Default for KernelPolicy {
    fn default() -> Self {
        Self { family: KernelFamily::Gaussian, bandwidth: BandwidthRule::Median }
    }
}

impl KernelPolicy {
    /// Kernel for a set of `n` points given their pairwise squared distances.
    pub fn resolve(&self, sq: &mut [f64], n: usize) -> Result<RadialKernelSpec> {
        let sigma2 = match self.bandwidth {
            BandwidthRule::Fixed(s) => s,
            // a single particle never interacts with another one
            BandwidthRule::Median if n < 2 => 1.0,
            BandwidthRule::Median => bandwidth_from_sq_dists(sq, n)?.sigma2,
        };
        RadialKernelSpec::new(self.family, sigma2)
    }
}
