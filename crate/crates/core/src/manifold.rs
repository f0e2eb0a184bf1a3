//! Grassmann-manifold primitives.
//!
//! A subspace `[A] ∈ Gr(d, m)` is represented by any `d × m` matrix `A` with
//! orthonormal columns. Everything here that returns a subspace is
//! independent of the representative up to right multiplication by an
//! orthogonal `m × m` matrix.

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::rng::{standard_normal, Rng};

/// Tolerance on `‖AᵀA − I‖_F` accepted at construction.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Below this smallest singular value the polar factor is rejected.
pub const RANK_TOL: f64 = 1e-12;

/// Column-orthonormal `d × m` matrix representing an `m`-dimensional subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
}

impl Projector {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (d, m) = matrix.shape();
        if m == 0 || m > d {
            return Err(Error::InvalidArgument(format!("projector rank {m} must be in 1..={d}")));
        }
        let err = orthonormality_error(&matrix);
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal (‖AᵀA − I‖_F = {err:e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Canonical projector `[e_{offset+1}, …, e_{offset+m}]`.
    pub fn one_hot(d: usize, m: usize, offset: usize) -> Result<Self> {
        if m == 0 || offset + m > d {
            return Err(Error::InvalidArgument(format!(
                "one-hot block {offset}..{} does not fit in dimension {d}",
                offset + m
            )));
        }
        let mut a = DMatrix::zeros(d, m);
        for k in 0..m {
            a[(offset + k, k)] = 1.0;
        }
        Ok(Self { matrix: a })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d, d) }
    }

    /// Uniformly distributed projector (Q factor of a Gaussian matrix).
    pub fn random(d: usize, m: usize, rng: &mut Rng) -> Result<Self> {
        if m == 0 || m > d {
            return Err(Error::InvalidArgument(format!("projector rank {m} must be in 1..={d}")));
        }
        let g = DMatrix::from_fn(d, m, |_, _| standard_normal(rng));
        let q = orthonormal_factor(&g)?;
        Ok(Self { matrix: q })
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// `AᵀA − I` in Frobenius norm.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.matrix)
    }

    /// Another representative `A·C` of the same subspace.
    pub fn rotate(&self, c: &DMatrix<f64>) -> Result<Self> {
        if c.shape() != (self.rank(), self.rank()) {
            return Err(dim_err("rotation must be m × m"));
        }
        Projector::new(&self.matrix * c)
    }
}

pub(crate) fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let m = a.ncols();
    (a.transpose() * a - DMatrix::<f64>::identity(m, m)).norm()
}

/// Element of the tangent space at a projector: `AᵀΔ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub delta: DMatrix<f64>,
}

impl TangentVector {
    pub fn scale(&self, s: f64) -> DMatrix<f64> {
        &self.delta * s
    }
}

fn check_shape(a: &Projector, g: &DMatrix<f64>) -> Result<()> {
    if g.shape() != a.matrix.shape() {
        return Err(dim_err(format!(
            "matrix of shape {:?} does not match projector shape {:?}",
            g.shape(),
            a.matrix.shape()
        )));
    }
    Ok(())
}

/// `Π_A G = G − A(AᵀG)`.
pub fn tangent_project(a: &Projector, g: &DMatrix<f64>) -> Result<TangentVector> {
    check_shape(a, g)?;
    let at_g = a.matrix.transpose() * g;
    Ok(TangentVector { delta: g - &a.matrix * at_g })
}

/// Polar retraction `[UVᵀ]` with `A + Δ = USVᵀ` a thin SVD.
///
/// Columns of `U` (and the matching rows of `Vᵀ`) are signed so that the
/// largest-magnitude entry of each `U` column is positive.
pub fn polar_retract(a: &Projector, delta: &DMatrix<f64>) -> Result<Projector> {
    check_shape(a, delta)?;
    if delta.iter().all(|v| *v == 0.0) {
        return Ok(a.clone());
    }
    if !delta.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite retraction step".into()));
    }
    let x = &a.matrix + delta;
    let q = orthonormal_factor(&x)?;
    Ok(Projector { matrix: q })
}

/// Polar factor `UVᵀ` of a full-column-rank matrix.
fn orthonormal_factor(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = x.clone().svd(true, true);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin >= RANK_TOL) {
        return Err(Error::DegenerateStep(smin));
    }
    let mut u = svd.u.expect("requested U");
    let mut vt = svd.v_t.expect("requested Vᵀ");
    for k in 0..u.ncols() {
        let col = u.column(k);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            u.column_mut(k).neg_mut();
            vt.row_mut(k).neg_mut();
        }
    }
    Ok(u * vt)
}

/// `Π_A ξ` with `ξ` a `d × m` matrix of i.i.d. standard normals.
pub fn sample_tangent_noise(a: &Projector, rng: &mut Rng) -> TangentVector {
    let (d, m) = a.matrix.shape();
    // column-major fill order
    let xi = DMatrix::from_fn(d, m, |_, _| standard_normal(rng));
    tangent_project(a, &xi).expect("shapes agree by construction")
}

/// `count` projectors of rank `m` built from consecutive canonical basis blocks.
pub fn init_projectors(d: usize, m: usize, count: usize) -> Result<Vec<Projector>> {
    if m == 0 || count == 0 {
        return Err(Error::Config("projection dimension and projector count must be positive".into()));
    }
    if m * count > d {
        return Err(Error::Config(format!(
            "{count} projectors of rank {m} need {} dimensions but d = {d}",
            m * count
        )));
    }
    (0..count).map(|l| Projector::one_hot(d, m, l * m)).collect()
}

/// Default projector count `min(20, ⌊d/m⌋)`.
pub fn default_projector_count(d: usize, m: usize) -> usize {
    (d / m.max(1)).min(20)
}

/// Householder QR of the column-wise concatenation, with `R` diagonal made
/// nonnegative, re-split into projectors of the original ranks.
pub fn reorthonormalize(projectors: &[Projector]) -> Result<Vec<Projector>> {
    let Some(first) = projectors.first() else {
        return Ok(Vec::new());
    };
    let d = first.ambient_dim();
    if projectors.iter().any(|p| p.ambient_dim() != d) {
        return Err(dim_err("projectors live in different ambient dimensions"));
    }
    let total: usize = projectors.iter().map(Projector::rank).sum();
    if total > d {
        return Err(Error::DegenerateBatch);
    }
    let mut concat = DMatrix::zeros(d, total);
    let mut off = 0;
    for p in projectors {
        concat.columns_mut(off, p.rank()).copy_from(p.matrix());
        off += p.rank();
    }
    let qr = concat.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..total {
        let rkk = r[(k, k)];
        if rkk.abs() < RANK_TOL {
            return Err(Error::DegenerateBatch);
        }
        if rkk < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    let mut out = Vec::with_capacity(projectors.len());
    let mut off = 0;
    for p in projectors {
        out.push(Projector { matrix: q.columns(off, p.rank()).into_owned() });
        off += p.rank();
    }
    Ok(out)
}

/// `‖AAᵀ − BBᵀ‖_F`; zero iff the subspaces coincide.
pub fn subspace_distance(a: &Projector, b: &Projector) -> Result<f64> {
    if a.matrix.shape() != b.matrix.shape() {
        return Err(dim_err("subspace distance needs equal (d, m)"));
    }
    let pa = &a.matrix * a.matrix.transpose();
    let pb = &b.matrix * b.matrix.transpose();
    Ok((pa - pb).norm())
}

/// Random orthogonal `m × m` matrix.
pub fn random_orthogonal(m: usize, rng: &mut Rng) -> DMatrix<f64> {
    Projector::random(m, m, rng).expect("square Gaussian matrix is full rank a.s.").into_matrix()
}
