use crate::error::{dim_err, Error, Result};

/// `N` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl ParticleSet {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![0.0; n * d] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("particle set needs at least one row".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(dim_err(format!("row {i} has length {} (expected {d})", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, d, data })
    }

    pub fn from_vec(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(dim_err(format!("buffer of length {} cannot hold {n}x{d}", data.len())));
        }
        Ok(Self { n, d, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Multiset of rows with `rows[i]` taken from `self.row(idx[i])`.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { n: idx.len(), d: self.d, data }
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut out = Self::zeros(self.n, self.d);
        for i in 0..self.n {
            f(self.row(i), out.row_mut(i));
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
