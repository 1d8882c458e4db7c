//! Complex linear algebra helpers and seeded random sampling.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative cutoff below which singular values are treated as zero.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Tolerance, relative to the largest eigenvalue, for accepting slightly
/// negative eigenvalues as rounding noise in a PSD factorisation.
const PSD_TOLERANCE: f64 = 1e-10;

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Seeded ChaCha8 generator. Independent streams are derived from one seed
/// with [`Rng::stream`], so adding draws to one stream never shifts another.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng(inner)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Circularly symmetric complex Gaussian with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        Complex64::new(self.normal(), self.normal()) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.random::<u64>()
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Singular value decomposition `m = u * diag(s) * v^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Singular values in descending order.
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Thin SVD with singular values sorted in descending order.
///
/// Each left singular vector is rotated so that its first entry of
/// non-negligible magnitude is real and non-negative; the matching right
/// singular vector gets the same rotation, so the product is unchanged and
/// repeated calls on the same input agree exactly.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Shape("svd of an empty matrix".into()));
    }
    let dec = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::NonFinite)?;
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v requested");
    let k = dec.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));

    let mut su = ComplexMatrix::zeros(rows, k);
    let mut sv = ComplexMatrix::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        s.push(dec.singular_values[src]);
        su.set_column(dst, &u.column(src));
        for r in 0..cols {
            sv[(r, dst)] = v_t[(src, r)].conj();
        }
        let col = su.column(dst);
        let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8 * peak) {
            let phase = lead.conj() / lead.norm();
            for r in 0..rows {
                su[(r, dst)] *= phase;
            }
            for r in 0..cols {
                sv[(r, dst)] *= phase;
            }
        }
    }
    Ok(Svd { u: su, s, v: sv })
}

/// Largest entry of `m - m^H` relative to the largest entry of `m`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Returns `L` with `L L^H = m` for a Hermitian positive semidefinite `m`.
///
/// Positive-definite inputs use a Cholesky factor. Rank-deficient inputs fall
/// back to an eigendecomposition with slightly negative eigenvalues clamped
/// to zero.
pub fn psd_factor(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_finite(m)?;
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "psd_factor needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if hermitian_defect(m) > HERMITIAN_TOLERANCE {
        return Err(Error::Shape("psd_factor input is not Hermitian".into()));
    }
    // Complex Cholesky happily takes square roots of negative pivots, so
    // only accept factors with a real positive diagonal.
    if let Some(chol) = Cholesky::new(m.clone()) {
        let l = chol.unpack();
        if l.diagonal()
            .iter()
            .all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re)
        {
            return Ok(l);
        }
    }
    let eig = m.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -PSD_TOLERANCE * largest.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd {
                eigenvalue: lambda,
                largest,
            });
        }
        factor.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    Ok(factor)
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond * s_max` are
/// treated as zero.
pub fn pinv(m: &ComplexMatrix, rcond: f64) -> Result<ComplexMatrix> {
    let dec = svd(m)?;
    let cutoff = rcond * dec.s.first().copied().unwrap_or(0.0);
    let mut v = dec.v.clone();
    for (j, &s) in dec.s.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        v.column_mut(j).scale_mut(inv);
    }
    Ok(v * dec.u.adjoint())
}

/// Draws `n` columns of `mean + L z` with `z` standard complex Gaussian.
pub fn sample_complex_gaussian(
    rng: &mut Rng,
    mean: &ComplexVector,
    cov_factor: &ComplexMatrix,
    n: usize,
) -> Result<ComplexMatrix> {
    let d = mean.len();
    if cov_factor.nrows() != d {
        return Err(Error::Shape(format!(
            "covariance factor has {} rows, mean has {}",
            cov_factor.nrows(),
            d
        )));
    }
    let k = cov_factor.ncols();
    let z = ComplexMatrix::from_fn(k, n, |_, _| rng.complex_normal());
    let mut out = cov_factor * z;
    for mut col in out.column_iter_mut() {
        col += mean;
    }
    Ok(out)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn frobenius_sq(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
