//! Receiver processing: sample covariance, SVD-based nullspace estimation,
//! zero-forcing equalisation, 16-QAM SINR estimation and closed-form
//! spectral-efficiency bounds.

use num_complex::Complex64;

use crate::numerics::{frobenius_sq, svd, ComplexMatrix};
use crate::{Error, Result};

/// Estimated SINRs are clamped to this value when the error vanishes.
pub const SINR_CAP_DB: f64 = 80.0;

/// Zero forcing is refused above this condition number.
pub const MAX_CONDITION: f64 = 1e8;

/// `R = Y Y^H / n` over the columns of `y`.
pub fn sample_covariance(y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = y.ncols();
    if n == 0 {
        return Err(Error::Shape("covariance of zero samples".into()));
    }
    Ok(y * y.adjoint() / Complex64::new(n as f64, 0.0))
}

#[derive(Debug, Clone)]
pub struct NullspaceEstimate {
    /// `(N - N_J) x N` projector rows spanning the estimated nullspace.
    pub g: ComplexMatrix,
    /// All singular values of the covariance, descending.
    pub singular_values: Vec<f64>,
}

impl NullspaceEstimate {
    /// Mean of the `n_jammers` largest singular values.
    pub fn jamming_strength(&self, n_jammers: usize) -> f64 {
        let top = &self.singular_values[..n_jammers.min(self.singular_values.len())];
        top.iter().sum::<f64>() / top.len().max(1) as f64
    }
}

/// Keeps the `N - N_J` weakest left singular vectors of `r`.
pub fn estimate_nullspace(r: &ComplexMatrix, n_jammers: usize) -> Result<NullspaceEstimate> {
    if !r.is_square() {
        return Err(Error::Shape("covariance must be square".into()));
    }
    let n = r.nrows();
    if n_jammers >= n {
        return Err(Error::Shape(format!(
            "{n} antennas cannot null {n_jammers} jammers"
        )));
    }
    let dec = svd(r)?;
    let weak = dec.u.columns(n_jammers, n - n_jammers);
    Ok(NullspaceEstimate {
        g: weak.adjoint(),
        singular_values: dec.s,
    })
}

/// `A = (H^H H)^-1 H^H`, computed through the SVD of `h`.
pub fn zf_equalizer(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (rows, cols) = h.shape();
    if rows < cols {
        return Err(Error::Shape(format!(
            "zero forcing needs at least as many rows as streams, got {rows}x{cols}"
        )));
    }
    let dec = svd(h)?;
    let s_min = *dec.s.last().expect("non-empty");
    let cond = if s_min > 0.0 {
        dec.s[0] / s_min
    } else {
        f64::INFINITY
    };
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let mut v = dec.v.clone();
    for (j, s) in dec.s.iter().enumerate() {
        v.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(v * dec.u.adjoint())
}

/// Unit-energy square 16-QAM.
pub mod qam16 {
    use num_complex::Complex64;

    const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

    fn scale() -> f64 {
        1.0 / 10f64.sqrt()
    }

    /// Symbol for an index in `0..16`.
    pub fn point(index: usize) -> Complex64 {
        let s = scale();
        Complex64::new(LEVELS[index % 4] * s, LEVELS[(index / 4) % 4] * s)
    }

    fn nearest_level(x: f64) -> f64 {
        let s = scale();
        let level = ((x / s + 3.0) / 2.0).round().clamp(0.0, 3.0);
        (2.0 * level - 3.0) * s
    }

    /// Nearest constellation point.
    pub fn decide(z: Complex64) -> Complex64 {
        Complex64::new(nearest_level(z.re), nearest_level(z.im))
    }
}

/// `10 log10( sum |ideal|^2 / sum |actual - ideal|^2 )`, capped.
pub fn estimate_sinr_db(ideal: &[Complex64], actual: &[Complex64]) -> Result<f64> {
    if ideal.is_empty() || ideal.len() != actual.len() {
        return Err(Error::Shape(format!(
            "SINR estimate needs equal non-empty inputs, got {} and {}",
            ideal.len(),
            actual.len()
        )));
    }
    let mut sig = 0.0;
    let mut err = 0.0;
    for (i, a) in ideal.iter().zip(actual) {
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        sig += i.norm_sqr();
        err += (a - i).norm_sqr();
    }
    if err == 0.0 || sig / err > 10f64.powf(SINR_CAP_DB / 10.0) {
        return Ok(SINR_CAP_DB);
    }
    Ok(10.0 * (sig / err).log10())
}

/// Decision-directed estimate: each received point is referenced to its
/// nearest 16-QAM symbol.
pub fn blind_sinr_db(actual: &[Complex64]) -> Result<f64> {
    let ideal: Vec<Complex64> = actual.iter().map(|&z| qam16::decide(z)).collect();
    estimate_sinr_db(&ideal, actual)
}

/// Inputs to the closed-form spectral-efficiency expressions for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Transmit power, W.
    pub p_t: f64,
    /// Receiver noise variance, W.
    pub noise_var: f64,
    /// Linear path loss from the base station.
    pub eta: f64,
    /// Per-jammer transmit variance, W.
    pub jammer_vars: Vec<f64>,
    /// Per-jammer linear path loss to the user.
    pub jammer_etas: Vec<f64>,
    pub n_rx: usize,
    pub n_streams: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Lower bound with residual jamming at full strength.
    pub lower: f64,
    /// Upper bound with perfect nullification.
    pub upper: f64,
    /// Without beamforming the jamming is not removed.
    pub without_beamforming: f64,
}

pub fn spectral_bounds(b: &LinkBudget) -> Result<SpectralBounds> {
    let nj = b.jammer_vars.len();
    if b.jammer_etas.len() != nj {
        return Err(Error::Shape("one path loss per jammer is required".into()));
    }
    if b.n_rx < nj + b.n_streams {
        return Err(Error::Shape(format!(
            "{} antennas cannot null {} jammers and separate {} streams",
            b.n_rx, nj, b.n_streams
        )));
    }
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(b.p_t)
        || !positive(b.noise_var)
        || !positive(b.eta)
        || !b.jammer_etas.iter().all(|&e| positive(e))
    {
        return Err(Error::Input(
            "powers and path losses must be positive".into(),
        ));
    }
    let jam: f64 = b
        .jammer_vars
        .iter()
        .zip(&b.jammer_etas)
        .map(|(v, e)| v / e)
        .sum();
    let nulled_dof = (b.n_rx - nj - b.n_streams) as f64;
    let full_dof = (b.n_rx - b.n_streams) as f64;
    Ok(SpectralBounds {
        lower: (1.0 + b.p_t * nulled_dof / (b.eta * (b.noise_var + jam))).log2(),
        upper: (1.0 + b.p_t * nulled_dof / (b.eta * b.noise_var)).log2(),
        without_beamforming: (1.0 + b.p_t * full_dof / (b.eta * (b.noise_var + jam))).log2(),
    })
}

/// Output of beamforming and zero forcing over one block of symbols.
#[derive(Debug, Clone)]
pub struct EqualizedBlock {
    /// `M x n` equalised symbols, normalised by the transmit amplitude.
    pub symbols: ComplexMatrix,
    /// Decision-directed SINR per stream, dB.
    pub sinr_est_db: Vec<f64>,
    /// SINR per stream measured against the transmitted symbols, dB.
    pub sinr_true_db: Vec<f64>,
    /// Mean `||F z||^2` of the jamming left after beamforming.
    pub residual_jamming: f64,
}

/// Applies `F` then zero forcing on the effective channel `F H P`.
///
/// `received` is the `N x n` signal, `jamming` its jamming component (for
/// bookkeeping only), `effective` the `(N - N_J) x M` channel `F H P` and
/// `transmitted` the `M x n` data symbols sent with amplitude `sqrt(p_t)`.
pub fn equalize_block(
    received: &ComplexMatrix,
    jamming: &ComplexMatrix,
    f: &ComplexMatrix,
    effective: &ComplexMatrix,
    transmitted: &ComplexMatrix,
    p_t: f64,
) -> Result<EqualizedBlock> {
    let n = received.ncols();
    if n == 0 || jamming.shape() != received.shape() || transmitted.ncols() != n {
        return Err(Error::Shape("inconsistent block dimensions".into()));
    }
    if effective.ncols() != transmitted.nrows() || f.nrows() != effective.nrows() {
        return Err(Error::Shape(
            "equivalent channel does not match the streams".into(),
        ));
    }
    let a = zf_equalizer(effective)?;
    let amp = p_t.sqrt();
    let symbols = (&a * (f * received)) / Complex64::new(amp, 0.0);
    let mut sinr_est_db = Vec::with_capacity(symbols.nrows());
    let mut sinr_true_db = Vec::with_capacity(symbols.nrows());
    for m in 0..symbols.nrows() {
        let actual: Vec<Complex64> = symbols.row(m).iter().copied().collect();
        let sent: Vec<Complex64> = transmitted.row(m).iter().copied().collect();
        sinr_est_db.push(blind_sinr_db(&actual)?);
        sinr_true_db.push(estimate_sinr_db(&sent, &actual)?);
    }
    let residual_jamming = frobenius_sq(&(f * jamming)) / n as f64;
    Ok(EqualizedBlock {
        symbols,
        sinr_est_db,
        sinr_true_db,
        residual_jamming,
    })
}
