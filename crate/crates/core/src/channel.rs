//! Geometric multipath channels: ULA steering vectors, COST 231 Hata path
//! loss and sum-of-sinusoids Doppler fading.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::numerics::{ComplexMatrix, ComplexVector, Rng};
use crate::{Error, Result};

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ula {
    pub n_antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Ula {
    pub fn half_wavelength(n_antennas: usize) -> Self {
        Ula {
            n_antennas,
            spacing: 0.5,
        }
    }
}

/// `a(phi)[i] = exp(-j 2 pi d i sin(phi))`.
pub fn steering_vector(angle: f64, array: &Ula) -> ComplexVector {
    let k = -2.0 * PI * array.spacing * angle.sin();
    ComplexVector::from_fn(array.n_antennas, |i, _| {
        Complex64::from_polar(1.0, k * i as f64)
    })
}

/// Correction term of the COST 231 Hata model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    /// Medium city and suburban areas (C_m = 0 dB).
    #[default]
    Suburban,
    /// Metropolitan centres (C_m = 3 dB).
    Metropolitan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub carrier_mhz: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub distance_m: f64,
}

/// Path loss in dB. Emits a warning outside the 150-2000 MHz validity range.
pub fn cost231_pathloss_db(link: &Link, terrain: Terrain) -> Result<f64> {
    let Link {
        carrier_mhz: f,
        tx_height_m: hb,
        rx_height_m: hr,
        distance_m: d,
    } = *link;
    for (name, v) in [
        ("distance", d),
        ("carrier", f),
        ("tx height", hb),
        ("rx height", hr),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Input(format!(
                "path loss {name} must be positive, got {v}"
            )));
        }
    }
    if !(150.0..=2000.0).contains(&f) {
        log::warn!("carrier {f} MHz is outside the COST 231 Hata range (150-2000 MHz)");
    }
    let lf = f.log10();
    let a_hr = (1.1 * lf - 0.7) * hr - (1.56 * lf - 0.8);
    let cm = match terrain {
        Terrain::Suburban => 0.0,
        Terrain::Metropolitan => 3.0,
    };
    Ok(46.3 + 33.9 * lf - 13.82 * hb.log10() - a_hr
        + (44.9 - 6.55 * hb.log10()) * (d / 1000.0).log10()
        + cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub n_paths: usize,
    pub n_sinusoids: usize,
    pub doppler_hz: f64,
    pub sample_rate_hz: f64,
    /// Linear path loss; every channel entry has variance `1 / eta`.
    pub eta: f64,
}

impl FadingParams {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_sinusoids == 0 {
            return Err(Error::Input(
                "fading needs at least one path and one sinusoid".into(),
            ));
        }
        if !(self.doppler_hz >= 0.0 && self.doppler_hz.is_finite()) {
            return Err(Error::Input(format!("invalid Doppler {}", self.doppler_hz)));
        }
        if !(self.sample_rate_hz > 0.0 && self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Input(
                "sample rate and path loss must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Sinusoid {
    weight: Complex64,
    omega: f64,
    phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Path {
    aoa: f64,
    aod: f64,
    terms: Vec<Sinusoid>,
}

/// Time-varying multipath gains.
///
/// Each path gain is a sum of sinusoids with Doppler shifts
/// `f_d cos(alpha_n)`, `alpha_n = (2 pi n - pi + theta) / (4 M)`, and random
/// phases, giving an approximately Rayleigh process with autocorrelation
/// `J0(2 pi f_d tau)`. The state keeps an absolute sample clock, so gains are
/// a pure function of time and evolution composes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingState {
    params: FadingParams,
    paths: Vec<Path>,
    time: u64,
}

impl FadingState {
    pub fn draw(rng: &mut Rng, params: FadingParams) -> Result<Self> {
        params.validate()?;
        let m = params.n_sinusoids;
        let path_scale = (2.0 / (m as f64 * params.n_paths as f64 * params.eta)).sqrt();
        let w_d = 2.0 * PI * params.doppler_hz / params.sample_rate_hz;
        let paths = (0..params.n_paths)
            .map(|_| {
                let aoa = rng.uniform_range(-PI, PI);
                let aod = rng.uniform_range(-PI, PI);
                let theta = rng.uniform_range(-PI, PI);
                let terms = (1..=m)
                    .map(|n| {
                        let alpha = (2.0 * PI * n as f64 - PI + theta) / (4.0 * m as f64);
                        let psi = rng.uniform_range(-PI, PI);
                        let phase = rng.uniform_range(-PI, PI);
                        Sinusoid {
                            weight: Complex64::from_polar(path_scale, psi),
                            omega: w_d * alpha.cos(),
                            phase,
                        }
                    })
                    .collect();
                Path { aoa, aod, terms }
            })
            .collect();
        Ok(FadingState {
            params,
            paths,
            time: 0,
        })
    }

    pub fn params(&self) -> &FadingParams {
        &self.params
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Path gains at the current time.
    pub fn gains(&self) -> Vec<Complex64> {
        let t = self.time as f64;
        self.paths
            .iter()
            .map(|p| {
                p.terms
                    .iter()
                    .map(|s| s.weight * (s.omega * t + s.phase).cos())
                    .sum()
            })
            .collect()
    }

    /// Advances the clock by `samples`. With zero Doppler the gains are
    /// constant and the state is left untouched.
    pub fn evolve(&mut self, samples: u64) {
        if self.params.doppler_hz == 0.0 {
            return;
        }
        self.time += samples;
    }

    /// `H = sum_p alpha_p a_rx(aoa_p) a_tx(aod_p)^T`.
    pub fn channel_matrix(&self, rx: &Ula, tx: &Ula) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(rx.n_antennas, tx.n_antennas);
        for (path, gain) in self.paths.iter().zip(self.gains()) {
            let ar = steering_vector(path.aoa, rx) * gain;
            let at = steering_vector(path.aod, tx);
            h += ar * at.transpose();
        }
        h
    }

    /// Single-antenna transmitter: `z = sum_p alpha_p a_rx(aoa_p)`.
    pub fn channel_vector(&self, rx: &Ula) -> ComplexVector {
        let mut z = ComplexVector::zeros(rx.n_antennas);
        for (path, gain) in self.paths.iter().zip(self.gains()) {
            z += steering_vector(path.aoa, rx) * gain;
        }
        z
    }
}

/// Draws a fresh fading realisation and returns its channel matrix.
pub fn sample_channel(
    rng: &mut Rng,
    params: FadingParams,
    rx: &Ula,
    tx: &Ula,
) -> Result<ComplexMatrix> {
    Ok(FadingState::draw(rng, params)?.channel_matrix(rx, tx))
}
